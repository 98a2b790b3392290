#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fixtures.hpp"
#include "recalib/sim.hpp"

using namespace recalib;
using Catch::Matchers::WithinAbs;

namespace {

double covariate_mean(const PooledDataset& pool, Trial t, const std::string& name) {
    const auto idx = pool.indices(t);
    const auto v = pool.covariate_values(idx, name);
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("default pool matches the configured sizes and rates", "[sim]") {
    SimConfig cfg;
    cfg.seed = 2024;
    const auto pool = generate_pool(cfg);

    CHECK(pool.count(Trial::historical) == 1502);
    CHECK(pool.count(Trial::current) == 6635);
    CHECK(pool.indices(Trial::historical, 0).size() == 500);
    CHECK(pool.indices(Trial::historical, 1).size() == 1002);
    CHECK(pool.indices(Trial::current, 0).size() == 3330);
    CHECK(pool.indices(Trial::current, 1).size() == 3305);

    // binomial concentration: 3-sigma bands around the configured rates
    const double x1_mean = covariate_mean(pool, Trial::historical, "x1");
    CHECK_THAT(x1_mean, WithinAbs(0.4, 3.0 * std::sqrt(0.4 * 0.6 / 1502.0)));
    const double bpd_current = covariate_mean(pool, Trial::current, "bpd");
    CHECK_THAT(bpd_current, WithinAbs(0.22, 3.0 * std::sqrt(0.22 * 0.78 / 6635.0)));
}

TEST_CASE("zero event probabilities produce no events", "[sim]") {
    SimConfig cfg;
    cfg.n_historical = 300;
    cfg.n_current = 300;
    cfg.event_rates_historical = {{{0.0, 0.0}, {0.0, 0.0}}};
    cfg.event_rates_current = {{{0.0, 0.0}, {0.0, 0.0}}};
    cfg.seed = 5;
    const auto pool = generate_pool(cfg);
    for (const auto& r : pool.records()) CHECK(r.outcome == 0.0);
}

TEST_CASE("large-sample event rate concentrates on the configured value", "[sim]") {
    SimConfig cfg;
    cfg.n_historical = 100000;
    cfg.n_current = 1;
    cfg.seed = 11;
    const auto pool = generate_pool(cfg);

    // control-arm, BPD-stratum empirical event rate vs its target 34/266
    const auto idx = pool.indices(Trial::historical, 0);
    double events = 0.0, n = 0.0;
    const std::size_t bpd_col = pool.covariate_index("bpd");
    for (const std::size_t i : idx) {
        if (pool.record(i).covariates[bpd_col] == 1.0) {
            n += 1.0;
            events += pool.record(i).outcome;
        }
    }
    const double target = 34.0 / 266.0;
    CHECK_THAT(events / n, WithinAbs(target, 3.0 * std::sqrt(target * (1.0 - target) / n)));
}

TEST_CASE("generation is bitwise reproducible from (config, seed)", "[sim]") {
    SimConfig cfg;
    cfg.n_historical = 400;
    cfg.n_current = 600;
    cfg.seed = 77;
    const auto a = generate_pool(cfg);
    const auto b = generate_pool(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.record(i).id == b.record(i).id);
        CHECK(a.record(i).trial == b.record(i).trial);
        CHECK(a.record(i).arm == b.record(i).arm);
        CHECK(a.record(i).outcome == b.record(i).outcome);
        CHECK(a.record(i).covariates == b.record(i).covariates);
    }

    cfg.seed = 78;
    const auto c = generate_pool(cfg);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i) {
        any_diff = a.record(i).outcome != c.record(i).outcome ||
                   a.record(i).covariates != c.record(i).covariates;
    }
    CHECK(any_diff);
}

TEST_CASE("config validation", "[sim]") {
    SimConfig cfg;
    cfg.n_historical = 0;
    CHECK_THROWS_AS(generate_pool(cfg), ValidationError);
    cfg.n_historical = 10;
    cfg.bpd_prevalence_current = 1.2;
    CHECK_THROWS_AS(generate_pool(cfg), ValidationError);
}

TEST_CASE("replication study runs clean at desk scale", "[sim][slow]") {
    SimConfig cfg;
    cfg.n_historical = 1502;
    cfg.n_current = 2000;
    cfg.seed = 99;
    ReplicationSpec spec;
    spec.threads = 2;
    const auto summary = run_replication_study(cfg, 40, spec);

    CHECK(summary.replications == 40);
    CHECK(summary.failures == 0);
    CHECK_THAT(summary.true_calibrated, WithinAbs(1.1406, 5e-4));
    CHECK_THAT(summary.true_uncalibrated, WithinAbs(0.8089, 5e-4));
    // loose 4-sigma sanity bands at R = 40
    CHECK_THAT(summary.mean_calibrated,
               WithinAbs(summary.true_calibrated,
                         4.0 * summary.sd_calibrated / std::sqrt(40.0)));
    CHECK_THAT(summary.mean_uncalibrated,
               WithinAbs(summary.true_uncalibrated,
                         4.0 * summary.sd_uncalibrated / std::sqrt(40.0)));
    CHECK(summary.mean_calibrated_se > 0.15);
    CHECK(summary.mean_calibrated_se < 0.45);
    // the population shift biases the uncalibrated estimate well below the
    // calibrated one (roughly the 1.14-vs-0.86 scale gap)
    CHECK(summary.mean_calibrated - summary.mean_uncalibrated > 0.2);

    SECTION("identical populations make calibration a no-op on average") {
        SimConfig same = cfg;
        same.bpd_prevalence_current = same.bpd_prevalence_historical;
        same.covariate_rates_current = same.covariate_rates_historical;
        const auto s = run_replication_study(same, 40, spec);
        CHECK_THAT(s.true_calibrated, WithinAbs(s.true_uncalibrated, 1e-12));
        CHECK_THAT(s.mean_calibrated, WithinAbs(s.mean_uncalibrated,
                                                4.0 * s.sd_calibrated / std::sqrt(40.0)));
    }
}

TEST_CASE("replication study is deterministic for any thread count", "[sim]") {
    SimConfig cfg;
    cfg.n_historical = 500;
    cfg.n_current = 700;
    cfg.seed = 4242;
    ReplicationSpec serial;
    serial.threads = 1;
    ReplicationSpec parallel;
    parallel.threads = 3;
    const auto a = run_replication_study(cfg, 12, serial);
    const auto b = run_replication_study(cfg, 12, parallel);
    CHECK(a.mean_calibrated == b.mean_calibrated);
    CHECK(a.sd_calibrated == b.sd_calibrated);
    CHECK(a.mean_uncalibrated == b.mean_uncalibrated);
    CHECK(a.coverage_arm0 == b.coverage_arm0);
}

TEST_CASE("sandwich intervals cover the calibrated arm means", "[sim][slow]") {
    // nominal 95% coverage at default sizes; the acceptance band is wide
    // enough for Monte Carlo noise at R = 1000
    SimConfig cfg;
    cfg.seed = 314159;
    ReplicationSpec spec;
    spec.threads = 2;
    const auto summary = run_replication_study(cfg, 1000, spec);
    CHECK(summary.failures == 0);
    CHECK(summary.coverage_arm0 >= 0.92);
    CHECK(summary.coverage_arm0 <= 0.98);
    CHECK(summary.coverage_arm1 >= 0.92);
    CHECK(summary.coverage_arm1 <= 0.98);
}
