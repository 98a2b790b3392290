#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <vector>

#include "fixtures.hpp"
#include "recalib/propensity.hpp"
#include "recalib/rng.hpp"
#include "recalib/sim.hpp"

using namespace recalib;
using Catch::Matchers::WithinAbs;

namespace {

SimConfig balanced_config(std::uint64_t seed) {
    // trial label carries no covariate information
    SimConfig cfg;
    cfg.n_historical = 700;
    cfg.n_current = 900;
    cfg.bpd_prevalence_historical = 0.4;
    cfg.bpd_prevalence_current = 0.4;
    cfg.covariate_rates_historical = {0.5, 0.3, 0.6};
    cfg.covariate_rates_current = {0.5, 0.3, 0.6};
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("propensity fit reproduces the 2x2 contingency closed form", "[propensity]") {
    const auto pool = fixtures::impact_pool();
    const auto model = fit_propensity(pool, {"bpd"});
    REQUIRE(model.fit().converged);

    // oracle: saturated logistic on a binary covariate equals the table
    // log-odds. current/historical counts: bpd 1445/762, non-bpd 5190/740.
    const double intercept = std::log(5190.0 / 740.0);
    const double slope = std::log(1445.0 / 762.0) - intercept;
    CHECK_THAT(model.fit().coefficients[0], WithinAbs(intercept, 1e-6));
    CHECK_THAT(model.fit().coefficients[1], WithinAbs(slope, 1e-6));
}

TEST_CASE("uninformative covariates give near-zero coefficients", "[propensity]") {
    int within = 0, total = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto pool = generate_pool(balanced_config(seed));
        const auto model = fit_propensity(pool, {"bpd", "x1", "x2", "x3"});
        const auto& fit = model.fit();
        for (Eigen::Index j = 1; j < fit.coefficients.size(); ++j) {
            const double se = std::sqrt(fit.naive_covariance(j, j));
            ++total;
            if (std::abs(fit.coefficients[j]) <= 3.0 * se) ++within;
        }
    }
    REQUIRE(total == 40);
    // 3-sigma coverage, allowing a couple of random exceedances
    CHECK(within >= 36);
}

TEST_CASE("intercept score equation pins the mean predicted probability", "[propensity]") {
    SimConfig cfg;
    cfg.seed = 41;
    const auto pool = generate_pool(cfg);
    const auto model = fit_propensity(pool, {"bpd", "x1", "x2", "x3"});
    const Eigen::VectorXd p = model.predict(pool);
    CHECK_THAT(p.mean(), WithinAbs(6635.0 / 8137.0, 1e-8));
}

TEST_CASE("propensity weights equal analytic share weights on a discrete covariate",
          "[propensity]") {
    const auto pool = fixtures::impact_pool();
    const auto model = fit_propensity(pool, {"bpd"});
    const auto w = propensity_weights(model, pool);

    const std::map<double, double> target{{1.0, 1445.0 / 6635.0}, {0.0, 5190.0 / 6635.0}};
    const std::map<double, double> source{{1.0, 762.0 / 1502.0}, {0.0, 740.0 / 1502.0}};
    const auto hist = pool.indices(Trial::historical);
    const auto cats = pool.covariate_values(hist, "bpd");
    const auto oracle = analytic_weights(cats, target, source);

    REQUIRE(w.size() == oracle.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        CHECK_THAT(w[i], WithinAbs(oracle[i], 1e-6));
    }
    CHECK(w.provenance() == WeightProvenance::propensity_odds);
}

TEST_CASE("one-hot three-level covariate stays Bayes consistent", "[propensity]") {
    // saturated design: two dummies for three categories
    struct Group {
        Trial trial;
        int category;
        int n;
    };
    const std::vector<Group> groups = {{Trial::historical, 0, 200}, {Trial::historical, 1, 150},
                                       {Trial::historical, 2, 250}, {Trial::current, 0, 90},
                                       {Trial::current, 1, 360},    {Trial::current, 2, 150}};
    std::vector<SubjectRecord> records;
    int serial = 0;
    for (const auto& g : groups) {
        for (int i = 0; i < g.n; ++i) {
            SubjectRecord r;
            r.id = "s" + std::to_string(++serial);
            r.trial = g.trial;
            r.covariates = {g.category == 1 ? 1.0 : 0.0, g.category == 2 ? 1.0 : 0.0};
            records.push_back(std::move(r));
        }
    }
    const PooledDataset pool(std::move(records), {"d1", "d2"});
    const auto model = fit_propensity(pool, {"d1", "d2"});
    const auto w = propensity_weights(model, pool);

    // oracle: empirical category share ratios, current over historical
    const double n_h = 600.0, n_c = 600.0;
    const std::map<int, double> expected = {{0, (90.0 / n_c) / (200.0 / n_h)},
                                            {1, (360.0 / n_c) / (150.0 / n_h)},
                                            {2, (150.0 / n_c) / (250.0 / n_h)}};
    const auto hist = pool.indices(Trial::historical);
    for (std::size_t k = 0; k < hist.size(); ++k) {
        const auto& r = pool.record(hist[k]);
        const int cat = r.covariates[0] == 1.0 ? 1 : (r.covariates[1] == 1.0 ? 2 : 0);
        CHECK_THAT(w[static_cast<Eigen::Index>(k)], WithinAbs(expected.at(cat), 1e-6));
    }
}

TEST_CASE("flat propensity model gives unit weights", "[propensity]") {
    const auto pool = fixtures::impact_pool();
    const double n_h = 1502.0, n_c = 6635.0;
    glm::FitResult flat;
    flat.coefficients = Eigen::VectorXd::Zero(2);
    flat.coefficients[0] = std::log(n_c / n_h);  // odds = n_c / n_h everywhere
    flat.converged = true;
    const PropensityModel model(flat, glm::DesignMatrix::with_intercept(
                                          Eigen::MatrixXd::Zero(1, 1), {"bpd"}),
                                {"bpd"}, false, {});
    const auto w = propensity_weights(model, pool);
    for (Eigen::Index i = 0; i < w.size(); ++i) CHECK_THAT(w[i], WithinAbs(1.0, 1e-9));
}

TEST_CASE("historical weights average to about one", "[propensity]") {
    SimConfig cfg;
    cfg.seed = 7;
    const auto pool = generate_pool(cfg);
    const auto model = fit_propensity(pool, {"bpd", "x1", "x2", "x3"});
    const auto w = propensity_weights(model, pool);
    const double n_h = static_cast<double>(pool.count(Trial::historical));
    CHECK_THAT(w.mean(), WithinAbs(1.0, 3.0 / std::sqrt(n_h)));
}

TEST_CASE("degenerate predictions are refused", "[propensity]") {
    const auto pool = fixtures::impact_pool();
    glm::FitResult extreme;
    extreme.coefficients = Eigen::VectorXd::Zero(2);
    extreme.coefficients[1] = 800.0;  // saturates inverse_logit to exactly 1.0
    extreme.converged = true;
    const PropensityModel model(extreme, glm::DesignMatrix::with_intercept(
                                             Eigen::MatrixXd::Zero(1, 1), {"bpd"}),
                                {"bpd"}, false, {});
    CHECK_THROWS_AS(propensity_weights(model, pool), DegeneratePropensityError);
}

TEST_CASE("propensity fit input validation", "[propensity]") {
    const auto pool = fixtures::impact_pool();

    SECTION("separation propagates") {
        std::vector<SubjectRecord> records;
        for (int i = 0; i < 12; ++i) {
            SubjectRecord r;
            r.id = "s" + std::to_string(i);
            r.trial = i < 6 ? Trial::historical : Trial::current;
            r.arm = i % 2;
            r.outcome = 0.0;
            r.covariates = {i < 6 ? 0.0 : 1.0};  // covariate identifies the trial
            records.push_back(std::move(r));
        }
        const PooledDataset separable(std::move(records), {"z"});
        CHECK_THROWS_AS(fit_propensity(separable, {"z"}), SeparationError);
    }

    SECTION("constant covariate") {
        std::vector<SubjectRecord> records;
        for (int i = 0; i < 10; ++i) {
            SubjectRecord r;
            r.id = "s" + std::to_string(i);
            r.trial = i < 5 ? Trial::historical : Trial::current;
            r.covariates = {1.0};
            records.push_back(std::move(r));
        }
        const PooledDataset constant(std::move(records), {"z"});
        CHECK_THROWS_AS(fit_propensity(constant, {"z"}), ValidationError);
    }

    SECTION("unknown covariate") {
        CHECK_THROWS_AS(fit_propensity(pool, {"nope"}), ValidationError);
    }

    SECTION("single-trial pool") {
        const auto hist_only = fixtures::impact_historical();
        CHECK_THROWS_AS(fit_propensity(hist_only, {"bpd"}), ValidationError);
    }

    SECTION("wide covariate lists earn a warning") {
        Rng rng(99);
        std::vector<SubjectRecord> records;
        std::vector<std::string> names;
        for (int j = 0; j < 11; ++j) names.push_back("c" + std::to_string(j));
        for (int i = 0; i < 400; ++i) {
            SubjectRecord r;
            r.id = "s" + std::to_string(i);
            r.trial = i % 2 == 0 ? Trial::historical : Trial::current;
            for (int j = 0; j < 11; ++j) r.covariates.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
            records.push_back(std::move(r));
        }
        const PooledDataset wide(std::move(records), names);
        const auto model = fit_propensity(wide, names);
        CHECK_FALSE(model.warnings().empty());
    }
}

TEST_CASE("pairwise interactions enter the design on request", "[propensity]") {
    SimConfig cfg;
    cfg.seed = 13;
    cfg.n_historical = 400;
    cfg.n_current = 500;
    const auto pool = generate_pool(cfg);
    const auto model = fit_propensity(pool, {"bpd", "x1", "x2"}, true);
    // intercept + 3 main effects + 3 pairwise products
    CHECK(model.fit().coefficients.size() == 7);
    CHECK(model.design_labels().back() == "x1:x2");
}

TEST_CASE("quantile strata of the density ratio", "[propensity]") {
    SECTION("single stratum holds everything") {
        const auto pool = fixtures::impact_pool();
        const std::vector<double> r(pool.size(), 1.0);
        // L = 1 needs only one distinct value
        const auto strata = stratify(r, pool, 1);
        CHECK(strata.n_strata == 1);
        CHECK_THAT(strata.share_historical[0], WithinAbs(1.0, 1e-15));
        CHECK_THAT(strata.share_current[0], WithinAbs(1.0, 1e-15));
    }

    SECTION("two ratio values with equal pooled counts split by category") {
        std::vector<SubjectRecord> records;
        std::vector<double> ratio;
        auto add = [&](Trial t, double r_value, int n) {
            for (int i = 0; i < n; ++i) {
                SubjectRecord r;
                r.id = to_string(t) + std::to_string(ratio.size());
                r.trial = t;
                r.covariates = {r_value};
                records.push_back(std::move(r));
                ratio.push_back(r_value);
            }
        };
        add(Trial::historical, 0.5, 300);
        add(Trial::historical, 2.0, 200);
        add(Trial::current, 0.5, 200);
        add(Trial::current, 2.0, 300);
        const PooledDataset pool(std::move(records), {"z"});
        const auto strata = stratify(ratio, pool, 2);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            CHECK(strata.stratum[i] == (ratio[i] == 0.5 ? 0 : 1));
        }
        CHECK_THAT(strata.share_historical[0], WithinAbs(0.6, 1e-12));
        CHECK_THAT(strata.share_historical[1], WithinAbs(0.4, 1e-12));
        CHECK_THAT(strata.share_current[0], WithinAbs(0.4, 1e-12));
        CHECK_THAT(strata.share_current[1], WithinAbs(0.6, 1e-12));
    }

    SECTION("quintiles of a simulated pool are balanced to one subject") {
        SimConfig cfg;
        cfg.seed = 3;
        const auto pool = generate_pool(cfg);
        const auto model = fit_propensity(pool, {"bpd", "x1", "x2", "x3"});
        const auto strata = stratify(model, pool, 5);
        std::vector<std::size_t> sizes(5, 0);
        for (const int l : strata.stratum) ++sizes[static_cast<std::size_t>(l)];
        const auto [lo, hi] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*hi - *lo <= 1);
        // shares sum to one within each trial
        double sh = 0.0, sc = 0.0;
        for (int l = 0; l < 5; ++l) {
            sh += strata.share_historical[static_cast<std::size_t>(l)];
            sc += strata.share_current[static_cast<std::size_t>(l)];
        }
        CHECK_THAT(sh, WithinAbs(1.0, 1e-12));
        CHECK_THAT(sc, WithinAbs(1.0, 1e-12));
    }

    SECTION("too few distinct values") {
        const auto pool = fixtures::impact_pool();
        const std::vector<double> r(pool.size(), 1.0);
        CHECK_THROWS_AS(stratify(r, pool, 2), ValidationError);
    }

    SECTION("empty historical stratum") {
        std::vector<SubjectRecord> records;
        std::vector<double> ratio;
        for (int i = 0; i < 10; ++i) {
            SubjectRecord r;
            r.id = "h" + std::to_string(i);
            r.trial = Trial::historical;
            r.covariates = {0.0};
            records.push_back(std::move(r));
            ratio.push_back(5.0);
        }
        for (int i = 0; i < 10; ++i) {
            SubjectRecord r;
            r.id = "c" + std::to_string(i);
            r.trial = Trial::current;
            r.covariates = {0.0};
            records.push_back(std::move(r));
            ratio.push_back(1.0);
        }
        const PooledDataset pool(std::move(records), {"z"});
        CHECK_THROWS_AS(stratify(ratio, pool, 2), DegenerateStratificationError);
    }
}

TEST_CASE("stratum-constant weights reproduce current-trial shares exactly", "[propensity]") {
    SimConfig cfg;
    cfg.seed = 17;
    cfg.n_historical = 600;
    cfg.n_current = 800;
    const auto pool = generate_pool(cfg);
    const auto model = fit_propensity(pool, {"bpd", "x1", "x2", "x3"});
    const auto strata = stratify(model, pool, 4);
    const auto w = stratum_constant_weights(strata, pool);
    CHECK(w.provenance() == WeightProvenance::stratum_constant);

    const auto hist = pool.indices(Trial::historical);
    const double n_h = static_cast<double>(hist.size());
    for (int l = 0; l < strata.n_strata; ++l) {
        double tally = 0.0;
        for (std::size_t k = 0; k < hist.size(); ++k) {
            if (strata.stratum[hist[k]] == l) tally += w[static_cast<Eigen::Index>(k)];
        }
        CHECK_THAT(tally / n_h, WithinAbs(strata.share_current[static_cast<std::size_t>(l)], 1e-12));
    }
}
