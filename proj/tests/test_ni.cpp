#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "recalib/ni_test.hpp"
#include "recalib/rng.hpp"
#include "recalib/stats.hpp"

using namespace recalib;
using fixtures::round_to;
using Catch::Matchers::WithinAbs;

namespace {

double round_1sig(double x) {
    if (x == 0.0) return 0.0;
    const double e = std::floor(std::log10(std::abs(x)));
    const double scale = std::pow(10.0, e);
    return std::round(x / scale) * scale;
}

}  // namespace

TEST_CASE("synthesis statistic on the published inputs", "[ni]") {
    SECTION("unadjusted") {
        const auto r = synthesis_test({0.31, 0.20, 0.86, 0.21, 0.025});
        CHECK(round_to(r.statistic, 1) == 4.0);
        CHECK_THAT(round_1sig(r.p_value), WithinAbs(3e-5, 1e-12));
        CHECK(r.reject);
        CHECK(r.method == NiMethod::synthesis);
    }
    SECTION("adjusted") {
        const auto r = synthesis_test({0.31, 0.20, 1.14, 0.25, 0.025});
        CHECK(round_to(r.statistic, 1) == 4.5);
        CHECK_THAT(round_1sig(r.p_value), WithinAbs(3e-6, 1e-13));
    }
    SECTION("zero effects give a coin flip") {
        const auto r = synthesis_test({0.0, 0.3, 0.0, 0.4, 0.025});
        CHECK(r.statistic == 0.0);
        CHECK_THAT(r.p_value, WithinAbs(0.5, 1e-14));
        CHECK_FALSE(r.reject);
    }
}

TEST_CASE("fixed-margin statistic on the published inputs", "[ni]") {
    SECTION("unadjusted") {
        const auto r = fixed_margin_test({0.31, 0.20, 0.86, 0.21, 0.025});
        CHECK(round_to(r.statistic, 1) == 2.9);
        CHECK_THAT(round_1sig(r.p_value), WithinAbs(2e-3, 1e-10));
    }
    SECTION("adjusted") {
        const auto r = fixed_margin_test({0.31, 0.20, 1.14, 0.25, 0.025});
        CHECK(round_to(r.statistic, 1) == 3.2);
        CHECK_THAT(round_1sig(r.p_value), WithinAbs(6e-4, 1e-10));
    }
    SECTION("simulated-pool inputs") {
        const auto r = fixed_margin_test({0.31, 0.20, 1.23, 0.28, 0.025});
        CHECK(round_to(r.statistic, 1) == 3.2);
        const auto s = synthesis_test({0.31, 0.20, 1.23, 0.28, 0.025});
        CHECK(round_to(s.statistic, 1) == 4.5);
    }
}

TEST_CASE("stratified statistic", "[ni]") {
    SECTION("single stratum reduces to d over its SE") {
        const std::vector<StratumComparison> strata = {{0.5, 0.03, 0.2, 0.01, 1.0}};
        const auto r = stratified_test(strata, 0.025);
        CHECK_THAT(r.statistic, WithinAbs(0.3 / std::sqrt(0.04), 1e-12));
        REQUIRE(r.variance_scaled_statistic.has_value());
        CHECK_THAT(*r.variance_scaled_statistic, WithinAbs(0.3 / 0.04, 1e-12));
        CHECK(r.method == NiMethod::stratified);
    }

    SECTION("all-zero differences give a coin flip") {
        const std::vector<StratumComparison> strata = {{0.4, 0.02, 0.4, 0.02, 0.5},
                                                       {-0.1, 0.05, -0.1, 0.01, 0.5}};
        const auto r = stratified_test(strata, 0.025);
        CHECK(r.statistic == 0.0);
        CHECK_THAT(r.p_value, WithinAbs(0.5, 1e-14));
    }

    SECTION("two strata match the spreadsheet arithmetic") {
        const std::vector<StratumComparison> strata = {{0.5, 0.04, 0.1, 0.02, 0.6},
                                                       {0.2, 0.09, -0.1, 0.03, 0.4}};
        // numerator 0.4*0.6 + 0.3*0.4 = 0.36
        // variance 0.06*0.36 + 0.12*0.16 = 0.0408
        const auto r = stratified_test(strata, 0.025);
        CHECK_THAT(r.statistic, WithinAbs(0.36 / std::sqrt(0.0408), 1e-12));
        CHECK_THAT(*r.variance_scaled_statistic, WithinAbs(0.36 / 0.0408, 1e-12));
    }

    SECTION("validation") {
        CHECK_THROWS_AS(stratified_test({}, 0.025), ValidationError);
        const std::vector<StratumComparison> bad_weights = {{0.5, 0.04, 0.1, 0.02, 0.7}};
        CHECK_THROWS_AS(stratified_test(bad_weights, 0.025), ValidationError);
        const std::vector<StratumComparison> bad_var = {{0.5, 0.0, 0.1, 0.02, 1.0}};
        CHECK_THROWS_AS(stratified_test(bad_var, 0.025), ValidationError);
    }
}

TEST_CASE("fixed-margin never exceeds synthesis for positive combined effects", "[ni]") {
    Rng rng(404);
    for (int rep = 0; rep < 200; ++rep) {
        NiInputs in;
        in.mu_tc = rng.uniform();          // combined estimate stays positive
        in.mu_cp = rng.uniform();
        in.se_tc = 0.05 + rng.uniform();
        in.se_cp = 0.05 + rng.uniform();
        in.alpha = 0.025;
        const auto fm = fixed_margin_test(in);
        const auto syn = synthesis_test(in);
        CHECK(fm.statistic <= syn.statistic);
    }
}

TEST_CASE("both statistics are monotone in the historical effect", "[ni]") {
    Rng rng(808);
    for (int rep = 0; rep < 200; ++rep) {
        NiInputs lo;
        lo.mu_tc = -1.0 + 2.0 * rng.uniform();
        lo.mu_cp = -1.0 + 2.0 * rng.uniform();
        lo.se_tc = 0.05 + rng.uniform();
        lo.se_cp = 0.05 + rng.uniform();
        lo.alpha = 0.025;
        NiInputs hi = lo;
        hi.mu_cp += 0.5 * rng.uniform();
        CHECK(synthesis_test(hi).statistic >= synthesis_test(lo).statistic);
        CHECK(fixed_margin_test(hi).statistic >= fixed_margin_test(lo).statistic);
    }
}

TEST_CASE("standard normal tail is symmetric to machine precision", "[ni]") {
    for (const double z : {0.0, 0.31, 1.0, 2.5, 4.0, 6.0, 8.5, -1.7, -3.3}) {
        CHECK_THAT(stats::normal_upper_tail(z) + stats::normal_upper_tail(-z),
                   WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("normal quantile inverts the CDF", "[ni]") {
    CHECK_THAT(stats::normal_quantile(0.975), WithinAbs(1.959963984540054, 1e-12));
    CHECK_THAT(stats::normal_quantile(0.5), WithinAbs(0.0, 1e-12));
    for (const double p : {0.001, 0.0228, 0.25, 0.6, 0.9, 0.99997}) {
        CHECK_THAT(stats::normal_cdf(stats::normal_quantile(p)), WithinAbs(p, 1e-12));
    }
    CHECK_THROWS_AS(stats::normal_quantile(0.0), ValidationError);
    CHECK_THROWS_AS(stats::normal_quantile(1.0), ValidationError);
}

TEST_CASE("rejection matches the critical value", "[ni]") {
    // z_alpha for alpha = 0.025 is 1.96; straddle it
    const auto below = synthesis_test({0.3, 0.1, 0.0, 0.1, 0.025});   // z = 2.12
    CHECK(below.reject);
    const auto above = synthesis_test({0.25, 0.1, 0.0, 0.1, 0.025});  // z = 1.77
    CHECK_FALSE(above.reject);
    CHECK(below.reject == (below.statistic > below.z_alpha));
    CHECK(above.reject == (above.statistic > above.z_alpha));
}

TEST_CASE("ni input validation", "[ni]") {
    CHECK_THROWS_AS(synthesis_test({0.3, 0.0, 0.8, 0.2, 0.025}), ValidationError);
    CHECK_THROWS_AS(synthesis_test({0.3, 0.2, 0.8, -0.1, 0.025}), ValidationError);
    CHECK_THROWS_AS(synthesis_test({0.3, 0.2, 0.8, 0.2, 0.6}), ValidationError);
    CHECK_THROWS_AS(fixed_margin_test({0.3, 0.2, 0.8, 0.2, 0.0}), ValidationError);
}
