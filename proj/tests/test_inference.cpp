#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ifm/inference.hpp"

using namespace ifm;
using namespace ifm::inference;

namespace {

CountsFile bundled_counts() {
    CountsFile counts;
    counts.transparent = {3561, 793, std::nullopt, RunConfig::Transparent};
    counts.black = {2073, 999, 2253, RunConfig::Black};
    counts.background = {215, 59, 1422, RunConfig::Background};
    return counts;
}

double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace

TEST_CASE("background subtraction with Poisson quadrature") {
    CountRecord gross{3561, 793, std::nullopt, RunConfig::Transparent};
    CountRecord bg{215, 59, std::nullopt, RunConfig::Background};
    DetectorNetCounts net = subtract_background(gross, bg);

    CHECK(net.p1.value == 3346.0);
    CHECK(net.p1.sigma == doctest::Approx(std::sqrt(3776.0)).epsilon(1e-15));
    CHECK(net.p1.sigma == doctest::Approx(61.449).epsilon(1e-4));
    CHECK(net.p2.value == 734.0);
    CHECK(net.p2.sigma == doctest::Approx(29.189).epsilon(1e-4));

    SUBCASE("zero counts give zero net and zero sigma") {
        DetectorNetCounts zero = subtract_background({0, 0, std::nullopt, RunConfig::Transparent},
                                                     {0, 0, std::nullopt, RunConfig::Background});
        CHECK(zero.p1.value == 0.0);
        CHECK(zero.p1.sigma == 0.0);
    }

    SUBCASE("config misuse is rejected") {
        CHECK_THROWS_AS(subtract_background(bg, bg), ValidationError);
        CHECK_THROWS_AS(subtract_background(gross, gross), ValidationError);
    }

    SUBCASE("a strongly negative net is flagged suspicious") {
        DetectorNetCounts odd = subtract_background({10, 10, std::nullopt, RunConfig::Transparent},
                                                    {400, 10, std::nullopt, RunConfig::Background});
        CHECK(odd.p1.suspicious());
        CHECK_FALSE(odd.p2.suspicious());
    }
}

TEST_CASE("transparent run reduces to the published row") {
    auto net = subtract_background(bundled_counts().transparent, bundled_counts().background);
    OutcomeProbabilities probs = probabilities_transparent(net.p1, net.p2);

    CHECK(round3(probs.p_i.value) == 0.820);
    CHECK(round3(probs.p_ii.value) == 0.180);
    CHECK(round3(probs.p_i.sigma) == 0.020);
    CHECK(round3(probs.p_ii.sigma) == 0.008);
    CHECK(probs.p_i.value + probs.p_ii.value == doctest::Approx(1.0).epsilon(1e-9));

    // published sigma arithmetic: .820*sqrt((61.4/3346)^2 + (68.0/4080)^2)
    double expected = 0.820 * std::sqrt(std::pow(61.4 / 3346.0, 2) + std::pow(68.0 / 4080.0, 2));
    CHECK(expected == doctest::Approx(0.0203).epsilon(2e-2));
    CHECK(probs.p_i.sigma == doctest::Approx(expected).epsilon(2e-3));

    SUBCASE("all counts in one exit") {
        OutcomeProbabilities one = probabilities_transparent({1000.0, 31.6}, {0.0, 5.0});
        CHECK(one.p_i.value == 1.0);
        CHECK(one.p_ii.value == 0.0);
        CHECK(one.p_ii.sigma > 0.0);
    }

    SUBCASE("zero total is degenerate") {
        CHECK_THROWS_AS(probabilities_transparent({0.0, 0.0}, {0.0, 0.0}), DegenerateDataError);
    }
}

TEST_CASE("black run reduces to the published row") {
    CountsFile counts = bundled_counts();
    auto net_t = subtract_background(counts.transparent, counts.background);
    auto net_b = subtract_background(counts.black, counts.background);
    NetCounts total = net_t.exit_sum();
    CHECK(total.value == 4080.0);
    CHECK(total.sigma == doctest::Approx(std::sqrt(4628.0)).epsilon(1e-15));

    OutcomeProbabilities probs = probabilities_black(net_b.p1, net_b.p2, total);
    CHECK(round3(probs.p_i.value) == 0.455);
    // 940/4080 = .23039: the published row prints .231, one unit high in the
    // last digit of its own arithmetic; agree within one printed digit.
    CHECK(round3(probs.p_ii.value) == 0.230);
    CHECK(std::abs(probs.p_ii.value - 0.231) < 1e-3);
    CHECK(round3(probs.p_iii->value) == 0.314);
    CHECK(round3(probs.p_i.sigma) == 0.014);
    CHECK(round3(probs.p_ii.sigma) == 0.009);

    // quadrature gives .0165; the published .018 is accepted within +-.002
    CHECK(std::abs(probs.p_iii->sigma - 0.018) < 0.002);
    CHECK(probs.p_iii->sigma ==
          doctest::Approx(std::sqrt(std::pow(probs.p_i.sigma, 2) + std::pow(probs.p_ii.sigma, 2)))
              .epsilon(1e-12));
    CHECK(probs.p_i.value + probs.p_ii.value + probs.p_iii->value ==
          doctest::Approx(1.0).epsilon(1e-12));

    // raw arithmetic check
    CHECK(940.0 / 4080.0 == doctest::Approx(0.2304).epsilon(1e-3));

    SUBCASE("everything absorbed") {
        OutcomeProbabilities all = probabilities_black({0.0, 0.0}, {0.0, 0.0}, {4080.0, 68.0});
        CHECK(all.p_i.value == 0.0);
        CHECK(all.p_ii.value == 0.0);
        CHECK(all.p_iii->value == 1.0);
    }

    SUBCASE("mismatched exposure is rejected") {
        CHECK_THROWS_AS(probabilities_black({3000.0, 54.7}, {2000.0, 44.7}, {4080.0, 68.0}),
                        InconsistentExposureError);
    }
}

TEST_CASE("object-detector consistency check") {
    NetCounts net_d{831.0, 60.62};

    SUBCASE("plain arithmetic inputs reproduce the published cross-check") {
        ConsistencyReport report =
            consistency_check_object_detector(net_d, {0.314, 0.0}, {4080.0, 0.0}, 0.65);
        CHECK(report.predicted == doctest::Approx(832.7).epsilon(1e-3));
        CHECK(std::abs(report.pull) < 1.0);
        CHECK(report.consistent());
    }

    SUBCASE("a dead object detector is flagged") {
        ConsistencyReport report =
            consistency_check_object_detector({0.0, 60.62}, {0.314, 0.0}, {4080.0, 0.0}, 0.65);
        CHECK(report.pull == doctest::Approx(-13.7).epsilon(5e-3));
        CHECK_FALSE(report.consistent());
    }

    SUBCASE("perfect efficiency with nothing absorbed predicts zero") {
        ConsistencyReport report =
            consistency_check_object_detector({0.0, 0.0}, {0.0, 0.0}, {4080.0, 68.0}, 1.0);
        CHECK(report.predicted == 0.0);
    }

    SUBCASE("efficiency must lie in (0,1]") {
        CHECK_THROWS_AS(
            consistency_check_object_detector(net_d, {0.314, 0.0}, {4080.0, 0.0}, 0.0),
            ValidationError);
    }
}

TEST_CASE("full pipeline reproduces every published value") {
    ReduceResult result = reduce_counts(bundled_counts());
    CHECK(round3(result.black.p_i.value) == 0.455);
    CHECK(std::abs(result.black.p_ii.value - 0.231) < 1e-3);
    CHECK(round3(result.black.p_iii->value) == 0.314);
    CHECK(round3(result.transparent.p_i.value) == 0.820);
    CHECK(round3(result.transparent.p_ii.value) == 0.180);
    REQUIRE(result.d_check.has_value());
    CHECK(result.d_check->observed == 831.0);
    CHECK(result.d_check->predicted == doctest::Approx(833.3).epsilon(1e-3));
    CHECK(std::abs(result.d_check->pull) < 1.0);
    CHECK_FALSE(result.suspicious_nets);
}

TEST_CASE("first-order sigmas agree with a parametric bootstrap within 10%") {
    CountsFile counts = bundled_counts();
    ReduceResult reduced = reduce_counts(counts);

    std::mt19937_64 gen(99);
    auto poisson = [&gen](long long mean) {
        std::poisson_distribution<long long> dist(static_cast<double>(mean));
        return dist(gen);
    };

    const int n_resample = 100000;
    double sum_pti = 0.0, sum2_pti = 0.0;
    double sum_pbi = 0.0, sum2_pbi = 0.0;
    double sum_pbiii = 0.0, sum2_pbiii = 0.0;
    for (int k = 0; k < n_resample; ++k) {
        double nt1 = static_cast<double>(poisson(3561) - poisson(215));
        double nt2 = static_cast<double>(poisson(793) - poisson(59));
        double nb1 = static_cast<double>(poisson(2073) - poisson(215));
        double nb2 = static_cast<double>(poisson(999) - poisson(59));
        double total = nt1 + nt2;
        double pti = nt1 / total;
        double pbi = nb1 / total;
        double pbiii = 1.0 - pbi - nb2 / total;
        sum_pti += pti;
        sum2_pti += pti * pti;
        sum_pbi += pbi;
        sum2_pbi += pbi * pbi;
        sum_pbiii += pbiii;
        sum2_pbiii += pbiii * pbiii;
    }
    auto stddev = [n_resample](double sum, double sum2) {
        double mean = sum / n_resample;
        return std::sqrt(sum2 / n_resample - mean * mean);
    };
    CHECK(reduced.transparent.p_i.sigma ==
          doctest::Approx(stddev(sum_pti, sum2_pti)).epsilon(0.10));
    CHECK(reduced.black.p_i.sigma == doctest::Approx(stddev(sum_pbi, sum2_pbi)).epsilon(0.10));
    CHECK(reduced.black.p_iii->sigma ==
          doctest::Approx(stddev(sum_pbiii, sum2_pbiii)).epsilon(0.10));
}

TEST_CASE("scaling all counts by k preserves probabilities, shrinks sigmas by sqrt(k)") {
    CountsFile base = bundled_counts();
    CountsFile doubled = base;
    doubled.transparent.p1 *= 2;
    doubled.transparent.p2 *= 2;
    doubled.black.p1 *= 2;
    doubled.black.p2 *= 2;
    *doubled.black.d *= 2;
    doubled.background.p1 *= 2;
    doubled.background.p2 *= 2;
    *doubled.background.d *= 2;

    ReduceResult a = reduce_counts(base);
    ReduceResult b = reduce_counts(doubled);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(b.black.p_i.value == doctest::Approx(a.black.p_i.value).epsilon(1e-14));
    CHECK(b.transparent.p_i.value == doctest::Approx(a.transparent.p_i.value).epsilon(1e-14));
    CHECK(b.black.p_i.sigma == doctest::Approx(a.black.p_i.sigma * inv_sqrt2).epsilon(1e-12));
    CHECK(b.black.p_ii.sigma == doctest::Approx(a.black.p_ii.sigma * inv_sqrt2).epsilon(1e-12));
    CHECK(b.transparent.p_i.sigma ==
          doctest::Approx(a.transparent.p_i.sigma * inv_sqrt2).epsilon(1e-12));
    CHECK(b.transparent.p_ii.sigma ==
          doctest::Approx(a.transparent.p_ii.sigma * inv_sqrt2).epsilon(1e-12));
}

TEST_CASE("exact covariance variant tightens the transparent sigma") {
    auto net = subtract_background(bundled_counts().transparent, bundled_counts().background);
    OutcomeProbabilities uncorrelated =
        probabilities_transparent(net.p1, net.p2, CovarianceMode::Uncorrelated);
    OutcomeProbabilities exact = probabilities_transparent(net.p1, net.p2, CovarianceMode::Exact);
    CHECK(exact.p_i.sigma < uncorrelated.p_i.sigma);
    CHECK(exact.p_i.sigma == doctest::Approx(exact.p_ii.sigma).epsilon(1e-12));
    CHECK(exact.p_i.value == uncorrelated.p_i.value);
}

TEST_CASE("counts csv ingest") {
    SUBCASE("bundled-format text parses") {
        std::istringstream in(
            "detector,config,counts\n"
            "P1,transparent,3561\nP2,transparent,793\n"
            "P1,black,2073\nP2,black,999\nD,black,2253\n"
            "P1,background,215\nP2,background,59\nD,background,1422\n");
        CountsFile counts = parse_counts_csv(in);
        CHECK(counts.transparent.p1 == 3561);
        CHECK(*counts.black.d == 2253);
        CHECK(counts.background.p2 == 59);
    }

    SUBCASE("unknown detector is rejected with its line number") {
        std::istringstream in("detector,config,counts\nP3,transparent,12\n");
        CHECK_THROWS_WITH_AS(parse_counts_csv(in), "counts csv line 2: unknown detector 'P3'",
                             ValidationError);
    }

    SUBCASE("unknown config is rejected with its line number") {
        std::istringstream in("detector,config,counts\nP1,calibration,12\n");
        CHECK_THROWS_WITH_AS(parse_counts_csv(in), "counts csv line 2: unknown config 'calibration'",
                             ValidationError);
    }

    SUBCASE("missing configs are reported by name") {
        std::istringstream in(
            "detector,config,counts\nP1,transparent,10\nP2,transparent,10\n"
            "P1,black,5\nP2,black,5\n");
        CHECK_THROWS_WITH_AS(parse_counts_csv(in),
                             "counts csv: missing P1/P2 rows for config 'background'",
                             ValidationError);
    }

    SUBCASE("D counts in a transparent run are rejected") {
        std::istringstream in("detector,config,counts\nD,transparent,12\n");
        CHECK_THROWS_AS(parse_counts_csv(in), ValidationError);
    }

    SUBCASE("duplicate rows are rejected") {
        std::istringstream in("detector,config,counts\nP1,black,5\nP1,black,6\n");
        CHECK_THROWS_AS(parse_counts_csv(in), ValidationError);
    }

    SUBCASE("missing header is rejected") {
        std::istringstream in("P1,black,5\n");
        CHECK_THROWS_AS(parse_counts_csv(in), ValidationError);
    }

    SUBCASE("negative and non-integer counts are rejected") {
        std::istringstream neg("detector,config,counts\nP1,black,-5\n");
        CHECK_THROWS_AS(parse_counts_csv(neg), ValidationError);
        std::istringstream word("detector,config,counts\nP1,black,many\n");
        CHECK_THROWS_AS(parse_counts_csv(word), ValidationError);
    }
}
