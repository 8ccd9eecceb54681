#include "panelbreak/core.hpp"
#include "panelbreak/error.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace panelbreak;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::InvalidArgument;
}

GroundTruth random_truth(std::size_t n, std::size_t T, std::mt19937_64& rng) {
    std::normal_distribution<double> z;
    std::uniform_int_distribution<std::size_t> pick(1, T - 1);
    GroundTruth g;
    for (std::size_t i = 0; i < n; ++i) {
        g.mu.push_back(3.0 * z(rng));
        g.delta.push_back(z(rng));
        g.gamma.push_back(z(rng));
    }
    g.t0 = pick(rng);
    for (std::size_t t = 0; t < T; ++t) g.eta.push_back(z(rng));
    g.e = testing::random_matrix(n, T, rng, 2.0);
    return g;
}

}  // namespace

TEST_CASE("panel construction enforces shape and finiteness") {
    CHECK(kind_of([] { PanelData(Matrix(0, 5)); }) == ErrorKind::DimensionMismatch);
    CHECK(kind_of([] { PanelData(Matrix(2, 2)); }) == ErrorKind::DimensionMismatch);
    Matrix m(2, 4, 1.0);
    m(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK(kind_of([&] { PanelData{m}; }) == ErrorKind::MissingValues);
    CHECK(kind_of([] { (void)PanelData::from_rows({{1, 2, 3}, {1, 2}}); }) == ErrorKind::DimensionMismatch);

    const PanelData p = PanelData::from_rows({{1, 2, 3, 4}});
    CHECK(p.panel_ids() == std::vector<std::string>{"1"});
    CHECK(p.time_ids() == std::vector<std::string>{"1", "2", "3", "4"});
}

TEST_CASE("partial sums") {
    const Matrix zeros = partial_sums(PanelData(Matrix(3, 5)));
    for (double v : zeros.data()) CHECK(v == 0.0);

    const Matrix s = partial_sums(PanelData::from_rows({{1, 2, 3}}));
    CHECK(s(0, 0) == 1.0);
    CHECK(s(0, 1) == 3.0);
    CHECK(s(0, 2) == 6.0);

    std::mt19937_64 rng(11);
    const Matrix x = testing::random_matrix(3, 5, rng);
    const Matrix r = partial_sums(PanelData(x));
    for (std::size_t i = 0; i < 3; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < 5; ++t) total += x(i, t);
        CHECK(r(i, 4) == doctest::Approx(total).epsilon(1e-14));
    }
}

TEST_CASE("cusum profile") {
    SUBCASE("constant panels vanish identically") {
        const CusumProfile p = cusum_profile(PanelData::from_rows({{2, 2, 2, 2}, {-1, -1, -1, -1}}));
        for (double u : p.u) CHECK(u == 0.0);
    }
    SUBCASE("hand computed: X = [0, 0, 1, 1]") {
        const CusumProfile p = cusum_profile(PanelData::from_rows({{0, 0, 1, 1}}));
        REQUIRE(p.u.size() == 3);
        CHECK(p.u[0] == doctest::Approx(0.25));
        CHECK(p.u[1] == doctest::Approx(1.0));
        CHECK(p.u[2] == doctest::Approx(0.25));
    }
    SUBCASE("agrees with the definition and keeps D consistent") {
        std::mt19937_64 rng(5);
        const Matrix x = testing::random_matrix(6, 40, rng);
        const CusumProfile p = cusum_profile(PanelData(x), true);
        const auto oracle = testing::naive_profile(x);
        REQUIRE(p.d.has_value());
        for (std::size_t t = 1; t < 40; ++t) {
            CHECK(p.at(t) == doctest::Approx(oracle[t - 1]).epsilon(1e-12));
            double sq = 0.0;
            for (std::size_t i = 0; i < 6; ++i) sq += (*p.d)(i, t - 1) * (*p.d)(i, t - 1);
            CHECK(p.at(t) == doctest::Approx(sq).epsilon(1e-12));
            CHECK(p.at(t) >= 0.0);
        }
    }
}

TEST_CASE("profile invariances") {
    std::mt19937_64 rng(17);
    const Matrix x = testing::random_matrix(5, 60, rng);
    const CusumProfile base = cusum_profile(PanelData(x));

    SUBCASE("per-panel shifts") {
        Matrix y = x;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t t = 0; t < 60; ++t) y(i, t) += 10.0 * static_cast<double>(i) - 3.5;
        }
        const CusumProfile shifted = cusum_profile(PanelData(y));
        for (std::size_t t = 1; t < 60; ++t) CHECK(shifted.at(t) == doctest::Approx(base.at(t)).epsilon(1e-9));
    }
    SUBCASE("global scaling") {
        const double a = 2.5;
        Matrix y = x;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t t = 0; t < 60; ++t) y(i, t) *= a;
        }
        const PanelData scaled(y);
        const CusumProfile p = cusum_profile(scaled);
        for (std::size_t t = 1; t < 60; ++t) CHECK(p.at(t) == doctest::Approx(a * a * base.at(t)).epsilon(1e-12));
        CHECK(estimate_changepoint(scaled).t_hat == estimate_changepoint(PanelData(x)).t_hat);
        CHECK(estimate_changepoint_bai(scaled).t_hat == estimate_changepoint_bai(PanelData(x)).t_hat);
    }
    SUBCASE("time reversal maps U(t) to U(T - t)") {
        const CusumProfile rev = cusum_profile(PanelData(x).reversed());
        for (std::size_t t = 1; t < 60; ++t) {
            CHECK(rev.at(t) == doctest::Approx(base.at(60 - t)).epsilon(1e-12));
        }
    }
}

TEST_CASE("estimators on noiseless steps") {
    const PanelData p = testing::step_panel(5, 20, 10, std::vector<double>(5, 1.0));
    CHECK(estimate_changepoint(p).t_hat == 10);
    CHECK(estimate_changepoint(p).method == Method::cusum_sum);
    CHECK(estimate_changepoint_bai(p).t_hat == 10);
    CHECK(estimate_changepoint_bai(p).method == Method::bai_weighted);
    CHECK(estimate_changepoint(p.reversed()).t_hat == 10);

    const PanelData q = testing::step_panel(5, 20, 7, std::vector<double>(5, 1.0));
    CHECK(estimate_changepoint(q).t_hat == 7);
    CHECK(estimate_changepoint(q.reversed()).t_hat == 13);

    // brute-force scans of both objectives
    const auto u = testing::naive_profile(q.values());
    CHECK(testing::naive_argmax(u, [](std::size_t) { return 1.0; }) == 7);
    CHECK(testing::naive_argmax(u, [](std::size_t t) { return 1.0 / (t * (20.0 - t)); }) ==
          estimate_changepoint_bai(q).t_hat);
}

TEST_CASE("estimators match brute-force scans on noisy panels") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        const Matrix x = testing::random_matrix(4, 30, rng);
        const auto u = testing::naive_profile(x);
        const PanelData p(x);
        CHECK(estimate_changepoint(p).t_hat == testing::naive_argmax(u, [](std::size_t) { return 1.0; }));
        CHECK(estimate_changepoint_bai(p).t_hat ==
              testing::naive_argmax(u, [](std::size_t t) { return 1.0 / (t * (30.0 - t)); }));
    }
}

TEST_CASE("ties go to the smallest index") {
    // U(1) = U(3) = 1/4 exactly, both above U(2) = 0
    const PanelData p = PanelData::from_rows({{0, 1, 1, 0}});
    const CusumProfile prof = cusum_profile(p);
    REQUIRE(prof.at(1) == prof.at(3));
    CHECK(estimate_changepoint(p).t_hat == 1);
    CHECK(estimate_changepoint_bai(p).t_hat == 1);
}

TEST_CASE("constant panels are degenerate") {
    const PanelData p = PanelData::from_rows({{1, 1, 1, 1}, {4, 4, 4, 4}});
    CHECK(kind_of([&] { (void)estimate_changepoint(p); }) == ErrorKind::DegenerateProfile);
    CHECK(kind_of([&] { (void)estimate_changepoint_bai(p); }) == ErrorKind::DegenerateProfile);
}

TEST_CASE("method names") {
    CHECK(method_from_string("cusum") == Method::cusum_sum);
    CHECK(method_from_string("bai") == Method::bai_weighted);
    CHECK(method_from_string(to_string(Method::bai_weighted)) == Method::bai_weighted);
    CHECK(kind_of([] { (void)method_from_string("median"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("strong signal: both estimators usually agree") {
    std::mt19937_64 rng(101);
    const std::size_t N = 50, T = 200, t0 = 100;
    int agree = 0;
    const int reps = 100;
    for (int rep = 0; rep < reps; ++rep) {
        Matrix x = testing::random_matrix(N, T, rng);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t t = t0; t < T; ++t) x(i, t) += 1.0;
        }
        const PanelData p(x);
        agree += estimate_changepoint(p).t_hat == estimate_changepoint_bai(p).t_hat;
    }
    CHECK(agree >= 90);
}

TEST_CASE("shift profile") {
    CHECK(shift_profile(0, 5, 10) == 0.0);
    CHECK(shift_profile(10, 5, 10) == 0.0);
    CHECK(shift_profile(5, 5, 10) == doctest::Approx(-2.5));
    CHECK(shift_profile(7, 5, 10) == doctest::Approx(-1.5));
    CHECK(shift_profile(7, 3, 12) == doctest::Approx(-7.0 * 9.0 / 12.0 + 4.0));
}

TEST_CASE("decomposition identity") {
    SUBCASE("no noise and no factor") {
        GroundTruth g;
        g.mu = {1.0, -2.0};
        g.delta = {0.5, 3.0};
        g.gamma = {0.0, 0.0};
        g.t0 = 4;
        g.eta.assign(9, 0.0);
        g.e = Matrix(2, 9);
        const Decomposition d = decompose(g);
        for (double v : d.q.data()) CHECK(v == 0.0);
        for (double v : d.v) CHECK(v == 0.0);
        CHECK(d.r[g.t0 - 1] == doctest::Approx(-4.0 * 5.0 / 9.0));
        const CusumProfile prof = cusum_profile(reconstruct(g), true);
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t t = 1; t < 9; ++t) {
                CHECK((*prof.d)(i, t - 1) == doctest::Approx(g.delta[i] * d.r[t - 1]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("random instances") {
        std::mt19937_64 rng(7);
        for (int rep = 0; rep < 20; ++rep) {
            const GroundTruth g = random_truth(4, 12, rng);
            const PanelData x = reconstruct(g);
            for (std::size_t i = 0; i < 4; ++i) {
                for (std::size_t t = 1; t <= 12; ++t) {
                    const double expect = g.mu[i] + (t > g.t0 ? g.delta[i] : 0.0) +
                                          g.gamma[i] * g.eta[t - 1] + g.e(i, t - 1);
                    CHECK(x.values()(i, t - 1) == expect);
                }
            }
            const Decomposition d = decompose(g);
            // independent D from the definition
            double worst = 0.0;
            for (std::size_t i = 0; i < 4; ++i) {
                double total = 0.0;
                for (std::size_t s = 0; s < 12; ++s) total += x.values()(i, s);
                double partial = 0.0;
                for (std::size_t t = 1; t <= 12; ++t) {
                    partial += x.values()(i, t - 1);
                    const double D = partial - t / 12.0 * total;
                    const double rhs = d.q(i, t - 1) + g.gamma[i] * d.v[t - 1] + g.delta[i] * d.r[t - 1];
                    worst = std::max(worst, std::abs(D - rhs));
                }
            }
            CHECK(worst <= 1e-10);
        }
    }
    SUBCASE("dimension checks") {
        std::mt19937_64 rng(3);
        GroundTruth g = random_truth(3, 10, rng);
        g.gamma.pop_back();
        CHECK(kind_of([&] { (void)decompose(g); }) == ErrorKind::DimensionMismatch);
    }
}

TEST_CASE("binary segmentation") {
    SUBCASE("single noiseless step") {
        const PanelData p = testing::step_panel(3, 40, 15, {1.0, -2.0, 0.5});
        CHECK(binary_segmentation(p, 3, 5, 0.0) == std::vector<std::size_t>{15});
    }
    SUBCASE("two noiseless steps match the brute-force two-break fit") {
        Matrix m(1, 30);
        for (std::size_t t = 11; t <= 20; ++t) m(0, t - 1) = 1.0;
        const PanelData p(m);
        // exhaustive least-squares fit of three constant pieces
        auto sse = [&](std::size_t a, std::size_t b) {
            double total = 0.0;
            for (auto [lo, hi] : {std::pair{std::size_t{0}, a}, std::pair{a, b}, std::pair{b, std::size_t{30}}}) {
                double mean = 0.0;
                for (std::size_t t = lo; t < hi; ++t) mean += m(0, t);
                mean /= static_cast<double>(hi - lo);
                for (std::size_t t = lo; t < hi; ++t) total += (m(0, t) - mean) * (m(0, t) - mean);
            }
            return total;
        };
        std::pair<std::size_t, std::size_t> best{0, 0};
        double best_sse = std::numeric_limits<double>::infinity();
        for (std::size_t a = 1; a < 30; ++a) {
            for (std::size_t b = a + 1; b < 30; ++b) {
                if (sse(a, b) < best_sse) {
                    best_sse = sse(a, b);
                    best = {a, b};
                }
            }
        }
        REQUIRE(best == std::pair<std::size_t, std::size_t>{10, 20});
        CHECK(binary_segmentation(p, 3, 5, 0.0) == std::vector<std::size_t>{10, 20});
    }
    SUBCASE("pure noise stays unsplit under a null-calibrated threshold") {
        const std::size_t N = 5, T = 100, min_seg = 5;
        std::mt19937_64 rng(2024);
        std::vector<double> null_stats;
        for (int rep = 0; rep < 1000; ++rep) {
            const auto u = testing::naive_profile(testing::random_matrix(N, T, rng));
            double mx = 0.0;
            for (std::size_t t = min_seg; t <= T - min_seg; ++t) mx = std::max(mx, u[t - 1]);
            null_stats.push_back(mx / (static_cast<double>(T * T) * N));
        }
        const double threshold = testing::quantile7(null_stats, 0.99);
        int empty = 0;
        for (int rep = 0; rep < 200; ++rep) {
            empty += binary_segmentation(PanelData(testing::random_matrix(N, T, rng)), min_seg, 8, threshold).empty();
        }
        CHECK(empty >= 190);
    }
    SUBCASE("argument checks") {
        const PanelData p = testing::step_panel(2, 20, 10, {1.0, 1.0});
        CHECK(kind_of([&] { (void)binary_segmentation(p, 10, 3, 0.0); }) == ErrorKind::InvalidSegment);
        CHECK(kind_of([&] { (void)binary_segmentation(p, 1, 3, 0.0); }) == ErrorKind::InvalidSegment);
        CHECK(binary_segmentation(p, 2, 0, 0.0).empty());
    }
}
