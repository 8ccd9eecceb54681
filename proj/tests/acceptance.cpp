// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "panelbreak/core.hpp"
#include "panelbreak/limitdist.hpp"
#include "panelbreak/norming.hpp"
#include "panelbreak/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

using namespace panelbreak;

namespace {

constexpr std::uint64_t kSeed = 20240601;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

unsigned workers() { return std::max(1u, std::thread::hardware_concurrency()); }

double quantile7(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

double ks(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double worst = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        worst = std::max(worst, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return worst;
}

ContinuousSamples half_samples;

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    half_samples = simulate_argmax_continuous(0.5, {100, 0.02, false}, 1'000'000, kSeed, workers());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const QuantileTable t = quantiles(half_samples, {});
    const double q90 = *t.at(0.90), q95 = *t.at(0.95), q99 = *t.at(0.99);
    const bool pass = std::abs(q90 - 4.70) <= 0.10 && std::abs(q95 - 7.69) <= 0.20 && std::abs(q99 - 15.89) <= 0.60;
    report(1, "limit-law quantiles at theta=1/2", pass,
           fmt("q90=%.3f q95=%.3f q99=%.3f vs 4.70/7.69/15.89 (1e6 reps, C=100, h=0.02, boundary hits %zu, %.0fs)",
               q90, q95, q99, half_samples.boundary_hits, secs));
}

struct Row {
    std::size_t N, T;
    double delta, gamma;
    double target[3];
};

void coverage_rows(int id, const std::string& name, const std::vector<Row>& rows) {
    const QuantileTable table = quantiles(half_samples, {});
    bool pass = true;
    std::string detail;
    for (const Row& row : rows) {
        SimulationConfig c = SimulationConfig::broadcast(row.N, row.T, 0.5, 0.0, row.delta, row.gamma);
        c.n_rep = 1000;
        c.seed = kSeed;
        const CoverageReport r = run_coverage_experiment(c, table, true, workers());
        bool ok = true;
        for (int k = 0; k < 3; ++k) ok = ok && std::abs(r.coverage[k] - row.target[k]) <= 3.0;
        pass = pass && ok;
        detail += fmt("%s%zu/%zu d=%.3f: %.1f/%.1f/%.1f vs %.1f/%.1f/%.1f%s", detail.empty() ? "" : "; ", row.N,
                      row.T, row.delta, r.coverage[0], r.coverage[1], r.coverage[2], row.target[0], row.target[1],
                      row.target[2], ok ? "" : " (off)");
    }
    report(id, name, pass, detail);
}

void criterion_4() {
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> z;
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t N = 1 + rng() % 10;
        const std::size_t T = 3 + rng() % 48;
        GroundTruth g;
        g.t0 = 1 + rng() % (T - 1);
        for (std::size_t i = 0; i < N; ++i) {
            g.mu.push_back(3 * z(rng));
            g.delta.push_back(z(rng));
            g.gamma.push_back(z(rng));
        }
        for (std::size_t t = 0; t < T; ++t) g.eta.push_back(z(rng));
        g.e = Matrix(N, T);
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t t = 0; t < T; ++t) g.e(i, t) = z(rng);
        }
        const PanelData x = reconstruct(g);
        const Decomposition d = decompose(g);
        for (std::size_t i = 0; i < N; ++i) {
            double total = 0.0;
            for (std::size_t s = 0; s < T; ++s) total += x.values()(i, s);
            double partial = 0.0;
            for (std::size_t t = 1; t <= T; ++t) {
                partial += x.values()(i, t - 1);
                const double D = partial - static_cast<double>(t) / static_cast<double>(T) * total;
                const double rhs = d.q(i, t - 1) + g.gamma[i] * d.v[t - 1] + g.delta[i] * d.r[t - 1];
                worst = std::max(worst, std::abs(D - rhs));
            }
        }
    }
    report(4, "decomposition identity", worst <= 1e-10,
           fmt("max |S_i(t) - (t/T) S_i(T) - (q + gamma v + delta r)| = %.3g over 100 instances", worst));
}

void criterion_5() {
    int cells = 0, bad = 0;
    std::string first_bad;
    for (std::size_t N : {1, 5, 50}) {
        for (std::size_t T : {10, 100}) {
            for (double theta : {0.2, 0.5, 0.8}) {
                const auto t0 = static_cast<std::size_t>(std::floor(static_cast<double>(T) * theta));
                Matrix m(N, T);
                double true_delta = 0.0;
                for (std::size_t i = 0; i < N; ++i) {
                    // dyadic levels keep every mean exact
                    const double delta = (i % 2 ? -0.25 : 0.5) * static_cast<double>(1 + i % 4);
                    true_delta += delta * delta;
                    for (std::size_t t = 1; t <= T; ++t) m(i, t - 1) = static_cast<double>(i) + (t > t0 ? delta : 0.0);
                }
                const PanelData p(m);
                const CusumProfile prof = cusum_profile(p);
                const std::size_t a = estimate_changepoint(prof).t_hat;
                const std::size_t b = estimate_changepoint_bai(prof).t_hat;
                const NormingQuantities q = estimate_norming(p, prof, a);
                ++cells;
                if (a != t0 || b != t0 || q.delta_hat != true_delta || q.xi_hat != 0.0) {
                    ++bad;
                    if (first_bad.empty()) {
                        first_bad = fmt(" first: N=%zu T=%zu theta=%.1f t_hat=%zu/%zu delta_hat=%.17g xi_hat=%.3g", N,
                                        T, theta, a, b, q.delta_hat, q.xi_hat);
                    }
                }
            }
        }
    }
    report(5, "noiseless exactness", bad == 0,
           fmt("%d of %d cells exact (t_hat = t0 for both estimators, Delta_hat = sum delta^2, Xi_hat = 0)%s",
               cells - bad, cells, first_bad.c_str()));
}

void criterion_6() {
    SimulationConfig c = SimulationConfig::broadcast(50, 200, 0.5, 0.0, 1.0, 0.0);
    c.seed = kSeed;
    int hits = 0;
    for (std::size_t rep = 0; rep < 200; ++rep) {
        if (estimate_changepoint(gen_panel(c, rep).panel).t_hat == c.t0()) ++hits;
    }
    report(6, "exact recovery regime", hits >= 190, fmt("P{t_hat = t0} = %d/200 (need >= 0.95)", hits));
}

void criterion_7() {
    double iqr_d[3], iqr_x[3], med_d = 0.0, med_x = 0.0;
    int failed = 0;
    const std::size_t Ts[3] = {200, 500, 1000};
    for (int k = 0; k < 3; ++k) {
        SimulationConfig c = SimulationConfig::broadcast(100, Ts[k], 0.5, 0.0, 0.1, 0.0);
        c.seed = kSeed + k;
        std::vector<double> rd, rx;
        for (std::size_t rep = 0; rep < 500; ++rep) {
            const PanelData p = gen_panel(c, rep).panel;
            const CusumProfile prof = cusum_profile(p);
            const std::size_t t_hat = estimate_changepoint(prof).t_hat;
            try {
                const NormingQuantities q = estimate_norming(p, prof, t_hat);
                rd.push_back(q.delta_hat / c.true_delta());
                rx.push_back(q.xi_hat / c.true_xi());
            } catch (const std::exception&) {
                ++failed;
            }
        }
        iqr_d[k] = quantile7(rd, 0.75) - quantile7(rd, 0.25);
        iqr_x[k] = quantile7(rx, 0.75) - quantile7(rx, 0.25);
        if (k == 2) {
            med_d = quantile7(rd, 0.5);
            med_x = quantile7(rx, 0.5);
        }
    }
    const bool shrink = iqr_d[0] > iqr_d[1] && iqr_d[1] > iqr_d[2] && iqr_x[0] > iqr_x[1] && iqr_x[1] > iqr_x[2];
    const bool medians = med_d >= 0.8 && med_d <= 1.25 && med_x >= 0.8 && med_x <= 1.25;
    report(7, "norming consistency", shrink && medians,
           fmt("IQR Delta_hat/Delta %.3f > %.3f > %.3f, IQR Xi_hat/Xi %.3f > %.3f > %.3f (%s); "
               "medians at T=1000: %.3f, %.3f (need [0.8, 1.25]); %d replicates without a window",
               iqr_d[0], iqr_d[1], iqr_d[2], iqr_x[0], iqr_x[1], iqr_x[2], shrink ? "monotone" : "not monotone",
               med_d, med_x, failed));
}

void criterion_8() {
    const auto a = simulate_argmax_continuous(0.3, default_grid(0.3), 100'000, kSeed + 30, workers());
    auto b = simulate_argmax_continuous(0.7, default_grid(0.7), 100'000, kSeed + 70, workers());
    for (double& v : b.values) v = -v;
    const double d = ks(a.values, b.values);
    const QuantileTable t = quantiles(half_samples, {});
    bool sym = true;
    std::string detail;
    for (double p : {0.90, 0.95}) {
        const double qp = *t.at(p), qm = *t.at(1.0 - p);
        const double gap = std::abs(qp + qm), bound = 0.05 * (std::abs(qp) + 1.0);
        sym = sym && gap < bound;
        detail += fmt(", |q%.0f + q%.0f| = %.3f < %.3f", 100 * p, 100 * (1 - p), gap, bound);
    }
    report(8, "reflection and symmetry of the limit law", d < 0.01 && sym,
           fmt("KS(theta=0.3, -theta=0.7) = %.4f < 0.01 at 1e5 reps%s", d, detail.c_str()));
}

void criterion_9() {
    bool same = true;
    std::string parts;
    const auto check = [&](const std::string& what, const std::string& a, const std::string& b) {
        same = same && a == b;
        parts += fmt("%s%s %s", parts.empty() ? "" : ", ", what.c_str(), a == b ? "identical" : "DIFFERENT");
    };
    check("quantile table", to_json(build_quantile_table(0.3, default_grid(0.3), 20000, kSeed, 1)).dump(),
          to_json(build_quantile_table(0.3, default_grid(0.3), 20000, kSeed, 8)).dump());

    SimulationConfig c = SimulationConfig::broadcast(25, 100, 0.5, 0.0, 0.15, 0.03);
    c.n_rep = 300;
    c.seed = kSeed;
    const QuantileTable table = quantiles(half_samples, {});
    check("coverage report", to_json(run_coverage_experiment(c, table, false, 1)).dump(),
          to_json(run_coverage_experiment(c, table, false, 8)).dump());
    check("histogram", to_json(run_histogram_experiment(c, default_grid(0.5), 5000, kSeed, 1)).dump(),
          to_json(run_histogram_experiment(c, default_grid(0.5), 5000, kSeed, 8)).dump());
    LimitLawSpec spec;
    spec.regime = Regime::discrete_G_plus_V;
    spec.s = 0.5;
    const auto d1 = simulate_argmax_discrete(spec, 50, 20000, kSeed, 1);
    const auto d8 = simulate_argmax_discrete(spec, 50, 20000, kSeed, 8);
    check("discrete law", fmt("%zu", std::hash<std::string>{}(std::string(
                                            reinterpret_cast<const char*>(d1.values.data()), d1.values.size() * sizeof(int)))),
          fmt("%zu", std::hash<std::string>{}(std::string(reinterpret_cast<const char*>(d8.values.data()),
                                                          d8.values.size() * sizeof(int)))));
    report(9, "determinism across 1 and 8 threads", same, parts);
}

}  // namespace

int main() {
    criterion_1();
    coverage_rows(2, "coverage without common factor (gamma = 0)",
                  {{25, 100, 0.150, 0.0, {88.7, 94.7, 100.0}},
                   {50, 250, 0.070, 0.0, {88.1, 95.4, 100.0}},
                   {100, 500, 0.035, 0.0, {88.5, 96.5, 100.0}}});
    coverage_rows(3, "coverage with common factor (gamma = 0.03)",
                  {{25, 250, 0.100, 0.03, {90.7, 95.6, 100.0}}, {50, 250, 0.070, 0.03, {91.0, 96.4, 100.0}}});
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
