#pragma once

// Shared fixtures for the unit tests. Oracles here are written from the
// definitions, without calling into the library code they check.

#include "panelbreak/core.hpp"
#include "panelbreak/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace testing {

inline panelbreak::Matrix random_matrix(std::size_t n, std::size_t T, std::mt19937_64& rng,
                                        double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    panelbreak::Matrix m(n, T);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) m(i, t) = z(rng);
    }
    return m;
}

/// X(i,t) = mu_i + delta_i 1{t > t0} with no noise.
inline panelbreak::PanelData step_panel(std::size_t n, std::size_t T, std::size_t t0,
                                        const std::vector<double>& delta,
                                        const std::vector<double>& mu = {}) {
    panelbreak::Matrix m(n, T);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 1; t <= T; ++t) {
            m(i, t - 1) = (mu.empty() ? 0.0 : mu[i]) + (t > t0 ? delta[i] : 0.0);
        }
    }
    return panelbreak::PanelData(m);
}

/// U(t) from the definition, in plain double loops.
inline std::vector<double> naive_profile(const panelbreak::Matrix& x) {
    const std::size_t n = x.rows();
    const std::size_t T = x.cols();
    std::vector<double> u(T - 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t s = 0; s < T; ++s) total += x(i, s);
        double partial = 0.0;
        for (std::size_t t = 1; t < T; ++t) {
            partial += x(i, t - 1);
            const double d = partial - static_cast<double>(t) / static_cast<double>(T) * total;
            u[t - 1] += d * d;
        }
    }
    return u;
}

/// First index (1-based) attaining the maximum of w(t) * u(t).
template <class Weight>
std::size_t naive_argmax(const std::vector<double>& u, Weight w) {
    std::size_t best = 1;
    double best_v = w(1) * u[0];
    for (std::size_t t = 2; t <= u.size(); ++t) {
        const double v = w(t) * u[t - 1];
        if (v > best_v) {
            best_v = v;
            best = t;
        }
    }
    return best;
}

inline double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double quantile7(std::vector<double> x, double p) {
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace testing
