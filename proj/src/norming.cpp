#include "panelbreak/norming.hpp"

#include "panelbreak/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace panelbreak {

namespace {

constexpr double kRoundingSlack = 64.0 * std::numeric_limits<double>::epsilon();

void require_break_inside(std::size_t t_hat, std::size_t T) {
    if (t_hat < 1 || t_hat >= T) {
        throw Error(ErrorKind::InvalidArgument,
                    "t_hat = " + std::to_string(t_hat) + " outside [1, " + std::to_string(T - 1) + "]");
    }
}

long double mean_of(std::span<const double> x) {
    long double s = 0.0L;
    for (double v : x) s += v;
    return s / static_cast<long double>(x.size());
}

}  // namespace

double mean_contrast(std::span<const double> series, std::size_t t_hat) {
    require_break_inside(t_hat, series.size());
    return static_cast<double>(mean_of(series.first(t_hat)) - mean_of(series.subspan(t_hat)));
}

double estimate_delta(const PanelData& panel, std::size_t t_hat) {
    require_break_inside(t_hat, panel.n_times());
    long double total = 0.0L;
    for (std::size_t i = 0; i < panel.n_panels(); ++i) {
        const long double c = mean_contrast(panel.panel(i), t_hat);
        total += c * c;
    }
    return static_cast<double>(total);
}

double r_hat(std::size_t t, std::size_t t_hat, std::size_t T) {
    if (t > T) throw Error(ErrorKind::InvalidArgument, "r_hat needs 0 <= t <= T");
    return shift_profile(t, t_hat, T);
}

void check_windows(const WindowConfig& windows, std::size_t t_hat, std::size_t T) {
    if (windows.m2 <= windows.m1) {
        throw Error(ErrorKind::WindowOutOfRange, "windows need m1 < m2 (got m1=" +
                                                     std::to_string(windows.m1) +
                                                     ", m2=" + std::to_string(windows.m2) + ")");
    }
    if (windows.m2 >= std::min(t_hat, T - t_hat)) {
        throw Error(ErrorKind::WindowOutOfRange,
                    "m2=" + std::to_string(windows.m2) + " must be below min(t_hat, T - t_hat) = " +
                        std::to_string(std::min(t_hat, T - t_hat)));
    }
}

double estimate_xi(const CusumProfile& profile, std::size_t t_hat, double delta_hat,
                   const WindowConfig& windows) {
    const std::size_t T = profile.u.size() + 1;
    require_break_inside(t_hat, T);
    check_windows(windows, t_hat, T);

    const double r0 = r_hat(t_hat, t_hat, T);
    if (r0 == 0.0) throw Error(ErrorKind::DegenerateProfile, "r_hat vanishes at t_hat");
    const double r0sq = r0 * r0;
    const double u0 = profile.at(t_hat);

    long double total = 0.0L;
    for (std::size_t a = windows.m1 + 1; a <= windows.m2; ++a) {
        for (const std::size_t t : {t_hat - a, t_hat + a}) {
            const double r = r_hat(t, t_hat, T);
            const double drift_term = delta_hat * (r * r - r0sq);
            long double dev = static_cast<long double>(profile.at(t)) - u0 - drift_term;
            // Residuals at rounding level are zero; keeps Xi_hat exactly 0 on noiseless steps.
            const double size = std::abs(profile.at(t)) + std::abs(u0) + std::abs(drift_term);
            if (std::abs(static_cast<double>(dev)) <= kRoundingSlack * size) dev = 0.0L;
            total += dev * dev / (4.0L * static_cast<long double>(a) * r0sq);
        }
    }
    return static_cast<double>(total / (2.0L * static_cast<long double>(windows.m2 - windows.m1)));
}

double estimate_xi(const PanelData& panel, std::size_t t_hat, const WindowConfig& windows) {
    return estimate_xi(cusum_profile(panel), t_hat, estimate_delta(panel, t_hat), windows);
}

WindowConfig default_windows(std::size_t T, std::size_t t_hat, double delta_hat) {
    if (!(delta_hat > 0.0)) {
        throw Error(ErrorKind::DegenerateProfile, "default windows need delta_hat > 0");
    }
    require_break_inside(t_hat, T);
    std::size_t m1 = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::log(static_cast<double>(T)))));
    const double width = std::min(std::floor(std::sqrt(static_cast<double>(T)) / delta_hat),
                                  static_cast<double>(T));
    std::size_t m2 = m1 + std::max<std::size_t>(2, static_cast<std::size_t>(width));
    const std::size_t room = std::min(t_hat, T - t_hat);
    if (room < 2) {
        throw Error(ErrorKind::WindowOutOfRange,
                    "t_hat = " + std::to_string(t_hat) + " leaves no room for a window in [1, " +
                        std::to_string(T) + "]");
    }
    m2 = std::min(m2, room - 1);
    // Near an end point the inner window gives way first; m1 = 0 keeps the lags +-1.
    if (m1 >= m2) m1 = m2 - 1;
    return {m1, m2};
}

std::size_t default_bandwidth(std::size_t T) {
    return static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(T)) + 1e-9));
}

double long_run_variance(std::span<const double> series, std::size_t bandwidth, Kernel kernel,
                         std::optional<std::size_t> brk) {
    const std::size_t T = series.size();
    if (T < 2 || bandwidth >= T) {
        throw Error(ErrorKind::InvalidBandwidth, "bandwidth " + std::to_string(bandwidth) +
                                                     " must be below the series length " +
                                                     std::to_string(T));
    }
    std::vector<long double> x(series.begin(), series.end());
    auto demean = [&](std::size_t begin, std::size_t end) {
        long double m = 0.0L;
        for (std::size_t t = begin; t < end; ++t) m += x[t];
        m /= static_cast<long double>(end - begin);
        for (std::size_t t = begin; t < end; ++t) x[t] -= m;
    };
    if (brk && *brk >= 1 && *brk < T) {
        demean(0, *brk);
        demean(*brk, T);
    } else {
        demean(0, T);
    }

    auto autocov = [&](std::size_t h) {
        long double s = 0.0L;
        for (std::size_t t = h; t < T; ++t) s += x[t] * x[t - h];
        return s / static_cast<long double>(T);
    };

    long double lrv = autocov(0);
    switch (kernel) {
        case Kernel::bartlett:
            for (std::size_t h = 1; h <= bandwidth; ++h) {
                const long double w = 1.0L - static_cast<long double>(h) / static_cast<long double>(bandwidth + 1);
                lrv += 2.0L * w * autocov(h);
            }
            break;
    }
    return std::max(static_cast<double>(lrv), kVarianceFloor);
}

std::vector<double> panel_long_run_variances(const PanelData& panel, std::size_t t_hat,
                                             std::size_t bandwidth) {
    require_break_inside(t_hat, panel.n_times());
    std::vector<double> out(panel.n_panels());
    for (std::size_t i = 0; i < panel.n_panels(); ++i) {
        out[i] = long_run_variance(panel.panel(i), bandwidth, Kernel::bartlett, t_hat);
    }
    return out;
}

double estimate_xi_weak(const PanelData& panel, std::size_t t_hat, std::size_t bandwidth) {
    const auto sigma2 = panel_long_run_variances(panel, t_hat, bandwidth);
    long double total = 0.0L;
    for (std::size_t i = 0; i < panel.n_panels(); ++i) {
        const long double c = mean_contrast(panel.panel(i), t_hat);
        total += sigma2[i] * c * c;
    }
    return static_cast<double>(total);
}

NormingQuantities estimate_norming(const PanelData& panel, const CusumProfile& profile,
                                   std::size_t t_hat, std::optional<std::size_t> m1_override,
                                   std::optional<std::size_t> m2_override) {
    NormingQuantities q;
    q.delta_hat = estimate_delta(panel, t_hat);
    const std::size_t T = panel.n_times();
    if (m1_override && m2_override) {
        q.windows = {*m1_override, *m2_override};
    } else {
        q.windows = default_windows(T, t_hat, q.delta_hat);
        if (m1_override) {
            q.windows.m2 = *m1_override + (q.windows.m2 - q.windows.m1);
            q.windows.m1 = *m1_override;
        }
        if (m2_override) q.windows.m2 = *m2_override;
    }
    q.xi_hat = estimate_xi(profile, t_hat, q.delta_hat, q.windows);
    return q;
}

}  // namespace panelbreak
