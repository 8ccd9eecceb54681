#pragma once

#include "panelbreak/core.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace panelbreak {

/// Lag window M1 < |v| <= M2 around the estimated break used by the Xi estimator.
struct WindowConfig {
    std::size_t m1 = 1;
    std::size_t m2 = 2;

    friend bool operator==(const WindowConfig&, const WindowConfig&) = default;
};

struct NormingQuantities {
    double delta_hat = 0.0;
    double xi_hat = 0.0;
    std::optional<std::vector<double>> sigma2_hat;
    WindowConfig windows;
};

enum class Kernel { bartlett };

inline constexpr double kVarianceFloor = 1e-12;

/// Sum over panels of the squared difference between the pre- and post-break means.
[[nodiscard]] double estimate_delta(const PanelData& panel, std::size_t t_hat);

/// Difference between the pre- and post-break means of one series.
[[nodiscard]] double mean_contrast(std::span<const double> series, std::size_t t_hat);

/// -t (T - t_hat) / T + (t - t_hat) 1{t > t_hat}, for 0 <= t <= T.
[[nodiscard]] double r_hat(std::size_t t, std::size_t t_hat, std::size_t T);

/// Checks m1 < m2 < min(t_hat, T - t_hat).
void check_windows(const WindowConfig& windows, std::size_t t_hat, std::size_t T);

/**
 * Window estimate of Xi = sum sigma_i^2 delta_i^2 + (sum delta_i gamma_i)^2:
 *
 *   1/(2(M2-M1)) sum_{M1<|v|<=M2} [U(t+v) - U(t) - D (r^2(t+v) - r^2)]^2 / (4 |v| r^2)
 *
 * with t = t_hat, D = delta_hat and r = r_hat(t_hat, t_hat, T).
 */
[[nodiscard]] double estimate_xi(const CusumProfile& profile, std::size_t t_hat, double delta_hat,
                                 const WindowConfig& windows);
[[nodiscard]] double estimate_xi(const PanelData& panel, std::size_t t_hat,
                                 const WindowConfig& windows);

/// m1 = max(1, floor(log T)); m2 = m1 + max(2, floor(sqrt(T)/delta_hat)). Near an end point
/// m2 is clipped to fit and m1 drops below it, down to 0.
[[nodiscard]] WindowConfig default_windows(std::size_t T, std::size_t t_hat, double delta_hat);

[[nodiscard]] std::size_t default_bandwidth(std::size_t T);

/**
 * Kernel long-run variance of `series`. The series is demeaned globally, or
 * separately on [1, brk] and (brk, T] when a break is supplied. Result is
 * floored at kVarianceFloor.
 */
[[nodiscard]] double long_run_variance(std::span<const double> series, std::size_t bandwidth,
                                       Kernel kernel = Kernel::bartlett,
                                       std::optional<std::size_t> brk = std::nullopt);

/// Per-panel long-run variances of the residuals around the segment means at t_hat.
[[nodiscard]] std::vector<double> panel_long_run_variances(const PanelData& panel, std::size_t t_hat,
                                                           std::size_t bandwidth);

/// sum_i sigma_hat_i^2 (mean contrast of panel i at t_hat)^2, for weakly interacting panels.
[[nodiscard]] double estimate_xi_weak(const PanelData& panel, std::size_t t_hat,
                                      std::size_t bandwidth);

/// Delta-hat, default (or overridden) windows and Xi-hat in one pass.
[[nodiscard]] NormingQuantities estimate_norming(const PanelData& panel, const CusumProfile& profile,
                                                 std::size_t t_hat,
                                                 std::optional<std::size_t> m1_override = std::nullopt,
                                                 std::optional<std::size_t> m2_override = std::nullopt);

}  // namespace panelbreak
