#pragma once

#include "panelbreak/matrix.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace panelbreak {

/**
 * @brief N x T panel of observations X(i, t).
 *
 * Rows are panels, columns are time points 1..T. Construction rejects
 * non-finite entries, so a PanelData value never carries missing data.
 */
class PanelData {
public:
    /// Labels default to "1".."N" and "1".."T".
    explicit PanelData(Matrix values);
    PanelData(Matrix values, std::vector<std::string> panel_ids, std::vector<std::string> time_ids);

    /// Builds a panel from row vectors, one per panel.
    [[nodiscard]] static PanelData from_rows(const std::vector<std::vector<double>>& rows);

    [[nodiscard]] std::size_t n_panels() const noexcept { return values_.rows(); }
    [[nodiscard]] std::size_t n_times() const noexcept { return values_.cols(); }

    [[nodiscard]] const Matrix& values() const noexcept { return values_; }
    [[nodiscard]] std::span<const double> panel(std::size_t i) const noexcept { return values_.row(i); }
    [[nodiscard]] const std::vector<std::string>& panel_ids() const noexcept { return panel_ids_; }
    [[nodiscard]] const std::vector<std::string>& time_ids() const noexcept { return time_ids_; }

    /// Copy with the time axis reversed in every panel.
    [[nodiscard]] PanelData reversed() const;

    /// Copy restricted to time points [begin, end) (zero-based columns).
    [[nodiscard]] PanelData slice(std::size_t begin, std::size_t end) const;

private:
    Matrix values_;
    std::vector<std::string> panel_ids_;
    std::vector<std::string> time_ids_;
};

/// U_N(t) for t = 1..T-1, plus optionally the centred partial sums behind it.
struct CusumProfile {
    /// u[t - 1] holds U_N(t).
    std::vector<double> u;
    /// N x (T-1) matrix of D_i(t) = S_i(t) - (t/T) S_i(T), when retained.
    std::optional<Matrix> d;

    [[nodiscard]] double at(std::size_t t) const { return u.at(t - 1); }
};

enum class Method { cusum_sum, bai_weighted };

[[nodiscard]] std::string_view to_string(Method method) noexcept;
[[nodiscard]] Method method_from_string(std::string_view name);

struct ChangePointEstimate {
    std::size_t t_hat = 0;  ///< in [1, T-1]
    Method method = Method::cusum_sum;
    double objective_at_t_hat = 0.0;
};

/// The ingredients of the mean-shift model, used to generate and to check panels.
struct GroundTruth {
    std::vector<double> mu;
    std::vector<double> delta;
    std::vector<double> gamma;
    std::size_t t0 = 0;
    std::vector<double> eta;  ///< common factor, length T
    Matrix e;                 ///< idiosyncratic errors, N x T

    [[nodiscard]] std::size_t n_panels() const noexcept { return mu.size(); }
    [[nodiscard]] std::size_t n_times() const noexcept { return eta.size(); }

    /// Throws DimensionMismatch when the pieces do not fit together.
    void validate() const;
};

/// X(i,t) = mu_i + delta_i 1{t > t0} + gamma_i eta_t + e(i,t).
[[nodiscard]] PanelData reconstruct(const GroundTruth& truth);

struct Decomposition {
    Matrix q;               ///< centred partial sums of the errors, N x T
    std::vector<double> v;  ///< centred partial sums of the factor, length T
    std::vector<double> r;  ///< deterministic shift profile, length T
};

/// S_i(t) for t = 1..T; column t-1 holds S_i(t).
[[nodiscard]] Matrix partial_sums(const PanelData& panel);

[[nodiscard]] CusumProfile cusum_profile(const PanelData& panel, bool keep_per_panel = false);

/// argmax over 1 <= t < T of U_N(t); smallest index on ties.
[[nodiscard]] ChangePointEstimate estimate_changepoint(const PanelData& panel);
[[nodiscard]] ChangePointEstimate estimate_changepoint(const CusumProfile& profile);

/// argmax over 1 <= t < T of U_N(t) / (t (T - t)); smallest index on ties.
[[nodiscard]] ChangePointEstimate estimate_changepoint_bai(const PanelData& panel);
[[nodiscard]] ChangePointEstimate estimate_changepoint_bai(const CusumProfile& profile);

[[nodiscard]] ChangePointEstimate estimate(const PanelData& panel, Method method);

/// r(t) = -t (T - t0) / T + (t - t0) 1{t > t0}.
[[nodiscard]] double shift_profile(std::size_t t, std::size_t t0, std::size_t T) noexcept;

/**
 * Splits the centred partial sums of a generated panel as
 *   D_i(t) = Q_i(t) + gamma_i V(t) + delta_i r(t),
 * with column t-1 of each piece holding its value at time t.
 */
[[nodiscard]] Decomposition decompose(const GroundTruth& truth);

/**
 * Recursive single-break search. A segment of length L is split at its
 * CUSUM-sum argmax when max U / (L^2 N) exceeds `threshold`; candidates keep
 * at least `min_segment` points on each side. Returns sorted break indices
 * (a break at t means the new regime starts at t + 1).
 */
[[nodiscard]] std::vector<std::size_t> binary_segmentation(const PanelData& panel,
                                                           std::size_t min_segment,
                                                           std::size_t max_depth, double threshold);

}  // namespace panelbreak
