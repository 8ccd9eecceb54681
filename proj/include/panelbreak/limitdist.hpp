#pragma once

#include "panelbreak/matrix.hpp"
#include "panelbreak/random.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace panelbreak {

/// Tent drift: (1 - theta)|u| for u < 0, theta u for u >= 0.
[[nodiscard]] double drift(double theta, double u) noexcept;

// ---------------------------------------------------------------------------
// Continuous law: argmax_u { W(u) - drift(theta, u) }, W two-sided Wiener.
// ---------------------------------------------------------------------------

struct ContinuousGrid {
    double halfwidth = 100.0;  ///< C
    double step = 0.02;        ///< h
    /// Stretch each side by c = 1 / (4 slope^2); the slope-1/2 side keeps (C, h).
    bool per_side = false;

    friend bool operator==(const ContinuousGrid&, const ContinuousGrid&) = default;
};

/**
 * Grid for tabulating the law at theta: C = 100, h = 0.02, per side.
 * By Brownian scaling the side with slope a is the slope-1/2 side stretched
 * by 1 / (4 a^2), so every theta costs and resolves like theta = 1/2.
 */
[[nodiscard]] ContinuousGrid default_grid(double theta);

/// Grid step on the left (u < 0) or right side.
[[nodiscard]] double side_step(double theta, const ContinuousGrid& grid, bool left) noexcept;

struct ContinuousSamples {
    double theta = 0.5;
    ContinuousGrid grid;
    std::uint64_t seed = 0;
    std::vector<double> values;
    std::size_t boundary_hits = 0;  ///< samples at the last grid point of either side

    /// True when more than 0.1% of the samples hit the grid boundary.
    [[nodiscard]] bool saturated() const noexcept;
};

/**
 * Draws n_rep argmax locations on the grid {-C, -C+h, ..., C}. Each replicate
 * builds a path from its own substream of `seed`: independent halves pinned at
 * zero with N(0, h) increments. Ties go to the smallest u.
 *
 * Throws GridTooCoarse when h > 0.1 and InvalidArgument on other bad input.
 */
[[nodiscard]] ContinuousSamples simulate_argmax_continuous(double theta, ContinuousGrid grid,
                                                           std::size_t n_rep, std::uint64_t seed,
                                                           unsigned threads = 1);

/// One replicate of the continuous law from an explicit generator.
[[nodiscard]] double sample_argmax_continuous(double theta, const ContinuousGrid& grid, Rng& rng);

// ---------------------------------------------------------------------------
// Discrete laws on the integers -K..K.
// ---------------------------------------------------------------------------

enum class Regime { continuous, discrete_G, discrete_G_plus_V };

struct LimitLawSpec {
    double theta = 0.5;
    Regime regime = Regime::discrete_G;
    double d = 1.0;       ///< limit of Delta
    double s = 0.0;       ///< loading/break cross-product ratio, used by discrete_G_plus_V
    double sigma2 = 1.0;  ///< per-step variance in uncorrelated mode
    /// Covariance of G on lags -K..K ((2K+1) x (2K+1)); empty means independent
    /// increments with per-step variance sigma2.
    std::optional<Matrix> cov;

    void validate() const;
};

using IncrementSampler = std::function<double(Rng&)>;

/// Precomputed square-root factor for the explicit-covariance mode.
class DiscreteSampler {
public:
    /// Throws CovarianceNotPSD when the explicit covariance is unusable.
    DiscreteSampler(LimitLawSpec spec, std::size_t K, IncrementSampler eta = {});

    /// Objective values at t = -K..K (index t + K) for one replicate.
    [[nodiscard]] std::vector<double> objective_path(Rng& rng) const;

    /// argmax of the objective path; smallest t on ties.
    [[nodiscard]] int sample(Rng& rng) const;

    [[nodiscard]] std::size_t K() const noexcept { return K_; }
    [[nodiscard]] const LimitLawSpec& spec() const noexcept { return spec_; }

private:
    LimitLawSpec spec_;
    std::size_t K_;
    IncrementSampler eta_;
    Matrix factor_;  // (2K+1) x (2K+1), empty in uncorrelated mode
};

struct DiscreteSamples {
    LimitLawSpec spec;
    std::size_t K = 0;
    std::uint64_t seed = 0;
    std::vector<int> values;
    std::size_t boundary_hits = 0;  ///< samples sitting at +-K

    [[nodiscard]] bool saturated() const noexcept;
};

[[nodiscard]] DiscreteSamples simulate_argmax_discrete(const LimitLawSpec& spec, std::size_t K,
                                                       std::size_t n_rep, std::uint64_t seed,
                                                       unsigned threads = 1,
                                                       IncrementSampler eta = {});

// ---------------------------------------------------------------------------
// Quantile tables and confidence intervals.
// ---------------------------------------------------------------------------

struct QuantileTable {
    double theta = 0.5;
    std::vector<double> probabilities;  ///< sorted, in (0, 1)
    std::vector<double> quantiles;
    std::size_t n_rep = 0;
    double grid_halfwidth = 0.0;
    double grid_step = 0.0;
    bool grid_per_side = false;
    std::uint64_t seed = 0;
    std::size_t boundary_hits = 0;

    /// Quantile at probability p (matched to 1e-9); nullopt when not tabulated.
    [[nodiscard]] std::optional<double> at(double p) const;

    friend bool operator==(const QuantileTable&, const QuantileTable&) = default;
};

/// Probabilities tabulated by default: both tails for 80..99.5% two-sided levels plus the median.
[[nodiscard]] const std::vector<double>& default_probabilities();

/// Nearest-rank quantiles: q_p = x_(ceil(p n)). Throws EmptySamples.
[[nodiscard]] std::vector<double> nearest_rank_quantiles(std::vector<double> samples,
                                                         std::span<const double> probabilities);

[[nodiscard]] QuantileTable quantiles(const ContinuousSamples& samples,
                                      std::span<const double> probabilities);

/// Simulates the continuous law and tabulates it.
[[nodiscard]] QuantileTable build_quantile_table(double theta, ContinuousGrid grid,
                                                 std::size_t n_rep, std::uint64_t seed,
                                                 unsigned threads = 1,
                                                 std::span<const double> probabilities = {});

/// Table of the law at 1 - theta, using argmax(theta) = -argmax(1 - theta) in law.
[[nodiscard]] QuantileTable reflect(const QuantileTable& table);

inline constexpr int kQuantileTableVersion = 1;

[[nodiscard]] nlohmann::json to_json(const QuantileTable& table);
[[nodiscard]] QuantileTable quantile_table_from_json(const nlohmann::json& doc);

/// Tables on a theta grid, looked up by nearest theta.
class QuantileTableSet {
public:
    QuantileTableSet() = default;
    explicit QuantileTableSet(std::vector<QuantileTable> tables);

    [[nodiscard]] const QuantileTable& nearest(double theta) const;
    [[nodiscard]] const std::vector<QuantileTable>& tables() const noexcept { return tables_; }
    [[nodiscard]] bool empty() const noexcept { return tables_.empty(); }

private:
    std::vector<QuantileTable> tables_;
};

[[nodiscard]] nlohmann::json to_json(const QuantileTableSet& set);
/// Accepts either a single table document or a table-set document.
[[nodiscard]] QuantileTableSet quantile_table_set_from_json(const nlohmann::json& doc);

struct ConfidenceInterval {
    double level = 0.9;
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool singleton = false;
};

/**
 * Interval for t0 from Delta_hat^2 (t_hat - t0) / Xi_hat ~ Z:
 * [t_hat - q_{1-a/2} s, t_hat - q_{a/2} s] with s = Xi_hat / Delta_hat^2,
 * rounded outward and clipped to [1, T]. When the unclipped width is below
 * one the interval is {t_hat}.
 */
[[nodiscard]] ConfidenceInterval confidence_interval(std::size_t t_hat, std::size_t T,
                                                     double delta_hat, double xi_hat, double level,
                                                     const QuantileTable& table);

}  // namespace panelbreak
