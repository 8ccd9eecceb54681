#pragma once

#include "panelbreak/core.hpp"
#include "panelbreak/limitdist.hpp"
#include "panelbreak/matrix.hpp"
#include "panelbreak/random.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace panelbreak {

/**
 * @brief Stationary error process for one panel (or for the common factor).
 *
 * Supported kinds:
 * - zero: e = 0, for exact tests;
 * - iid_normal: sigma * z;
 * - ar1: e_t = phi e_{t-1} + sigma z_t, started from its stationary law;
 * - ma: e_t = sum_l c_l sigma z_{t-l} (finite coefficient list, c_0 first);
 * - garch11: e_t = sqrt(h_t) z_t, h_t = omega + alpha e_{t-1}^2 + beta h_{t-1},
 *   started at the unconditional variance omega / (1 - alpha - beta).
 *
 * alpha + beta < 1 gives a finite variance only; heavier moment conditions
 * (fourth moments for the CUSUM theory) are the caller's responsibility.
 */
class ErrorProcessSpec {
public:
    enum class Kind { zero, iid_normal, ar1, ma, garch11 };

    [[nodiscard]] static ErrorProcessSpec zero();
    [[nodiscard]] static ErrorProcessSpec iid_normal(double sigma);
    [[nodiscard]] static ErrorProcessSpec ar1(double phi, double sigma, std::size_t burn_in = 0);
    [[nodiscard]] static ErrorProcessSpec ma(std::vector<double> coeffs, double sigma);
    [[nodiscard]] static ErrorProcessSpec garch11(double omega, double alpha, double beta,
                                                  std::size_t burn_in = 500);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] double sigma() const noexcept { return sigma_; }
    [[nodiscard]] double phi() const noexcept { return phi_; }
    [[nodiscard]] const std::vector<double>& coeffs() const noexcept { return coeffs_; }
    [[nodiscard]] double omega() const noexcept { return omega_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double beta() const noexcept { return beta_; }
    [[nodiscard]] std::size_t burn_in() const noexcept { return burn_in_; }

    /// lim t^{-1} Var(sum_{s<=t} e_s) in closed form.
    [[nodiscard]] double long_run_variance() const noexcept;

    /// One path of length T.
    void fill(std::span<double> out, Rng& rng) const;

    friend bool operator==(const ErrorProcessSpec&, const ErrorProcessSpec&) = default;

private:
    ErrorProcessSpec() = default;

    Kind kind_ = Kind::zero;
    double sigma_ = 0.0;
    double phi_ = 0.0;
    std::vector<double> coeffs_;
    double omega_ = 0.0;
    double alpha_ = 0.0;
    double beta_ = 0.0;
    std::size_t burn_in_ = 0;
};

[[nodiscard]] std::string_view to_string(ErrorProcessSpec::Kind kind) noexcept;

/// N independent rows of length T drawn from `rng` in row order.
[[nodiscard]] Matrix gen_errors(const ErrorProcessSpec& spec, std::size_t N, std::size_t T, Rng& rng);

struct SimulationConfig {
    std::size_t N = 1;
    std::size_t T = 3;
    double theta = 0.5;
    std::vector<double> mu;     ///< length N
    std::vector<double> delta;  ///< length N
    std::vector<double> gamma;  ///< length N
    ErrorProcessSpec error = ErrorProcessSpec::iid_normal(1.0);
    ErrorProcessSpec factor = ErrorProcessSpec::iid_normal(1.0);
    std::size_t n_rep = 1000;
    std::uint64_t seed = 1;

    /// Config with scalar mu/delta/gamma broadcast to all N panels.
    [[nodiscard]] static SimulationConfig broadcast(std::size_t N, std::size_t T, double theta,
                                                    double mu, double delta, double gamma);

    /// floor(T theta).
    [[nodiscard]] std::size_t t0() const noexcept;

    /// Delta = sum delta_i^2.
    [[nodiscard]] double true_delta() const noexcept;
    /// Xi = sum sigma_i^2 delta_i^2 + s_eta^2 (sum delta_i gamma_i)^2, from closed-form long-run variances.
    [[nodiscard]] double true_xi() const noexcept;

    /// Throws InvalidSpec naming the offending field.
    void validate() const;
};

struct GeneratedPanel {
    PanelData panel;
    GroundTruth truth;
};

/// Replicate `replicate` of the model; depends only on (config, replicate).
[[nodiscard]] GeneratedPanel gen_panel(const SimulationConfig& config, std::size_t replicate);

struct CoverageReport {
    SimulationConfig config;
    bool use_true_norming = true;
    std::vector<double> probabilities;  ///< 0.90, 0.95, 0.99
    std::vector<double> thresholds;     ///< table quantiles at those probabilities
    std::vector<double> coverage;       ///< percentages in [0, 100]
    std::size_t n_rep = 0;
    std::size_t failed = 0;  ///< replicates whose norming could not be estimated
    double exact_hits = 0.0; ///< fraction of replicates with t_hat == t0
    QuantileTable table;
    static constexpr std::string_view convention = "one-sided: P(Z <= q_p), Z = Delta^2 (t_hat - t0) / Xi";
};

/**
 * For each replicate, Z = Delta^2 (t_hat - t0) / Xi (true norming) or
 * Delta_hat^2 (t_hat - t0) / Xi_hat (estimated, default windows), and reports
 * the percentage of replicates with Z <= q_p for p = 0.90, 0.95, 0.99.
 */
[[nodiscard]] CoverageReport run_coverage_experiment(const SimulationConfig& config,
                                                     const QuantileTable& table,
                                                     bool use_true_norming, unsigned threads = 1);

struct HistogramResult {
    SimulationConfig config;
    double scale = 0.0;               ///< Xi / Delta^2
    std::vector<int> deviations;      ///< t_hat - t0 per replicate
    std::vector<double> limit_samples;  ///< scale * argmax draws
    std::vector<int> bins;            ///< integer deviation values
    std::vector<double> frequencies;  ///< relative frequency per bin
    std::vector<double> density_x;
    std::vector<double> density;      ///< smoothed density of the scaled limit
    double ks_distance = 0.0;         ///< deviations vs rounded scaled limit draws
    ContinuousGrid grid;
    std::size_t limit_n_rep = 0;
    std::uint64_t limit_seed = 0;
};

/**
 * Replicate values of t_hat - t0 next to the continuous limit law scaled by
 * Xi / Delta^2, as plot-ready columns.
 */
[[nodiscard]] HistogramResult run_histogram_experiment(const SimulationConfig& config,
                                                       ContinuousGrid grid, std::size_t limit_n_rep,
                                                       std::uint64_t limit_seed,
                                                       unsigned threads = 1);

/// Two-sample Kolmogorov-Smirnov distance, with ties handled exactly.
[[nodiscard]] double ks_distance(std::vector<double> a, std::vector<double> b);

/// Gaussian kernel density of `samples` at `x` with Silverman's bandwidth.
[[nodiscard]] std::vector<double> kernel_density(std::span<const double> samples,
                                                 std::span<const double> x);

[[nodiscard]] nlohmann::json to_json(const ErrorProcessSpec& spec);
[[nodiscard]] nlohmann::json to_json(const SimulationConfig& config);
[[nodiscard]] nlohmann::json to_json(const CoverageReport& report);
[[nodiscard]] nlohmann::json to_json(const HistogramResult& result);

/// Parses an error-process section; field paths in errors are prefixed by `path`.
[[nodiscard]] ErrorProcessSpec error_spec_from_json(const nlohmann::json& doc, const std::string& path);
/// Parses the model part of a simulation config file (N, T, theta, mu, delta, gamma, error, factor, n_rep, seed).
[[nodiscard]] SimulationConfig simulation_config_from_json(const nlohmann::json& doc);

}  // namespace panelbreak
