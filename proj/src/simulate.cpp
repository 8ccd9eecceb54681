#include "panelbreak/simulate.hpp"

#include "panelbreak/error.hpp"
#include "panelbreak/norming.hpp"
#include "panelbreak/parallel.hpp"

#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace panelbreak {

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& what) {
    throw Error(ErrorKind::InvalidSpec, field + ": " + what);
}

double normal_draw(Rng& rng) {
    return boost::random::normal_distribution<double>()(rng);
}

constexpr double kCoverageProbabilities[] = {0.90, 0.95, 0.99};

}  // namespace

// ---------------------------------------------------------------------------
// Error processes
// ---------------------------------------------------------------------------

std::string_view to_string(ErrorProcessSpec::Kind kind) noexcept {
    switch (kind) {
        case ErrorProcessSpec::Kind::zero: return "zero";
        case ErrorProcessSpec::Kind::iid_normal: return "iid_normal";
        case ErrorProcessSpec::Kind::ar1: return "ar1";
        case ErrorProcessSpec::Kind::ma: return "ma";
        case ErrorProcessSpec::Kind::garch11: return "garch11";
    }
    return "unknown";
}

ErrorProcessSpec ErrorProcessSpec::zero() { return ErrorProcessSpec(); }

ErrorProcessSpec ErrorProcessSpec::iid_normal(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) invalid("sigma", "must be positive");
    ErrorProcessSpec s;
    s.kind_ = Kind::iid_normal;
    s.sigma_ = sigma;
    return s;
}

ErrorProcessSpec ErrorProcessSpec::ar1(double phi, double sigma, std::size_t burn_in) {
    if (!(std::abs(phi) < 1.0)) invalid("phi", "AR(1) needs |phi| < 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) invalid("sigma", "must be positive");
    ErrorProcessSpec s;
    s.kind_ = Kind::ar1;
    s.phi_ = phi;
    s.sigma_ = sigma;
    s.burn_in_ = burn_in;
    return s;
}

ErrorProcessSpec ErrorProcessSpec::ma(std::vector<double> coeffs, double sigma) {
    if (coeffs.empty()) invalid("coeffs", "MA needs at least one coefficient");
    if (!std::all_of(coeffs.begin(), coeffs.end(), [](double c) { return std::isfinite(c); })) {
        invalid("coeffs", "must be finite");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) invalid("sigma", "must be positive");
    ErrorProcessSpec s;
    s.kind_ = Kind::ma;
    s.coeffs_ = std::move(coeffs);
    s.sigma_ = sigma;
    return s;
}

ErrorProcessSpec ErrorProcessSpec::garch11(double omega, double alpha, double beta,
                                           std::size_t burn_in) {
    if (!(omega > 0.0) || !std::isfinite(omega)) invalid("omega", "must be positive");
    if (!(alpha >= 0.0)) invalid("alpha", "must be non-negative");
    if (!(beta >= 0.0)) invalid("beta", "must be non-negative");
    if (!(alpha + beta < 1.0)) invalid("alpha", "GARCH(1,1) needs alpha + beta < 1");
    ErrorProcessSpec s;
    s.kind_ = Kind::garch11;
    s.omega_ = omega;
    s.alpha_ = alpha;
    s.beta_ = beta;
    s.burn_in_ = burn_in;
    return s;
}

double ErrorProcessSpec::long_run_variance() const noexcept {
    switch (kind_) {
        case Kind::zero: return 0.0;
        case Kind::iid_normal: return sigma_ * sigma_;
        case Kind::ar1: return sigma_ * sigma_ / ((1.0 - phi_) * (1.0 - phi_));
        case Kind::ma: {
            const double c = std::accumulate(coeffs_.begin(), coeffs_.end(), 0.0);
            return c * c * sigma_ * sigma_;
        }
        case Kind::garch11: return omega_ / (1.0 - alpha_ - beta_);
    }
    return 0.0;
}

void ErrorProcessSpec::fill(std::span<double> out, Rng& rng) const {
    switch (kind_) {
        case Kind::zero:
            std::fill(out.begin(), out.end(), 0.0);
            return;
        case Kind::iid_normal:
            for (double& x : out) x = sigma_ * normal_draw(rng);
            return;
        case Kind::ar1: {
            double e = sigma_ / std::sqrt(1.0 - phi_ * phi_) * normal_draw(rng);
            for (std::size_t k = 0; k < burn_in_; ++k) e = phi_ * e + sigma_ * normal_draw(rng);
            for (double& x : out) {
                e = phi_ * e + sigma_ * normal_draw(rng);
                x = e;
            }
            return;
        }
        case Kind::ma: {
            const std::size_t q = coeffs_.size() - 1;
            std::vector<double> z(out.size() + q);
            for (double& v : z) v = sigma_ * normal_draw(rng);
            for (std::size_t t = 0; t < out.size(); ++t) {
                double s = 0.0;
                for (std::size_t l = 0; l <= q; ++l) s += coeffs_[l] * z[t + q - l];
                out[t] = s;
            }
            return;
        }
        case Kind::garch11: {
            double h = omega_ / (1.0 - alpha_ - beta_);
            double e = std::sqrt(h) * normal_draw(rng);
            auto step = [&] {
                h = omega_ + alpha_ * e * e + beta_ * h;
                e = std::sqrt(h) * normal_draw(rng);
            };
            for (std::size_t k = 0; k < burn_in_; ++k) step();
            for (double& x : out) {
                step();
                x = e;
            }
            return;
        }
    }
}

Matrix gen_errors(const ErrorProcessSpec& spec, std::size_t N, std::size_t T, Rng& rng) {
    Matrix e(N, T);
    for (std::size_t i = 0; i < N; ++i) spec.fill(e.row(i), rng);
    return e;
}

// ---------------------------------------------------------------------------
// Model configuration and panel generation
// ---------------------------------------------------------------------------

SimulationConfig SimulationConfig::broadcast(std::size_t N, std::size_t T, double theta, double mu,
                                             double delta, double gamma) {
    SimulationConfig c;
    c.N = N;
    c.T = T;
    c.theta = theta;
    c.mu.assign(N, mu);
    c.delta.assign(N, delta);
    c.gamma.assign(N, gamma);
    return c;
}

std::size_t SimulationConfig::t0() const noexcept {
    return static_cast<std::size_t>(std::floor(static_cast<double>(T) * theta));
}

double SimulationConfig::true_delta() const noexcept {
    double s = 0.0;
    for (double d : delta) s += d * d;
    return s;
}

double SimulationConfig::true_xi() const noexcept {
    const double s2 = error.long_run_variance();
    double own = 0.0;
    double cross = 0.0;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        own += s2 * delta[i] * delta[i];
        cross += delta[i] * gamma[i];
    }
    return own + factor.long_run_variance() * cross * cross;
}

void SimulationConfig::validate() const {
    if (N < 1) invalid("N", "must be at least 1");
    if (T < 3) invalid("T", "must be at least 3");
    if (!(theta > 0.0 && theta < 1.0)) invalid("theta", "must lie in (0, 1)");
    if (t0() < 1 || t0() > T - 1) invalid("theta", "floor(T theta) must lie in [1, T-1]");
    auto check_vec = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != N) invalid(name, "needs N = " + std::to_string(N) + " entries");
        if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
            invalid(name, "must be finite");
        }
    };
    check_vec(mu, "mu");
    check_vec(delta, "delta");
    check_vec(gamma, "gamma");
    if (n_rep < 1) invalid("n_rep", "must be at least 1");
}

GeneratedPanel gen_panel(const SimulationConfig& config, std::size_t replicate) {
    config.validate();
    Rng rng = substream(config.seed, Stream::panel, replicate);
    GroundTruth truth;
    truth.mu = config.mu;
    truth.delta = config.delta;
    truth.gamma = config.gamma;
    truth.t0 = config.t0();
    truth.e = gen_errors(config.error, config.N, config.T, rng);
    truth.eta.resize(config.T);
    config.factor.fill(truth.eta, rng);
    PanelData panel = reconstruct(truth);
    return {std::move(panel), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

CoverageReport run_coverage_experiment(const SimulationConfig& config, const QuantileTable& table,
                                       bool use_true_norming, unsigned threads) {
    config.validate();
    if (std::abs(table.theta - config.theta) > 1e-9) {
        invalid("theta", "quantile table was built for theta = " + std::to_string(table.theta));
    }

    CoverageReport report;
    report.config = config;
    report.use_true_norming = use_true_norming;
    report.table = table;
    report.n_rep = config.n_rep;
    for (double p : kCoverageProbabilities) {
        const auto q = table.at(p);
        if (!q) throw Error(ErrorKind::MissingQuantiles, "table lacks p = " + std::to_string(p));
        report.probabilities.push_back(p);
        report.thresholds.push_back(*q);
    }

    const std::size_t t0 = config.t0();
    const double delta = config.true_delta();
    const double xi = config.true_xi();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();

    auto statistic = [&](double d, double x, long dev) {
        if (x > 0.0) return d * d * static_cast<double>(dev) / x;
        if (dev == 0) return 0.0;
        return dev > 0 ? inf : -inf;
    };

    std::vector<double> z(config.n_rep, nan);
    std::vector<unsigned char> exact(config.n_rep, 0);
    parallel_for(config.n_rep, threads, [&](std::size_t rep) {
        const GeneratedPanel g = gen_panel(config, rep);
        const CusumProfile profile = cusum_profile(g.panel);
        const std::size_t t_hat = estimate_changepoint(profile).t_hat;
        const long dev = static_cast<long>(t_hat) - static_cast<long>(t0);
        exact[rep] = dev == 0;
        if (use_true_norming) {
            z[rep] = statistic(delta, xi, dev);
            return;
        }
        try {
            const NormingQuantities nq = estimate_norming(g.panel, profile, t_hat);
            z[rep] = statistic(nq.delta_hat, nq.xi_hat, dev);
        } catch (const Error&) {
            z[rep] = nan;
        }
    });

    report.failed = static_cast<std::size_t>(std::count_if(z.begin(), z.end(), [](double v) { return std::isnan(v); }));
    report.exact_hits = static_cast<double>(std::count(exact.begin(), exact.end(), 1)) /
                        static_cast<double>(config.n_rep);
    for (double q : report.thresholds) {
        const auto below = std::count_if(z.begin(), z.end(), [&](double v) { return v <= q; });
        report.coverage.push_back(100.0 * static_cast<double>(below) / static_cast<double>(config.n_rep));
    }
    return report;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw Error(ErrorKind::EmptySamples, "KS distance needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t ia = 0;
    std::size_t ib = 0;
    double d = 0.0;
    while (ia < a.size() && ib < b.size()) {
        const double x = std::min(a[ia], b[ib]);
        while (ia < a.size() && a[ia] == x) ++ia;
        while (ib < b.size() && b[ib] == x) ++ib;
        d = std::max(d, std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb));
    }
    return d;
}

std::vector<double> kernel_density(std::span<const double> samples, std::span<const double> x) {
    std::vector<double> out(x.size(), 0.0);
    if (samples.size() < 2) return out;
    const double n = static_cast<double>(samples.size());
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto q = nearest_rank_quantiles(sorted, std::vector<double>{0.25, 0.75});
    const double iqr = (q[1] - q[0]) / 1.34;
    double spread = iqr > 0.0 ? std::min(sd, iqr) : sd;
    if (!(spread > 0.0)) return out;
    const double bw = 0.9 * spread * std::pow(n, -0.2);
    const double norm = 1.0 / (n * bw * std::sqrt(2.0 * M_PI));
    for (std::size_t k = 0; k < x.size(); ++k) {
        // samples farther than 8 bandwidths contribute below 1e-14
        const auto lo = std::lower_bound(sorted.begin(), sorted.end(), x[k] - 8.0 * bw);
        const auto hi = std::upper_bound(sorted.begin(), sorted.end(), x[k] + 8.0 * bw);
        double s = 0.0;
        for (auto it = lo; it != hi; ++it) {
            const double u = (x[k] - *it) / bw;
            s += std::exp(-0.5 * u * u);
        }
        out[k] = s * norm;
    }
    return out;
}

HistogramResult run_histogram_experiment(const SimulationConfig& config, ContinuousGrid grid,
                                         std::size_t limit_n_rep, std::uint64_t limit_seed,
                                         unsigned threads) {
    config.validate();
    const double delta = config.true_delta();
    if (!(delta > 0.0)) invalid("delta", "histogram needs a nonzero break");
    if (limit_n_rep < 1) invalid("limit_n_rep", "must be at least 1");

    HistogramResult out;
    out.config = config;
    out.grid = grid;
    out.limit_n_rep = limit_n_rep;
    out.limit_seed = limit_seed;
    out.scale = config.true_xi() / (delta * delta);

    const std::size_t t0 = config.t0();
    out.deviations.resize(config.n_rep);
    parallel_for(config.n_rep, threads, [&](std::size_t rep) {
        const GeneratedPanel g = gen_panel(config, rep);
        const std::size_t t_hat = estimate_changepoint(g.panel).t_hat;
        out.deviations[rep] = static_cast<int>(t_hat) - static_cast<int>(t0);
    });

    if (out.scale > 0.0) {
        const ContinuousSamples draws =
            simulate_argmax_continuous(config.theta, grid, limit_n_rep, limit_seed, threads);
        out.limit_samples.reserve(draws.values.size());
        for (double v : draws.values) out.limit_samples.push_back(out.scale * v);
    } else {
        out.limit_samples.assign(limit_n_rep, 0.0);
    }

    const auto [dmin, dmax] = std::minmax_element(out.deviations.begin(), out.deviations.end());
    for (int b = *dmin; b <= *dmax; ++b) {
        const auto c = std::count(out.deviations.begin(), out.deviations.end(), b);
        out.bins.push_back(b);
        out.frequencies.push_back(static_cast<double>(c) / static_cast<double>(config.n_rep));
    }

    if (out.scale > 0.0) {
        const auto lq = nearest_rank_quantiles(out.limit_samples, std::vector<double>{0.005, 0.995});
        const double lo = std::min(static_cast<double>(*dmin), lq[0]);
        const double hi = std::max(static_cast<double>(*dmax), lq[1]);
        constexpr std::size_t points = 401;
        for (std::size_t k = 0; k < points; ++k) {
            out.density_x.push_back(lo + (hi - lo) * static_cast<double>(k) / (points - 1));
        }
        out.density = kernel_density(out.limit_samples, out.density_x);
    }

    std::vector<double> dev(out.deviations.begin(), out.deviations.end());
    std::vector<double> rounded;
    rounded.reserve(out.limit_samples.size());
    for (double v : out.limit_samples) rounded.push_back(std::round(v));
    out.ks_distance = ks_distance(std::move(dev), std::move(rounded));
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const ErrorProcessSpec& spec) {
    nlohmann::json j{{"kind", to_string(spec.kind())}};
    switch (spec.kind()) {
        case ErrorProcessSpec::Kind::zero: break;
        case ErrorProcessSpec::Kind::iid_normal: j["sigma"] = spec.sigma(); break;
        case ErrorProcessSpec::Kind::ar1:
            j["phi"] = spec.phi();
            j["sigma"] = spec.sigma();
            j["burn_in"] = spec.burn_in();
            break;
        case ErrorProcessSpec::Kind::ma:
            j["coeffs"] = spec.coeffs();
            j["sigma"] = spec.sigma();
            break;
        case ErrorProcessSpec::Kind::garch11:
            j["omega"] = spec.omega();
            j["alpha"] = spec.alpha();
            j["beta"] = spec.beta();
            j["burn_in"] = spec.burn_in();
            break;
    }
    return j;
}

nlohmann::json to_json(const SimulationConfig& config) {
    return {{"N", config.N},         {"T", config.T},         {"theta", config.theta},
            {"mu", config.mu},       {"delta", config.delta}, {"gamma", config.gamma},
            {"error", to_json(config.error)}, {"factor", to_json(config.factor)},
            {"n_rep", config.n_rep}, {"seed", config.seed}};
}

nlohmann::json to_json(const CoverageReport& report) {
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t k = 0; k < report.probabilities.size(); ++k) {
        levels.push_back({{"probability", report.probabilities[k]},
                          {"quantile", report.thresholds[k]},
                          {"coverage_percent", report.coverage[k]}});
    }
    return {{"schema", "panelbreak.coverage_report"},
            {"version", 1},
            {"config", to_json(report.config)},
            {"use_true_norming", report.use_true_norming},
            {"convention", report.convention},
            {"n_rep", report.n_rep},
            {"failed_replicates", report.failed},
            {"exact_hit_fraction", report.exact_hits},
            {"levels", levels},
            {"quantile_table", to_json(report.table)}};
}

nlohmann::json to_json(const HistogramResult& result) {
    return {{"schema", "panelbreak.histogram"},
            {"version", 1},
            {"config", to_json(result.config)},
            {"scale", result.scale},
            {"limit", {{"grid_halfwidth", result.grid.halfwidth},
                       {"grid_step", result.grid.step},
                       {"grid_per_side", result.grid.per_side},
                       {"n_rep", result.limit_n_rep},
                       {"seed", result.limit_seed}}},
            {"ks_distance", result.ks_distance},
            {"deviations", result.deviations},
            {"histogram", {{"bin", result.bins}, {"frequency", result.frequencies}}},
            {"density", {{"x", result.density_x}, {"y", result.density}}}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& doc, const std::string& key, const std::string& path) {
    if (!doc.contains(key)) throw Error(ErrorKind::ConfigError, path + key + ": missing");
    return doc[key];
}

double number_field(const nlohmann::json& doc, const std::string& key, const std::string& path) {
    const auto& v = require(doc, key, path);
    if (!v.is_number()) {
        throw Error(ErrorKind::ConfigError, path + key + ": expected a number");
    }
    return v.get<double>();
}

std::size_t count_field(const nlohmann::json& doc, const std::string& key, const std::string& path) {
    const auto& v = require(doc, key, path);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw Error(ErrorKind::ConfigError, path + key + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
}

std::vector<double> per_panel(const nlohmann::json& doc, const std::string& key, std::size_t N,
                              double fallback, bool required) {
    if (!doc.contains(key)) {
        if (required) throw Error(ErrorKind::ConfigError, key + ": missing");
        return std::vector<double>(N, fallback);
    }
    const auto& v = doc[key];
    if (v.is_number()) return std::vector<double>(N, v.get<double>());
    if (v.is_array() && std::all_of(v.begin(), v.end(), [](const auto& x) { return x.is_number(); })) {
        auto out = v.get<std::vector<double>>();
        if (out.size() != N) {
            throw Error(ErrorKind::ConfigError, key + ": needs " + std::to_string(N) + " entries");
        }
        return out;
    }
    throw Error(ErrorKind::ConfigError, key + ": expected a number or an array of numbers");
}

}  // namespace

ErrorProcessSpec error_spec_from_json(const nlohmann::json& doc, const std::string& path) {
    const std::string prefix = path + ".";
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
        throw Error(ErrorKind::ConfigError, prefix + "kind: missing or not a string");
    }
    const std::string kind = doc["kind"];
    try {
        auto opt_count = [&](const char* key, std::size_t fallback) {
            return doc.contains(key) ? count_field(doc, key, prefix) : fallback;
        };
        if (kind == "zero") return ErrorProcessSpec::zero();
        if (kind == "iid_normal") {
            return ErrorProcessSpec::iid_normal(doc.contains("sigma") ? number_field(doc, "sigma", prefix) : 1.0);
        }
        if (kind == "ar1") {
            return ErrorProcessSpec::ar1(number_field(doc, "phi", prefix),
                                         doc.contains("sigma") ? number_field(doc, "sigma", prefix) : 1.0,
                                         opt_count("burn_in", 0));
        }
        if (kind == "ma") {
            if (!doc.contains("coeffs") || !doc["coeffs"].is_array()) {
                throw Error(ErrorKind::ConfigError, prefix + "coeffs: expected an array");
            }
            return ErrorProcessSpec::ma(doc["coeffs"].get<std::vector<double>>(),
                                        doc.contains("sigma") ? number_field(doc, "sigma", prefix) : 1.0);
        }
        if (kind == "garch11") {
            return ErrorProcessSpec::garch11(number_field(doc, "omega", prefix),
                                             number_field(doc, "alpha", prefix),
                                             number_field(doc, "beta", prefix), opt_count("burn_in", 500));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, prefix + "missing field (" + e.what() + ")");
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidSpec) {
            throw Error(ErrorKind::ConfigError, prefix + e.detail());
        }
        throw;
    }
    throw Error(ErrorKind::ConfigError, prefix + "kind: unknown error process '" + kind + "'");
}

SimulationConfig simulation_config_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "config: expected an object");
    SimulationConfig c;
    try {
        for (const char* key : {"N", "T", "theta"}) {
            if (!doc.contains(key)) throw Error(ErrorKind::ConfigError, std::string(key) + ": missing");
        }
        c.N = count_field(doc, "N", "");
        c.T = count_field(doc, "T", "");
        c.theta = number_field(doc, "theta", "");
        c.mu = per_panel(doc, "mu", c.N, 0.0, false);
        c.delta = per_panel(doc, "delta", c.N, 0.0, true);
        c.gamma = per_panel(doc, "gamma", c.N, 0.0, false);
        if (doc.contains("error")) c.error = error_spec_from_json(doc["error"], "error");
        if (doc.contains("factor")) c.factor = error_spec_from_json(doc["factor"], "factor");
        if (doc.contains("n_rep")) c.n_rep = count_field(doc, "n_rep", "");
        if (doc.contains("seed")) c.seed = doc.at("seed").get<std::uint64_t>();
        c.validate();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidSpec) {
            throw Error(ErrorKind::ConfigError, e.detail());
        }
        throw;
    }
    return c;
}

}  // namespace panelbreak
