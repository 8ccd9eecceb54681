#include "panelbreak/limitdist.hpp"

#include "panelbreak/error.hpp"
#include "panelbreak/parallel.hpp"

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace panelbreak {

namespace {

constexpr double kSaturationFraction = 1e-3;

bool over_saturation(std::size_t hits, std::size_t n) {
    return n > 0 && static_cast<double>(hits) > kSaturationFraction * static_cast<double>(n);
}

void require_theta(double theta) {
    if (!(theta > 0.0 && theta < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "theta must lie in (0, 1), got " + std::to_string(theta));
    }
}

std::size_t grid_points(const ContinuousGrid& grid) {
    if (!(grid.step > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid step must be positive");
    if (grid.step > 0.1) {
        throw Error(ErrorKind::GridTooCoarse,
                    "grid step " + std::to_string(grid.step) + " exceeds 0.1");
    }
    if (!(grid.halfwidth > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid halfwidth must be positive");
    const double k = std::round(grid.halfwidth / grid.step);
    if (k < 1.0 || k > 1e9) throw Error(ErrorKind::InvalidArgument, "grid must hold between 1 and 1e9 steps per side");
    return static_cast<std::size_t>(k);
}

}  // namespace

double drift(double theta, double u) noexcept {
    return u < 0.0 ? (1.0 - theta) * -u : theta * u;
}

ContinuousGrid default_grid(double theta) {
    require_theta(theta);
    return {100.0, 0.02, true};
}

namespace {

// Slope of g_theta on one side, snapped so that side `left` at theta and the
// other side at 1 - theta agree bitwise (1 - 0.3 != 0.7 in binary).
double drift_slope(double theta, bool left) noexcept {
    const double slope = left ? 1.0 - theta : theta;
    return std::round(slope * 1e12) / 1e12;
}

}  // namespace

double side_step(double theta, const ContinuousGrid& grid, bool left) noexcept {
    if (!grid.per_side) return grid.step;
    const double slope = drift_slope(theta, left);
    return grid.step / (4.0 * slope * slope);
}

bool ContinuousSamples::saturated() const noexcept {
    return over_saturation(boundary_hits, values.size());
}

bool DiscreteSamples::saturated() const noexcept {
    return over_saturation(boundary_hits, values.size());
}

double sample_argmax_continuous(double theta, const ContinuousGrid& grid, Rng& rng) {
    const std::size_t K = grid_points(grid);
    const double hl = side_step(theta, grid, true);
    const double hr = side_step(theta, grid, false);
    const double left_slope = drift_slope(theta, true) * hl;
    const double right_slope = drift_slope(theta, false) * hr;
    boost::random::normal_distribution<double> normal;

    // The path is pinned at 0 with value 0. Walking left, ">=" hands ties to the
    // more negative u; walking right, ">" keeps the smaller u.
    double best = 0.0;
    long best_k = 0;
    double w = 0.0;
    double sd = std::sqrt(hl);
    for (std::size_t k = 1; k <= K; ++k) {
        w += sd * normal(rng);
        const double value = w - left_slope * static_cast<double>(k);
        if (value >= best) {
            best = value;
            best_k = -static_cast<long>(k);
        }
    }
    w = 0.0;
    sd = std::sqrt(hr);
    for (std::size_t k = 1; k <= K; ++k) {
        w += sd * normal(rng);
        const double value = w - right_slope * static_cast<double>(k);
        if (value > best) {
            best = value;
            best_k = static_cast<long>(k);
        }
    }
    return static_cast<double>(best_k) * (best_k < 0 ? hl : hr);
}

ContinuousSamples simulate_argmax_continuous(double theta, ContinuousGrid grid, std::size_t n_rep,
                                             std::uint64_t seed, unsigned threads) {
    require_theta(theta);
    const std::size_t K = grid_points(grid);
    if (n_rep < 1) throw Error(ErrorKind::InvalidArgument, "n_rep must be at least 1");

    ContinuousSamples out;
    out.theta = theta;
    out.grid = grid;
    out.seed = seed;
    out.values.resize(n_rep);
    std::vector<unsigned char> at_edge(n_rep, 0);

    parallel_for(n_rep, threads, [&](std::size_t rep) {
        Rng rng = substream(seed, Stream::continuous_law, rep);
        out.values[rep] = sample_argmax_continuous(theta, grid, rng);
        const double v = out.values[rep];
        at_edge[rep] = std::abs(v) >= (static_cast<double>(K) - 0.5) * side_step(theta, grid, v < 0.0);
    });
    out.boundary_hits = static_cast<std::size_t>(std::count(at_edge.begin(), at_edge.end(), 1));
    return out;
}

void LimitLawSpec::validate() const {
    require_theta(theta);
    if (regime == Regime::continuous) {
        throw Error(ErrorKind::InvalidArgument, "discrete sampler needs a discrete regime");
    }
    if (!(d >= 0.0)) throw Error(ErrorKind::InvalidArgument, "d must be non-negative");
    if (!(sigma2 > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma2 must be positive");
    if (!std::isfinite(s)) throw Error(ErrorKind::InvalidArgument, "s must be finite");
}

DiscreteSampler::DiscreteSampler(LimitLawSpec spec, std::size_t K, IncrementSampler eta)
    : spec_(std::move(spec)), K_(K), eta_(std::move(eta)) {
    spec_.validate();
    if (K_ < 1) throw Error(ErrorKind::InvalidArgument, "K must be at least 1");
    if (!eta_) {
        eta_ = [](Rng& rng) { return boost::random::normal_distribution<double>()(rng); };
    }
    if (!spec_.cov) return;

    const Matrix& cov = *spec_.cov;
    const std::size_t n = 2 * K_ + 1;
    if (cov.rows() != n || cov.cols() != n) {
        throw Error(ErrorKind::CovarianceNotPSD,
                    "covariance must be " + std::to_string(n) + " x " + std::to_string(n));
    }
    double scale = 0.0;
    for (double v : cov.data()) scale = std::max(scale, std::abs(v));
    scale = std::max(scale, 1.0);
    Eigen::MatrixXd a(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (!std::isfinite(cov(r, c)) || std::abs(cov(r, c) - cov(c, r)) > 1e-9 * scale) {
                throw Error(ErrorKind::CovarianceNotPSD, "covariance is not symmetric");
            }
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov(r, c);
        }
        if (std::abs(cov(r, K_)) > 1e-12 * scale) {
            throw Error(ErrorKind::CovarianceNotPSD, "covariance must vanish on lag 0 (process pinned at 0)");
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    if (eig.info() != Eigen::Success) {
        throw Error(ErrorKind::CovarianceNotPSD, "eigendecomposition failed");
    }
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double lmax = std::max(lambda.maxCoeff(), 1.0);
    if (lambda.minCoeff() < -1e-9 * lmax) {
        throw Error(ErrorKind::CovarianceNotPSD,
                    "covariance has negative eigenvalue " + std::to_string(lambda.minCoeff()));
    }
    const Eigen::MatrixXd root =
        eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    factor_ = Matrix(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        if (r == K_) continue;  // row of lag 0 stays exactly zero
        for (std::size_t c = 0; c < n; ++c) {
            factor_(r, c) = root(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
    }
}

std::vector<double> DiscreteSampler::objective_path(Rng& rng) const {
    const std::size_t n = 2 * K_ + 1;
    boost::random::normal_distribution<double> normal;
    std::vector<double> g(n, 0.0);

    if (factor_.rows() == 0) {
        const double sd = std::sqrt(spec_.sigma2);
        for (std::size_t k = 1; k <= K_; ++k) g[K_ - k] = g[K_ - k + 1] + sd * normal(rng);
        for (std::size_t k = 1; k <= K_; ++k) g[K_ + k] = g[K_ + k - 1] + sd * normal(rng);
    } else {
        std::vector<double> z(n);
        for (double& x : z) x = normal(rng);
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < n; ++c) s += factor_(r, c) * z[c];
            g[r] = s;
        }
    }

    if (spec_.regime == Regime::discrete_G_plus_V) {
        const double loading = spec_.s * std::sqrt(spec_.d);
        double v = 0.0;
        for (std::size_t k = 1; k <= K_; ++k) {
            v -= eta_(rng);
            g[K_ - k] += loading * v;
        }
        v = 0.0;
        for (std::size_t k = 1; k <= K_; ++k) {
            v += eta_(rng);
            g[K_ + k] += loading * v;
        }
    }

    for (std::size_t idx = 0; idx < n; ++idx) {
        const double t = static_cast<double>(idx) - static_cast<double>(K_);
        if (idx != K_) g[idx] -= spec_.d * drift(spec_.theta, t);
    }
    return g;
}

int DiscreteSampler::sample(Rng& rng) const {
    const auto path = objective_path(rng);
    const auto best = std::max_element(path.begin(), path.end());  // first maximum
    return static_cast<int>(best - path.begin()) - static_cast<int>(K_);
}

DiscreteSamples simulate_argmax_discrete(const LimitLawSpec& spec, std::size_t K, std::size_t n_rep,
                                         std::uint64_t seed, unsigned threads, IncrementSampler eta) {
    if (n_rep < 1) throw Error(ErrorKind::InvalidArgument, "n_rep must be at least 1");
    const DiscreteSampler sampler(spec, K, std::move(eta));

    DiscreteSamples out;
    out.spec = spec;
    out.K = K;
    out.seed = seed;
    out.values.resize(n_rep);
    parallel_for(n_rep, threads, [&](std::size_t rep) {
        Rng rng = substream(seed, Stream::discrete_law, rep);
        out.values[rep] = sampler.sample(rng);
    });
    const int edge = static_cast<int>(K);
    out.boundary_hits = static_cast<std::size_t>(std::count_if(
        out.values.begin(), out.values.end(), [&](int v) { return v == edge || v == -edge; }));
    return out;
}

std::optional<double> QuantileTable::at(double p) const {
    for (std::size_t k = 0; k < probabilities.size(); ++k) {
        if (std::abs(probabilities[k] - p) <= 1e-9) return quantiles[k];
    }
    return std::nullopt;
}

const std::vector<double>& default_probabilities() {
    static const std::vector<double> probs{0.005, 0.01, 0.025, 0.05, 0.1, 0.5,
                                           0.9,   0.95, 0.975, 0.99, 0.995};
    return probs;
}

std::vector<double> nearest_rank_quantiles(std::vector<double> samples,
                                           std::span<const double> probabilities) {
    if (samples.empty()) throw Error(ErrorKind::EmptySamples, "no samples to take quantiles of");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    std::vector<double> out;
    out.reserve(probabilities.size());
    for (double p : probabilities) {
        if (!(p > 0.0 && p < 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "probabilities must lie in (0, 1)");
        }
        const double rank = std::ceil(p * n - 1e-9);
        const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, n)) - 1;
        out.push_back(samples[idx]);
    }
    return out;
}

QuantileTable quantiles(const ContinuousSamples& samples, std::span<const double> probabilities) {
    std::vector<double> probs(probabilities.begin(), probabilities.end());
    if (probs.empty()) probs = default_probabilities();
    std::sort(probs.begin(), probs.end());
    probs.erase(std::unique(probs.begin(), probs.end()), probs.end());

    QuantileTable table;
    table.theta = samples.theta;
    table.quantiles = nearest_rank_quantiles(samples.values, probs);
    table.probabilities = std::move(probs);
    table.n_rep = samples.values.size();
    table.grid_halfwidth = samples.grid.halfwidth;
    table.grid_step = samples.grid.step;
    table.grid_per_side = samples.grid.per_side;
    table.seed = samples.seed;
    table.boundary_hits = samples.boundary_hits;
    return table;
}

QuantileTable build_quantile_table(double theta, ContinuousGrid grid, std::size_t n_rep,
                                   std::uint64_t seed, unsigned threads,
                                   std::span<const double> probabilities) {
    return quantiles(simulate_argmax_continuous(theta, grid, n_rep, seed, threads), probabilities);
}

QuantileTable reflect(const QuantileTable& table) {
    QuantileTable out = table;
    out.theta = 1.0 - table.theta;
    out.probabilities.clear();
    out.quantiles.clear();
    for (std::size_t k = table.probabilities.size(); k-- > 0;) {
        // snap 1 - p back onto a 12-digit grid so reflected tables look up cleanly
        out.probabilities.push_back(std::round((1.0 - table.probabilities[k]) * 1e12) / 1e12);
        const double q = -table.quantiles[k];
        out.quantiles.push_back(q == 0.0 ? 0.0 : q);
    }
    return out;
}

nlohmann::json to_json(const QuantileTable& table) {
    return {
        {"schema", "panelbreak.quantile_table"},
        {"version", kQuantileTableVersion},
        {"theta", table.theta},
        {"probabilities", table.probabilities},
        {"quantiles", table.quantiles},
        {"n_rep", table.n_rep},
        {"grid_halfwidth", table.grid_halfwidth},
        {"grid_step", table.grid_step},
        {"grid_per_side", table.grid_per_side},
        {"seed", table.seed},
        {"boundary_hits", table.boundary_hits},
    };
}

QuantileTable quantile_table_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("schema") != "panelbreak.quantile_table") {
            throw Error(ErrorKind::ParseError, "not a quantile table document");
        }
        if (doc.at("version").get<int>() != kQuantileTableVersion) {
            throw Error(ErrorKind::ParseError, "unsupported quantile table version");
        }
        QuantileTable t;
        t.theta = doc.at("theta").get<double>();
        t.probabilities = doc.at("probabilities").get<std::vector<double>>();
        t.quantiles = doc.at("quantiles").get<std::vector<double>>();
        t.n_rep = doc.at("n_rep").get<std::size_t>();
        t.grid_halfwidth = doc.at("grid_halfwidth").get<double>();
        t.grid_step = doc.at("grid_step").get<double>();
        t.grid_per_side = doc.value("grid_per_side", false);
        t.seed = doc.at("seed").get<std::uint64_t>();
        t.boundary_hits = doc.at("boundary_hits").get<std::size_t>();
        if (t.probabilities.size() != t.quantiles.size()) {
            throw Error(ErrorKind::ParseError, "probabilities and quantiles differ in length");
        }
        if (!std::is_sorted(t.probabilities.begin(), t.probabilities.end()) ||
            !std::is_sorted(t.quantiles.begin(), t.quantiles.end())) {
            throw Error(ErrorKind::ParseError, "quantile table is not monotone");
        }
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("malformed quantile table: ") + e.what());
    }
}

QuantileTableSet::QuantileTableSet(std::vector<QuantileTable> tables) : tables_(std::move(tables)) {
    std::sort(tables_.begin(), tables_.end(),
              [](const QuantileTable& a, const QuantileTable& b) { return a.theta < b.theta; });
}

const QuantileTable& QuantileTableSet::nearest(double theta) const {
    if (tables_.empty()) throw Error(ErrorKind::MissingQuantiles, "no quantile tables loaded");
    // first minimum distance: the lower theta wins exact midpoints
    return *std::min_element(tables_.begin(), tables_.end(),
                             [&](const QuantileTable& a, const QuantileTable& b) {
                                 return std::abs(a.theta - theta) < std::abs(b.theta - theta) - 1e-12;
                             });
}

nlohmann::json to_json(const QuantileTableSet& set) {
    nlohmann::json tables = nlohmann::json::array();
    for (const auto& t : set.tables()) tables.push_back(to_json(t));
    return {{"schema", "panelbreak.quantile_table_set"},
            {"version", kQuantileTableVersion},
            {"tables", tables}};
}

QuantileTableSet quantile_table_set_from_json(const nlohmann::json& doc) {
    if (doc.is_object() && doc.value("schema", "") == "panelbreak.quantile_table") {
        return QuantileTableSet({quantile_table_from_json(doc)});
    }
    if (!doc.is_object() || doc.value("schema", "") != "panelbreak.quantile_table_set" ||
        !doc.contains("tables") || !doc["tables"].is_array()) {
        throw Error(ErrorKind::ParseError, "not a quantile table set document");
    }
    std::vector<QuantileTable> tables;
    for (const auto& t : doc["tables"]) tables.push_back(quantile_table_from_json(t));
    return QuantileTableSet(std::move(tables));
}

ConfidenceInterval confidence_interval(std::size_t t_hat, std::size_t T, double delta_hat,
                                       double xi_hat, double level, const QuantileTable& table) {
    if (!(level > 0.0 && level < 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "level must lie in (0, 1)");
    }
    if (t_hat < 1 || t_hat > T) throw Error(ErrorKind::InvalidArgument, "t_hat outside [1, T]");
    if (!(delta_hat > 0.0)) throw Error(ErrorKind::DegenerateProfile, "delta_hat must be positive");
    if (!(xi_hat >= 0.0)) throw Error(ErrorKind::InvalidArgument, "xi_hat must be non-negative");

    const double alpha = 1.0 - level;
    const auto q_lo = table.at(alpha / 2.0);
    const auto q_hi = table.at(1.0 - alpha / 2.0);
    if (!q_lo || !q_hi) {
        throw Error(ErrorKind::MissingQuantiles,
                    "table lacks the " + std::to_string(alpha / 2.0) + " / " +
                        std::to_string(1.0 - alpha / 2.0) + " quantiles");
    }

    ConfidenceInterval ci;
    ci.level = level;
    const double scale = xi_hat / (delta_hat * delta_hat);
    const double th = static_cast<double>(t_hat);
    const double a = th - *q_hi * scale;
    const double b = th - *q_lo * scale;
    if (!(b - a >= 1.0)) {
        ci.lo = ci.hi = t_hat;
        ci.singleton = true;
        return ci;
    }
    const double lo = std::clamp(std::floor(a), 1.0, static_cast<double>(T));
    const double hi = std::clamp(std::ceil(b), 1.0, static_cast<double>(T));
    ci.lo = std::min(static_cast<std::size_t>(lo), t_hat);
    ci.hi = std::max(static_cast<std::size_t>(hi), t_hat);
    return ci;
}

}  // namespace panelbreak
