#include "panelbreak/core.hpp"

#include "panelbreak/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace panelbreak {

namespace {

std::vector<std::string> default_labels(std::size_t n) {
    std::vector<std::string> labels;
    labels.reserve(n);
    for (std::size_t k = 1; k <= n; ++k) labels.push_back(std::to_string(k));
    return labels;
}

bool is_constant(std::span<const double> row) {
    return std::all_of(row.begin(), row.end(), [&](double x) { return x == row.front(); });
}

// argmax of objective(t) over t = first..last, smallest t on ties.
template <typename F>
std::pair<std::size_t, double> first_argmax(std::size_t first, std::size_t last, F&& objective) {
    std::size_t best_t = first;
    double best = objective(first);
    for (std::size_t t = first + 1; t <= last; ++t) {
        const double value = objective(t);
        if (value > best) {
            best = value;
            best_t = t;
        }
    }
    return {best_t, best};
}

void require_informative(const CusumProfile& profile) {
    if (std::all_of(profile.u.begin(), profile.u.end(), [](double x) { return x == 0.0; })) {
        throw Error(ErrorKind::DegenerateProfile,
                    "CUSUM profile is identically zero (every panel is constant)");
    }
}

}  // namespace

PanelData::PanelData(Matrix values)
    : PanelData(values, default_labels(values.rows()), default_labels(values.cols())) {}

PanelData::PanelData(Matrix values, std::vector<std::string> panel_ids,
                     std::vector<std::string> time_ids)
    : values_(std::move(values)), panel_ids_(std::move(panel_ids)), time_ids_(std::move(time_ids)) {
    if (values_.rows() < 1) throw Error(ErrorKind::DimensionMismatch, "panel needs N >= 1");
    if (values_.cols() < 3) throw Error(ErrorKind::DimensionMismatch, "panel needs T >= 3");
    if (panel_ids_.size() != values_.rows() || time_ids_.size() != values_.cols()) {
        throw Error(ErrorKind::DimensionMismatch, "label count does not match panel shape");
    }
    for (std::size_t i = 0; i < values_.rows(); ++i) {
        for (std::size_t t = 0; t < values_.cols(); ++t) {
            if (!std::isfinite(values_(i, t))) {
                throw Error(ErrorKind::MissingValues, "non-finite value in panel " + panel_ids_[i] +
                                                          " at time " + time_ids_[t]);
            }
        }
    }
}

PanelData PanelData::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(ErrorKind::DimensionMismatch, "panel needs N >= 1");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) {
            throw Error(ErrorKind::DimensionMismatch, "ragged panel rows");
        }
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return PanelData(std::move(m));
}

PanelData PanelData::reversed() const {
    Matrix m(n_panels(), n_times());
    for (std::size_t i = 0; i < n_panels(); ++i) {
        auto src = values_.row(i);
        std::reverse_copy(src.begin(), src.end(), m.row(i).begin());
    }
    std::vector<std::string> times(time_ids_.rbegin(), time_ids_.rend());
    return PanelData(std::move(m), panel_ids_, std::move(times));
}

PanelData PanelData::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > n_times()) {
        throw Error(ErrorKind::InvalidArgument, "slice range outside the panel");
    }
    Matrix m(n_panels(), end - begin);
    for (std::size_t i = 0; i < n_panels(); ++i) {
        auto src = values_.row(i).subspan(begin, end - begin);
        std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    std::vector<std::string> times(time_ids_.begin() + static_cast<std::ptrdiff_t>(begin),
                                   time_ids_.begin() + static_cast<std::ptrdiff_t>(end));
    return PanelData(std::move(m), panel_ids_, std::move(times));
}

std::string_view to_string(Method method) noexcept {
    return method == Method::cusum_sum ? "cusum_sum" : "bai_weighted";
}

Method method_from_string(std::string_view name) {
    if (name == "cusum" || name == "cusum_sum") return Method::cusum_sum;
    if (name == "bai" || name == "bai_weighted") return Method::bai_weighted;
    throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

void GroundTruth::validate() const {
    const std::size_t n = mu.size();
    const std::size_t t = eta.size();
    if (n == 0 || delta.size() != n || gamma.size() != n) {
        throw Error(ErrorKind::DimensionMismatch, "mu, delta and gamma must share length N >= 1");
    }
    if (e.rows() != n || e.cols() != t) {
        throw Error(ErrorKind::DimensionMismatch, "error matrix must be N x T");
    }
    if (t < 3 || t0 < 1 || t0 >= t) {
        throw Error(ErrorKind::DimensionMismatch, "need T >= 3 and 1 <= t0 <= T-1");
    }
}

PanelData reconstruct(const GroundTruth& truth) {
    truth.validate();
    Matrix x(truth.n_panels(), truth.n_times());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t c = 0; c < x.cols(); ++c) {
            const std::size_t t = c + 1;
            const double shift = t > truth.t0 ? truth.delta[i] : 0.0;
            x(i, c) = truth.mu[i] + shift + truth.gamma[i] * truth.eta[c] + truth.e(i, c);
        }
    }
    return PanelData(std::move(x));
}

Matrix partial_sums(const PanelData& panel) {
    Matrix s(panel.n_panels(), panel.n_times());
    for (std::size_t i = 0; i < panel.n_panels(); ++i) {
        long double acc = 0.0L;
        auto row = panel.panel(i);
        auto out = s.row(i);
        for (std::size_t c = 0; c < row.size(); ++c) {
            acc += row[c];
            out[c] = static_cast<double>(acc);
        }
    }
    return s;
}

CusumProfile cusum_profile(const PanelData& panel, bool keep_per_panel) {
    const std::size_t n = panel.n_panels();
    const std::size_t T = panel.n_times();
    std::vector<long double> acc(T - 1, 0.0L);
    std::optional<Matrix> d;
    if (keep_per_panel) d.emplace(n, T - 1);

    std::vector<long double> sums(T);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = panel.panel(i);
        if (is_constant(row)) continue;  // D_i is exactly zero
        long double s = 0.0L;
        for (std::size_t c = 0; c < T; ++c) {
            s += row[c];
            sums[c] = s;
        }
        const long double total = sums[T - 1];
        for (std::size_t t = 1; t < T; ++t) {
            const long double dev =
                sums[t - 1] - static_cast<long double>(t) / static_cast<long double>(T) * total;
            acc[t - 1] += dev * dev;
            if (d) (*d)(i, t - 1) = static_cast<double>(dev);
        }
    }

    CusumProfile profile;
    profile.u.assign(acc.begin(), acc.end());
    profile.d = std::move(d);
    return profile;
}

ChangePointEstimate estimate_changepoint(const CusumProfile& profile) {
    require_informative(profile);
    auto [t, value] = first_argmax(1, profile.u.size(), [&](std::size_t s) { return profile.at(s); });
    return {t, Method::cusum_sum, value};
}

ChangePointEstimate estimate_changepoint(const PanelData& panel) {
    return estimate_changepoint(cusum_profile(panel));
}

ChangePointEstimate estimate_changepoint_bai(const CusumProfile& profile) {
    require_informative(profile);
    const double T = static_cast<double>(profile.u.size() + 1);
    auto [t, value] = first_argmax(1, profile.u.size(), [&](std::size_t s) {
        const double ts = static_cast<double>(s);
        return profile.at(s) / (ts * (T - ts));
    });
    return {t, Method::bai_weighted, value};
}

ChangePointEstimate estimate_changepoint_bai(const PanelData& panel) {
    return estimate_changepoint_bai(cusum_profile(panel));
}

ChangePointEstimate estimate(const PanelData& panel, Method method) {
    return method == Method::cusum_sum ? estimate_changepoint(panel)
                                       : estimate_changepoint_bai(panel);
}

double shift_profile(std::size_t t, std::size_t t0, std::size_t T) noexcept {
    const double td = static_cast<double>(t);
    const double t0d = static_cast<double>(t0);
    const double Td = static_cast<double>(T);
    double r = -td * (Td - t0d) / Td;
    if (t > t0) r += td - t0d;
    return r;
}

Decomposition decompose(const GroundTruth& truth) {
    truth.validate();
    const std::size_t n = truth.n_panels();
    const std::size_t T = truth.n_times();
    const auto Td = static_cast<long double>(T);

    auto centred = [&](std::span<const double> x, std::span<double> out) {
        long double total = 0.0L;
        for (double v : x) total += v;
        long double s = 0.0L;
        for (std::size_t c = 0; c < T; ++c) {
            s += x[c];
            out[c] = static_cast<double>(s - static_cast<long double>(c + 1) / Td * total);
        }
    };

    Decomposition out{Matrix(n, T), std::vector<double>(T), std::vector<double>(T)};
    for (std::size_t i = 0; i < n; ++i) centred(truth.e.row(i), out.q.row(i));
    centred(truth.eta, out.v);
    for (std::size_t c = 0; c < T; ++c) out.r[c] = shift_profile(c + 1, truth.t0, T);
    return out;
}

std::vector<std::size_t> binary_segmentation(const PanelData& panel, std::size_t min_segment,
                                             std::size_t max_depth, double threshold) {
    if (min_segment < 2) {
        throw Error(ErrorKind::InvalidSegment, "min_segment must be at least 2");
    }
    if (2 * min_segment >= panel.n_times()) {
        throw Error(ErrorKind::InvalidSegment, "min_segment must be below T/2");
    }
    if (!(threshold >= 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "threshold must be non-negative");
    }

    std::vector<std::size_t> breaks;
    const double n = static_cast<double>(panel.n_panels());

    std::function<void(std::size_t, std::size_t, std::size_t)> split =
        [&](std::size_t begin, std::size_t end, std::size_t depth) {
            const std::size_t len = end - begin;
            if (depth >= max_depth || len < 2 * min_segment || len < 3) return;
            const CusumProfile profile = cusum_profile(panel.slice(begin, end));
            auto [t, value] = first_argmax(min_segment, len - min_segment,
                                           [&](std::size_t s) { return profile.at(s); });
            const double normalized = value / (static_cast<double>(len) * static_cast<double>(len) * n);
            if (!(normalized > threshold)) return;
            breaks.push_back(begin + t);
            split(begin, begin + t, depth + 1);
            split(begin + t, end, depth + 1);
        };

    split(0, panel.n_times(), 0);
    std::sort(breaks.begin(), breaks.end());
    return breaks;
}

}  // namespace panelbreak
