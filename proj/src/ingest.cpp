#include "panelbreak/ingest.hpp"

#include "panelbreak/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace panelbreak {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\"");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\"");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        fields.emplace_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return fields;
}

bool is_missing_token(std::string_view tok) {
    return tok.empty() || tok == "NA" || tok == "NaN" || tok == "nan" || tok == "." || tok == "N/A";
}

std::string cell_name(std::size_t line, std::size_t field) {
    return "line " + std::to_string(line) + ", field " + std::to_string(field);
}

}  // namespace

Orientation orientation_from_string(std::string_view name) {
    if (name == "panels_as_columns" || name == "columns") return Orientation::panels_as_columns;
    if (name == "panels_as_rows" || name == "rows") return Orientation::panels_as_rows;
    throw Error(ErrorKind::InvalidArgument, "unknown orientation '" + std::string(name) + "'");
}

MissingPolicy missing_policy_from_string(std::string_view name) {
    if (name == "reject") return MissingPolicy::reject;
    if (name == "drop_panel") return MissingPolicy::drop_panel;
    throw Error(ErrorKind::InvalidArgument, "unknown missing-value policy '" + std::string(name) + "'");
}

Transform transform_from_string(std::string_view name) {
    if (name == "rescale_by_first") return Transform::rescale_by_first;
    if (name == "log_diff") return Transform::log_diff;
    if (name == "demean") return Transform::demean;
    throw Error(ErrorKind::InvalidArgument, "unknown transform '" + std::string(name) + "'");
}

std::string_view to_string(Orientation o) noexcept {
    return o == Orientation::panels_as_columns ? "panels_as_columns" : "panels_as_rows";
}

std::string_view to_string(MissingPolicy p) noexcept {
    return p == MissingPolicy::reject ? "reject" : "drop_panel";
}

std::string_view to_string(Transform t) noexcept {
    switch (t) {
        case Transform::rescale_by_first: return "rescale_by_first";
        case Transform::log_diff: return "log_diff";
        case Transform::demean: return "demean";
    }
    return "unknown";
}

Matrix transform_values(const Matrix& values, Transform transform) {
    const std::size_t n = values.rows();
    const std::size_t T = values.cols();
    switch (transform) {
        case Transform::rescale_by_first: {
            Matrix out(n, T);
            for (std::size_t i = 0; i < n; ++i) {
                const double first = values(i, 0);
                if (first == 0.0) {
                    throw Error(ErrorKind::InvalidData,
                                "rescale_by_first: panel " + std::to_string(i + 1) + " starts at 0");
                }
                for (std::size_t t = 0; t < T; ++t) out(i, t) = values(i, t) / first;
            }
            return out;
        }
        case Transform::log_diff: {
            if (T < 2) throw Error(ErrorKind::DimensionMismatch, "log_diff needs at least two time points");
            Matrix out(n, T - 1);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t t = 0; t < T; ++t) {
                    if (!(values(i, t) > 0.0)) {
                        throw Error(ErrorKind::NonPositiveForLog,
                                    "panel " + std::to_string(i + 1) + " has value " +
                                        format_double(values(i, t)) + " at time " + std::to_string(t + 1));
                    }
                }
                for (std::size_t t = 1; t < T; ++t) {
                    out(i, t - 1) = std::log(values(i, t)) - std::log(values(i, t - 1));
                }
            }
            return out;
        }
        case Transform::demean: {
            Matrix out(n, T);
            for (std::size_t i = 0; i < n; ++i) {
                long double s = 0.0L;
                for (double v : values.row(i)) s += v;
                const double m = static_cast<double>(s / static_cast<long double>(T));
                for (std::size_t t = 0; t < T; ++t) out(i, t) = values(i, t) - m;
            }
            return out;
        }
    }
    return values;
}

PanelData apply_transform(const PanelData& panel, Transform transform) {
    Matrix out = transform_values(panel.values(), transform);
    std::vector<std::string> times = panel.time_ids();
    if (transform == Transform::log_diff) times.erase(times.begin());
    return PanelData(std::move(out), panel.panel_ids(), std::move(times));
}

LoadedPanel parse_panel(std::istream& in, const IngestSpec& spec) {
    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        lines.push_back(line);
        line_numbers.push_back(number);
    }
    if (lines.empty()) throw Error(ErrorKind::ParseError, "input is empty");
    const char delim = lines.front().find('\t') != std::string::npos ? '\t' : ',';

    std::vector<std::string> header;
    std::size_t first_data = 0;
    if (spec.header) {
        header = split(lines.front(), delim);
        first_data = 1;
    }
    const std::size_t skip = spec.index_column ? 1 : 0;

    // grid[line][field] of parsed values for the data block
    std::vector<std::vector<std::optional<double>>> grid;
    std::vector<std::string> index_labels;
    std::size_t width = 0;
    for (std::size_t l = first_data; l < lines.size(); ++l) {
        const auto fields = split(lines[l], delim);
        if (fields.size() <= skip) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_numbers[l]) + " has no values");
        }
        if (grid.empty()) {
            width = fields.size();
        } else if (fields.size() != width) {
            throw Error(ErrorKind::ParseError, "line " + std::to_string(line_numbers[l]) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(width));
        }
        if (spec.index_column) index_labels.push_back(fields.front());
        std::vector<std::optional<double>> row;
        for (std::size_t f = skip; f < fields.size(); ++f) {
            const std::string& tok = fields[f];
            if (is_missing_token(tok)) {
                row.emplace_back(std::nullopt);
                continue;
            }
            double value = 0.0;
            const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(value)) {
                throw Error(ErrorKind::ParseError,
                            cell_name(line_numbers[l], f + 1) + ": '" + tok + "' is not a number");
            }
            row.emplace_back(value);
        }
        grid.push_back(std::move(row));
    }
    if (grid.empty()) throw Error(ErrorKind::ParseError, "no data lines");
    if (spec.header && header.size() != width) {
        throw Error(ErrorKind::ParseError, "header has " + std::to_string(header.size()) +
                                               " fields, data lines have " + std::to_string(width));
    }

    const std::size_t n_lines = grid.size();
    const std::size_t n_fields = width - skip;
    const bool by_column = spec.orientation == Orientation::panels_as_columns;
    const std::size_t n = by_column ? n_fields : n_lines;
    const std::size_t T = by_column ? n_lines : n_fields;

    auto label = [](const std::vector<std::string>& src, std::size_t offset, std::size_t count) {
        std::vector<std::string> out;
        for (std::size_t k = 0; k < count; ++k) {
            out.push_back(src.empty() ? std::to_string(k + 1) : src[offset + k]);
        }
        return out;
    };
    std::vector<std::string> field_labels = label(header, skip, n_fields);
    std::vector<std::string> line_labels = label(index_labels, 0, n_lines);
    std::vector<std::string> panel_ids = by_column ? field_labels : line_labels;
    std::vector<std::string> time_ids = by_column ? line_labels : field_labels;

    auto cell = [&](std::size_t i, std::size_t t) -> const std::optional<double>& {
        return by_column ? grid[t][i] : grid[i][t];
    };
    auto where = [&](std::size_t i, std::size_t t) {
        const std::size_t l = by_column ? t : i;
        const std::size_t f = (by_column ? i : t) + skip + 1;
        return "panel " + panel_ids[i] + " at time " + time_ids[t] + " (" +
               cell_name(line_numbers[l + first_data], f) + ")";
    };

    LoadedPanel result{PanelData(Matrix(1, 3)), {}, {}};
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        std::optional<std::size_t> missing_at;
        for (std::size_t t = 0; t < T && !missing_at; ++t) {
            if (!cell(i, t)) missing_at = t;
        }
        if (!missing_at) {
            keep.push_back(i);
        } else if (spec.missing_policy == MissingPolicy::reject) {
            throw Error(ErrorKind::MissingValues, "missing value for " + where(i, *missing_at));
        } else {
            result.dropped_panels.push_back(panel_ids[i]);
        }
    }
    if (keep.empty()) throw Error(ErrorKind::MissingValues, "every panel has missing values");

    Matrix values(keep.size(), T);
    std::vector<std::string> kept_ids;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        for (std::size_t t = 0; t < T; ++t) values(k, t) = *cell(keep[k], t);
        kept_ids.push_back(panel_ids[keep[k]]);
    }

    result.provenance.push_back("read " + std::to_string(n) + " panels x " + std::to_string(T) +
                                " times (" + std::string(to_string(spec.orientation)) + ")");
    if (!result.dropped_panels.empty()) {
        result.provenance.push_back("drop_panel removed " + std::to_string(result.dropped_panels.size()) +
                                    " panels with missing values");
    }
    for (Transform tr : spec.transforms) {
        values = transform_values(values, tr);
        if (tr == Transform::log_diff) time_ids.erase(time_ids.begin());
        result.provenance.emplace_back(to_string(tr));
    }
    result.panel = PanelData(std::move(values), std::move(kept_ids), std::move(time_ids));
    return result;
}

LoadedPanel load_panel(const IngestSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open " + spec.path.string());
    LoadedPanel loaded = parse_panel(in, spec);
    loaded.provenance.insert(loaded.provenance.begin(), "source " + spec.path.string());
    return loaded;
}

std::string format_double(double x) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

void write_panel(const PanelData& panel, std::ostream& out, Orientation orientation) {
    const auto& values = panel.values();
    if (orientation == Orientation::panels_as_columns) {
        out << "time";
        for (const auto& id : panel.panel_ids()) out << ',' << id;
        out << '\n';
        for (std::size_t t = 0; t < panel.n_times(); ++t) {
            out << panel.time_ids()[t];
            for (std::size_t i = 0; i < panel.n_panels(); ++i) out << ',' << format_double(values(i, t));
            out << '\n';
        }
    } else {
        out << "panel";
        for (const auto& id : panel.time_ids()) out << ',' << id;
        out << '\n';
        for (std::size_t i = 0; i < panel.n_panels(); ++i) {
            out << panel.panel_ids()[i];
            for (std::size_t t = 0; t < panel.n_times(); ++t) out << ',' << format_double(values(i, t));
            out << '\n';
        }
    }
}

void save_panel(const PanelData& panel, const std::filesystem::path& path, Orientation orientation) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path.string());
    write_panel(panel, out, orientation);
}

}  // namespace panelbreak
