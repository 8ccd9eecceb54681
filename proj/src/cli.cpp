#include "panelbreak/cli.hpp"

#include "panelbreak/core.hpp"
#include "panelbreak/error.hpp"
#include "panelbreak/ingest.hpp"
#include "panelbreak/limitdist.hpp"
#include "panelbreak/norming.hpp"
#include "panelbreak/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#ifndef PANELBREAK_DATA_DIR
#define PANELBREAK_DATA_DIR "data"
#endif

namespace panelbreak {

namespace {

using nlohmann::json;

constexpr int kReportVersion = 1;

struct IngestOptions {
    std::string path;
    std::string orientation;
    bool header = false;
    bool index_column = false;
    std::string missing = "reject";
    std::vector<std::string> transforms;

    [[nodiscard]] IngestSpec spec() const {
        IngestSpec s;
        s.path = path;
        s.orientation = orientation_from_string(orientation);
        s.header = header;
        s.index_column = index_column;
        s.missing_policy = missing_policy_from_string(missing);
        for (const auto& t : transforms) s.transforms.push_back(transform_from_string(t));
        return s;
    }
};

void add_ingest_options(CLI::App& cmd, IngestOptions& o) {
    cmd.add_option("input", o.path, "Delimited text file (comma or tab)")->required();
    cmd.add_option("--orientation", o.orientation, "Layout of the file; never guessed")
        ->required()
        ->check(CLI::IsMember({"panels_as_columns", "panels_as_rows", "columns", "rows"}));
    cmd.add_flag("--header", o.header, "First line holds labels");
    cmd.add_flag("--index-column", o.index_column, "First field of each line holds a label");
    cmd.add_option("--missing", o.missing, "Missing-value policy")
        ->check(CLI::IsMember({"reject", "drop_panel"}));
    cmd.add_option("--transform", o.transforms, "rescale_by_first | log_diff | demean (repeatable, left to right)")
        ->check(CLI::IsMember({"rescale_by_first", "log_diff", "demean"}))
        ->take_all();
}

json ingest_json(const IngestSpec& spec, const LoadedPanel& loaded) {
    json transforms = json::array();
    for (auto t : spec.transforms) transforms.push_back(to_string(t));
    return {{"path", spec.path.string()},
            {"orientation", to_string(spec.orientation)},
            {"header", spec.header},
            {"index_column", spec.index_column},
            {"missing_policy", to_string(spec.missing_policy)},
            {"transforms", transforms},
            {"provenance", loaded.provenance},
            {"dropped_panels", loaded.dropped_panels},
            {"n_panels", loaded.panel.n_panels()},
            {"n_times", loaded.panel.n_times()}};
}

json envelope(const std::string& schema, const std::vector<std::string>& args) {
    return {{"schema", schema}, {"version", kReportVersion}, {"command_line", args}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
    f << text;
}

void emit_json(const json& doc, const std::string& output, std::ostream& out) {
    if (output.empty()) {
        out << doc.dump(2) << '\n';
    } else {
        write_text(output, doc.dump(2) + "\n");
    }
}

std::string time_label(const PanelData& panel, std::size_t t) {
    return t >= 1 && t <= panel.n_times() ? panel.time_ids()[t - 1] : std::to_string(t);
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
    IngestOptions ingest;
    std::string method = "cusum";
    std::optional<std::size_t> m1;
    std::optional<std::size_t> m2;
    bool json_out = false;
    std::string output;
};

struct EstimateResult {
    LoadedPanel loaded;
    ChangePointEstimate estimate;
    NormingQuantities norming;
};

EstimateResult run_estimate(const IngestSpec& spec, Method method, std::optional<std::size_t> m1,
                            std::optional<std::size_t> m2) {
    EstimateResult r{load_panel(spec), {}, {}};
    const CusumProfile profile = cusum_profile(r.loaded.panel);
    r.estimate = method == Method::cusum_sum ? estimate_changepoint(profile)
                                             : estimate_changepoint_bai(profile);
    r.norming = estimate_norming(r.loaded.panel, profile, r.estimate.t_hat, m1, m2);
    return r;
}

json estimate_json(const EstimateResult& r) {
    return {{"t_hat", r.estimate.t_hat},
            {"t_hat_label", time_label(r.loaded.panel, r.estimate.t_hat)},
            {"method", to_string(r.estimate.method)},
            {"objective_at_t_hat", r.estimate.objective_at_t_hat},
            {"delta_hat", r.norming.delta_hat},
            {"xi_hat", r.norming.xi_hat},
            {"windows", {{"m1", r.norming.windows.m1}, {"m2", r.norming.windows.m2}}},
            {"theta_hat", static_cast<double>(r.estimate.t_hat) /
                              static_cast<double>(r.loaded.panel.n_times())}};
}

void print_estimate(const EstimateResult& r, std::ostream& out) {
    const auto& p = r.loaded.panel;
    out << "panels " << p.n_panels() << ", times " << p.n_times() << '\n';
    out << "method " << to_string(r.estimate.method) << '\n';
    out << "t_hat " << r.estimate.t_hat << " (" << time_label(p, r.estimate.t_hat) << ")\n";
    out << "delta_hat " << format_double(r.norming.delta_hat) << '\n';
    out << "xi_hat " << format_double(r.norming.xi_hat) << '\n';
    out << "windows m1=" << r.norming.windows.m1 << " m2=" << r.norming.windows.m2 << '\n';
    if (r.norming.xi_hat == 0.0) out << "note: xi_hat is 0, confidence intervals reduce to {t_hat}\n";
}

int cmd_estimate(const EstimateOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const IngestSpec spec = o.ingest.spec();
    const EstimateResult r = run_estimate(spec, method_from_string(o.method), o.m1, o.m2);
    json doc = envelope("panelbreak.estimate", args);
    doc["input"] = ingest_json(spec, r.loaded);
    doc["options"] = {{"method", o.method},
                      {"m1_override", o.m1 ? json(*o.m1) : json(nullptr)},
                      {"m2_override", o.m2 ? json(*o.m2) : json(nullptr)}};
    doc["result"] = estimate_json(r);
    if (o.json_out) {
        emit_json(doc, "", out);
    } else {
        print_estimate(r, out);
    }
    if (!o.output.empty()) emit_json(doc, o.output, out);
    return 0;
}

// ---------------------------------------------------------------------------
// ci

struct CiOptions {
    EstimateOptions est;
    std::vector<double> levels{0.90, 0.95, 0.99};
    std::string theta_table;
    bool build_table = false;
    std::uint64_t seed = 1;
    std::size_t reps = 100000;
    unsigned threads = 1;
};

std::vector<double> tail_probabilities(const std::vector<double>& levels) {
    std::vector<double> probs = default_probabilities();
    for (double level : levels) {
        const double a = 1.0 - level;
        probs.push_back(a / 2.0);
        probs.push_back(1.0 - a / 2.0);
    }
    std::sort(probs.begin(), probs.end());
    probs.erase(std::unique(probs.begin(), probs.end(),
                            [](double x, double y) { return std::abs(x - y) < 1e-9; }),
                probs.end());
    return probs;
}

QuantileTableSet load_table_set(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw Error(ErrorKind::MissingQuantiles, "cannot open quantile tables at " + path.string());
    }
    json doc;
    try {
        doc = json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
    return quantile_table_set_from_json(doc);
}

int cmd_ci(const CiOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    for (double level : o.levels) {
        if (!(level > 0.0 && level < 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "--levels: level " + format_double(level) +
                                                        " is outside (0, 1)");
        }
    }
    const IngestSpec spec = o.est.ingest.spec();
    const EstimateResult r = run_estimate(spec, method_from_string(o.est.method), o.est.m1, o.est.m2);
    const std::size_t T = r.loaded.panel.n_times();
    const double theta_hat = static_cast<double>(r.estimate.t_hat) / static_cast<double>(T);

    QuantileTable table;
    json table_source;
    if (o.build_table) {
        const ContinuousGrid grid = default_grid(theta_hat);
        const auto probs = tail_probabilities(o.levels);
        table = build_quantile_table(theta_hat, grid, o.reps, o.seed, o.threads, probs);
        table_source = {{"kind", "built"}, {"seed", o.seed}, {"n_rep", o.reps}};
    } else {
        const std::filesystem::path path = o.theta_table.empty() ? default_table_path()
                                                                 : std::filesystem::path(o.theta_table);
        const QuantileTableSet set = load_table_set(path);
        table = set.nearest(theta_hat);
        table_source = {{"kind", "file"}, {"path", path.string()}};
    }

    json intervals = json::array();
    std::vector<ConfidenceInterval> cis;
    for (double level : o.levels) {
        const ConfidenceInterval ci = confidence_interval(r.estimate.t_hat, T, r.norming.delta_hat,
                                                          r.norming.xi_hat, level, table);
        cis.push_back(ci);
        intervals.push_back({{"level", level},
                             {"lo", ci.lo},
                             {"hi", ci.hi},
                             {"lo_label", time_label(r.loaded.panel, ci.lo)},
                             {"hi_label", time_label(r.loaded.panel, ci.hi)},
                             {"singleton", ci.singleton}});
    }

    json doc = envelope("panelbreak.ci", args);
    doc["input"] = ingest_json(spec, r.loaded);
    doc["options"] = {{"method", o.est.method},
                      {"levels", o.levels},
                      {"m1_override", o.est.m1 ? json(*o.est.m1) : json(nullptr)},
                      {"m2_override", o.est.m2 ? json(*o.est.m2) : json(nullptr)},
                      {"table_source", table_source}};
    doc["result"] = estimate_json(r);
    doc["quantile_table"] = to_json(table);
    doc["intervals"] = intervals;

    if (o.est.json_out) {
        emit_json(doc, "", out);
    } else {
        print_estimate(r, out);
        out << "quantile table theta " << format_double(table.theta) << " (" << table.n_rep << " reps)\n";
        for (const auto& ci : cis) {
            out << format_double(100.0 * ci.level) << "% ";
            if (ci.singleton) {
                out << "{" << ci.lo << "} singleton\n";
            } else {
                out << "[" << ci.lo << ", " << ci.hi << "]  (" << time_label(r.loaded.panel, ci.lo)
                    << " .. " << time_label(r.loaded.panel, ci.hi) << ")\n";
            }
        }
    }
    if (!o.est.output.empty()) emit_json(doc, o.est.output, out);
    return 0;
}

// ---------------------------------------------------------------------------
// segment

struct SegmentOptions {
    IngestOptions ingest;
    std::size_t min_segment = 5;
    std::size_t max_depth = 10;
    double threshold = 0.0;
    bool json_out = false;
    std::string output;
};

int cmd_segment(const SegmentOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    const IngestSpec spec = o.ingest.spec();
    const LoadedPanel loaded = load_panel(spec);
    const PanelData& panel = loaded.panel;
    const std::size_t T = panel.n_times();
    if (2 * o.min_segment >= T) {
        throw Error(ErrorKind::InvalidSegment, "--min-segment " + std::to_string(o.min_segment) +
                                                   " must be below T/2 = " + format_double(T / 2.0));
    }
    const auto breaks = binary_segmentation(panel, o.min_segment, o.max_depth, o.threshold);

    std::vector<std::size_t> edges{0};
    edges.insert(edges.end(), breaks.begin(), breaks.end());
    edges.push_back(T);
    json segments = json::array();
    std::ostringstream text;
    text << "breaks:";
    if (breaks.empty()) text << " none";
    for (auto b : breaks) text << ' ' << b << " (" << time_label(panel, b) << ')';
    text << '\n';
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
        const std::size_t begin = edges[s];
        const std::size_t end = edges[s + 1];
        std::vector<double> means;
        long double total = 0.0L;
        for (std::size_t i = 0; i < panel.n_panels(); ++i) {
            long double acc = 0.0L;
            for (std::size_t t = begin; t < end; ++t) acc += panel.values()(i, t);
            total += acc;
            means.push_back(static_cast<double>(acc / static_cast<long double>(end - begin)));
        }
        const double overall = static_cast<double>(
            total / static_cast<long double>((end - begin) * panel.n_panels()));
        segments.push_back({{"start", begin + 1},
                            {"end", end},
                            {"start_label", time_label(panel, begin + 1)},
                            {"end_label", time_label(panel, end)},
                            {"length", end - begin},
                            {"mean", overall},
                            {"panel_means", means}});
        text << "segment " << begin + 1 << ".." << end << "  length " << end - begin << "  mean "
             << format_double(overall) << '\n';
    }

    json doc = envelope("panelbreak.segment", args);
    doc["input"] = ingest_json(spec, loaded);
    doc["options"] = {{"min_segment", o.min_segment},
                      {"max_depth", o.max_depth},
                      {"threshold", o.threshold},
                      {"statistic", "max_t U(t) / (L^2 N) over the segment"}};
    doc["breaks"] = breaks;
    doc["segments"] = segments;
    if (o.json_out) {
        emit_json(doc, "", out);
    } else {
        out << text.str();
    }
    if (!o.output.empty()) emit_json(doc, o.output, out);
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
    std::string config;
    std::string experiment;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    unsigned threads = 1;
};

struct LimitLawSection {
    ContinuousGrid grid;
    std::size_t n_rep = 1000000;
    std::uint64_t seed = 1;
    std::vector<double> probabilities = default_probabilities();
};

double config_theta(const json& doc) {
    if (!doc.contains("theta")) throw Error(ErrorKind::ConfigError, "theta: missing");
    if (!doc["theta"].is_number()) throw Error(ErrorKind::ConfigError, "theta: expected a number");
    const double theta = doc["theta"].get<double>();
    if (!(theta > 0.0 && theta < 1.0)) {
        throw Error(ErrorKind::ConfigError, "theta: must lie in (0, 1), got " + format_double(theta));
    }
    return theta;
}

LimitLawSection limit_law_section(const json& doc, double theta, std::uint64_t fallback_seed) {
    LimitLawSection s;
    s.grid = default_grid(theta);
    s.seed = fallback_seed;
    if (!doc.contains("limit_law")) return s;
    const json& sec = doc["limit_law"];
    if (!sec.is_object()) throw Error(ErrorKind::ConfigError, "limit_law: expected an object");
    auto number = [&](const char* key, double& dst) {
        if (!sec.contains(key)) return;
        if (!sec[key].is_number()) {
            throw Error(ErrorKind::ConfigError, std::string("limit_law.") + key + ": expected a number");
        }
        dst = sec[key].get<double>();
    };
    auto count = [&](const char* key, auto& dst) {
        if (!sec.contains(key)) return;
        if (!sec[key].is_number_unsigned()) {
            throw Error(ErrorKind::ConfigError,
                        std::string("limit_law.") + key + ": expected a non-negative integer");
        }
        dst = sec[key].get<std::remove_reference_t<decltype(dst)>>();
    };
    number("grid_halfwidth", s.grid.halfwidth);
    number("grid_step", s.grid.step);
    if (sec.contains("grid_per_side")) {
        if (!sec["grid_per_side"].is_boolean()) {
            throw Error(ErrorKind::ConfigError, "limit_law.grid_per_side: expected true or false");
        }
        s.grid.per_side = sec["grid_per_side"].get<bool>();
    }
    count("n_rep", s.n_rep);
    count("seed", s.seed);
    if (sec.contains("probabilities")) {
        if (!sec["probabilities"].is_array()) {
            throw Error(ErrorKind::ConfigError, "limit_law.probabilities: expected an array");
        }
        s.probabilities.clear();
        for (const auto& p : sec["probabilities"]) {
            if (!p.is_number() || !(p.get<double>() > 0.0 && p.get<double>() < 1.0)) {
                throw Error(ErrorKind::ConfigError, "limit_law.probabilities: entries must lie in (0, 1)");
            }
            s.probabilities.push_back(p.get<double>());
        }
        std::sort(s.probabilities.begin(), s.probabilities.end());
    }
    if (!(s.grid.step > 0.0) || !(s.grid.halfwidth > s.grid.step)) {
        throw Error(ErrorKind::ConfigError, "limit_law.grid_step: need 0 < grid_step < grid_halfwidth");
    }
    if (s.n_rep < 1) throw Error(ErrorKind::ConfigError, "limit_law.n_rep: must be at least 1");
    return s;
}

json limit_law_json(const LimitLawSection& s) {
    return {{"grid_halfwidth", s.grid.halfwidth},
            {"grid_step", s.grid.step},
            {"grid_per_side", s.grid.per_side},
            {"n_rep", s.n_rep},
            {"seed", s.seed},
            {"probabilities", s.probabilities}};
}

std::string csv_line(std::initializer_list<double> xs) {
    std::string line;
    for (double x : xs) {
        if (!line.empty()) line += ',';
        line += format_double(x);
    }
    return line + '\n';
}

QuantileTable coverage_table(const json& doc, const std::filesystem::path& config_dir,
                             const SimulationConfig& config, const LimitLawSection& law,
                             unsigned threads, json& source) {
    if (doc.contains("coverage") && doc["coverage"].contains("table")) {
        const json& entry = doc["coverage"]["table"];
        if (!entry.is_string()) throw Error(ErrorKind::ConfigError, "coverage.table: expected a path");
        std::filesystem::path path = entry.get<std::string>();
        if (path.is_relative()) path = config_dir / path;
        const QuantileTable& t = load_table_set(path).nearest(config.theta);
        if (std::abs(t.theta - config.theta) > 1e-9) {
            throw Error(ErrorKind::ConfigError, "coverage.table: no table at theta " +
                                                    format_double(config.theta) + " in " + path.string());
        }
        source = {{"kind", "file"}, {"path", path.string()}};
        return t;
    }
    source = {{"kind", "built"}};
    return build_quantile_table(config.theta, law.grid, law.n_rep, law.seed, threads, law.probabilities);
}

int cmd_simulate(const SimulateOptions& o, const std::vector<std::string>& args, std::ostream& out) {
    json doc;
    {
        std::ifstream f(o.config);
        if (!f) throw Error(ErrorKind::ConfigError, "config: cannot open " + o.config);
        try {
            doc = json::parse(f);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::ConfigError, std::string("config: ") + e.what());
        }
    }
    if (!doc.is_object()) throw Error(ErrorKind::ConfigError, "config: expected an object");
    if (o.seed) doc["seed"] = *o.seed;
    if (o.reps) doc["n_rep"] = *o.reps;
    const double theta = config_theta(doc);
    const std::uint64_t seed =
        doc.contains("seed") && doc["seed"].is_number_unsigned() ? doc["seed"].get<std::uint64_t>() : 1;
    LimitLawSection law = limit_law_section(doc, theta, seed);
    if (o.experiment == "quantile_table") {
        if (o.seed) law.seed = *o.seed;
        if (o.reps) law.n_rep = *o.reps;
    }
    const std::filesystem::path config_dir = std::filesystem::path(o.config).parent_path();

    json report = envelope("panelbreak.simulate", args);
    report["experiment"] = o.experiment;
    report["config_file"] = o.config;
    report["threads_note"] = "results do not depend on --threads";

    std::vector<std::pair<std::string, std::string>> side_files;
    if (o.experiment == "quantile_table") {
        const QuantileTable table =
            build_quantile_table(theta, law.grid, law.n_rep, law.seed, o.threads, law.probabilities);
        report["limit_law"] = limit_law_json(law);
        report["theta"] = theta;
        report["quantile_table"] = to_json(table);
        std::string csv = "probability,quantile\n";
        for (std::size_t k = 0; k < table.probabilities.size(); ++k) {
            csv += csv_line({table.probabilities[k], table.quantiles[k]});
        }
        side_files.emplace_back(".csv", csv);
    } else if (o.experiment == "coverage") {
        const SimulationConfig config = simulation_config_from_json(doc);
        bool use_true = true;
        if (doc.contains("coverage") && doc["coverage"].contains("use_true_norming")) {
            if (!doc["coverage"]["use_true_norming"].is_boolean()) {
                throw Error(ErrorKind::ConfigError, "coverage.use_true_norming: expected true or false");
            }
            use_true = doc["coverage"]["use_true_norming"].get<bool>();
        }
        json source;
        const QuantileTable table = coverage_table(doc, config_dir, config, law, o.threads, source);
        const CoverageReport cov = run_coverage_experiment(config, table, use_true, o.threads);
        report["limit_law"] = limit_law_json(law);
        report["table_source"] = source;
        report["coverage"] = to_json(cov);
        std::string csv = "probability,quantile,coverage_percent\n";
        for (std::size_t k = 0; k < cov.probabilities.size(); ++k) {
            csv += csv_line({cov.probabilities[k], cov.thresholds[k], cov.coverage[k]});
        }
        side_files.emplace_back(".csv", csv);
    } else {
        const SimulationConfig config = simulation_config_from_json(doc);
        std::size_t limit_reps = 100000;
        if (doc.contains("histogram") && doc["histogram"].contains("limit_n_rep")) {
            if (!doc["histogram"]["limit_n_rep"].is_number_unsigned()) {
                throw Error(ErrorKind::ConfigError, "histogram.limit_n_rep: expected a non-negative integer");
            }
            limit_reps = doc["histogram"]["limit_n_rep"].get<std::size_t>();
        }
        const HistogramResult hist = run_histogram_experiment(config, law.grid, limit_reps, law.seed, o.threads);
        report["limit_law"] = limit_law_json(law);
        report["histogram"] = to_json(hist);
        std::string bins = "# deviation relative_frequency\n";
        for (std::size_t k = 0; k < hist.bins.size(); ++k) {
            bins += std::to_string(hist.bins[k]) + ' ' + format_double(hist.frequencies[k]) + '\n';
        }
        std::string dens = "# deviation scaled_limit_density\n";
        for (std::size_t k = 0; k < hist.density_x.size(); ++k) {
            dens += format_double(hist.density_x[k]) + ' ' + format_double(hist.density[k]) + '\n';
        }
        side_files.emplace_back("_hist.dat", bins);
        side_files.emplace_back("_density.dat", dens);
    }

    if (o.output.empty()) {
        out << report.dump(2) << '\n';
    } else {
        write_text(o.output + ".json", report.dump(2) + "\n");
        for (const auto& [suffix, body] : side_files) write_text(o.output + suffix, body);
        out << "wrote " << o.output << ".json";
        for (const auto& [suffix, body] : side_files) out << ", " << o.output << suffix;
        out << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// build-tables

struct TablesOptions {
    std::vector<double> thetas;
    std::size_t reps = 100000;
    std::uint64_t seed = 20240601;
    unsigned threads = 1;
    std::string output;
};

int cmd_build_tables(const TablesOptions& o, std::ostream& out, std::ostream& err) {
    std::vector<double> thetas = o.thetas;
    if (thetas.empty()) {
        for (int k = 1; k <= 19; ++k) thetas.push_back(k / 20.0);
    }
    for (double th : thetas) {
        if (!(th > 0.0 && th < 1.0)) {
            throw Error(ErrorKind::InvalidArgument, "--thetas: " + format_double(th) + " is outside (0, 1)");
        }
    }
    std::sort(thetas.begin(), thetas.end());

    // Tables for theta > 1/2 come from the reflection of 1 - theta when that is also requested.
    std::vector<QuantileTable> built;
    auto find = [&](double th) -> const QuantileTable* {
        for (const auto& t : built) {
            if (std::abs(t.theta - th) < 1e-9) return &t;
        }
        return nullptr;
    };
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double th = thetas[k];
        if (th > 0.5 + 1e-12) continue;
        const ContinuousGrid grid = default_grid(th);
        err << "theta " << format_double(th) << ": left step " << format_double(side_step(th, grid, true))
            << ", right step " << format_double(side_step(th, grid, false)) << '\n';
        built.push_back(build_quantile_table(th, grid, o.reps, o.seed + k, o.threads));
    }
    std::vector<QuantileTable> tables;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const double th = thetas[k];
        if (const QuantileTable* t = find(th)) {
            tables.push_back(*t);
        } else if (const QuantileTable* m = find(1.0 - th)) {
            QuantileTable r = reflect(*m);
            r.theta = th;
            tables.push_back(r);
        } else {
            err << "theta " << format_double(th) << ": simulated directly\n";
            tables.push_back(build_quantile_table(th, default_grid(th), o.reps, o.seed + k, o.threads));
        }
    }
    const json doc = to_json(QuantileTableSet(tables));
    emit_json(doc, o.output, out);
    return 0;
}

int dispatch(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const EstimateOptions& est, const CiOptions& ci, const SegmentOptions& seg,
             const SimulateOptions& sim, const TablesOptions& tab) {
    if (app.got_subcommand("estimate")) return cmd_estimate(est, args, out);
    if (app.got_subcommand("ci")) return cmd_ci(ci, args, out);
    if (app.got_subcommand("segment")) return cmd_segment(seg, args, out);
    if (app.got_subcommand("simulate")) return cmd_simulate(sim, args, out);
    if (app.got_subcommand("build-tables")) return cmd_build_tables(tab, out, err);
    return 1;
}

}  // namespace

std::filesystem::path default_table_path() {
    if (const char* env = std::getenv("PANELBREAK_TABLES"); env != nullptr && *env != '\0') {
        return env;
    }
    return std::filesystem::path(PANELBREAK_DATA_DIR) / "quantile_tables.json";
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Common break date in panels of time series: estimation, confidence intervals, "
                 "segmentation and simulation"};
    app.name("panelbreak");
    app.require_subcommand(1);

    EstimateOptions est;
    auto* c_est = app.add_subcommand("estimate", "Estimate the break date with its norming quantities");
    add_ingest_options(*c_est, est.ingest);

    CiOptions ci;
    auto* c_ci = app.add_subcommand("ci", "Confidence intervals for the break date");
    add_ingest_options(*c_ci, ci.est.ingest);

    for (auto [cmd, o] : {std::pair{c_est, &est}, std::pair{c_ci, &ci.est}}) {
        cmd->add_option("--method", o->method, "Estimator")->check(CLI::IsMember({"cusum", "bai"}));
        cmd->add_option("--m1", o->m1, "Inner window of the Xi estimator");
        cmd->add_option("--m2", o->m2, "Outer window of the Xi estimator");
        cmd->add_flag("--json", o->json_out, "Print the JSON report instead of text");
        cmd->add_option("--output", o->output, "Also write the JSON report to this file");
    }
    c_ci->add_option("--levels", ci.levels, "Confidence levels in (0, 1)")->delimiter(',');
    c_ci->add_option("--theta-table", ci.theta_table, "Quantile table or table set (JSON)");
    c_ci->add_flag("--build-table", ci.build_table, "Simulate the limit law at t_hat / T instead");
    c_ci->add_option("--seed", ci.seed, "Seed for --build-table");
    c_ci->add_option("--reps", ci.reps, "Replicates for --build-table");
    c_ci->add_option("--threads", ci.threads, "Worker threads")->check(CLI::PositiveNumber);

    SegmentOptions seg;
    auto* c_seg = app.add_subcommand("segment", "Binary segmentation into regimes");
    add_ingest_options(*c_seg, seg.ingest);
    c_seg->add_option("--min-segment", seg.min_segment, "Minimum points on each side of a break");
    c_seg->add_option("--max-depth", seg.max_depth, "Maximum recursion depth");
    c_seg->add_option("--threshold", seg.threshold, "Split when max U / (L^2 N) exceeds this")->required();
    c_seg->add_flag("--json", seg.json_out, "Print the JSON report instead of text");
    c_seg->add_option("--output", seg.output, "Also write the JSON report to this file");

    SimulateOptions sim;
    auto* c_sim = app.add_subcommand("simulate", "Run a simulation experiment from a JSON config");
    c_sim->add_option("config", sim.config, "Config file")->required();
    c_sim->add_option("--experiment", sim.experiment, "Experiment")
        ->required()
        ->check(CLI::IsMember({"coverage", "histogram", "quantile_table"}));
    c_sim->add_option("--output", sim.output, "Output prefix (PREFIX.json plus CSV or .dat files)");
    c_sim->add_option("--seed", sim.seed, "Override the config seed");
    c_sim->add_option("--reps", sim.reps, "Override the replicate count");
    c_sim->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);

    TablesOptions tab;
    auto* c_tab = app.add_subcommand("build-tables", "Tabulate the limit law on a theta grid");
    c_tab->add_option("--thetas", tab.thetas, "Break fractions (default 0.05, 0.10, ..., 0.95)")
        ->delimiter(',');
    c_tab->add_option("--reps", tab.reps, "Replicates per theta");
    c_tab->add_option("--seed", tab.seed, "Base seed; theta k uses seed + k");
    c_tab->add_option("--threads", tab.threads, "Worker threads")->check(CLI::PositiveNumber);
    c_tab->add_option("--output", tab.output, "Output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        return dispatch(app, args, out, err, est, ci, seg, sim, tab);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("panelbreak");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace panelbreak
