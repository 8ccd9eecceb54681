#pragma once

#include "panelbreak/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace panelbreak {

enum class Orientation { panels_as_columns, panels_as_rows };
enum class MissingPolicy { reject, drop_panel };
enum class Transform { rescale_by_first, log_diff, demean };

[[nodiscard]] Orientation orientation_from_string(std::string_view name);
[[nodiscard]] MissingPolicy missing_policy_from_string(std::string_view name);
[[nodiscard]] Transform transform_from_string(std::string_view name);
[[nodiscard]] std::string_view to_string(Orientation o) noexcept;
[[nodiscard]] std::string_view to_string(MissingPolicy p) noexcept;
[[nodiscard]] std::string_view to_string(Transform t) noexcept;

struct IngestSpec {
    std::filesystem::path path;
    Orientation orientation = Orientation::panels_as_columns;
    bool header = false;        ///< first line holds panel labels (columns) or time labels (rows)
    bool index_column = false;  ///< first field of each line holds a time label (columns) or panel label (rows)
    MissingPolicy missing_policy = MissingPolicy::reject;
    std::vector<Transform> transforms;  ///< applied left to right
};

struct LoadedPanel {
    PanelData panel;
    std::vector<std::string> provenance;  ///< one entry per ingestion step
    std::vector<std::string> dropped_panels;
};

/**
 * Reads a comma- or tab-delimited numeric table (delimiter detected from the
 * first line). Blank cells and NA/NaN/. are missing values. Throws ParseError
 * with the line and field, MissingValues under the reject policy, and
 * NonPositiveForLog when log_diff meets a value <= 0.
 */
[[nodiscard]] LoadedPanel load_panel(const IngestSpec& spec);
[[nodiscard]] LoadedPanel parse_panel(std::istream& in, const IngestSpec& spec);

/// Transform of a raw value matrix (rows are panels); log_diff drops one column.
[[nodiscard]] Matrix transform_values(const Matrix& values, Transform transform);
[[nodiscard]] PanelData apply_transform(const PanelData& panel, Transform transform);

/// Writes `panel` with labels so that load_panel with header and index_column reads it back exactly.
void save_panel(const PanelData& panel, const std::filesystem::path& path,
                Orientation orientation = Orientation::panels_as_columns);
void write_panel(const PanelData& panel, std::ostream& out,
                 Orientation orientation = Orientation::panels_as_columns);

/// Shortest decimal text that reads back to the same double.
[[nodiscard]] std::string format_double(double x);

}  // namespace panelbreak
