#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace panelbreak {

/// Bundled quantile tables; PANELBREAK_TABLES overrides the install location.
[[nodiscard]] std::filesystem::path default_table_path();

/**
 * Entry point of the `panelbreak` tool. Returns the process exit code:
 * 0 success, 1 usage, 2 data, 3 numeric or degenerate input.
 */
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace panelbreak
