#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "klctl/simloop.hpp"
#include "klctl/stability.hpp"

namespace klctl {

/// Writes @p bytes to a sibling temp file and renames it over @p path, so a
/// failed run never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Whole file as a string; throws ConfigError if it cannot be opened.
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

/// Shortest decimal that round-trips the double (plain notation where
/// reasonable, never locale dependent).
[[nodiscard]] std::string format_double(double v);

/// Numeric CSV with a header line.
struct NumericTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of @p name in the header; throws ConfigError if missing.
    [[nodiscard]] std::size_t column(std::string_view name) const;
};

/// Parses a comma-separated numeric table. Blank lines are skipped; CRLF is
/// tolerated. Throws ConfigError on ragged rows or non-numeric cells.
[[nodiscard]] NumericTable parse_csv(std::string_view text);

[[nodiscard]] std::string trajectory_csv(const Trajectory& traj);
[[nodiscard]] std::string region_csv(const std::vector<RegionCell>& cells);

/// `step,kl` open-loop data as (t, y) pairs.
[[nodiscard]] std::vector<std::pair<double, double>> read_step_kl(std::string_view csv_text);
/// `beta,kl` converged samples as (β, y) pairs.
[[nodiscard]] std::vector<std::pair<double, double>> read_beta_kl(std::string_view csv_text);

}  // namespace klctl
