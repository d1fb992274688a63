#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "lob_lab/equilibrium_solver.hpp"

namespace lob_lab {

/// "%.12g"; empty string for NaN.
std::string format_number(double v);

inline constexpr const char* kPathCsvHeader = "schema=1,n,t,pa,pb,la,lb,drift_to_horizon";

/// Path table: a "# alpha=..,sigma=..,horizon=..,steps=..,degenerate_from=.."
/// line, the header, then one row per step with empty fields on steps that
/// were not constructed.
void write_path_csv(std::ostream& out, const EquilibriumPath& path);

/// Inverse of write_path_csv. Throws std::runtime_error on malformed input.
EquilibriumPath read_path_csv(std::istream& in);

/// Writes via a sibling temporary file and rename, so readers never observe a
/// partial file. Throws std::runtime_error when the target is not writable.
void write_file_atomically(const std::filesystem::path& target, const std::string& content);

}  // namespace lob_lab
