#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "safekernel/learning.hpp"
#include "safekernel/simulation.hpp"
#include "safekernel/supervisor.hpp"
#include "safekernel/value_function.hpp"

namespace safekernel {

inline constexpr const char* kValueFunctionSchema = "vf-1";
inline constexpr const char* kFitSchema = "fit-1";
inline constexpr const char* kMetricsSchema = "metrics-1";
inline constexpr const char* kLibrarySchema = "library-1";

// Parsers throw Error(schema) on a malformed document and Error(io) when a
// file cannot be opened.

nlohmann::json value_function_to_json(const ValueFunction& vf);
ValueFunction value_function_from_json(const nlohmann::json& j);
void save_value_function(const std::filesystem::path& path, const ValueFunction& vf);
ValueFunction load_value_function(const std::filesystem::path& path);

/// One JSONL line per record:
/// {session_id, tick, obstacle: {cx, cy, r}, absolute_state: {x, y, theta},
///  relative_state: {x, y, theta}}.
nlohmann::json record_to_json(const InterventionRecord& rec);
InterventionRecord record_from_json(const nlohmann::json& j);
void append_record(std::ostream& os, const InterventionRecord& rec);
/// Blank lines are skipped; any other bad line is a schema error naming the
/// line number.
std::vector<InterventionRecord> read_records(std::istream& is);
void save_records(const std::filesystem::path& path, std::span<const InterventionRecord> records);
std::vector<InterventionRecord> load_records(const std::filesystem::path& path);

nlohmann::json fit_to_json(const SupervisorFit& fit);
SupervisorFit fit_from_json(const nlohmann::json& j);
void save_fit(const std::filesystem::path& path, const SupervisorFit& fit);
SupervisorFit load_fit(const std::filesystem::path& path);

/// A library directory: manifest.json plus one vf-1 file per member, and
/// optionally the standard and conservative baseline sets.
struct LibraryDir {
  std::vector<ValueFunction> members;  // ascending omega_max
  std::optional<ValueFunction> standard;
  std::optional<ValueFunction> conservative;
};

/// Member files are named omega_<w>.json with w to two decimals.
void save_library(const std::filesystem::path& dir, const LibraryDir& lib);
LibraryDir load_library(const std::filesystem::path& dir);

nlohmann::json metrics_to_json(const TrialMetrics& m);
TrialMetrics metrics_from_json(const nlohmann::json& j);

/// x,y,V rows at heading theta (interpolated), one per x/y node, with a
/// header line.
void write_slice_csv(std::ostream& os, const ValueFunction& vf, double theta);

/// Reads a whole JSON document from a file.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes j.dump(indent) plus a newline; the output is a pure function of j.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent = 2);

}  // namespace safekernel
