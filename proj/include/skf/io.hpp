#pragma once

#include <skf/experiments.hpp>

#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace skf {
namespace io {

/// Headerless comma-separated matrix, one row per line.
matrix_t read_csv_matrix(const std::string& path);
void write_csv_matrix(const std::string& path, const matrix_t& M);

/// Single-column (or single-row) CSV.
vector_t read_csv_vector(const std::string& path);

/// 1-based indices, one per line; returned 0-based and sorted.
index_set read_index_csv(const std::string& path, index_t m);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

/// Flat TOML subset: `key = value` with strings, booleans, numbers and
/// numeric arrays. Tables and inline tables are rejected.
using toml_value = std::variant<std::string, bool, double, std::vector<double>>;
std::map<std::string, toml_value> parse_flat_toml(const std::string& text);

SimConfig parse_sim_config(const std::string& text);
SimConfig load_sim_config(const std::string& path);

nlohmann::json to_json(const vector_t& v);
nlohmann::json indices_to_json(const index_set& s);   // 1-based
nlohmann::json number_or_inf(double value);

nlohmann::json pipeline_json(const PipelineResult& result, double q, bool plus);
nlohmann::json summary_json(const RunSummary& summary);
nlohmann::json diagnostics_json(const DiagnosticsReport& report);
nlohmann::json cv_json(const CvResult& cv);

/// summary.csv (per nu), methods.csv and replicates.csv plus summary.json.
void write_run_outputs(const RunSummary& summary, const std::string& out_dir);

} // namespace io
} // namespace skf
