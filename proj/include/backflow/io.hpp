#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "backflow/classical.hpp"
#include "backflow/dynamics.hpp"
#include "backflow/extrapolation.hpp"
#include "backflow/functional.hpp"
#include "backflow/optimize.hpp"

namespace backflow {

using Json = nlohmann::json;

inline constexpr const char* kToolVersion = "1.0.0";

/// File could not be opened or written. The CLI maps this to exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One computation: enough to replay it and compare the outputs.
struct RunRecord {
  std::string command;
  std::map<std::string, std::string> config;  ///< effective flag values
  std::vector<std::uint64_t> seeds;
  Json outputs = Json::object();
  /// Absolute tolerance per output key used when replaying.
  std::map<std::string, double> tolerances;
  std::string started_at;
  std::string finished_at;
  std::string tool_version = kToolVersion;
};

Json to_json(const RunRecord& record);
RunRecord run_record_from_json(const Json& j);

/// UTF-8 JSON with sorted keys.
void write_run_record(const std::filesystem::path& path, const RunRecord& record);
RunRecord read_run_record(const std::filesystem::path& path);

/// ISO-8601 UTC timestamp of the current time.
std::string utc_timestamp();

Json to_json(const LinearFit& fit);
Json to_json(const DeltaResult& result);
Json to_json(const EigenvalueCell& cell);
Json to_json(const SupDeltaEstimate& estimate);
Json to_json(const FlowReport& report);
Json to_json(const OptimizationResult& result);
Json to_json(const McEstimate& estimate);

/// NaN and infinities become null.
Json number_or_null(double value);

/// Cache file: a JSON array of solved cells.
void save_cache(const std::filesystem::path& path, const EigenvalueCache& cache);
EigenvalueCache load_cache(const std::filesystem::path& path);

/// "j,N,lambda" rows for one L.
void write_length_table(std::ostream& out, const LengthEstimate& length);
/// "j,L,sup_lambda,sigma" rows.
void write_summary_table(std::ostream& out, const SupDeltaEstimate& estimate);

/// Table CSV for fits: first column N or L, then value and an optional sigma.
/// A header row is skipped when its first field is not numeric; a leading
/// "j" index column (as written by the table writers) is dropped.
struct TableData {
  std::vector<double> abscissa;
  std::vector<double> values;
  std::vector<double> sigmas;
};
TableData read_table_csv(std::istream& in);

/// Compares the outputs of two records key by key, descending into objects
/// and arrays; numbers must agree within the tolerance of their top-level key
/// (default 0, exact). Returns the mismatching paths.
std::vector<std::string> compare_outputs(const RunRecord& expected, const Json& actual);

}  // namespace backflow
