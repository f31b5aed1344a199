#include "backflow/io.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "backflow/csv.hpp"

namespace backflow {

namespace {

std::string domain_name(KernelDomain domain) {
  return domain == KernelDomain::full_line ? "full_line" : "half_line";
}

KernelDomain domain_from_name(const std::string& name) {
  if (name == "full_line") return KernelDomain::full_line;
  if (name == "half_line") return KernelDomain::half_line;
  throw std::invalid_argument("unknown kernel domain '" + name + "'");
}

}  // namespace

Json number_or_null(double value) {
  return std::isfinite(value) ? Json(value) : Json(nullptr);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

Json to_json(const RunRecord& r) {
  Json j;
  j["command"] = r.command;
  j["config_snapshot"] = r.config;
  j["seeds"] = r.seeds;
  j["outputs"] = r.outputs;
  j["tolerances"] = r.tolerances;
  j["timestamps"] = {{"started", r.started_at}, {"finished", r.finished_at}};
  j["tool_version"] = r.tool_version;
  return j;
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  r.command = j.at("command").get<std::string>();
  r.config = j.at("config_snapshot").get<std::map<std::string, std::string>>();
  r.seeds = j.value("seeds", std::vector<std::uint64_t>{});
  r.outputs = j.value("outputs", Json::object());
  r.tolerances = j.value("tolerances", std::map<std::string, double>{});
  if (j.contains("timestamps")) {
    r.started_at = j["timestamps"].value("started", "");
    r.finished_at = j["timestamps"].value("finished", "");
  }
  r.tool_version = j.value("tool_version", "");
  return r;
}

void write_run_record(const std::filesystem::path& path, const RunRecord& record) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(record).dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

RunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return run_record_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw std::invalid_argument("malformed run record " + path.string() + ": " + e.what());
  }
}

Json to_json(const LinearFit& f) {
  return {{"a", f.a},
          {"b", f.b},
          {"sigma_a", f.sigma_a},
          {"residual", f.residual},
          {"unweighted_residual", f.unweighted_residual},
          {"points", f.points},
          {"weighted", f.weighted}};
}

Json to_json(const DeltaResult& r) {
  return {{"delta", r.delta},
          {"flow_term", r.flow_term},
          {"neg_axis_term", r.neg_axis_term},
          {"quadrature_error_estimate", number_or_null(r.quadrature_error_estimate)}};
}

Json to_json(const EigenvalueCell& c) {
  return {{"L", c.half_width},          {"N", c.half_count},
          {"tol", c.tol},               {"domain", domain_name(c.domain)},
          {"lambda", c.lambda},         {"residual_norm", c.residual_norm},
          {"cached", c.cached}};
}

Json to_json(const SupDeltaEstimate& e) {
  Json lengths = Json::array();
  for (const auto& length : e.lengths) {
    Json cells = Json::array();
    for (const auto& cell : length.cells) cells.push_back(to_json(cell));
    lengths.push_back({{"L", length.half_width}, {"cells", cells}, {"fit", to_json(length.fit)}});
  }
  Json j{{"value", e.value}, {"sigma", e.sigma}, {"lengths", lengths}};
  j["length_fit"] = e.length_fit ? to_json(*e.length_fit) : Json(nullptr);
  return j;
}

Json to_json(const FlowReport& r) {
  Json trace = Json::array();
  for (const auto& [t, j] : r.current_trace) trace.push_back({t, j});
  return {{"p_minus_t1", r.p_minus_t1},
          {"p_minus_t2", r.p_minus_t2},
          {"p_tilde_minus", r.p_tilde_minus},
          {"delta_qb", r.delta_qb},
          {"continuity_defect", r.continuity_defect},
          {"current_trace", trace}};
}

Json to_json(const OptimizationResult& r) {
  Json trace = Json::array();
  for (const auto& p : r.trace) trace.push_back({{"params", p.params}, {"value", p.value}});
  return {{"best_params", r.best_params},
          {"best_delta", r.best_delta},
          {"evaluations", r.evaluations},
          {"penalized_evaluations", r.penalized_evaluations},
          {"converged", r.converged},
          {"restart_values", r.restart_values},
          {"trace", trace}};
}

Json to_json(const McEstimate& e) {
  return {{"value", e.value}, {"stderr", e.standard_error}};
}

void save_cache(const std::filesystem::path& path, const EigenvalueCache& cache) {
  Json cells = Json::array();
  for (const auto& cell : cache.cells()) cells.push_back(to_json(cell));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write cache " + path.string());
  out << cells.dump(2) << '\n';
}

EigenvalueCache load_cache(const std::filesystem::path& path) {
  EigenvalueCache cache;
  std::ifstream in(path);
  if (!in) return cache;
  try {
    for (const auto& c : Json::parse(in)) {
      EigenvalueCell cell;
      cell.half_width = c.at("L").get<double>();
      cell.half_count = c.at("N").get<int>();
      cell.tol = c.at("tol").get<double>();
      cell.domain = domain_from_name(c.at("domain").get<std::string>());
      cell.lambda = c.at("lambda").get<double>();
      cell.residual_norm = c.at("residual_norm").get<double>();
      cache.insert(cell);
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument("malformed cache " + path.string() + ": " + e.what());
  }
  return cache;
}

void write_length_table(std::ostream& out, const LengthEstimate& length) {
  out << "j,N,lambda\n";
  for (std::size_t j = 0; j < length.cells.size(); ++j) {
    out << j + 1 << ',' << length.cells[j].half_count << ','
        << csv::format_double(length.cells[j].lambda) << '\n';
  }
}

void write_summary_table(std::ostream& out, const SupDeltaEstimate& estimate) {
  out << "j,L,sup_lambda,sigma\n";
  for (std::size_t j = 0; j < estimate.lengths.size(); ++j) {
    const auto& length = estimate.lengths[j];
    out << j + 1 << ',' << csv::format_double(length.half_width) << ','
        << csv::format_double(length.fit.a) << ',' << csv::format_double(length.fit.sigma_a)
        << '\n';
  }
}

TableData read_table_csv(std::istream& in) {
  TableData table;
  std::string line;
  bool first = true;
  bool indexed = false;
  while (csv::next_line(in, line)) {
    if (line.front() == '#') continue;
    auto fields = csv::split_record(line);
    if (first) {
      first = false;
      try {
        csv::parse_double(fields.front());
      } catch (const std::invalid_argument&) {
        indexed = fields.front() == "j";
        continue;  // header row
      }
    }
    if (indexed) fields.erase(fields.begin());
    if (fields.size() < 2 || fields.size() > 3) {
      throw std::invalid_argument("table CSV: expected 2 or 3 columns");
    }
    table.abscissa.push_back(csv::parse_double(fields[0]));
    table.values.push_back(csv::parse_double(fields[1]));
    if (fields.size() == 3) table.sigmas.push_back(csv::parse_double(fields[2]));
  }
  if (!table.sigmas.empty() && table.sigmas.size() != table.values.size()) {
    throw std::invalid_argument("table CSV: sigma column is incomplete");
  }
  return table;
}

namespace {

void compare(const Json& expected, const Json& actual, const std::string& path, double tol,
             std::vector<std::string>& mismatches) {
  if (expected.is_number() && actual.is_number()) {
    const double e = expected.get<double>();
    const double a = actual.get<double>();
    if (!(std::abs(e - a) <= tol) && !(e == a)) mismatches.push_back(path);
    return;
  }
  if (expected.type() != actual.type()) {
    mismatches.push_back(path);
    return;
  }
  if (expected.is_object()) {
    for (const auto& [key, value] : expected.items()) {
      if (!actual.contains(key)) {
        mismatches.push_back(path + "/" + key);
        continue;
      }
      compare(value, actual[key], path + "/" + key, tol, mismatches);
    }
    return;
  }
  if (expected.is_array()) {
    if (expected.size() != actual.size()) {
      mismatches.push_back(path);
      return;
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
      compare(expected[i], actual[i], path + "/" + std::to_string(i), tol, mismatches);
    }
    return;
  }
  if (expected != actual) mismatches.push_back(path);
}

}  // namespace

std::vector<std::string> compare_outputs(const RunRecord& expected, const Json& actual) {
  std::vector<std::string> mismatches;
  for (const auto& [key, value] : expected.outputs.items()) {
    if (!actual.contains(key)) {
      mismatches.push_back("/" + key);
      continue;
    }
    const auto it = expected.tolerances.find(key);
    const double tol = it == expected.tolerances.end() ? 0.0 : it->second;
    compare(value, actual[key], "/" + key, tol, mismatches);
  }
  return mismatches;
}

}  // namespace backflow
