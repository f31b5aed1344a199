#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"

#include "backflow/classical.hpp"
#include "backflow/csv.hpp"
#include "backflow/dynamics.hpp"
#include "backflow/extrapolation.hpp"
#include "backflow/functional.hpp"
#include "backflow/io.hpp"
#include "backflow/kernel.hpp"
#include "backflow/numeric.hpp"
#include "backflow/optimize.hpp"
#include "backflow/states.hpp"

namespace backflow::cli {

namespace {

struct CommandOutput {
  Json outputs = Json::object();
  std::map<std::string, double> tolerances;
  std::vector<std::uint64_t> seeds;
};

/// Context shared by one invocation: streams and the options every command has.
struct Session {
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

struct CommonOptions {
  std::string config_path;  ///< consumed by expand_config before parsing
  std::string out_path;
  int threads = 0;
};

using Handler = std::function<CommandOutput()>;

struct Command {
  CLI::App* app = nullptr;
  std::shared_ptr<CommonOptions> common;
  Handler handler;
};

std::ofstream open_output(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream file(p);
  if (!file) throw IoError("cannot write " + path);
  return file;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot read " + path);
  return file;
}

Json cell_json(const EigenvalueCell& cell) {
  Json j = to_json(cell);
  j.erase("cached");  // depends on cache state, not on the computation
  return j;
}

std::shared_ptr<CommonOptions> add_common(CLI::App* sub) {
  auto common = std::make_shared<CommonOptions>();
  sub->option_defaults()->always_capture_default();
  sub->add_option("--config", common->config_path, "Flat INI file of key=value defaults; flags win");
  sub->add_option("--out", common->out_path, "Run record path");
  sub->add_option("--threads", common->threads, "Worker cap (0 = all cores)");
  return common;
}

// --- shared option groups -------------------------------------------------------------

struct PacketOptions {
  std::vector<double> c{1.8, 1.0};
  std::vector<double> p{1.0, 5.7};
  std::vector<double> sigma{1.6};
  double hbar = 1.0;
  double mass = 1.0;

  void add(CLI::App* sub) {
    sub->add_option("--c", c, "Real term coefficients")->delimiter(',');
    sub->add_option("--p", p, "Mean momenta")->delimiter(',');
    sub->add_option("--sigma", sigma, "Position spreads (one value or one per term)")
        ->delimiter(',');
    sub->add_option("--hbar", hbar);
    sub->add_option("--mass", mass);
  }

  GaussianSuperposition build() const {
    if (c.empty() || c.size() != p.size()) {
      throw std::invalid_argument("--c and --p must have the same, non-zero length");
    }
    if (sigma.size() != 1 && sigma.size() != c.size()) {
      throw std::invalid_argument("--sigma needs one value or one per term");
    }
    std::vector<GaussianTerm> terms;
    for (std::size_t i = 0; i < c.size(); ++i) {
      terms.push_back({c[i], p[i], sigma.size() == 1 ? sigma[0] : sigma[i]});
    }
    return GaussianSuperposition(std::move(terms), hbar, mass);
  }
};

struct WindowOptions {
  double t1 = 0.152246;
  double t2 = 0.246813;
  std::optional<double> t0;

  void add(CLI::App* sub) {
    sub->add_option("--t1", t1, "Window start");
    sub->add_option("--t2", t2, "Window end");
    sub->add_option("--t0", t0, "Preparation time (reentry only)");
  }

  TimeWindow build() const { return t0 ? TimeWindow(*t0, t1, t2) : TimeWindow(t1, t2); }
};

// --- sup-delta ------------------------------------------------------------------------

std::vector<int> parse_counts(const std::string& text, double half_width) {
  if (text == "auto") return default_half_counts(half_width);
  std::vector<int> counts;
  for (const auto& field : csv::split_record(text)) {
    const double v = csv::parse_double(field);
    if (v != std::floor(v) || v < 1) throw std::invalid_argument("--N entries must be positive integers");
    counts.push_back(static_cast<int>(v));
  }
  return counts;
}

Command add_sup_delta(CLI::App& app, Session& session) {
  struct Options {
    std::vector<double> lengths;
    std::string counts = "auto";
    bool paper_schedule = false;
    bool reduced_schedule = false;
    bool half_line = false;
    double tol = 1e-12;
    std::string cache_path;
    std::string tables_dir;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("sup-delta", "Extrapolate the largest kernel eigenvalue to L, N -> infinity");
  auto common = add_common(sub);
  sub->add_option("--L", o->lengths, "Half-widths L, comma separated")->delimiter(',');
  sub->add_option("--N", o->counts, "Half counts: 'auto' or a comma separated list");
  sub->add_flag("--paper-schedule", o->paper_schedule, "Use the full seven-row (L, N) schedule, L = 10..40");
  sub->add_flag("--reduced-schedule", o->reduced_schedule, "Use the rows with L <= 20");
  sub->add_flag("--bm", o->half_line, "Half-line kernel (positive-momentum states only)");
  sub->add_option("--tol", o->tol, "Eigen-residual tolerance");
  sub->add_option("--cache", o->cache_path, "JSON cache of solved cells");
  sub->add_option("--tables-dir", o->tables_dir, "Directory for per-L and summary CSV tables");

  Handler handler = [o, common, &session]() {
    ExtrapolationSchedule schedule;
    if (o->paper_schedule && o->reduced_schedule) {
      throw std::invalid_argument("--paper-schedule and --reduced-schedule are exclusive");
    }
    if (o->paper_schedule) {
      schedule = full_schedule();
    } else if (o->reduced_schedule) {
      schedule = reduced_schedule();
    } else {
      if (o->lengths.empty()) throw std::invalid_argument("give --L or a schedule flag");
      for (double L : o->lengths) schedule.rows.push_back({L, parse_counts(o->counts, L)});
    }
    schedule.tol = o->tol;
    const KernelDomain domain = o->half_line ? KernelDomain::half_line : KernelDomain::full_line;

    EigenvalueCache cache;
    if (!o->cache_path.empty()) cache = load_cache(o->cache_path);
    auto progress = [&session](const EigenvalueCell& cell) {
      *session.err << "L=" << cell.half_width << " N=" << cell.half_count
                   << " lambda=" << csv::format_double(cell.lambda) << std::endl;
    };

    CommandOutput result;
    const bool single_cell = schedule.rows.size() == 1 && schedule.rows[0].half_counts.size() == 1;
    if (single_cell) {
      const double L = schedule.rows[0].half_width;
      const int N = schedule.rows[0].half_counts[0];
      auto cell = cache.find(domain, L, N, schedule.tol);
      if (!cell) {
        cell = solve_cell(L, N, schedule.tol, domain, common->threads);
        cache.insert(*cell);
      }
      progress(*cell);
      result.outputs["cell"] = cell_json(*cell);
      result.outputs["lambda"] = cell->lambda;
      result.tolerances = {{"cell", 1e-10}, {"lambda", 1e-10}};
    } else {
      EstimateOptions options;
      options.domain = domain;
      options.threads = common->threads;
      options.cache = &cache;
      options.progress = progress;
      const auto estimate = estimate_sup_delta(schedule, options);
      Json j = to_json(estimate);
      for (auto& length : j["lengths"]) {
        for (auto& cell : length["cells"]) cell.erase("cached");
      }
      result.outputs = j;
      for (const auto& [key, value] : j.items()) result.tolerances[key] = 1e-10;

      if (!o->tables_dir.empty()) {
        const std::filesystem::path dir(o->tables_dir);
        for (const auto& length : estimate.lengths) {
          std::ostringstream name;
          name << "lambda_L" << length.half_width << ".csv";
          auto file = open_output((dir / name.str()).string());
          write_length_table(file, length);
        }
        auto file = open_output((dir / "sup_lambda.csv").string());
        write_summary_table(file, estimate);
      }
    }
    if (!o->cache_path.empty()) save_cache(o->cache_path, cache);
    return result;
  };
  return {sub, common, handler};
}

// --- eig / state ----------------------------------------------------------------------

Command add_eig(CLI::App& app, Session&) {
  struct Options {
    double half_width = 10.0;
    int half_count = 100;
    bool half_line = false;
    double tol = 1e-12;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("eig", "Largest eigenpair of one kernel matrix");
  auto common = add_common(sub);
  sub->add_option("--L", o->half_width, "Half-width L");
  sub->add_option("--N", o->half_count, "Half count N");
  sub->add_flag("--bm", o->half_line, "Half-line kernel");
  sub->add_option("--tol", o->tol, "Eigen-residual tolerance");

  Handler handler = [o, common]() {
    const auto matrix = o->half_line ? build_bm_kernel(o->half_width, o->half_count, common->threads)
                                     : build_kernel(o->half_width, o->half_count, common->threads);
    const auto eig = largest_eigenpair(matrix, o->tol);
    CommandOutput result;
    result.outputs = {{"L", o->half_width},
                      {"N", o->half_count},
                      {"domain", o->half_line ? "half_line" : "full_line"},
                      {"lambda", eig.value},
                      {"residual_norm", eig.residual_norm},
                      {"matvecs", eig.iterations}};
    result.tolerances = {{"lambda", 1e-10}, {"residual_norm", 1e-10}};
    return result;
  };
  return {sub, common, handler};
}

Command add_state(CLI::App& app, Session&) {
  struct Options {
    double half_width = 30.0;
    int half_count = 3000;
    double tol = 1e-12;
    std::string csv_path;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("state", "Export the optimal rescaled state phi(u) as CSV");
  auto common = add_common(sub);
  sub->add_option("--L", o->half_width, "Half-width L");
  sub->add_option("--N", o->half_count, "Half count N");
  sub->add_option("--tol", o->tol, "Eigen-residual tolerance");
  sub->add_option("--csv", o->csv_path, "Output CSV (u,re,im)")->required();

  Handler handler = [o, common]() {
    const auto matrix = build_kernel(o->half_width, o->half_count, common->threads);
    const auto eig = largest_eigenpair(matrix, o->tol);
    const auto phi = export_optimal_state(eig, matrix);
    auto file = open_output(o->csv_path);
    write_rescaled_csv(file, phi);

    DeltaOptions options;
    options.threads = common->threads;
    const auto delta = delta_of_state(phi, options);
    CommandOutput result;
    result.outputs = {{"lambda", eig.value},
                      {"residual_norm", eig.residual_norm},
                      {"norm", phi.norm()},
                      {"jump_ratio", origin_jump_ratio(phi)},
                      {"delta", to_json(delta)}};
    result.tolerances = {{"lambda", 1e-10}, {"residual_norm", 1e-10}, {"norm", 1e-12},
                         {"jump_ratio", 1e-6}, {"delta", 1e-10}};
    return result;
  };
  return {sub, common, handler};
}

// --- fit ------------------------------------------------------------------------------

Command add_fit(CLI::App& app, Session&) {
  struct Options {
    std::string in_path;
    bool weighted = false;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("fit", "Linear fit of a table against 1/(first column)");
  auto common = add_common(sub);
  sub->add_option("--in", o->in_path, "CSV with N or L, value[, sigma]")->required();
  sub->add_flag("--weighted", o->weighted, "Weight rows by 1/sigma^2 (needs a sigma column)");

  Handler handler = [o]() {
    auto file = open_input(o->in_path);
    const auto table = read_table_csv(file);
    std::vector<double> xs;
    for (double v : table.abscissa) {
      if (v == 0.0) throw std::invalid_argument("fit: first column must be non-zero");
      xs.push_back(1.0 / v);
    }
    LinearFit fit;
    if (o->weighted) {
      if (table.sigmas.empty()) throw std::invalid_argument("fit --weighted needs a sigma column");
      fit = fit_weighted(xs, table.values, table.sigmas);
    } else {
      fit = fit_unweighted(xs, table.values);
    }
    CommandOutput result;
    result.outputs = to_json(fit);
    return result;  // closed-form arithmetic: replay must match exactly
  };
  return {sub, common, handler};
}

// --- delta ----------------------------------------------------------------------------

Command add_delta(CLI::App& app, Session&) {
  struct Options {
    std::string ansatz;
    std::vector<double> params;
    bool complex_parameters = false;
    double half_width = 10.0;
    int half_count = 100;
    std::string quadrature = "gauss_legendre";
    std::string in_path;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("delta", "Evaluate the backflow functional for an ansatz or a state CSV");
  auto common = add_common(sub);
  sub->add_option("--ansatz", o->ansatz, "piecewise | two-gaussian");
  sub->add_option("--params", o->params, "Ansatz parameters, comma separated")->delimiter(',');
  sub->add_flag("--complex", o->complex_parameters, "Two-Gaussian params given as re,im pairs");
  sub->add_option("--L", o->half_width, "Quadrature half-width");
  sub->add_option("--N", o->half_count, "Nodes per half");
  sub->add_option("--quadrature", o->quadrature, "gauss_legendre | uniform");
  sub->add_option("--in", o->in_path, "Rescaled state CSV instead of an ansatz");

  Handler handler = [o, common]() {
    const bool from_file = !o->in_path.empty();
    if (from_file == !o->ansatz.empty()) {
      throw std::invalid_argument("give exactly one of --ansatz or --in");
    }
    DeltaOptions options;
    options.threads = common->threads;
    std::optional<RescaledState> phi;
    if (from_file) {
      auto file = open_input(o->in_path);
      phi = read_rescaled_csv(file);
    } else {
      OptimizationProblem problem;
      problem.kind = ansatz_kind_from_string(o->ansatz);
      problem.complex_parameters = o->complex_parameters;
      if (problem.kind == AnsatzKind::two_gaussian_constrained) {
        throw std::invalid_argument("the physical family is evaluated by the gaussian command");
      }
      if (o->params.size() != problem.dimension()) {
        throw std::invalid_argument("--params needs " + std::to_string(problem.dimension()) +
                                    " values for " + to_string(problem.kind));
      }
      const auto grid = RescaledGrid::make(quadrature_kind_from_string(o->quadrature),
                                           o->half_width, o->half_count);
      phi = problem.kind == AnsatzKind::piecewise
                ? sample_piecewise_ansatz(piecewise_from_params(o->params), grid)
                : sample_two_gaussian_ansatz(
                      two_gaussian_from_params(o->params, o->complex_parameters), grid);
    }
    CommandOutput result;
    result.outputs = to_json(delta_of_state(*phi, options));
    result.outputs["norm"] = phi->norm();
    for (const auto& [key, value] : result.outputs.items()) result.tolerances[key] = 1e-12;
    return result;
  };
  return {sub, common, handler};
}

// --- gaussian -------------------------------------------------------------------------

Command add_gaussian(CLI::App& app, Session&) {
  struct Options {
    PacketOptions packet;
    WindowOptions window;
    int trace_points = 0;
    std::string trace_csv;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("gaussian", "Flux report for a superposition of Gaussian packets");
  auto common = add_common(sub);
  o->packet.add(sub);
  o->window.add(sub);
  sub->add_option("--trace-points", o->trace_points, "Samples of j(0,t) across the window");
  sub->add_option("--trace-csv", o->trace_csv, "Write the j(0,t) trace as t,j CSV");

  Handler handler = [o, common]() {
    const auto state = o->packet.build();
    const auto window = o->window.build();
    const auto report = flow_report(state, window, o->trace_points, common->threads);
    CommandOutput result;
    result.outputs = to_json(report);
    result.outputs["coefficient_scale"] = state.coefficient_scale();
    if (window.has_t0()) result.outputs["delta_re"] = delta_re(state, window);
    for (const auto& [key, value] : result.outputs.items()) result.tolerances[key] = 1e-12;
    if (!o->trace_csv.empty()) {
      auto file = open_output(o->trace_csv);
      file << "t,j\n";
      for (const auto& [t, j] : report.current_trace) {
        file << csv::format_double(t) << ',' << csv::format_double(j) << '\n';
      }
    }
    return result;
  };
  return {sub, common, handler};
}

// --- optimize -------------------------------------------------------------------------

Command add_optimize(CLI::App& app, Session&) {
  struct Options {
    std::string ansatz;
    std::vector<double> params;
    bool complex_parameters = false;
    double half_width = 10.0;
    int half_count = 100;
    std::string quadrature = "gauss_legendre";
    int restarts = 0;
    std::uint64_t seed = 0;
    int max_evaluations = 4000;
    double objective_tol = 1e-10;
    double param_tol = 1e-7;
    std::string trace_csv;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("optimize", "Nelder-Mead maximization over an ansatz family");
  auto common = add_common(sub);
  sub->add_option("--ansatz", o->ansatz, "piecewise | two-gaussian | physical")->required();
  sub->add_option("--params", o->params, "Starting parameters")->delimiter(',')->required();
  sub->add_flag("--complex", o->complex_parameters, "Optimize complex two-Gaussian parameters");
  sub->add_option("--L", o->half_width, "Quadrature half-width");
  sub->add_option("--N", o->half_count, "Nodes per half");
  sub->add_option("--quadrature", o->quadrature, "gauss_legendre | uniform");
  sub->add_option("--restarts", o->restarts, "Extra perturbed starts");
  sub->add_option("--seed", o->seed, "Seed for the restart perturbations");
  sub->add_option("--max-evals", o->max_evaluations, "Evaluation budget per run");
  sub->add_option("--objective-tol", o->objective_tol);
  sub->add_option("--param-tol", o->param_tol);
  sub->add_option("--trace-csv", o->trace_csv, "Write the best-vertex trace as CSV");

  Handler handler = [o, common]() {
    OptimizationProblem problem;
    problem.kind = ansatz_kind_from_string(o->ansatz);
    problem.initial_params = o->params;
    problem.complex_parameters = o->complex_parameters;
    problem.half_width = o->half_width;
    problem.half_count = o->half_count;
    problem.quadrature = quadrature_kind_from_string(o->quadrature);
    problem.restarts = o->restarts;
    problem.seed = o->seed;
    problem.max_evaluations = o->max_evaluations;
    problem.objective_tol = o->objective_tol;
    problem.param_tol = o->param_tol;
    problem.record_trace = !o->trace_csv.empty();
    problem.threads = common->threads;
    const auto optimum = optimize(problem);

    CommandOutput result;
    result.outputs = to_json(optimum);
    result.outputs.erase("trace");
    result.outputs["kind"] = to_string(problem.kind);
    result.seeds = {o->seed};
    for (const auto& [key, value] : result.outputs.items()) result.tolerances[key] = 1e-9;
    if (!o->trace_csv.empty()) {
      auto file = open_output(o->trace_csv);
      file << "step,value";
      for (std::size_t i = 0; i < problem.dimension(); ++i) file << ",x" << i;
      file << '\n';
      for (std::size_t s = 0; s < optimum.trace.size(); ++s) {
        file << s << ',' << csv::format_double(optimum.trace[s].value);
        for (double x : optimum.trace[s].params) file << ',' << csv::format_double(x);
        file << '\n';
      }
    }
    return result;
  };
  return {sub, common, handler};
}

// --- classical ------------------------------------------------------------------------

Command add_classical(CLI::App& app, Session&) {
  struct Options {
    std::string dist = "gaussian";
    std::string in_path;
    std::size_t count = 100000;
    std::optional<std::uint64_t> seed;
    GaussianPhaseSpace density{0.0, 1.0, 1.0, 1.0, 0.0};
    double mass = 1.0;
    WindowOptions window{0.0, 1.0, std::nullopt};
    double cut = 0.0;
    std::optional<double> lo;  ///< unbounded below when absent
    double hi = 0.0;
    std::string ensemble_out;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("classical", "Monte Carlo classical backflow and reentry estimates");
  auto common = add_common(sub);
  sub->add_option("--dist", o->dist, "Phase-space density: gaussian");
  sub->add_option("--in", o->in_path, "Ensemble CSV (x,p[,w]) instead of sampling");
  sub->add_option("--n", o->count, "Sample count");
  sub->add_option("--seed", o->seed, "RNG seed (required when sampling)");
  sub->add_option("--mean-x", o->density.mean_x);
  sub->add_option("--mean-p", o->density.mean_p);
  sub->add_option("--sigma-x", o->density.sigma_x);
  sub->add_option("--sigma-p", o->density.sigma_p);
  sub->add_option("--rho", o->density.correlation, "x-p correlation");
  sub->add_option("--mass", o->mass);
  o->window.add(sub);
  sub->add_option("--cut", o->cut, "Backflow boundary");
  sub->add_option("--lo", o->lo, "Reentry region lower end (default: unbounded)");
  sub->add_option("--hi", o->hi, "Reentry region upper end");
  sub->add_option("--ensemble-out", o->ensemble_out, "Write the sampled ensemble as CSV");

  Handler handler = [o, common]() {
    ClassicalEnsemble ensemble;
    CommandOutput result;
    if (!o->in_path.empty()) {
      auto file = open_input(o->in_path);
      ensemble = read_ensemble_csv(file, o->mass);
    } else {
      if (o->dist != "gaussian") throw std::invalid_argument("unknown --dist '" + o->dist + "'");
      if (!o->seed) throw std::invalid_argument("classical sampling requires --seed");
      ensemble = o->density.sample(o->count, *o->seed, o->mass, common->threads);
      result.seeds = {*o->seed};
    }
    if (!o->ensemble_out.empty()) {
      auto file = open_output(o->ensemble_out);
      write_ensemble_csv(file, ensemble);
    }
    const auto window = o->window.build();
    const auto qb = classical_delta_qb(ensemble, window, o->cut);
    result.outputs["delta_qb"] = to_json(qb);
    result.outputs["delta_qb_within_3_stderr"] = qb.value <= 3.0 * qb.standard_error;
    if (window.has_t0()) {
      const double lo = o->lo.value_or(-std::numeric_limits<double>::infinity());
      const auto re = classical_delta_re(ensemble, window, {lo, o->hi});
      result.outputs["delta_re"] = to_json(re);
      result.outputs["delta_re_within_3_stderr"] = re.value <= 3.0 * re.standard_error;
    }
    result.outputs["effective_size"] = ensemble.effective_size();
    return result;  // seeded and layout-independent: replay must match exactly
  };
  return {sub, common, handler};
}

// --- tradeoff -------------------------------------------------------------------------

Command add_tradeoff(CLI::App& app, Session&) {
  struct Options {
    PacketOptions packet;
    WindowOptions window;
    double b = 0.0;
    double f = 1.0;
  };
  auto o = std::make_shared<Options>();
  auto* sub = app.add_subcommand("tradeoff", "Backflow at b plus forwardflow at f for a Gaussian superposition");
  auto common = add_common(sub);
  o->packet.add(sub);
  o->window.add(sub);
  sub->add_option("--b", o->b, "Backflow point");
  sub->add_option("--f", o->f, "Forwardflow point");

  Handler handler = [o]() {
    const auto r = quantum_tradeoff(o->packet.build(), o->window.build(), o->b, o->f);
    CommandOutput result;
    result.outputs = {{"delta_qb", r.delta_qb}, {"delta_qf", r.delta_qf}, {"sum", r.sum()}};
    result.tolerances = {{"delta_qb", 1e-12}, {"delta_qf", 1e-12}, {"sum", 1e-12}};
    return result;
  };
  return {sub, common, handler};
}

// --- driver ---------------------------------------------------------------------------

struct Program {
  CLI::App app{"Quantum backflow and reentry bounds", "backflow"};
  std::string replay_path;
  std::vector<Command> commands;

  explicit Program(Session& session) {
    app.set_version_flag("--version", kToolVersion);
    app.add_option("--replay", replay_path, "Re-run a run record and compare its outputs");
    app.require_subcommand(0, 1);
    for (auto add : {add_sup_delta, add_eig, add_state, add_fit, add_delta, add_gaussian,
                     add_optimize, add_classical, add_tradeoff}) {
      commands.push_back(add(app, session));
    }
  }

  const Command* selected() const {
    for (const auto& c : commands) {
      if (c.app->parsed()) return &c;
    }
    return nullptr;
  }

  const Command* find(const std::string& name) const {
    for (const auto& c : commands) {
      if (c.app->get_name() == name) return &c;
    }
    return nullptr;
  }
};

bool excluded_from_snapshot(const std::string& name) {
  return name == "--help" || name == "--config" || name == "--out";
}

std::string option_name(const CLI::Option* opt) {
  return opt->get_lnames().empty() ? opt->get_name() : "--" + opt->get_lnames().front();
}

/// Effective value of every option, as the strings a replay feeds back in.
std::map<std::string, std::string> snapshot(const CLI::App* sub) {
  std::map<std::string, std::string> config;
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = option_name(opt);
    if (excluded_from_snapshot(name)) continue;
    if (opt->get_expected_min() == 0) {
      config[name] = opt->count() > 0 ? "true" : "false";
      continue;
    }
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
      if (value.size() >= 2 && value.front() == '[' && value.back() == ']') {
        value = value.substr(1, value.size() - 2);
      }
    }
    if (!value.empty()) config[name] = value;
  }
  return config;
}

std::vector<std::string> replay_arguments(const Program& program, const RunRecord& record) {
  const Command* command = program.find(record.command);
  if (!command) throw std::invalid_argument("run record names unknown command '" + record.command + "'");
  std::vector<std::string> args{record.command};
  for (const auto& [name, value] : record.config) {
    const CLI::Option* opt = command->app->get_option_no_throw(name);
    if (!opt) throw std::invalid_argument("run record has unknown option " + name);
    if (opt->get_expected_min() == 0) {
      if (value == "true") args.push_back(name);
    } else {
      args.push_back(name);
      args.push_back(value);
    }
  }
  return args;
}

std::filesystem::path record_path(const Command& command) {
  if (!command.common->out_path.empty()) return command.common->out_path;
  const char* dir = std::getenv(kOutDirEnv);
  const std::filesystem::path base = dir && *dir ? dir : ".";
  return base / (command.app->get_name() + ".json");
}

int report_failure(std::ostream& err, const char* kind, const std::exception& e, int code) {
  err << "backflow: " << kind << ": " << e.what() << '\n';
  return code;
}

/// Splices `key=value` lines of a --config file into the arguments as
/// `--key value`, skipping keys already given on the command line.
std::vector<std::string> expand_config(const Program& program, std::vector<std::string> args) {
  if (args.empty()) return args;
  const Command* command = program.find(args.front());
  if (!command) return args;
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  if (!std::filesystem::exists(*path)) throw IoError("cannot read config " + *path);
  const auto items = CLI::ConfigINI().from_file(*path);
  auto given = [&args](const std::string& key) {
    return std::any_of(args.begin(), args.end(), [&key](const std::string& a) {
      return a == key || a.rfind(key + "=", 0) == 0;
    });
  };
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const std::string key = "--" + item.name;
    const CLI::Option* opt = command->app->get_option_no_throw(key);
    if (!opt || excluded_from_snapshot(key)) throw std::invalid_argument("config: unknown key '" + item.name + "'");
    if (given(key)) continue;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) value += (i ? "," : "") + item.inputs[i];
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1" || value.empty()) args.push_back(key);
    } else {
      args.push_back(key);
      args.push_back(value);
    }
  }
  return args;
}

/// Parses and runs one command. When `captured` is set the record is
/// returned there instead of being written.
int execute(const std::vector<std::string>& args, Session& session, RunRecord* captured) {
  Program program(session);
  try {
    const auto expanded = expand_config(program, args);
    std::vector<std::string> reversed(expanded.rbegin(), expanded.rend());
    program.app.parse(reversed);
  } catch (const IoError& e) {
    return report_failure(*session.err, "I/O error", e, kExitIo);
  } catch (const CLI::FileError& e) {
    *session.err << "backflow: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    return report_failure(*session.err, "invalid config", e, kExitUsage);
  } catch (const CLI::ParseError& e) {
    const int code = program.app.exit(e, *session.out, *session.err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Command* command = program.selected();
  if (!program.replay_path.empty()) {
    if (command || captured) {
      *session.err << "backflow: --replay takes no subcommand\n";
      return kExitUsage;
    }
    RunRecord expected;
    std::vector<std::string> replay_args;
    try {
      expected = read_run_record(program.replay_path);
      replay_args = replay_arguments(program, expected);
    } catch (const IoError& e) {
      return report_failure(*session.err, "I/O error", e, kExitIo);
    } catch (const std::exception& e) {
      return report_failure(*session.err, "invalid run record", e, kExitUsage);
    }
    RunRecord actual;
    const int code = execute(replay_args, session, &actual);
    if (code != kExitOk) return code;
    const auto mismatches = compare_outputs(expected, actual.outputs);
    if (actual.seeds != expected.seeds) {
      *session.err << "backflow: replay seeds differ\n";
      return kExitNumeric;
    }
    Json summary{{"replayed", expected.command},
                 {"matches", mismatches.empty()},
                 {"mismatches", mismatches}};
    *session.out << summary.dump(2) << '\n';
    return mismatches.empty() ? kExitOk : kExitNumeric;
  }
  if (!command) {
    *session.err << program.app.help();
    return kExitUsage;
  }

  RunRecord record;
  record.command = command->app->get_name();
  record.config = snapshot(command->app);
  record.started_at = utc_timestamp();
  try {
    CommandOutput output = command->handler();
    record.outputs = std::move(output.outputs);
    record.tolerances = std::move(output.tolerances);
    record.seeds = std::move(output.seeds);
    record.finished_at = utc_timestamp();
    if (captured) {
      *captured = std::move(record);
      return kExitOk;
    }
    write_run_record(record_path(*command), record);
  } catch (const NumericalError& e) {
    return report_failure(*session.err, "numerical failure", e, kExitNumeric);
  } catch (const IoError& e) {
    return report_failure(*session.err, "I/O error", e, kExitIo);
  } catch (const std::invalid_argument& e) {
    return report_failure(*session.err, "invalid input", e, kExitUsage);
  } catch (const std::out_of_range& e) {
    return report_failure(*session.err, "invalid input", e, kExitUsage);
  } catch (const std::exception& e) {
    return report_failure(*session.err, "failure", e, kExitNumeric);
  }
  *session.out << record.outputs.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Session session{&out, &err};
  return execute(args, session, nullptr);
}

}  // namespace backflow::cli
