#include "backflow/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "backflow/classical.hpp"
#include "backflow/dynamics.hpp"
#include "backflow/functional.hpp"
#include "backflow/numeric.hpp"

namespace backflow {

std::string to_string(AnsatzKind kind) {
  switch (kind) {
    case AnsatzKind::two_gaussian_general: return "two_gaussian_general";
    case AnsatzKind::two_gaussian_constrained: return "two_gaussian_constrained";
    case AnsatzKind::piecewise: return "piecewise";
  }
  return "unknown";
}

AnsatzKind ansatz_kind_from_string(const std::string& name) {
  if (name == "two_gaussian_general" || name == "two-gaussian" || name == "two_gaussian") {
    return AnsatzKind::two_gaussian_general;
  }
  if (name == "two_gaussian_constrained" || name == "physical" || name == "constrained") {
    return AnsatzKind::two_gaussian_constrained;
  }
  if (name == "piecewise") return AnsatzKind::piecewise;
  throw std::invalid_argument("unknown ansatz '" + name + "'");
}

std::size_t OptimizationProblem::dimension() const {
  switch (kind) {
    case AnsatzKind::two_gaussian_general: return complex_parameters ? 10 : 6;
    case AnsatzKind::two_gaussian_constrained: return 7;
    case AnsatzKind::piecewise: return 5;
  }
  return 0;
}

void OptimizationProblem::validate() const {
  if (initial_params.size() != dimension()) {
    throw std::invalid_argument("optimize: expected " + std::to_string(dimension()) +
                                " parameters for " + to_string(kind));
  }
  for (double v : initial_params) {
    if (!std::isfinite(v)) throw std::invalid_argument("optimize: non-finite parameter");
  }
  if (bounds && (bounds->lower.size() != dimension() || bounds->upper.size() != dimension())) {
    throw std::invalid_argument("optimize: bounds do not match the parameter count");
  }
  if (!(half_width > 0.0) || half_count < 1) throw std::invalid_argument("optimize: invalid grid");
  if (restarts < 0 || max_evaluations < 1) throw std::invalid_argument("optimize: invalid budget");
  if (evaluate_objective(*this, initial_params) == kInvalidPenalty) {
    throw std::invalid_argument("optimize: initial parameters violate the ansatz invariants");
  }
}

TwoGaussianAnsatz two_gaussian_from_params(const std::vector<double>& x, bool complex_parameters) {
  TwoGaussianAnsatz a;
  if (complex_parameters) {
    a.a1 = {x[0], x[1]};
    a.b1 = {x[2], x[3]};
    a.a2 = {x[4], x[5]};
    a.b2 = {x[6], x[7]};
    a.alpha = x[8];
    a.beta = x[9];
  } else {
    a.a1 = x[0];
    a.b1 = x[1];
    a.a2 = x[2];
    a.b2 = x[3];
    a.alpha = x[4];
    a.beta = x[5];
  }
  return a;
}

PiecewiseAnsatz piecewise_from_params(const std::vector<double>& x) {
  return PiecewiseAnsatz{x[0], x[1], x[2], x[3], x[4]};
}

namespace {

double physical_delta_qb(const std::vector<double>& x) {
  const GaussianSuperposition state({{x[0], x[3], x[2]}, {x[1], x[4], x[2]}});
  const TimeWindow window(x[5], x[6]);
  return -integrated_current(state, window.t1(), window.t2()) -
         negative_momentum_probability(state);
}

}  // namespace

double evaluate_objective(const OptimizationProblem& problem, const std::vector<double>& x) {
  if (problem.bounds) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] < problem.bounds->lower[i] || x[i] > problem.bounds->upper[i]) return kInvalidPenalty;
    }
  }
  DeltaOptions options;
  options.estimate_error = false;
  options.threads = problem.threads;
  try {
    const auto grid = RescaledGrid::make(problem.quadrature, problem.half_width, problem.half_count);
    switch (problem.kind) {
      case AnsatzKind::two_gaussian_general: {
        const auto ansatz = two_gaussian_from_params(x, problem.complex_parameters);
        return delta_of_state(sample_two_gaussian_ansatz(ansatz, grid), options).delta;
      }
      case AnsatzKind::piecewise:
        return delta_of_state(sample_piecewise_ansatz(piecewise_from_params(x), grid), options)
            .delta;
      case AnsatzKind::two_gaussian_constrained:
        return physical_delta_qb(x);
    }
  } catch (const std::exception&) {
    return kInvalidPenalty;
  }
  return kInvalidPenalty;
}

// --- Nelder-Mead ----------------------------------------------------------------------

namespace {

double coordinate_distance(double a, double b, bool periodic) {
  double d = std::abs(a - b);
  if (periodic) {
    d = std::fmod(d, 2.0 * std::numbers::pi);
    d = std::min(d, 2.0 * std::numbers::pi - d);
  }
  return d;
}

}  // namespace

OptimizationResult nelder_mead_maximize(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> start,
                                        const NelderMeadOptions& options) {
  const std::size_t n = start.size();
  if (n == 0) throw std::invalid_argument("nelder_mead_maximize: empty parameter vector");
  OptimizationResult result;
  auto eval = [&](const std::vector<double>& x) {
    ++result.evaluations;
    const double v = f(x);
    if (v == kInvalidPenalty || !std::isfinite(v)) {
      ++result.penalized_evaluations;
      return kInvalidPenalty;
    }
    return v;
  };
  auto budget_left = [&] { return result.evaluations < options.max_evaluations; };
  auto periodic = [&](std::size_t i) { return i < options.periodic.size() && options.periodic[i]; };

  std::vector<std::vector<double>> xs(n + 1, start);
  std::vector<double> fs(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double step = start[i] != 0.0 ? options.initial_step * std::abs(start[i]) : 0.05;
    xs[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= n; ++i) fs[i] = eval(xs[i]);

  std::vector<std::size_t> order(n + 1);
  auto affine = [&](const std::vector<double>& c, const std::vector<double>& x, double t) {
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = c[i] + t * (x[i] - c[i]);
    return y;
  };

  for (;;) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fs[a] > fs[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second_worst = order[n - 1];
    if (options.record_trace) result.trace.push_back({xs[best], fs[best]});

    double spread = 0.0;
    for (std::size_t v = 0; v <= n; ++v) {
      for (std::size_t i = 0; i < n; ++i) {
        spread = std::max(spread, coordinate_distance(xs[v][i], xs[best][i], periodic(i)));
      }
    }
    if (fs[best] - fs[worst] <= options.objective_tol && spread <= options.param_tol) {
      result.converged = true;
      break;
    }
    if (!budget_left()) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t v = 0; v <= n; ++v) {
      if (v == worst) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += xs[v][i] / static_cast<double>(n);
    }
    const auto reflected = affine(centroid, xs[worst], -1.0);
    const double fr = eval(reflected);
    if (fr > fs[best]) {
      const auto expanded = affine(centroid, xs[worst], -2.0);
      const double fe = budget_left() ? eval(expanded) : kInvalidPenalty;
      if (fe > fr) {
        xs[worst] = expanded;
        fs[worst] = fe;
      } else {
        xs[worst] = reflected;
        fs[worst] = fr;
      }
      continue;
    }
    if (fr > fs[second_worst]) {
      xs[worst] = reflected;
      fs[worst] = fr;
      continue;
    }
    if (!budget_left()) break;
    const bool outside = fr > fs[worst];
    const auto contracted = outside ? affine(centroid, reflected, 0.5) : affine(centroid, xs[worst], 0.5);
    const double fc = eval(contracted);
    if (outside ? fc >= fr : fc > fs[worst]) {
      xs[worst] = contracted;
      fs[worst] = fc;
      continue;
    }
    for (std::size_t v = 0; v <= n && budget_left(); ++v) {
      if (v == best) continue;
      xs[v] = affine(xs[best], xs[v], 0.5);
      fs[v] = eval(xs[v]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(fs.begin(), fs.end()) - fs.begin());
  result.best_params = xs[best];
  result.best_delta = fs[best];
  return result;
}

// --- problem driver ---------------------------------------------------------------------

OptimizationResult optimize(const OptimizationProblem& problem) {
  problem.validate();
  NelderMeadOptions nm;
  nm.objective_tol = problem.objective_tol;
  nm.param_tol = problem.param_tol;
  nm.max_evaluations = problem.max_evaluations;
  nm.record_trace = problem.record_trace;
  nm.periodic.assign(problem.dimension(), false);
  if (problem.kind == AnsatzKind::two_gaussian_general) nm.periodic.back() = true;

  const std::size_t runs = static_cast<std::size_t>(problem.restarts) + 1;
  std::vector<std::vector<double>> starts(runs, problem.initial_params);
  const Philox4x32 rng(problem.seed);
  for (std::size_t r = 1; r < runs; ++r) {
    for (std::size_t i = 0; i < starts[r].size(); ++i) {
      const double u = rng.uniforms(r, static_cast<std::uint32_t>(i))[0];
      starts[r][i] *= 1.0 + 0.1 * (2.0 * u - 1.0);
    }
  }

  // Restarts run concurrently; each evaluates its objective single-threaded.
  OptimizationProblem inner = problem;
  inner.threads = runs > 1 ? 1 : problem.threads;
  auto objective = [&inner](const std::vector<double>& x) { return evaluate_objective(inner, x); };
  std::vector<OptimizationResult> outcomes(runs);
  parallel_for(runs, runs > 1 ? problem.threads : 1,
               [&](std::size_t r) { outcomes[r] = nelder_mead_maximize(objective, starts[r], nm); });

  std::size_t winner = 0;
  for (std::size_t r = 1; r < runs; ++r) {
    if (outcomes[r].best_delta > outcomes[winner].best_delta) winner = r;
  }
  // Polish: a fresh simplex around the winner.
  inner.threads = problem.threads;
  OptimizationResult polished = nelder_mead_maximize(objective, outcomes[winner].best_params, nm);

  OptimizationResult result = outcomes[winner];
  if (polished.best_delta >= result.best_delta) {
    result.best_params = polished.best_params;
    result.best_delta = polished.best_delta;
  }
  result.converged = polished.converged;
  const double first_polish = polished.trace.empty() ? 0.0 : polished.trace.front().value;
  for (auto& point : polished.trace) {
    if (point.value >= first_polish) result.trace.push_back(std::move(point));
  }
  result.evaluations = polished.evaluations;
  result.penalized_evaluations = polished.penalized_evaluations;
  for (const auto& o : outcomes) {
    result.evaluations += o.evaluations;
    result.penalized_evaluations += o.penalized_evaluations;
    result.restart_values.push_back(o.best_delta);
  }
  // Re-verify the reported optimum with a fresh evaluation.
  result.best_delta = evaluate_objective(problem, result.best_params);
  ++result.evaluations;
  return result;
}

OptimizationResult optimize_constrained_physical(OptimizationProblem problem) {
  problem.kind = AnsatzKind::two_gaussian_constrained;
  return optimize(problem);
}

}  // namespace backflow
