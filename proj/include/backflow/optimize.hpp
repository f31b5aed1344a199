#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "backflow/states.hpp"

namespace backflow {

enum class AnsatzKind {
  two_gaussian_general,      ///< (a1, b1, a2, b2, alpha, beta), or real/imag pairs when complex
  two_gaussian_constrained,  ///< physical (c1, c2, sigma, p1, p2, t1, t2), objective Delta_QB
  piecewise,                 ///< (alpha, beta1, gamma1, beta2, gamma2)
};

std::string to_string(AnsatzKind kind);
AnsatzKind ansatz_kind_from_string(const std::string& name);

struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct OptimizationProblem {
  AnsatzKind kind = AnsatzKind::piecewise;
  std::vector<double> initial_params;
  std::optional<Bounds> bounds;
  double half_width = 10.0;
  int half_count = 100;
  QuadratureKind quadrature = QuadratureKind::gauss_legendre;
  double objective_tol = 1e-10;
  double param_tol = 1e-7;
  int max_evaluations = 4000;
  /// Seeded restarts from the initial point perturbed by up to +-10% per coordinate.
  int restarts = 0;
  std::uint64_t seed = 0;
  /// Optimize imaginary parts of a1..b2 too (two_gaussian_general only).
  bool complex_parameters = false;
  bool record_trace = false;
  int threads = 0;

  void validate() const;
  std::size_t dimension() const;
};

struct TracePoint {
  std::vector<double> params;
  double value = 0.0;
};

struct OptimizationResult {
  std::vector<double> best_params;
  double best_delta = 0.0;
  int evaluations = 0;
  int penalized_evaluations = 0;
  bool converged = false;
  /// Best value of each restart (index 0 is the unperturbed start).
  std::vector<double> restart_values;
  /// Best vertex after every simplex iteration of the winning run.
  std::vector<TracePoint> trace;
};

/// Value returned for parameters that violate the ansatz invariants.
inline constexpr double kInvalidPenalty = -10.0;

struct NelderMeadOptions {
  double objective_tol = 1e-10;
  double param_tol = 1e-7;
  int max_evaluations = 4000;
  double initial_step = 0.05;  ///< relative to |x_i|, absolute 0.05 for zero coordinates
  std::vector<bool> periodic;  ///< coordinates measured mod 2 pi
  bool record_trace = false;
};

/// Maximizes f with the Nelder-Mead simplex (coefficients 1, 2, 0.5, 0.5).
OptimizationResult nelder_mead_maximize(const std::function<double(const std::vector<double>&)>& f,
                                        std::vector<double> start,
                                        const NelderMeadOptions& options = {});

/// Objective for a problem: Delta of the ansatz (or Delta_QB for the physical
/// family), kInvalidPenalty when the parameters are invalid.
double evaluate_objective(const OptimizationProblem& problem, const std::vector<double>& params);

OptimizationResult optimize(const OptimizationProblem& problem);

/// optimize() for the seven-parameter physical family.
OptimizationResult optimize_constrained_physical(OptimizationProblem problem);

/// Ansatz or physical state for a parameter vector of the given kind.
TwoGaussianAnsatz two_gaussian_from_params(const std::vector<double>& params, bool complex_parameters);
PiecewiseAnsatz piecewise_from_params(const std::vector<double>& params);

}  // namespace backflow
