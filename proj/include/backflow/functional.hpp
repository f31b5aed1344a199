#pragma once

#include <vector>

#include "backflow/states.hpp"

namespace backflow {

/// Delta = flow_term - neg_axis_term.
struct DeltaResult {
  double delta = 0.0;
  double flow_term = 0.0;      ///< -(1/pi) sum w w phi* (u+u') sinc(u^2-u'^2) phi
  double neg_axis_term = 0.0;  ///< probability on u < 0
  /// |Delta(N) - Delta(N/2)|; NaN when no coarser evaluation is possible
  /// (odd N without a generator, or a Gauss-Legendre grid without one).
  double quadrature_error_estimate = 0.0;
};

struct DeltaOptions {
  double norm_tolerance = 1e-6;
  bool estimate_error = true;
  int threads = 0;
};

/// The double-sum flow term alone; no normalization requirement.
double flow_term(const RescaledState& phi, int threads = 0);

/// Throws std::invalid_argument when |norm - 1| exceeds options.norm_tolerance.
DeltaResult delta_of_state(const RescaledState& phi, const DeltaOptions& options = {});

/// Half-line quadratic form (no negative-axis term). The state must carry no
/// weight on u <= 0.
double bm_delta_of_state(const RescaledState& phi, const DeltaOptions& options = {});

/// H(v) = -(2/pi) sum_u w F(u) sin(u^2 - v^2) / (u + v) on F's own nodes.
std::vector<double> perturbative_h(const RescaledState& f);

/// G = max(H, 0) / ||max(H, 0)|| on F's half-line grid.
RescaledState positive_part_direction(const RescaledState& f);

/// I = sum_v w H(v) G(v).
double perturbative_slope(const RescaledState& f, const RescaledState& g);

/// f = sqrt(1 - eps^2) F on u > 0 and g(-u) = eps G(u) on u < 0, with F and G
/// real and unit-norm on the same uniform half-line grid.
struct PerturbativeComposite {
  RescaledState big_f;
  RescaledState big_g;
  double epsilon = 0.0;

  void validate() const;
  /// Full uniform (L, N) grid with phi(0) = 0.
  RescaledState assemble() const;
};

DeltaResult composite_delta(const PerturbativeComposite& composite,
                            const DeltaOptions& options = {});

}  // namespace backflow
