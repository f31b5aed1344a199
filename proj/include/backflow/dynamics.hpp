#pragma once

#include <utility>
#include <vector>

#include "backflow/states.hpp"

namespace backflow {

/// One free Gaussian packet c g(x, t) with mean momentum p and position spread sigma.
struct GaussianTerm {
  Complex c = 1.0;
  double p = 0.0;
  double sigma = 1.0;
};

/// Psi(x, t) = sum_n c_n g_n(x, t), normalized including the overlaps between terms.
///
/// g_n(x, t) = (2 pi sigma^2 (1 + i w t)^2)^{-1/4} exp(-(x - p t/m)^2 / (4 sigma^2 (1 + i w t)))
///             exp(i p x / hbar) exp(-i t p^2 / (2 m hbar)),   w = hbar / (2 m sigma^2).
/// Its momentum amplitude at t = 0 is (2 sigma^2 / (pi hbar^2))^{1/4} exp(-sigma^2 (k - p)^2 / hbar^2).
class GaussianSuperposition {
 public:
  /// Coefficients are rescaled so the full state has unit norm.
  GaussianSuperposition(std::vector<GaussianTerm> terms, double hbar = 1.0, double mass = 1.0);

  const std::vector<GaussianTerm>& terms() const { return terms_; }
  double hbar() const { return hbar_; }
  double mass() const { return mass_; }
  /// Factor applied to the given coefficients.
  double coefficient_scale() const { return scale_; }

  double omega(std::size_t n) const;
  Complex term_value(std::size_t n, double x, double t) const;
  Complex position_amplitude(double x, double t) const;
  /// d Psi / dx
  Complex position_derivative(double x, double t) const;
  Complex momentum_amplitude(double p) const;
  double position_density(double x, double t) const { return std::norm(position_amplitude(x, t)); }

  /// Support [lo, hi] holding all but a negligible (< 1e-300 relative) tail at time t.
  std::pair<double, double> position_support(double t) const;
  std::pair<double, double> momentum_support() const;

 private:
  std::vector<GaussianTerm> terms_;
  double hbar_;
  double mass_;
  double scale_ = 1.0;
};

/// Closed-form overlap of two momentum-space Gaussian terms (coefficients excluded).
double gaussian_overlap(const GaussianTerm& a, const GaussianTerm& b, double hbar);

/// j(0, t): the individual-term currents plus pairwise cross terms.
double current_at_origin(const GaussianSuperposition& state, double t);

/// Small-omega-t approximation; requires two equal-width terms with real coefficients.
double simplified_current(const GaussianSuperposition& state, double t);

/// Integral of |Psi|^2 over (-inf, cut) to about 1e-12 absolute.
double probability_left(const GaussianSuperposition& state, double t, double cut);
/// Integral of |Psi|^2 over (a, b); infinite endpoints are allowed.
double probability_in_interval(const GaussianSuperposition& state, double t, double a, double b);
/// Integral of |psi~(p)|^2 over p < 0.
double negative_momentum_probability(const GaussianSuperposition& state);

/// Integral of j(0, t) over [t1, t2] by adaptive Simpson to `tol`.
double integrated_current(const GaussianSuperposition& state, double t1, double t2,
                          double tol = 1e-10);

struct FlowReport {
  double p_minus_t1 = 0.0;
  double p_minus_t2 = 0.0;
  double p_tilde_minus = 0.0;
  /// -integral of j(0, t) over the window minus p_tilde_minus.
  double delta_qb = 0.0;
  /// |P_-(t2) - P_-(t1) + integral of j|: continuity check between both routes.
  double continuity_defect = 0.0;
  std::vector<std::pair<double, double>> current_trace;
};

/// `trace_points` > 1 fills current_trace with evenly spaced (t, j(0, t)).
FlowReport flow_report(const GaussianSuperposition& state, const TimeWindow& window,
                       int trace_points = 0, int threads = 0);

/// P_-(t2) - P_-(t1) + P_-(t0) - 1 with the region x < 0.
double delta_re(const GaussianSuperposition& state, const TimeWindow& window);

/// Samples psi~(p) on `axis`.
PhysicalMomentumState momentum_samples(const GaussianSuperposition& state, const UniformAxis& axis);
/// Samples Psi(x, t) on `axis`.
PhysicalPositionState position_samples(const GaussianSuperposition& state, double t,
                                       const UniformAxis& axis, double norm_tolerance = 1e-10);

struct PropagationOptions {
  double capture = 1e-8;        ///< target norm loss of the position window
  double max_norm_loss = 1e-6;  ///< larger losses raise NumericalError
  int threads = 0;
};

/// Psi(x, t) = (2 pi hbar)^{-1/2} sum_k dp psi~(p_k) exp(i (p_k x - p_k^2 t / 2m) / hbar)
/// on a position grid sized from the state's position moments and widened
/// until it captures 1 - capture of the norm.
PhysicalPositionState propagate_sampled(const PhysicalMomentumState& state, double t,
                                        const PropagationOptions& options = {});

}  // namespace backflow
