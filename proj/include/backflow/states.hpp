#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace backflow {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Rescaled (dimensionless) states
// ---------------------------------------------------------------------------

enum class QuadratureKind {
  uniform,            ///< u_n = nL/N, n = -N..N, weight L/N
  uniform_half_line,  ///< u_n = nL/N, n = 1..N, weight L/N
  gauss_legendre,     ///< N Gauss-Legendre nodes on each of (-L, 0) and (0, L)
};

std::string to_string(QuadratureKind kind);
QuadratureKind quadrature_kind_from_string(const std::string& name);

/// Quadrature nodes and weights for the u variable on (-L, L) or (0, L).
class RescaledGrid {
 public:
  static RescaledGrid uniform(double half_width, int half_count);
  static RescaledGrid uniform_half_line(double half_width, int count);
  static RescaledGrid gauss_legendre(double half_width, int per_half);
  static RescaledGrid make(QuadratureKind kind, double half_width, int half_count);

  QuadratureKind kind() const { return kind_; }
  double half_width() const { return half_width_; }
  int half_count() const { return half_count_; }
  std::size_t size() const { return nodes_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  /// Fraction of node i's weight that lies on u < 0: 1 for u < 0, 1/2 for the
  /// node sitting exactly at u = 0, 0 otherwise.
  double negative_axis_fraction(std::size_t i) const;

  /// Index of the u = 0 node on a full uniform grid.
  std::optional<std::size_t> origin_index() const;

  /// Same kind with half the resolution, or nullopt when N is odd (uniform
  /// grids) or N < 2.
  std::optional<RescaledGrid> coarsened() const;

  bool same_as(const RescaledGrid& other) const;

 private:
  RescaledGrid(QuadratureKind kind, double half_width, int half_count);

  QuadratureKind kind_;
  double half_width_;
  int half_count_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Continuum form of a rescaled state; lets the functional re-sample on a
/// coarser grid to estimate its quadrature error.
using StateGenerator = std::function<Complex(double)>;

/// Samples of phi(u) on a RescaledGrid. The discrete norm is sum w |phi|^2.
class RescaledState {
 public:
  RescaledState(RescaledGrid grid, std::vector<Complex> samples, StateGenerator generator = {});

  /// Samples fn on the grid and attaches fn as the generator.
  static RescaledState sample(const RescaledGrid& grid, StateGenerator fn);

  const RescaledGrid& grid() const { return grid_; }
  std::span<const Complex> samples() const { return samples_; }
  const StateGenerator& generator() const { return generator_; }

  double norm() const;
  /// Probability weight on u < 0 (with the origin node counted at 1/2).
  double negative_axis_weight() const;

  /// Copy rescaled to unit discrete norm (the generator is rescaled too).
  RescaledState normalized() const;
  /// e^{i theta} phi
  RescaledState phase_rotated(double theta) const;
  /// phi*(-u); requires a grid symmetric about 0.
  RescaledState time_reversed() const;

 private:
  RescaledGrid grid_;
  std::vector<Complex> samples_;
  StateGenerator generator_;
};

// ---------------------------------------------------------------------------
// Physical states
// ---------------------------------------------------------------------------

/// Uniform sample axis start + k * step, k = 0..count-1.
struct UniformAxis {
  double start = 0.0;
  double step = 1.0;
  std::size_t count = 0;

  static UniformAxis from_range(double lo, double hi, std::size_t count);
  double at(std::size_t k) const { return start + step * static_cast<double>(k); }
  double back() const { return at(count - 1); }
};

/// Samples on a uniform axis with 4-point cubic interpolation between them.
class SampledWave {
 public:
  SampledWave(UniformAxis axis, std::vector<Complex> samples);

  const UniformAxis& axis() const { return axis_; }
  std::span<const Complex> samples() const { return samples_; }

  /// Rectangle-rule norm sum |psi|^2 * step.
  double norm() const;
  /// Local cubic (4-point Lagrange) interpolation; zero outside the axis.
  Complex interpolate(double x) const;
  /// Integral of |psi|^2 over (-inf, cut) using the cubic interpolant of
  /// |psi|^2 (exact Gauss rule per cell).
  double probability_below(double cut) const;

 private:
  UniformAxis axis_;
  std::vector<Complex> samples_;
};

struct PhysicalMomentumState {
  SampledWave wave;
  double hbar = 1.0;
  double mass = 1.0;

  /// Validates the axis, hbar/mass and that |norm - 1| <= norm_tolerance.
  PhysicalMomentumState(SampledWave wave, double hbar, double mass,
                        double norm_tolerance = 1e-10);
  static PhysicalMomentumState sample(const std::function<Complex(double)>& fn, UniformAxis axis,
                                      double hbar, double mass, double norm_tolerance = 1e-10);
};

struct PhysicalPositionState {
  SampledWave wave;
  double hbar = 1.0;
  double mass = 1.0;

  PhysicalPositionState(SampledWave wave, double hbar, double mass,
                        double norm_tolerance = 1e-10);
  static PhysicalPositionState sample(const std::function<Complex(double)>& fn, UniformAxis axis,
                                      double hbar, double mass, double norm_tolerance = 1e-10);
};

/// Measurement times. t0 is only required by the reentry rescaling.
class TimeWindow {
 public:
  TimeWindow(double t1, double t2);
  TimeWindow(double t0, double t1, double t2);

  double t1() const { return t1_; }
  double t2() const { return t2_; }
  bool has_t0() const { return t0_.has_value(); }
  double t0() const;
  double duration() const { return t2_ - t1_; }

 private:
  std::optional<double> t0_;
  double t1_;
  double t2_;
};

/// Result of mapping a physical state to the u variable. Probability outside
/// (-L, L) is lost; more than 1% raises the warning flag.
struct RescaleResult {
  RescaledState state;
  double norm_loss = 0.0;
  bool truncation_warning = false;
};

inline constexpr double kTruncationWarningThreshold = 0.01;

/// phi(u) = (4 hbar m / T)^{1/4} exp(-i (t2 + t1) u^2 / T) psi~(u sqrt(4 hbar m / T)).
RescaleResult rescale_backflow(const PhysicalMomentumState& state, const TimeWindow& window,
                               const RescaledGrid& grid);

/// Reentry form: phi(u) = s^{1/2} exp(i 2 nu u^2 / omega) psi(-u s), s^2 = 4 hbar / (m omega).
RescaleResult rescale_reentry(const PhysicalPositionState& state, const TimeWindow& window,
                              const RescaledGrid& grid);

struct ReentryScales {
  double omega;
  double nu;
  double length_scale;  ///< sqrt(4 hbar / (m omega))
};
ReentryScales reentry_scales(const TimeWindow& window, double hbar, double mass);

// ---------------------------------------------------------------------------
// Analytic ansatz families
// ---------------------------------------------------------------------------

/// phi(u) = C (e^{-a1 (u-b1)^2} cos(alpha) + e^{-a2 (u-b2)^2} e^{i beta} sin(alpha)).
struct TwoGaussianAnsatz {
  Complex a1, b1, a2, b2;
  double alpha = 0.0;
  double beta = 0.0;

  /// Throws std::invalid_argument unless Re a1 > 0 and Re a2 > 0.
  void validate() const;
  /// Closed-form C^{-2}.
  double inverse_norm_squared() const;
  /// Unnormalized amplitude (C omitted).
  Complex shape(double u) const;
};

/// phi(u) = C cos(alpha) (beta1 - u) e^{-gamma1^2 u^2} for u >= 0,
///          C sin(alpha) (beta2 - u) e^{-gamma2^2 u^2} for u < 0.
struct PiecewiseAnsatz {
  double alpha = 0.0;
  double beta1 = 0.0;
  double gamma1 = 1.0;
  double beta2 = 0.0;
  double gamma2 = 1.0;

  void validate() const;
  double shape(double u) const;
};

RescaledState sample_two_gaussian_ansatz(const TwoGaussianAnsatz& params, const RescaledGrid& grid);
RescaledState sample_two_gaussian_ansatz(const TwoGaussianAnsatz& params, double half_width,
                                         int half_count,
                                         QuadratureKind kind = QuadratureKind::gauss_legendre);

/// C is fixed by normalizing on the sampling grid.
RescaledState sample_piecewise_ansatz(const PiecewiseAnsatz& params, const RescaledGrid& grid);
RescaledState sample_piecewise_ansatz(const PiecewiseAnsatz& params, double half_width,
                                      int half_count,
                                      QuadratureKind kind = QuadratureKind::gauss_legendre);

// ---------------------------------------------------------------------------
// CSV import/export
// ---------------------------------------------------------------------------

/// Header "# quadrature=<kind>,L=<L>,N=<N>" then "u,re,im" rows.
void write_rescaled_csv(std::ostream& out, const RescaledState& state);
RescaledState read_rescaled_csv(std::istream& in);

/// Header "# min=<>,max=<>,step=<>,hbar=<>,mass=<>" then "<axis_name>,re,im" rows.
void write_sampled_csv(std::ostream& out, const SampledWave& wave, const std::string& axis_name,
                       double hbar, double mass);
struct SampledCsv {
  SampledWave wave;
  double hbar;
  double mass;
};
SampledCsv read_sampled_csv(std::istream& in);

}  // namespace backflow
