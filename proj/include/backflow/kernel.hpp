#pragma once

#include <Eigen/Dense>

#include "backflow/states.hpp"

namespace backflow {

enum class KernelDomain {
  full_line,  ///< (-L, L), 2N+1 nodes, includes the negative-axis delta term
  half_line,  ///< (0, L), N nodes, standard positive-momentum problem
};

/// Dense real symmetric discretization of the flux kernel on a uniform grid.
///
/// Entry (n, m) is  -L^2 (n + m) / (pi N^2) * sinc(L^2 (n^2 - m^2) / N^2)
/// minus theta(-n) on the diagonal for the full-line kernel, where theta is 1
/// for n < 0, 1/2 at n = 0, and 0 otherwise.
class KernelMatrix {
 public:
  KernelMatrix(Eigen::MatrixXd entries, double half_width, int half_count, KernelDomain domain);

  const Eigen::MatrixXd& entries() const { return entries_; }
  double half_width() const { return half_width_; }
  int half_count() const { return half_count_; }
  KernelDomain domain() const { return domain_; }
  Eigen::Index size() const { return entries_.rows(); }

  /// Entry by signed grid index (n, m in -N..N for the full line, 1..N for the half line).
  double at(int n, int m) const;

  /// The u-grid the rows correspond to.
  RescaledGrid grid() const;

 private:
  Eigen::MatrixXd entries_;
  double half_width_;
  int half_count_;
  KernelDomain domain_;
};

/// Diagonal weight of the negative-axis term at grid index n.
double negative_axis_step(int n);

KernelMatrix build_kernel(double half_width, int half_count, int threads = 0);
KernelMatrix build_bm_kernel(double half_width, int half_count, int threads = 0);

struct EigenResult {
  double value = 0.0;
  Eigen::VectorXd vector;
  double residual_norm = 0.0;
  int iterations = 0;  ///< matrix-vector products
};

struct LanczosOptions {
  /// Stop once ||A v - lambda v|| <= tol * max(1, |lambda|).
  double tol = 1e-12;
  int max_krylov_dimension = 300;
  int max_restarts = 20;
};

/// Algebraically largest eigenpair of a real symmetric matrix via Lanczos
/// with full reorthogonalization and explicit restarts. The returned vector
/// has unit 2-norm. Throws NumericalError when the residual target is not met.
EigenResult largest_eigenpair(const Eigen::MatrixXd& matrix, const LanczosOptions& options = {});
EigenResult largest_eigenpair(const KernelMatrix& matrix, double tol = 1e-12);

/// Rayleigh quotient v^T A v / v^T v.
double rayleigh_quotient(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& v);

/// Converts an eigenvector to phi(u) = v / sqrt(L/N) on the kernel's grid,
/// with the largest-magnitude sample made positive. Unit discrete norm.
RescaledState export_optimal_state(const EigenResult& result, const KernelMatrix& matrix);
RescaledState export_optimal_state(const EigenResult& result, double half_width, int half_count,
                                   KernelDomain domain = KernelDomain::full_line);

/// |phi(0+) - phi(0-)| divided by the mean |phi_{n+1} - phi_n| over n >= 1.
/// Requires a full uniform grid.
double origin_jump_ratio(const RescaledState& state);

/// Ratios above this flag a discontinuity at u = 0. A smooth state stays
/// O(1) because both numerator and denominator scale with the grid step.
inline constexpr double kJumpDetectionThreshold = 10.0;

inline bool has_origin_jump(const RescaledState& state) {
  return origin_jump_ratio(state) > kJumpDetectionThreshold;
}

}  // namespace backflow
