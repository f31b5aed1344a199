#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace backflow {

/// Raised when an iterative or adaptive numerical method fails to meet its
/// tolerance. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// sin(z)/z with a Taylor branch near zero (relative error < 1e-16 for |z| < 1e-4).
inline double sinc(double z) {
  if (std::abs(z) < 1e-4) {
    const double z2 = z * z;
    return 1.0 - z2 / 6.0 * (1.0 - z2 / 20.0);
  }
  return std::sin(z) / z;
}

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double value) {
    add(value);
    return *this;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b].
QuadratureRule gauss_legendre(int n, double a, double b);

/// Adaptive composite Simpson with Richardson correction. The interval is
/// first split into `initial_panels` panels, then each panel is bisected until
/// the local error estimate drops below its share of `abs_tol`.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double abs_tol, int initial_panels = 16, int max_depth = 40);

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Work is split into contiguous blocks; fn must be thread-safe.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

int resolve_thread_count(int threads);

}  // namespace backflow
