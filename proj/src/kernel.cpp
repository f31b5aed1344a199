#include "backflow/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "backflow/numeric.hpp"

namespace backflow {

KernelMatrix::KernelMatrix(Eigen::MatrixXd entries, double half_width, int half_count,
                           KernelDomain domain)
    : entries_(std::move(entries)),
      half_width_(half_width),
      half_count_(half_count),
      domain_(domain) {
  const Eigen::Index expected =
      domain == KernelDomain::full_line ? 2 * half_count + 1 : half_count;
  if (entries_.rows() != expected || entries_.cols() != expected) {
    throw std::invalid_argument("KernelMatrix: dimensions do not match (L, N)");
  }
}

double KernelMatrix::at(int n, int m) const {
  const int offset = domain_ == KernelDomain::full_line ? half_count_ : -1;
  return entries_(n + offset, m + offset);
}

RescaledGrid KernelMatrix::grid() const {
  return domain_ == KernelDomain::full_line
             ? RescaledGrid::uniform(half_width_, half_count_)
             : RescaledGrid::uniform_half_line(half_width_, half_count_);
}

double negative_axis_step(int n) {
  if (n < 0) return 1.0;
  if (n == 0) return 0.5;
  return 0.0;
}

namespace {

void check_grid_parameters(double half_width, int half_count) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw std::invalid_argument("kernel: L must be positive and finite");
  }
  if (half_count < 1) throw std::invalid_argument("kernel: N must be >= 1");
}

// Fills the symmetric flux part for signed indices first..first+size-1.
Eigen::MatrixXd flux_matrix(double half_width, int half_count, int first, Eigen::Index size,
                            int threads) {
  Eigen::MatrixXd k(size, size);
  const double h = half_width / half_count;
  const double h2 = h * h;
  const double prefactor = -h2 / std::numbers::pi;
  parallel_for(static_cast<std::size_t>(size), threads, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    const std::int64_t n = first + i;
    for (Eigen::Index j = 0; j <= i; ++j) {
      const std::int64_t m = first + j;
      const double z = h2 * static_cast<double>((n - m) * (n + m));
      const double value = prefactor * static_cast<double>(n + m) * sinc(z);
      k(i, j) = value;
    }
  });
  // Mirror the lower triangle (column-major friendly copy).
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

}  // namespace

KernelMatrix build_kernel(double half_width, int half_count, int threads) {
  check_grid_parameters(half_width, half_count);
  const Eigen::Index size = 2 * static_cast<Eigen::Index>(half_count) + 1;
  Eigen::MatrixXd k = flux_matrix(half_width, half_count, -half_count, size, threads);
  for (int n = -half_count; n <= 0; ++n) k(n + half_count, n + half_count) -= negative_axis_step(n);
  return KernelMatrix(std::move(k), half_width, half_count, KernelDomain::full_line);
}

KernelMatrix build_bm_kernel(double half_width, int half_count, int threads) {
  check_grid_parameters(half_width, half_count);
  Eigen::MatrixXd k = flux_matrix(half_width, half_count, 1, half_count, threads);
  return KernelMatrix(std::move(k), half_width, half_count, KernelDomain::half_line);
}

// --- Lanczos ----------------------------------------------------------------

namespace {

// Deterministic start vector with no special symmetry.
Eigen::VectorXd start_vector(Eigen::Index n) {
  Eigen::VectorXd v(n);
  std::uint64_t state = 0x9E3779B97F4A7C15ull;
  for (Eigen::Index i = 0; i < n; ++i) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    v(i) = 0.5 + static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  return v.normalized();
}

}  // namespace

double rayleigh_quotient(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& v) {
  const Eigen::VectorXd av = matrix * v;
  return v.dot(av) / v.squaredNorm();
}

EigenResult largest_eigenpair(const Eigen::MatrixXd& a, const LanczosOptions& options) {
  const Eigen::Index n = a.rows();
  if (n == 0 || a.cols() != n) throw std::invalid_argument("largest_eigenpair: matrix must be square");
  if (!a.allFinite()) throw std::invalid_argument("largest_eigenpair: matrix is not finite");
  if (n == 1) {
    EigenResult r;
    r.value = a(0, 0);
    r.vector = Eigen::VectorXd::Ones(1);
    r.residual_norm = 0.0;
    return r;
  }

  const Eigen::Index kmax = std::min<Eigen::Index>(n, std::max(2, options.max_krylov_dimension));
  const double scale = a.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm bound
  Eigen::VectorXd q = start_vector(n);
  EigenResult best;
  best.residual_norm = std::numeric_limits<double>::infinity();
  int matvecs = 0;

  Eigen::MatrixXd basis(n, kmax);
  Eigen::VectorXd alpha(kmax);
  Eigen::VectorXd beta(kmax);
  Eigen::VectorXd w(n);
  Eigen::VectorXd coeffs;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;

  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    basis.col(0) = q;
    Eigen::Index steps = 0;
    Eigen::VectorXd ritz;
    for (Eigen::Index j = 0; j < kmax; ++j) {
      w.noalias() = a * basis.col(j);
      ++matvecs;
      alpha(j) = basis.col(j).dot(w);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        coeffs.noalias() = basis.leftCols(j + 1).transpose() * w;
        w.noalias() -= basis.leftCols(j + 1) * coeffs;
      }
      beta(j) = w.norm();
      steps = j + 1;

      const bool breakdown = beta(j) <= 1e-14 * scale;
      const bool check = breakdown || steps == kmax || steps % 4 == 0;
      if (check) {
        if (steps == 1) {
          ritz = Eigen::VectorXd::Ones(1);
        } else {
          Eigen::VectorXd diag = alpha.head(steps);
          Eigen::VectorXd sub = beta.head(steps - 1);
          tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
          ritz = tri.eigenvectors().col(steps - 1);
        }
        const double theta = steps == 1 ? alpha(0) : tri.eigenvalues()(steps - 1);
        const double estimate = std::abs(beta(j) * ritz(steps - 1));
        if (breakdown || steps == kmax ||
            estimate <= 0.1 * options.tol * std::max(1.0, std::abs(theta))) {
          break;
        }
      }
      basis.col(j + 1) = w / beta(j);
    }

    Eigen::VectorXd x = basis.leftCols(steps) * ritz;
    x.normalize();
    const Eigen::VectorXd ax = a * x;
    ++matvecs;
    const double lambda = x.dot(ax);
    const double residual = (ax - lambda * x).norm();
    if (residual < best.residual_norm) {
      best.value = lambda;
      best.vector = x;
      best.residual_norm = residual;
    }
    best.iterations = matvecs;
    if (residual <= options.tol * std::max(1.0, std::abs(lambda))) return best;
    q = x;
  }
  std::ostringstream msg;
  msg << "largest_eigenpair: residual " << best.residual_norm << " above tolerance "
      << options.tol << " after " << matvecs << " matrix-vector products";
  throw NumericalError(msg.str());
}

EigenResult largest_eigenpair(const KernelMatrix& matrix, double tol) {
  LanczosOptions options;
  options.tol = tol;
  return largest_eigenpair(matrix.entries(), options);
}

RescaledState export_optimal_state(const EigenResult& result, double half_width, int half_count,
                                   KernelDomain domain) {
  const auto grid = domain == KernelDomain::full_line
                        ? RescaledGrid::uniform(half_width, half_count)
                        : RescaledGrid::uniform_half_line(half_width, half_count);
  if (static_cast<std::size_t>(result.vector.size()) != grid.size()) {
    throw std::invalid_argument("export_optimal_state: vector length does not match (L, N)");
  }
  Eigen::Index peak = 0;
  result.vector.cwiseAbs().maxCoeff(&peak);
  const double sign = result.vector(peak) < 0.0 ? -1.0 : 1.0;
  const double inv_sqrt_w = 1.0 / std::sqrt(half_width / half_count);
  const double inv_norm = 1.0 / result.vector.norm();
  std::vector<Complex> samples(grid.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = sign * inv_norm * inv_sqrt_w * result.vector(static_cast<Eigen::Index>(i));
  }
  return RescaledState(grid, std::move(samples));
}

RescaledState export_optimal_state(const EigenResult& result, const KernelMatrix& matrix) {
  return export_optimal_state(result, matrix.half_width(), matrix.half_count(), matrix.domain());
}

double origin_jump_ratio(const RescaledState& state) {
  const auto& grid = state.grid();
  const auto origin = grid.origin_index();
  if (!origin || grid.half_count() < 2) {
    throw std::invalid_argument("origin_jump_ratio: requires a full uniform grid with N >= 2");
  }
  const auto s = state.samples();
  const std::size_t i0 = *origin;
  const double jump = std::abs(s[i0 + 1] - s[i0 - 1]);
  CompensatedSum diffs;
  std::size_t count = 0;
  for (std::size_t k = i0 + 1; k + 1 < s.size(); ++k, ++count) diffs += std::abs(s[k + 1] - s[k]);
  const double mean = diffs.value() / static_cast<double>(count);
  return jump / mean;
}

}  // namespace backflow
