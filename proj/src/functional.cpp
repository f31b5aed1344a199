#include "backflow/functional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "backflow/numeric.hpp"

namespace backflow {

namespace {

constexpr double kErrorFloor = 1e-13;

void check_norm(const RescaledState& phi, double tolerance) {
  const double n = phi.norm();
  if (!(std::abs(n - 1.0) <= tolerance)) {
    throw std::invalid_argument("Delta: state norm " + std::to_string(n) +
                                " deviates from 1 by more than " + std::to_string(tolerance));
  }
}

// Every other sample of a uniform grid with even N, renormalized.
std::optional<RescaledState> subsampled(const RescaledState& phi) {
  const auto& grid = phi.grid();
  if (grid.kind() == QuadratureKind::gauss_legendre) return std::nullopt;
  const auto coarse = grid.coarsened();
  if (!coarse) return std::nullopt;
  const auto s = phi.samples();
  std::vector<Complex> values(coarse->size());
  const std::size_t offset = grid.kind() == QuadratureKind::uniform ? 0 : 1;
  for (std::size_t j = 0; j < values.size(); ++j) values[j] = s[2 * j + offset];
  RescaledState c(*coarse, std::move(values));
  if (!(c.norm() > 0.0)) return std::nullopt;
  return c.normalized();
}

std::optional<RescaledState> coarse_version(const RescaledState& phi) {
  if (phi.generator()) {
    const auto coarse = phi.grid().coarsened();
    if (!coarse) return std::nullopt;
    RescaledState c = RescaledState::sample(*coarse, phi.generator());
    if (!(c.norm() > 0.0)) return std::nullopt;
    return c.normalized();
  }
  return subsampled(phi);
}

DeltaResult evaluate(const RescaledState& phi, int threads) {
  DeltaResult r;
  r.flow_term = flow_term(phi, threads);
  r.neg_axis_term = phi.negative_axis_weight();
  r.delta = r.flow_term - r.neg_axis_term;
  return r;
}

}  // namespace

double flow_term(const RescaledState& phi, int threads) {
  const auto u = phi.grid().nodes();
  const auto w = phi.grid().weights();
  const auto s = phi.samples();
  const std::size_t m = s.size();
  std::vector<Complex> ws(m);
  for (std::size_t i = 0; i < m; ++i) ws[i] = w[i] * s[i];

  // Row i holds w_i [w_i k_ii |phi_i|^2 + 2 Re(phi_i^* sum_{j<i} w_j k_ij phi_j)].
  std::vector<double> rows(m, 0.0);
  auto row = [&](std::size_t i) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double sum = u[i] + u[j];
      acc += sum * sinc((u[i] - u[j]) * sum) * ws[j];
    }
    const double diag = 2.0 * u[i] * std::norm(s[i]) * w[i];
    rows[i] = w[i] * (diag + 2.0 * (std::conj(s[i]) * acc).real());
  };
  // Pair short and long rows so contiguous blocks carry equal work.
  parallel_for((m + 1) / 2, threads, [&](std::size_t t) {
    row(t);
    if (m - 1 - t != t) row(m - 1 - t);
  });
  CompensatedSum total;
  for (double v : rows) total += v;
  return -total.value() / std::numbers::pi;
}

DeltaResult delta_of_state(const RescaledState& phi, const DeltaOptions& options) {
  check_norm(phi, options.norm_tolerance);
  DeltaResult r = evaluate(phi, options.threads);
  if (options.estimate_error) {
    const auto coarse = coarse_version(phi);
    if (coarse) {
      const double coarse_delta = evaluate(*coarse, options.threads).delta;
      r.quadrature_error_estimate = std::max(std::abs(r.delta - coarse_delta), kErrorFloor);
    } else {
      r.quadrature_error_estimate = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    r.quadrature_error_estimate = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

double bm_delta_of_state(const RescaledState& phi, const DeltaOptions& options) {
  const auto u = phi.grid().nodes();
  const auto s = phi.samples();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (u[i] <= 0.0 && s[i] != Complex(0.0)) {
      throw std::invalid_argument("bm_delta_of_state: state has weight on u <= 0");
    }
  }
  check_norm(phi, options.norm_tolerance);
  return flow_term(phi, options.threads);
}

// --- perturbative construction ---------------------------------------------

namespace {

void require_real_half_line(const RescaledState& f, const char* what) {
  if (f.grid().kind() != QuadratureKind::uniform_half_line) {
    throw std::invalid_argument(std::string(what) + ": requires a uniform half-line grid");
  }
  double peak = 0.0;
  for (const auto& v : f.samples()) peak = std::max(peak, std::abs(v));
  for (const auto& v : f.samples()) {
    if (std::abs(v.imag()) > 1e-12 * peak) {
      throw std::invalid_argument(std::string(what) + ": state must be real");
    }
  }
}

}  // namespace

std::vector<double> perturbative_h(const RescaledState& f) {
  require_real_half_line(f, "perturbative_h");
  const auto u = f.grid().nodes();
  const auto w = f.grid().weights();
  const auto s = f.samples();
  std::vector<double> h(s.size());
  parallel_for(s.size(), 0, [&](std::size_t k) {
    const double v = u[k];
    CompensatedSum acc;
    // sin(u^2 - v^2) / (u + v) = (u - v) sinc(u^2 - v^2)
    for (std::size_t i = 0; i < s.size(); ++i) {
      acc += w[i] * s[i].real() * (u[i] - v) * sinc((u[i] - v) * (u[i] + v));
    }
    h[k] = -2.0 / std::numbers::pi * acc.value();
  });
  return h;
}

RescaledState positive_part_direction(const RescaledState& f) {
  const auto h = perturbative_h(f);
  std::vector<Complex> g(h.size());
  for (std::size_t k = 0; k < h.size(); ++k) g[k] = std::max(h[k], 0.0);
  RescaledState state(f.grid(), std::move(g));
  if (!(state.norm() > 0.0)) throw NumericalError("positive_part_direction: H is nowhere positive");
  return state.normalized();
}

double perturbative_slope(const RescaledState& f, const RescaledState& g) {
  require_real_half_line(g, "perturbative_slope");
  if (!f.grid().same_as(g.grid())) throw std::invalid_argument("perturbative_slope: grids differ");
  const auto h = perturbative_h(f);
  const auto w = g.grid().weights();
  CompensatedSum acc;
  for (std::size_t k = 0; k < h.size(); ++k) acc += w[k] * h[k] * g.samples()[k].real();
  return acc.value();
}

void PerturbativeComposite::validate() const {
  require_real_half_line(big_f, "PerturbativeComposite");
  require_real_half_line(big_g, "PerturbativeComposite");
  if (!big_f.grid().same_as(big_g.grid())) {
    throw std::invalid_argument("PerturbativeComposite: F and G grids differ");
  }
  if (std::abs(big_f.norm() - 1.0) > 1e-8 || std::abs(big_g.norm() - 1.0) > 1e-8) {
    throw std::invalid_argument("PerturbativeComposite: F and G must be unit-norm");
  }
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw std::invalid_argument("PerturbativeComposite: epsilon must lie in [0, 1]");
  }
}

RescaledState PerturbativeComposite::assemble() const {
  validate();
  const int n = big_f.grid().half_count();
  const auto grid = RescaledGrid::uniform(big_f.grid().half_width(), n);
  const double cf = std::sqrt(1.0 - epsilon * epsilon);
  std::vector<Complex> values(grid.size(), 0.0);
  for (int k = 1; k <= n; ++k) {
    values[static_cast<std::size_t>(n + k)] = cf * big_f.samples()[k - 1].real();
    values[static_cast<std::size_t>(n - k)] = epsilon * big_g.samples()[k - 1].real();
  }
  return RescaledState(grid, std::move(values));
}

DeltaResult composite_delta(const PerturbativeComposite& composite, const DeltaOptions& options) {
  return delta_of_state(composite.assemble(), options);
}

}  // namespace backflow
