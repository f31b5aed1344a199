#include "backflow/dynamics.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "backflow/numeric.hpp"

namespace backflow {

namespace {

constexpr double kTailWidths = 40.0;  // exp(-800) relative tail for |g|^2
constexpr double kPi = std::numbers::pi;

double momentum_prefactor(double sigma, double hbar) {
  return std::pow(2.0 * sigma * sigma / (kPi * hbar * hbar), 0.25);
}

}  // namespace

double gaussian_overlap(const GaussianTerm& a, const GaussianTerm& b, double hbar) {
  const double wa = a.sigma * a.sigma / (hbar * hbar);
  const double wb = b.sigma * b.sigma / (hbar * hbar);
  const double dp = a.p - b.p;
  return momentum_prefactor(a.sigma, hbar) * momentum_prefactor(b.sigma, hbar) *
         std::sqrt(kPi / (wa + wb)) * std::exp(-wa * wb * dp * dp / (wa + wb));
}

GaussianSuperposition::GaussianSuperposition(std::vector<GaussianTerm> terms, double hbar,
                                             double mass)
    : terms_(std::move(terms)), hbar_(hbar), mass_(mass) {
  if (terms_.empty()) throw std::invalid_argument("GaussianSuperposition: no terms");
  if (!(hbar > 0.0) || !(mass > 0.0) || !std::isfinite(hbar) || !std::isfinite(mass)) {
    throw std::invalid_argument("GaussianSuperposition: hbar and mass must be positive");
  }
  for (const auto& term : terms_) {
    if (!(term.sigma > 0.0) || !std::isfinite(term.sigma) || !std::isfinite(term.p) ||
        !std::isfinite(term.c.real()) || !std::isfinite(term.c.imag())) {
      throw std::invalid_argument("GaussianSuperposition: invalid term");
    }
  }
  CompensatedSum norm;
  for (const auto& a : terms_) {
    for (const auto& b : terms_) {
      norm += (std::conj(a.c) * b.c).real() * gaussian_overlap(a, b, hbar_);
    }
  }
  if (!(norm.value() > 0.0)) throw std::invalid_argument("GaussianSuperposition: zero state");
  scale_ = 1.0 / std::sqrt(norm.value());
  for (auto& term : terms_) term.c *= scale_;
}

double GaussianSuperposition::omega(std::size_t n) const {
  const double s = terms_[n].sigma;
  return hbar_ / (2.0 * mass_ * s * s);
}

Complex GaussianSuperposition::term_value(std::size_t n, double x, double t) const {
  const auto& g = terms_[n];
  const Complex spread(1.0, omega(n) * t);
  const double shift = x - g.p * t / mass_;
  const Complex prefactor = std::pow(2.0 * kPi * g.sigma * g.sigma, -0.25) / std::sqrt(spread);
  const Complex exponent = -shift * shift / (4.0 * g.sigma * g.sigma * spread) +
                           Complex(0.0, (g.p * x - t * g.p * g.p / (2.0 * mass_)) / hbar_);
  return prefactor * std::exp(exponent);
}

Complex GaussianSuperposition::position_amplitude(double x, double t) const {
  Complex sum = 0.0;
  for (std::size_t n = 0; n < terms_.size(); ++n) sum += terms_[n].c * term_value(n, x, t);
  return sum;
}

Complex GaussianSuperposition::position_derivative(double x, double t) const {
  Complex sum = 0.0;
  for (std::size_t n = 0; n < terms_.size(); ++n) {
    const auto& g = terms_[n];
    const Complex spread(1.0, omega(n) * t);
    const Complex log_derivative = -(x - g.p * t / mass_) / (2.0 * g.sigma * g.sigma * spread) +
                                   Complex(0.0, g.p / hbar_);
    sum += g.c * term_value(n, x, t) * log_derivative;
  }
  return sum;
}

Complex GaussianSuperposition::momentum_amplitude(double p) const {
  Complex sum = 0.0;
  for (const auto& g : terms_) {
    const double d = g.sigma * (p - g.p) / hbar_;
    sum += g.c * momentum_prefactor(g.sigma, hbar_) * std::exp(-d * d);
  }
  return sum;
}

std::pair<double, double> GaussianSuperposition::position_support(double t) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t n = 0; n < terms_.size(); ++n) {
    const double wt = omega(n) * t;
    const double width = terms_[n].sigma * std::sqrt(1.0 + wt * wt);
    const double center = terms_[n].p * t / mass_;
    lo = std::min(lo, center - kTailWidths * width);
    hi = std::max(hi, center + kTailWidths * width);
  }
  return {lo, hi};
}

std::pair<double, double> GaussianSuperposition::momentum_support() const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& g : terms_) {
    const double width = hbar_ / (2.0 * g.sigma);
    lo = std::min(lo, g.p - kTailWidths * width);
    hi = std::max(hi, g.p + kTailWidths * width);
  }
  return {lo, hi};
}

// --- currents ---------------------------------------------------------------

double current_at_origin(const GaussianSuperposition& state, double t) {
  const auto& terms = state.terms();
  const double m = state.mass();
  std::vector<Complex> g(terms.size());
  std::vector<double> damp(terms.size());
  for (std::size_t n = 0; n < terms.size(); ++n) {
    g[n] = terms[n].c * state.term_value(n, 0.0, t);
    const double wt = state.omega(n) * t;
    damp[n] = 1.0 / (1.0 + wt * wt);
  }
  CompensatedSum j;
  for (std::size_t n = 0; n < terms.size(); ++n) {
    j += terms[n].p / m * std::norm(g[n]) * damp[n];
  }
  for (std::size_t a = 0; a < terms.size(); ++a) {
    for (std::size_t b = a + 1; b < terms.size(); ++b) {
      // z = |z| e^{i phi} = c_a^* c_b g_a(0,t)^* g_b(0,t)
      const Complex z = std::conj(g[a]) * g[b];
      const double wta = state.omega(a) * t;
      const double wtb = state.omega(b) * t;
      j += z.real() / m * (terms[b].p * damp[b] + terms[a].p * damp[a]);
      j += z.imag() / m * (terms[b].p * wtb * damp[b] - terms[a].p * wta * damp[a]);
    }
  }
  return j.value();
}

double simplified_current(const GaussianSuperposition& state, double t) {
  const auto& terms = state.terms();
  if (terms.size() != 2) throw std::invalid_argument("simplified_current: needs two terms");
  const double sigma = terms[0].sigma;
  if (std::abs(terms[1].sigma - sigma) > 1e-12 * sigma) {
    throw std::invalid_argument("simplified_current: widths must be equal");
  }
  for (const auto& g : terms) {
    if (std::abs(g.c.imag()) > 1e-14 * std::abs(g.c)) {
      throw std::invalid_argument("simplified_current: coefficients must be real");
    }
  }
  const double m = state.mass();
  const double c1 = terms[0].c.real();
  const double c2 = terms[1].c.real();
  const double p1 = terms[0].p;
  const double p2 = terms[1].p;
  const double norm = 1.0 / std::sqrt(2.0 * kPi * sigma * sigma);
  const double x1 = p1 * t / m;
  const double x2 = p2 * t / m;
  const double s2 = sigma * sigma;
  return c1 * c1 * p1 / m * norm * std::exp(-x1 * x1 / (2.0 * s2)) +
         c2 * c2 * p2 / m * norm * std::exp(-x2 * x2 / (2.0 * s2)) +
         c1 * c2 * (p1 + p2) / m * norm * std::exp(-(x1 * x1 + x2 * x2) / (4.0 * s2)) *
             std::cos((p1 * p1 - p2 * p2) * t / (2.0 * m * state.hbar()));
}

// --- probabilities ----------------------------------------------------------

namespace {

// Integrates f over [a, b] split into panels no wider than `panel`.
template <class F>
double panel_integral(F&& f, double a, double b, double panel) {
  if (!(b > a)) return 0.0;
  const auto count = static_cast<std::size_t>(
      std::clamp(std::ceil((b - a) / panel), 1.0, 20000.0));
  const double h = (b - a) / static_cast<double>(count);
  CompensatedSum total;
  for (std::size_t k = 0; k < count; ++k) {
    const double lo = a + h * static_cast<double>(k);
    const double hi = k + 1 == count ? b : lo + h;
    double error = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        f, lo, hi, 12, 1e-13, &error);
    if (!std::isfinite(v)) throw NumericalError("probability: quadrature failed");
    total += v;
  }
  return total.value();
}

// Panel width resolving both the narrowest packet and the beat between terms.
double position_panel(const GaussianSuperposition& state, double t) {
  double panel = std::numeric_limits<double>::infinity();
  const auto& terms = state.terms();
  for (std::size_t n = 0; n < terms.size(); ++n) {
    const double wt = state.omega(n) * t;
    panel = std::min(panel, 0.5 * terms[n].sigma * std::sqrt(1.0 + wt * wt));
    for (std::size_t m = n + 1; m < terms.size(); ++m) {
      const double dp = std::abs(terms[n].p - terms[m].p);
      if (dp > 0.0) panel = std::min(panel, kPi * state.hbar() / dp);
    }
  }
  return panel;
}

}  // namespace

double probability_in_interval(const GaussianSuperposition& state, double t, double a, double b) {
  if (std::isnan(a) || std::isnan(b)) throw std::invalid_argument("probability: NaN bound");
  if (!(a < b)) {
    if (a == b) return 0.0;
    throw std::invalid_argument("probability_in_interval: requires a < b");
  }
  const auto [lo, hi] = state.position_support(t);
  const double from = std::max(a, lo);
  const double to = std::min(b, hi);
  const double value = panel_integral([&](double x) { return state.position_density(x, t); },
                                      from, to, position_panel(state, t));
  return std::clamp(value, 0.0, 1.0);
}

double probability_left(const GaussianSuperposition& state, double t, double cut) {
  return probability_in_interval(state, t, -std::numeric_limits<double>::infinity(), cut);
}

double negative_momentum_probability(const GaussianSuperposition& state) {
  const auto [lo, hi] = state.momentum_support();
  double panel = std::numeric_limits<double>::infinity();
  for (const auto& g : state.terms()) panel = std::min(panel, state.hbar() / g.sigma);
  const double value = panel_integral(
      [&](double p) { return std::norm(state.momentum_amplitude(p)); }, lo, std::min(0.0, hi),
      panel);
  return std::clamp(value, 0.0, 1.0);
}

double integrated_current(const GaussianSuperposition& state, double t1, double t2, double tol) {
  if (!(t2 > t1)) throw std::invalid_argument("integrated_current: requires t1 < t2");
  // Start with enough panels to sample the fastest beat between terms.
  double beat = 0.0;
  for (const auto& a : state.terms()) {
    for (const auto& b : state.terms()) {
      beat = std::max(beat, std::abs(a.p * a.p - b.p * b.p) / (2.0 * state.mass() * state.hbar()));
    }
  }
  const double periods = beat * (t2 - t1) / (2.0 * kPi);
  const int panels = static_cast<int>(std::clamp(16.0 + 8.0 * periods, 16.0, 1e6));
  return adaptive_simpson([&](double t) { return current_at_origin(state, t); }, t1, t2, tol,
                          panels);
}

FlowReport flow_report(const GaussianSuperposition& state, const TimeWindow& window,
                       int trace_points, int threads) {
  FlowReport r;
  r.p_minus_t1 = probability_left(state, window.t1(), 0.0);
  r.p_minus_t2 = probability_left(state, window.t2(), 0.0);
  r.p_tilde_minus = negative_momentum_probability(state);
  const double flux = integrated_current(state, window.t1(), window.t2());
  r.delta_qb = -flux - r.p_tilde_minus;
  r.continuity_defect = std::abs(r.p_minus_t2 - r.p_minus_t1 + flux);
  if (trace_points > 1) {
    r.current_trace.resize(static_cast<std::size_t>(trace_points));
    const double dt = window.duration() / (trace_points - 1);
    parallel_for(r.current_trace.size(), threads, [&](std::size_t k) {
      const double t = window.t1() + dt * static_cast<double>(k);
      r.current_trace[k] = {t, current_at_origin(state, t)};
    });
  }
  return r;
}

double delta_re(const GaussianSuperposition& state, const TimeWindow& window) {
  return probability_left(state, window.t2(), 0.0) - probability_left(state, window.t1(), 0.0) +
         probability_left(state, window.t0(), 0.0) - 1.0;
}

PhysicalMomentumState momentum_samples(const GaussianSuperposition& state, const UniformAxis& axis) {
  return PhysicalMomentumState::sample([&](double p) { return state.momentum_amplitude(p); }, axis,
                                       state.hbar(), state.mass());
}

PhysicalPositionState position_samples(const GaussianSuperposition& state, double t,
                                       const UniformAxis& axis, double norm_tolerance) {
  return PhysicalPositionState::sample([&](double x) { return state.position_amplitude(x, t); },
                                       axis, state.hbar(), state.mass(), norm_tolerance);
}

// --- sampled propagation ----------------------------------------------------

PhysicalPositionState propagate_sampled(const PhysicalMomentumState& state, double t,
                                        const PropagationOptions& options) {
  const auto& axis = state.wave.axis();
  const auto psi = state.wave.samples();
  const std::size_t np = psi.size();
  const double dp = axis.step;
  const double hbar = state.hbar;
  const double mass = state.mass;

  // Position moments at time t from x = i hbar d/dp + p t / m acting on psi~.
  std::vector<Complex> derivative(np);
  for (std::size_t k = 0; k < np; ++k) {
    if (k >= 2 && k + 2 < np) {
      derivative[k] = (psi[k - 2] - 8.0 * psi[k - 1] + 8.0 * psi[k + 1] - psi[k + 2]) / (12.0 * dp);
    } else if (k >= 1 && k + 1 < np) {
      derivative[k] = (psi[k + 1] - psi[k - 1]) / (2.0 * dp);
    } else {
      derivative[k] = 0.0;
    }
  }
  CompensatedSum mean_x, mean_x2;
  double p_extent = 0.0;
  double peak = 0.0;
  for (std::size_t k = 0; k < np; ++k) peak = std::max(peak, std::norm(psi[k]));
  for (std::size_t k = 0; k < np; ++k) {
    const double p = axis.at(k);
    const Complex chi = Complex(0.0, hbar) * derivative[k] + p * t / mass * psi[k];
    mean_x += (std::conj(psi[k]) * chi).real() * dp;
    mean_x2 += std::norm(chi) * dp;
    if (std::norm(psi[k]) > 1e-24 * peak) p_extent = std::max(p_extent, std::abs(p));
  }
  const double center = mean_x.value();
  const double spread = std::sqrt(std::max(mean_x2.value() - center * center, 0.0));
  const double period = 2.0 * kPi * hbar / dp;
  const double dx = kPi * hbar / std::max(12.0 * p_extent, 1e-300);

  // a_k = dp psi~(p_k) e^{-i p_k^2 t / (2 m hbar)} / sqrt(2 pi hbar)
  std::vector<Complex> a(np);
  const double inv_root = 1.0 / std::sqrt(2.0 * kPi * hbar);
  for (std::size_t k = 0; k < np; ++k) {
    const double p = axis.at(k);
    a[k] = dp * inv_root * psi[k] * std::polar(1.0, -p * p * t / (2.0 * mass * hbar));
  }

  double half = std::max(12.0 * spread, 20.0 * dx);
  for (;;) {
    half = std::min(half, 0.5 * period);
    const auto count = static_cast<std::size_t>(std::ceil(2.0 * half / dx)) + 1;
    const UniformAxis x_axis{center - half, dx, count};
    std::vector<Complex> values(count);
    parallel_for(count, options.threads, [&](std::size_t i) {
      const double x = x_axis.at(i);
      Complex phase = std::polar(1.0, x * axis.start / hbar);
      const Complex step = std::polar(1.0, x * dp / hbar);
      Complex sum = 0.0;
      for (std::size_t k = 0; k < np; ++k) {
        sum += a[k] * phase;
        phase *= step;
      }
      values[i] = sum;
    });
    SampledWave wave(x_axis, std::move(values));
    const double loss = 1.0 - wave.norm() / state.wave.norm();
    const bool at_limit = half >= 0.5 * period;
    if (loss <= options.capture || at_limit) {
      if (loss > options.max_norm_loss) {
        throw NumericalError("propagate_sampled: norm loss " + std::to_string(loss) +
                             " exceeds the limit; refine the momentum grid");
      }
      return PhysicalPositionState(std::move(wave), hbar, mass,
                                   std::max(options.max_norm_loss, 1e-10));
    }
    half *= 2.0;
  }
}

}  // namespace backflow
