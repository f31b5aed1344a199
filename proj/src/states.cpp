#include "backflow/states.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "backflow/csv.hpp"
#include "backflow/numeric.hpp"

namespace backflow {

namespace {

constexpr Complex kI{0.0, 1.0};

std::map<std::string, std::string> parse_header(const std::string& line) {
  if (line.empty() || line[0] != '#') {
    throw std::invalid_argument("state CSV: expected '# key=value,...' header line");
  }
  std::map<std::string, std::string> fields;
  std::stringstream ss(line.substr(1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    fields[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
  }
  return fields;
}

const std::string& require_field(const std::map<std::string, std::string>& fields,
                                 const std::string& key) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw std::invalid_argument("state CSV header is missing '" + key + "'");
  return it->second;
}

}  // namespace

// --- QuadratureKind ---------------------------------------------------------

std::string to_string(QuadratureKind kind) {
  switch (kind) {
    case QuadratureKind::uniform:
      return "uniform";
    case QuadratureKind::uniform_half_line:
      return "uniform_half_line";
    case QuadratureKind::gauss_legendre:
      return "gauss_legendre";
  }
  return "unknown";
}

QuadratureKind quadrature_kind_from_string(const std::string& name) {
  if (name == "uniform") return QuadratureKind::uniform;
  if (name == "uniform_half_line") return QuadratureKind::uniform_half_line;
  if (name == "gauss_legendre" || name == "gl") return QuadratureKind::gauss_legendre;
  throw std::invalid_argument("unknown quadrature kind '" + name + "'");
}

// --- RescaledGrid -----------------------------------------------------------

RescaledGrid::RescaledGrid(QuadratureKind kind, double half_width, int half_count)
    : kind_(kind), half_width_(half_width), half_count_(half_count) {
  if (!(half_width > 0.0) || !std::isfinite(half_width)) {
    throw std::invalid_argument("RescaledGrid: L must be positive and finite");
  }
  if (half_count < 1) throw std::invalid_argument("RescaledGrid: N must be >= 1");
  const double h = half_width / half_count;
  switch (kind) {
    case QuadratureKind::uniform:
      for (int n = -half_count; n <= half_count; ++n) {
        nodes_.push_back(n * h);
        weights_.push_back(h);
      }
      break;
    case QuadratureKind::uniform_half_line:
      for (int n = 1; n <= half_count; ++n) {
        nodes_.push_back(n * h);
        weights_.push_back(h);
      }
      break;
    case QuadratureKind::gauss_legendre: {
      const auto left = backflow::gauss_legendre(half_count, -half_width, 0.0);
      nodes_ = left.nodes;
      weights_ = left.weights;
      // Mirror so the grid is exactly symmetric about the origin.
      for (int k = half_count - 1; k >= 0; --k) {
        nodes_.push_back(-left.nodes[k]);
        weights_.push_back(left.weights[k]);
      }
      break;
    }
  }
}

RescaledGrid RescaledGrid::uniform(double half_width, int half_count) {
  return RescaledGrid(QuadratureKind::uniform, half_width, half_count);
}
RescaledGrid RescaledGrid::uniform_half_line(double half_width, int count) {
  return RescaledGrid(QuadratureKind::uniform_half_line, half_width, count);
}
RescaledGrid RescaledGrid::gauss_legendre(double half_width, int per_half) {
  return RescaledGrid(QuadratureKind::gauss_legendre, half_width, per_half);
}
RescaledGrid RescaledGrid::make(QuadratureKind kind, double half_width, int half_count) {
  return RescaledGrid(kind, half_width, half_count);
}

double RescaledGrid::negative_axis_fraction(std::size_t i) const {
  const double u = nodes_[i];
  if (u < 0.0) return 1.0;
  if (u == 0.0) return 0.5;
  return 0.0;
}

std::optional<std::size_t> RescaledGrid::origin_index() const {
  if (kind_ == QuadratureKind::uniform) return static_cast<std::size_t>(half_count_);
  return std::nullopt;
}

std::optional<RescaledGrid> RescaledGrid::coarsened() const {
  if (half_count_ < 2) return std::nullopt;
  if (kind_ != QuadratureKind::gauss_legendre && half_count_ % 2 != 0) return std::nullopt;
  return RescaledGrid(kind_, half_width_, half_count_ / 2);
}

bool RescaledGrid::same_as(const RescaledGrid& other) const {
  return kind_ == other.kind_ && half_width_ == other.half_width_ &&
         half_count_ == other.half_count_;
}

// --- RescaledState ----------------------------------------------------------

RescaledState::RescaledState(RescaledGrid grid, std::vector<Complex> samples,
                             StateGenerator generator)
    : grid_(std::move(grid)), samples_(std::move(samples)), generator_(std::move(generator)) {
  if (samples_.size() != grid_.size()) {
    throw std::invalid_argument("RescaledState: sample count does not match the grid");
  }
  for (const auto& s : samples_) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      throw std::invalid_argument("RescaledState: non-finite sample");
    }
  }
}

RescaledState RescaledState::sample(const RescaledGrid& grid, StateGenerator fn) {
  std::vector<Complex> values(grid.size());
  const auto nodes = grid.nodes();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = fn(nodes[i]);
  return RescaledState(grid, std::move(values), std::move(fn));
}

double RescaledState::norm() const {
  CompensatedSum sum;
  const auto w = grid_.weights();
  for (std::size_t i = 0; i < samples_.size(); ++i) sum += w[i] * std::norm(samples_[i]);
  return sum.value();
}

double RescaledState::negative_axis_weight() const {
  CompensatedSum sum;
  const auto w = grid_.weights();
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const double frac = grid_.negative_axis_fraction(i);
    if (frac > 0.0) sum += frac * w[i] * std::norm(samples_[i]);
  }
  return sum.value();
}

RescaledState RescaledState::normalized() const {
  const double n = norm();
  if (!(n > 0.0)) throw std::invalid_argument("RescaledState: cannot normalize a zero state");
  const double scale = 1.0 / std::sqrt(n);
  std::vector<Complex> values(samples_);
  for (auto& v : values) v *= scale;
  StateGenerator gen;
  if (generator_) {
    gen = [g = generator_, scale](double u) { return scale * g(u); };
  }
  return RescaledState(grid_, std::move(values), std::move(gen));
}

RescaledState RescaledState::phase_rotated(double theta) const {
  const Complex phase = std::polar(1.0, theta);
  std::vector<Complex> values(samples_);
  for (auto& v : values) v *= phase;
  StateGenerator gen;
  if (generator_) {
    gen = [g = generator_, phase](double u) { return phase * g(u); };
  }
  return RescaledState(grid_, std::move(values), std::move(gen));
}

RescaledState RescaledState::time_reversed() const {
  if (grid_.kind() == QuadratureKind::uniform_half_line) {
    throw std::invalid_argument("time_reversed: grid is not symmetric about u = 0");
  }
  std::vector<Complex> values(samples_.rbegin(), samples_.rend());
  for (auto& v : values) v = std::conj(v);
  StateGenerator gen;
  if (generator_) {
    gen = [g = generator_](double u) { return std::conj(g(-u)); };
  }
  return RescaledState(grid_, std::move(values), std::move(gen));
}

// --- Physical states --------------------------------------------------------

UniformAxis UniformAxis::from_range(double lo, double hi, std::size_t count) {
  if (count < 4) throw std::invalid_argument("UniformAxis: need at least 4 samples");
  if (!(hi > lo)) throw std::invalid_argument("UniformAxis: range must be increasing");
  return UniformAxis{lo, (hi - lo) / static_cast<double>(count - 1), count};
}

SampledWave::SampledWave(UniformAxis axis, std::vector<Complex> samples)
    : axis_(axis), samples_(std::move(samples)) {
  if (!(axis_.step > 0.0) || !std::isfinite(axis_.step) || !std::isfinite(axis_.start)) {
    throw std::invalid_argument("SampledWave: grid must be strictly increasing and finite");
  }
  if (axis_.count < 4) throw std::invalid_argument("SampledWave: need at least 4 samples");
  if (samples_.size() != axis_.count) {
    throw std::invalid_argument("SampledWave: sample count does not match the grid");
  }
}

double SampledWave::norm() const {
  CompensatedSum sum;
  for (const auto& s : samples_) sum += std::norm(s);
  return sum.value() * axis_.step;
}

namespace {

// Lagrange weights for the 4-point stencil x_{k-1..k+2} at fractional offset t
// from x_k (in units of the step).
inline void cubic_weights(double t, double w[4]) {
  w[0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
  w[1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  w[2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
  w[3] = (t + 1.0) * t * (t - 1.0) / 6.0;
}

}  // namespace

Complex SampledWave::interpolate(double x) const {
  const double pos = (x - axis_.start) / axis_.step;
  const double last = static_cast<double>(axis_.count - 1);
  if (pos < 0.0 || pos > last) return {0.0, 0.0};
  const auto k = static_cast<std::ptrdiff_t>(std::floor(pos));
  // Stencil base-1 .. base+2, offset measured from base.
  const std::ptrdiff_t base =
      std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(axis_.count) - 3);
  const double t = pos - static_cast<double>(base);
  double w[4];
  cubic_weights(t, w);
  Complex value{0.0, 0.0};
  for (int j = 0; j < 4; ++j) value += w[j] * samples_[static_cast<std::size_t>(base - 1 + j)];
  return value;
}

double SampledWave::probability_below(double cut) const {
  const double pos_cut = (cut - axis_.start) / axis_.step;
  if (pos_cut <= 0.0) return 0.0;
  const auto n = static_cast<std::ptrdiff_t>(axis_.count);
  const double last = static_cast<double>(n - 1);
  const double end = std::min(pos_cut, last);
  // Two-point Gauss rule is exact for the cubic interpolant of |psi|^2.
  const double g = 1.0 / std::sqrt(3.0);
  auto density_cubic = [&](std::ptrdiff_t base, double t) {
    double w[4];
    cubic_weights(t, w);
    double v = 0.0;
    for (int j = 0; j < 4; ++j) v += w[j] * std::norm(samples_[static_cast<std::size_t>(base - 1 + j)]);
    return v;
  };
  CompensatedSum sum;
  for (std::ptrdiff_t k = 0; static_cast<double>(k) < end; ++k) {
    const double lo = static_cast<double>(k);
    const double hi = std::min(static_cast<double>(k + 1), end);
    const std::ptrdiff_t base = std::clamp<std::ptrdiff_t>(k, 1, n - 3);
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    const double a = mid - half * g - static_cast<double>(base);
    const double b = mid + half * g - static_cast<double>(base);
    sum += half * (density_cubic(base, a) + density_cubic(base, b));
  }
  return sum.value() * axis_.step;
}

namespace {

void check_physical_units(double hbar, double mass) {
  if (!(hbar > 0.0) || !(mass > 0.0)) {
    throw std::invalid_argument("physical state: hbar and mass must be positive");
  }
}

void check_norm(double norm, double tolerance, const char* what) {
  if (!(std::abs(norm - 1.0) <= tolerance)) {
    std::ostringstream msg;
    msg << what << ": quadrature norm " << norm << " deviates from 1 by more than " << tolerance;
    throw std::invalid_argument(msg.str());
  }
}

std::vector<Complex> sample_axis(const std::function<Complex(double)>& fn, const UniformAxis& axis) {
  std::vector<Complex> values(axis.count);
  for (std::size_t k = 0; k < axis.count; ++k) values[k] = fn(axis.at(k));
  return values;
}

}  // namespace

PhysicalMomentumState::PhysicalMomentumState(SampledWave w, double h, double m,
                                             double norm_tolerance)
    : wave(std::move(w)), hbar(h), mass(m) {
  check_physical_units(hbar, mass);
  check_norm(wave.norm(), norm_tolerance, "PhysicalMomentumState");
}

PhysicalMomentumState PhysicalMomentumState::sample(const std::function<Complex(double)>& fn,
                                                    UniformAxis axis, double hbar, double mass,
                                                    double norm_tolerance) {
  return PhysicalMomentumState(SampledWave(axis, sample_axis(fn, axis)), hbar, mass,
                               norm_tolerance);
}

PhysicalPositionState::PhysicalPositionState(SampledWave w, double h, double m,
                                             double norm_tolerance)
    : wave(std::move(w)), hbar(h), mass(m) {
  check_physical_units(hbar, mass);
  check_norm(wave.norm(), norm_tolerance, "PhysicalPositionState");
}

PhysicalPositionState PhysicalPositionState::sample(const std::function<Complex(double)>& fn,
                                                    UniformAxis axis, double hbar, double mass,
                                                    double norm_tolerance) {
  return PhysicalPositionState(SampledWave(axis, sample_axis(fn, axis)), hbar, mass,
                               norm_tolerance);
}

// --- TimeWindow -------------------------------------------------------------

TimeWindow::TimeWindow(double t1, double t2) : t1_(t1), t2_(t2) {
  if (!std::isfinite(t1) || !std::isfinite(t2) || !(t1 < t2)) {
    throw std::invalid_argument("TimeWindow: requires t1 < t2");
  }
}

TimeWindow::TimeWindow(double t0, double t1, double t2) : TimeWindow(t1, t2) {
  if (!std::isfinite(t0) || !(t0 < t1)) throw std::invalid_argument("TimeWindow: requires t0 < t1");
  t0_ = t0;
}

double TimeWindow::t0() const {
  if (!t0_) throw std::invalid_argument("TimeWindow: t0 was not set");
  return *t0_;
}

// --- Rescaling transforms ---------------------------------------------------

namespace {

RescaleResult finish_rescale(const RescaledGrid& grid, StateGenerator fn) {
  auto state = RescaledState::sample(grid, std::move(fn));
  const double loss = 1.0 - state.norm();
  return RescaleResult{std::move(state), loss, loss > kTruncationWarningThreshold};
}

}  // namespace

RescaleResult rescale_backflow(const PhysicalMomentumState& state, const TimeWindow& window,
                               const RescaledGrid& grid) {
  const double T = window.duration();
  const double scale = std::sqrt(4.0 * state.hbar * state.mass / T);
  const double amplitude = std::sqrt(scale);
  const double chirp = (window.t2() + window.t1()) / T;
  auto wave = std::make_shared<const SampledWave>(state.wave);
  return finish_rescale(grid, [wave, scale, amplitude, chirp](double u) {
    return amplitude * std::exp(-kI * chirp * u * u) * wave->interpolate(u * scale);
  });
}

ReentryScales reentry_scales(const TimeWindow& window, double hbar, double mass) {
  const double tau1 = window.t1() - window.t0();
  const double tau2 = window.t2() - window.t0();
  const double omega = (window.t2() - window.t1()) / (tau2 * tau1);
  const double nu = (window.t2() + window.t1() - 2.0 * window.t0()) / (2.0 * tau2 * tau1);
  return ReentryScales{omega, nu, std::sqrt(4.0 * hbar / (mass * omega))};
}

RescaleResult rescale_reentry(const PhysicalPositionState& state, const TimeWindow& window,
                              const RescaledGrid& grid) {
  const auto scales = reentry_scales(window, state.hbar, state.mass);
  const double scale = scales.length_scale;
  const double amplitude = std::sqrt(scale);
  const double chirp = 2.0 * scales.nu / scales.omega;
  auto wave = std::make_shared<const SampledWave>(state.wave);
  return finish_rescale(grid, [wave, scale, amplitude, chirp](double u) {
    return amplitude * std::exp(kI * chirp * u * u) * wave->interpolate(-u * scale);
  });
}

// --- Ansatz families ----------------------------------------------------------

void TwoGaussianAnsatz::validate() const {
  if (!(a1.real() > 0.0) || !(a2.real() > 0.0)) {
    throw std::invalid_argument("TwoGaussianAnsatz: requires Re a1 > 0 and Re a2 > 0");
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta)) {
    throw std::invalid_argument("TwoGaussianAnsatz: non-finite angle");
  }
}

double TwoGaussianAnsatz::inverse_norm_squared() const {
  validate();
  auto self_term = [](Complex a, Complex b) {
    const double ra = a.real();
    const double rab = (a * b).real();
    const double rab2 = (a * b * b).real();
    return std::sqrt(std::numbers::pi / (2.0 * ra)) * std::exp(2.0 * rab * rab / ra - 2.0 * rab2);
  };
  const double ca = std::cos(alpha);
  const double sa = std::sin(alpha);
  const Complex s = a1 + std::conj(a2);
  const Complex num = a1 * b1 + std::conj(a2) * std::conj(b2);
  const Complex exponent = num * num / s - a1 * b1 * b1 - std::conj(a2 * b2 * b2) - kI * beta;
  const Complex cross = std::sqrt(std::numbers::pi / s) * std::exp(exponent);
  return ca * ca * self_term(a1, b1) + sa * sa * self_term(a2, b2) +
         std::sin(2.0 * alpha) * cross.real();
}

Complex TwoGaussianAnsatz::shape(double u) const {
  const Complex d1 = u - b1;
  const Complex d2 = u - b2;
  return std::exp(-a1 * d1 * d1) * std::cos(alpha) +
         std::exp(-a2 * d2 * d2) * std::polar(1.0, beta) * std::sin(alpha);
}

void PiecewiseAnsatz::validate() const {
  if (gamma1 == 0.0 || gamma2 == 0.0) {
    throw std::invalid_argument("PiecewiseAnsatz: gamma1 and gamma2 must be nonzero");
  }
  for (double v : {alpha, beta1, gamma1, beta2, gamma2}) {
    if (!std::isfinite(v)) throw std::invalid_argument("PiecewiseAnsatz: non-finite parameter");
  }
}

double PiecewiseAnsatz::shape(double u) const {
  // The origin takes the u > 0 branch.
  if (u >= 0.0) return std::cos(alpha) * (beta1 - u) * std::exp(-gamma1 * gamma1 * u * u);
  return std::sin(alpha) * (beta2 - u) * std::exp(-gamma2 * gamma2 * u * u);
}

RescaledState sample_two_gaussian_ansatz(const TwoGaussianAnsatz& params,
                                         const RescaledGrid& grid) {
  const double inv = params.inverse_norm_squared();
  if (!(inv > 0.0) || !std::isfinite(inv)) {
    throw std::invalid_argument("TwoGaussianAnsatz: state is not normalizable");
  }
  const double c = 1.0 / std::sqrt(inv);
  return RescaledState::sample(grid, [params, c](double u) { return c * params.shape(u); });
}

RescaledState sample_two_gaussian_ansatz(const TwoGaussianAnsatz& params, double half_width,
                                         int half_count, QuadratureKind kind) {
  return sample_two_gaussian_ansatz(params, RescaledGrid::make(kind, half_width, half_count));
}

RescaledState sample_piecewise_ansatz(const PiecewiseAnsatz& params, const RescaledGrid& grid) {
  params.validate();
  auto raw = RescaledState::sample(grid, [params](double u) { return Complex(params.shape(u)); });
  if (!(raw.norm() > 0.0)) throw std::invalid_argument("PiecewiseAnsatz: state vanishes on grid");
  return raw.normalized();
}

RescaledState sample_piecewise_ansatz(const PiecewiseAnsatz& params, double half_width,
                                      int half_count, QuadratureKind kind) {
  return sample_piecewise_ansatz(params, RescaledGrid::make(kind, half_width, half_count));
}

// --- CSV --------------------------------------------------------------------

void write_rescaled_csv(std::ostream& out, const RescaledState& state) {
  const auto& grid = state.grid();
  out << "# quadrature=" << to_string(grid.kind()) << ",L=" << csv::format_double(grid.half_width())
      << ",N=" << grid.half_count() << "\n";
  out << "u,re,im\n";
  const auto nodes = grid.nodes();
  const auto samples = state.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << csv::format_double(nodes[i]) << ',' << csv::format_double(samples[i].real()) << ','
        << csv::format_double(samples[i].imag()) << '\n';
  }
}

RescaledState read_rescaled_csv(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw std::invalid_argument("state CSV: empty input");
  const auto header = parse_header(line);
  const auto kind = quadrature_kind_from_string(require_field(header, "quadrature"));
  const double L = csv::parse_double(require_field(header, "L"));
  const int N = static_cast<int>(csv::parse_double(require_field(header, "N")));
  auto grid = RescaledGrid::make(kind, L, N);
  if (!csv::next_line(in, line)) throw std::invalid_argument("state CSV: missing column header");
  std::vector<Complex> samples;
  const auto nodes = grid.nodes();
  while (csv::next_line(in, line)) {
    const auto fields = csv::split_record(line);
    if (fields.size() != 3) throw std::invalid_argument("state CSV: expected 3 columns");
    const double u = csv::parse_double(fields[0]);
    const std::size_t i = samples.size();
    if (i >= nodes.size() || std::abs(u - nodes[i]) > 1e-12 * std::max(1.0, std::abs(u))) {
      throw std::invalid_argument("state CSV: node does not match the declared grid");
    }
    samples.emplace_back(csv::parse_double(fields[1]), csv::parse_double(fields[2]));
  }
  return RescaledState(std::move(grid), std::move(samples));
}

void write_sampled_csv(std::ostream& out, const SampledWave& wave, const std::string& axis_name,
                       double hbar, double mass) {
  const auto& axis = wave.axis();
  out << "# min=" << csv::format_double(axis.start) << ",max=" << csv::format_double(axis.back())
      << ",step=" << csv::format_double(axis.step) << ",count=" << axis.count
      << ",hbar=" << csv::format_double(hbar) << ",mass=" << csv::format_double(mass) << "\n";
  out << axis_name << ",re,im\n";
  const auto samples = wave.samples();
  for (std::size_t k = 0; k < samples.size(); ++k) {
    out << csv::format_double(axis.at(k)) << ',' << csv::format_double(samples[k].real()) << ','
        << csv::format_double(samples[k].imag()) << '\n';
  }
}

SampledCsv read_sampled_csv(std::istream& in) {
  std::string line;
  if (!csv::next_line(in, line)) throw std::invalid_argument("state CSV: empty input");
  const auto header = parse_header(line);
  UniformAxis axis;
  axis.start = csv::parse_double(require_field(header, "min"));
  axis.step = csv::parse_double(require_field(header, "step"));
  const double hbar = header.count("hbar") ? csv::parse_double(header.at("hbar")) : 1.0;
  const double mass = header.count("mass") ? csv::parse_double(header.at("mass")) : 1.0;
  if (!csv::next_line(in, line)) throw std::invalid_argument("state CSV: missing column header");
  std::vector<Complex> samples;
  while (csv::next_line(in, line)) {
    const auto fields = csv::split_record(line);
    if (fields.size() != 3) throw std::invalid_argument("state CSV: expected 3 columns");
    const double x = csv::parse_double(fields[0]);
    const double expected = axis.at(samples.size());
    if (std::abs(x - expected) > 1e-9 * std::max(1.0, std::abs(axis.step) * samples.size())) {
      throw std::invalid_argument("state CSV: grid is not uniform");
    }
    samples.emplace_back(csv::parse_double(fields[1]), csv::parse_double(fields[2]));
  }
  axis.count = samples.size();
  return SampledCsv{SampledWave(axis, std::move(samples)), hbar, mass};
}

}  // namespace backflow
