#include "backflow/classical.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "backflow/csv.hpp"
#include "backflow/numeric.hpp"

namespace backflow {

// --- Philox4x32-10 ------------------------------------------------------------

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

Philox4x32::Block Philox4x32::block(Block c, Key k) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, c[0], hi0, lo0);
    mulhilo(kMul1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

Philox4x32::Block Philox4x32::at(std::uint64_t index, std::uint32_t lane) const {
  return block({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), lane, 0},
               key_);
}

std::array<double, 2> Philox4x32::uniforms(std::uint64_t index, std::uint32_t lane) const {
  const Block b = at(index, lane);
  auto to_unit = [](std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;  // strictly inside (0, 1)
  };
  return {to_unit(b[0], b[1]), to_unit(b[2], b[3])};
}

std::array<double, 2> Philox4x32::normals(std::uint64_t index, std::uint32_t lane) const {
  const auto u = uniforms(index, lane);
  const double radius = std::sqrt(-2.0 * std::log(u[0]));
  const double angle = 2.0 * std::numbers::pi * u[1];
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

// --- ensembles ------------------------------------------------------------------

void ClassicalEnsemble::validate() const {
  if (samples.empty()) throw std::invalid_argument("ClassicalEnsemble: no samples");
  if (!(mass > 0.0)) throw std::invalid_argument("ClassicalEnsemble: mass must be positive");
  for (const auto& s : samples) {
    if (!std::isfinite(s.x) || !std::isfinite(s.p)) {
      throw std::invalid_argument("ClassicalEnsemble: non-finite sample");
    }
  }
  if (!weights.empty()) {
    if (weights.size() != samples.size()) {
      throw std::invalid_argument("ClassicalEnsemble: weight count does not match samples");
    }
    CompensatedSum total;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("ClassicalEnsemble: weights must be nonnegative");
      }
      total += w;
    }
    if (std::abs(total.value() - 1.0) > 1e-9) {
      throw std::invalid_argument("ClassicalEnsemble: weights must sum to 1");
    }
  }
}

double ClassicalEnsemble::weight(std::size_t i) const {
  return weights.empty() ? 1.0 / static_cast<double>(samples.size()) : weights[i];
}

double ClassicalEnsemble::effective_size() const {
  if (weights.empty()) return static_cast<double>(samples.size());
  CompensatedSum squares;
  for (double w : weights) squares += w * w;
  return 1.0 / squares.value();
}

void GaussianPhaseSpace::validate() const {
  if (!(sigma_x > 0.0) || !(sigma_p > 0.0)) {
    throw std::invalid_argument("GaussianPhaseSpace: sigmas must be positive");
  }
  if (!(correlation > -1.0 && correlation < 1.0)) {
    throw std::invalid_argument("GaussianPhaseSpace: correlation must lie in (-1, 1)");
  }
}

ClassicalEnsemble GaussianPhaseSpace::sample(std::size_t count, std::uint64_t seed, double mass,
                                             int threads) const {
  validate();
  if (count == 0) throw std::invalid_argument("GaussianPhaseSpace: count must be positive");
  ClassicalEnsemble e;
  e.mass = mass;
  e.rng_seed = seed;
  e.samples.resize(count);
  const Philox4x32 rng(seed);
  const double tail = std::sqrt(1.0 - correlation * correlation);
  parallel_for(count, threads, [&](std::size_t i) {
    const auto z = rng.normals(i);
    e.samples[i] = {mean_x + sigma_x * z[0], mean_p + sigma_p * (correlation * z[0] + tail * z[1])};
  });
  e.validate();
  return e;
}

ClassicalEnsemble evolve_classical(const ClassicalEnsemble& ensemble, double t) {
  ensemble.validate();
  ClassicalEnsemble out = ensemble;
  for (auto& s : out.samples) s.x += s.p * t / ensemble.mass;
  return out;
}

// --- Monte Carlo estimates -------------------------------------------------------

namespace {

constexpr std::size_t kBlock = 1 << 16;

// Weighted fractions of samples satisfying each predicate; block partial sums keep
// the reduction order fixed.
template <std::size_t K, class Pred>
std::array<double, K> fractions(const ClassicalEnsemble& e, Pred&& pred) {
  const std::size_t n = e.samples.size();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<std::array<double, K>> partial(blocks);
  parallel_for(blocks, 0, [&](std::size_t b) {
    std::array<CompensatedSum, K> acc;
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const auto hits = pred(e.samples[i]);
      const double w = e.weight(i);
      for (std::size_t k = 0; k < K; ++k) {
        if (hits[k]) acc[k] += w;
      }
    }
    for (std::size_t k = 0; k < K; ++k) partial[b][k] = acc[k].value();
  });
  std::array<double, K> out{};
  for (std::size_t k = 0; k < K; ++k) {
    CompensatedSum total;
    for (const auto& p : partial) total += p[k];
    out[k] = total.value();
  }
  return out;
}

template <std::size_t K>
double binomial_error(const std::array<double, K>& probabilities, double n_eff) {
  double variance = 0.0;
  for (double p : probabilities) variance += p * (1.0 - p) / n_eff;
  return std::sqrt(variance);
}

}  // namespace

McEstimate classical_delta_qb(const ClassicalEnsemble& ensemble, const TimeWindow& window,
                              double cut) {
  ensemble.validate();
  const double m = ensemble.mass;
  const auto f = fractions<3>(ensemble, [&](const PhaseSpacePoint& s) {
    return std::array<bool, 3>{s.x + s.p * window.t2() / m < cut,
                               s.x + s.p * window.t1() / m < cut, s.p < 0.0};
  });
  return {f[0] - f[1] - f[2], binomial_error(f, ensemble.effective_size())};
}

McEstimate classical_delta_re(const ClassicalEnsemble& ensemble, const TimeWindow& window,
                              Interval region) {
  ensemble.validate();
  if (!(region.lo < region.hi)) throw std::invalid_argument("classical_delta_re: empty region");
  const double m = ensemble.mass;
  auto inside = [&](const PhaseSpacePoint& s, double t) {
    const double x = s.x + s.p * t / m;
    return x > region.lo && x < region.hi;
  };
  const double t0 = window.t0();
  const auto f = fractions<3>(ensemble, [&](const PhaseSpacePoint& s) {
    return std::array<bool, 3>{inside(s, window.t2()), inside(s, window.t1()), inside(s, t0)};
  });
  return {f[0] - f[1] + f[2] - 1.0, binomial_error(f, ensemble.effective_size())};
}

TradeoffResult quantum_tradeoff(const GaussianSuperposition& state, const TimeWindow& window,
                                double b, double f) {
  const double inf = std::numeric_limits<double>::infinity();
  const double p_minus = negative_momentum_probability(state);
  TradeoffResult r;
  r.delta_qb = probability_in_interval(state, window.t2(), -inf, b) -
               probability_in_interval(state, window.t1(), -inf, b) - p_minus;
  r.delta_qf = probability_in_interval(state, window.t2(), f, inf) -
               probability_in_interval(state, window.t1(), f, inf) - (1.0 - p_minus);
  return r;
}

// --- CSV ----------------------------------------------------------------------------

ClassicalEnsemble read_ensemble_csv(std::istream& in, double mass) {
  ClassicalEnsemble e;
  e.mass = mass;
  std::string line;
  bool header_seen = false;
  bool weighted = false;
  while (csv::next_line(in, line)) {
    if (line.front() == '#') continue;
    const auto fields = csv::split_record(line);
    if (!header_seen) {
      header_seen = true;
      if (fields.size() >= 2 && fields[0] == "x" && fields[1] == "p") {
        weighted = fields.size() >= 3;
        continue;
      }
      weighted = fields.size() >= 3;
    }
    if (fields.size() != (weighted ? 3u : 2u)) {
      throw std::invalid_argument("ensemble CSV: inconsistent column count");
    }
    e.samples.push_back({csv::parse_double(fields[0]), csv::parse_double(fields[1])});
    if (weighted) e.weights.push_back(csv::parse_double(fields[2]));
  }
  e.validate();
  return e;
}

void write_ensemble_csv(std::ostream& out, const ClassicalEnsemble& ensemble) {
  const bool weighted = !ensemble.weights.empty();
  out << (weighted ? "x,p,w\n" : "x,p\n");
  for (std::size_t i = 0; i < ensemble.samples.size(); ++i) {
    out << csv::format_double(ensemble.samples[i].x) << ','
        << csv::format_double(ensemble.samples[i].p);
    if (weighted) out << ',' << csv::format_double(ensemble.weights[i]);
    out << '\n';
  }
}

}  // namespace backflow
