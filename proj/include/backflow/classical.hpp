#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "backflow/dynamics.hpp"
#include "backflow/states.hpp"

namespace backflow {

/// Philox4x32-10 counter-based generator: block(counter, key) is a pure function,
/// so sample i depends only on (seed, i) and never on thread layout.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block block(Block counter, Key key);

  explicit Philox4x32(std::uint64_t seed) : key_{static_cast<std::uint32_t>(seed),
                                                 static_cast<std::uint32_t>(seed >> 32)} {}
  /// Four 32-bit words for stream position `index`.
  Block at(std::uint64_t index, std::uint32_t lane = 0) const;
  /// Two uniforms in (0, 1) and two standard normals (Box-Muller) for `index`.
  std::array<double, 2> uniforms(std::uint64_t index, std::uint32_t lane = 0) const;
  std::array<double, 2> normals(std::uint64_t index, std::uint32_t lane = 0) const;

 private:
  Key key_;
};

struct PhaseSpacePoint {
  double x = 0.0;
  double p = 0.0;
};

/// Samples of f(x, p, t); weights are optional and must sum to 1 when present.
struct ClassicalEnsemble {
  std::vector<PhaseSpacePoint> samples;
  std::vector<double> weights;
  double mass = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  double weight(std::size_t i) const;
  /// 1 / sum w^2; the sample count for uniform weights.
  double effective_size() const;
};

/// Correlated bivariate normal phase-space density.
struct GaussianPhaseSpace {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double sigma_x = 1.0;
  double sigma_p = 1.0;
  double correlation = 0.0;

  void validate() const;
  ClassicalEnsemble sample(std::size_t count, std::uint64_t seed, double mass = 1.0,
                           int threads = 0) const;
};

/// x -> x + p t / m.
ClassicalEnsemble evolve_classical(const ClassicalEnsemble& ensemble, double t);

struct McEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

/// P(x < cut, t2) - P(x < cut, t1) - P(p < 0). Each probability contributes
/// its binomial variance p (1 - p) / n_eff; the variances add.
McEstimate classical_delta_qb(const ClassicalEnsemble& ensemble, const TimeWindow& window,
                              double cut = 0.0);

struct Interval {
  double lo;
  double hi;
};

/// P_r(t2) - P_r(t1) + P_r(t0) - 1 for r = (lo, hi); requires t0.
McEstimate classical_delta_re(const ClassicalEnsemble& ensemble, const TimeWindow& window,
                              Interval region);

struct TradeoffResult {
  double delta_qb = 0.0;
  double delta_qf = 0.0;
  double sum() const { return delta_qb + delta_qf; }
};

/// Delta_QB at the point b and Delta_QF = P(x > f, t2) - P(x > f, t1) - P~_+.
TradeoffResult quantum_tradeoff(const GaussianSuperposition& state, const TimeWindow& window,
                                double b, double f);

/// CSV with columns x,p[,w].
ClassicalEnsemble read_ensemble_csv(std::istream& in, double mass = 1.0);
void write_ensemble_csv(std::ostream& out, const ClassicalEnsemble& ensemble);

}  // namespace backflow
