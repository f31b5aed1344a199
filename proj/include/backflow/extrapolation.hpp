#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "backflow/kernel.hpp"

namespace backflow {

/// Straight-line fit y = a + b x.
struct LinearFit {
  double a = 0.0;
  double b = 0.0;
  double sigma_a = 0.0;
  /// Sum of squared deviations; weighted by 1/sigma^2 for weighted fits.
  double residual = 0.0;
  /// Plain sum of squared deviations (equals `residual` for unweighted fits).
  double unweighted_residual = 0.0;
  std::size_t points = 0;
  bool weighted = false;
};

/// Closed-form least squares with sigma_a^2 = resid / (J - 2) * Sxx / (J Sxx - Sx^2).
/// Requires at least three points and non-degenerate xs.
LinearFit fit_unweighted(std::span<const double> xs, std::span<const double> ys);

/// 1/sigma^2-weighted least squares; sigma_a uses the weighted residual.
LinearFit fit_weighted(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> sigmas);

struct ScheduleRow {
  double half_width = 0.0;
  std::vector<int> half_counts;
};

struct ExtrapolationSchedule {
  std::vector<ScheduleRow> rows;
  double tol = 1e-12;

  /// Distinct L values, at least three N values per row, all positive.
  void validate() const;
};

/// The seven (L, N-list) rows used for the full extrapolation, L = 10..40.
ExtrapolationSchedule full_schedule();
/// L in {10, 15, 20} with their full-schedule N lists (N <= 2200).
ExtrapolationSchedule reduced_schedule();
/// Scheduled N list when L is one of the scheduled values, otherwise
/// N = 10 L j for j = 1..10 (rounded to an integer).
std::vector<int> default_half_counts(double half_width);

struct EigenvalueCell {
  double half_width = 0.0;
  int half_count = 0;
  double tol = 0.0;
  KernelDomain domain = KernelDomain::full_line;
  double lambda = 0.0;
  double residual_norm = 0.0;
  bool cached = false;
};

/// Solved cells keyed by (domain, L, N, tol) so reruns skip them.
class EigenvalueCache {
 public:
  std::optional<EigenvalueCell> find(KernelDomain domain, double half_width, int half_count,
                                     double tol) const;
  void insert(const EigenvalueCell& cell);
  std::vector<EigenvalueCell> cells() const;
  std::size_t size() const { return cells_.size(); }

 private:
  using Key = std::tuple<int, double, int, double>;
  std::map<Key, EigenvalueCell> cells_;
};

struct LengthEstimate {
  double half_width = 0.0;
  std::vector<EigenvalueCell> cells;
  LinearFit fit;  ///< lambda against 1/N
};

struct SupDeltaEstimate {
  double value = 0.0;
  double sigma = 0.0;
  std::vector<LengthEstimate> lengths;
  std::optional<LinearFit> length_fit;  ///< weighted, against 1/L; absent for a single L
};

struct EstimateOptions {
  KernelDomain domain = KernelDomain::full_line;
  int threads = 0;           ///< workers for matrix construction
  int concurrent_cells = 1;  ///< cells solved at once (each holds a dense matrix)
  EigenvalueCache* cache = nullptr;
  std::function<void(const EigenvalueCell&)> progress;
};

/// Solves every cell, fits lambda against 1/N per L, then fits the
/// intercepts against 1/L weighted by their sigmas.
SupDeltaEstimate estimate_sup_delta(const ExtrapolationSchedule& schedule,
                                    const EstimateOptions& options = {});

EigenvalueCell solve_cell(double half_width, int half_count, double tol, KernelDomain domain,
                          int threads = 0);

}  // namespace backflow
