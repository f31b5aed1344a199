#include "backflow/extrapolation.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <stdexcept>

#include "backflow/numeric.hpp"

namespace backflow {

namespace {

void check_points(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit: xs and ys differ in length");
  if (xs.size() < 3) throw std::invalid_argument("fit: at least three points are required");
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (!std::isfinite(xs[j]) || !std::isfinite(ys[j])) {
      throw std::invalid_argument("fit: non-finite data");
    }
  }
}

// Fills a, b, sigma_a and both residuals from weighted sums; w == nullptr means unit weights.
LinearFit solve_normal_equations(std::span<const double> xs, std::span<const double> ys,
                                 const std::vector<double>* w) {
  CompensatedSum s, sx, sxx, sy, sxy;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double wj = w ? (*w)[j] : 1.0;
    s += wj;
    sx += wj * xs[j];
    sxx += wj * xs[j] * xs[j];
    sy += wj * ys[j];
    sxy += wj * xs[j] * ys[j];
  }
  const double denom = s.value() * sxx.value() - sx.value() * sx.value();
  if (!(denom > 1e-14 * s.value() * sxx.value())) {
    throw std::invalid_argument("fit: degenerate abscissae");
  }
  LinearFit fit;
  fit.a = (sxx.value() * sy.value() - sx.value() * sxy.value()) / denom;
  fit.b = (s.value() * sxy.value() - sx.value() * sy.value()) / denom;
  CompensatedSum resid, plain;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double d = ys[j] - fit.a - fit.b * xs[j];
    plain += d * d;
    resid += (w ? (*w)[j] : 1.0) * d * d;
  }
  fit.residual = resid.value();
  fit.unweighted_residual = plain.value();
  fit.points = xs.size();
  fit.weighted = w != nullptr;
  const double dof = static_cast<double>(xs.size()) - 2.0;
  fit.sigma_a = std::sqrt(fit.residual / dof * sxx.value() / denom);
  return fit;
}

}  // namespace

LinearFit fit_unweighted(std::span<const double> xs, std::span<const double> ys) {
  check_points(xs, ys);
  return solve_normal_equations(xs, ys, nullptr);
}

LinearFit fit_weighted(std::span<const double> xs, std::span<const double> ys,
                       std::span<const double> sigmas) {
  check_points(xs, ys);
  if (sigmas.size() != xs.size()) throw std::invalid_argument("fit: sigmas differ in length");
  std::vector<double> w(sigmas.size());
  for (std::size_t j = 0; j < sigmas.size(); ++j) {
    if (!(sigmas[j] > 0.0) || !std::isfinite(sigmas[j])) {
      throw std::invalid_argument("fit: sigmas must be positive and finite");
    }
    w[j] = 1.0 / (sigmas[j] * sigmas[j]);
  }
  return solve_normal_equations(xs, ys, &w);
}

// --- schedules ---------------------------------------------------------------

void ExtrapolationSchedule::validate() const {
  if (rows.empty()) throw std::invalid_argument("schedule: no rows");
  if (!(tol > 0.0)) throw std::invalid_argument("schedule: tol must be positive");
  std::set<double> seen;
  for (const auto& row : rows) {
    if (!(row.half_width > 0.0) || !std::isfinite(row.half_width)) {
      throw std::invalid_argument("schedule: L must be positive");
    }
    if (!seen.insert(row.half_width).second) throw std::invalid_argument("schedule: repeated L");
    if (row.half_counts.size() < 3) {
      throw std::invalid_argument("schedule: each L needs at least three N values");
    }
    std::set<int> ns;
    for (int n : row.half_counts) {
      if (n < 1) throw std::invalid_argument("schedule: N must be >= 1");
      if (!ns.insert(n).second) throw std::invalid_argument("schedule: repeated N");
    }
  }
}

namespace {

std::vector<int> arithmetic(int first, int step, int count) {
  std::vector<int> out;
  for (int j = 0; j < count; ++j) out.push_back(first + step * j);
  return out;
}

const std::vector<ScheduleRow>& full_rows() {
  static const std::vector<ScheduleRow> rows = {
      {10.0, arithmetic(100, 100, 10)},  {15.0, arithmetic(150, 150, 10)},
      {20.0, arithmetic(400, 200, 10)},  {25.0, arithmetic(500, 250, 10)},
      {30.0, arithmetic(600, 300, 10)},  {35.0, arithmetic(800, 400, 10)},
      {40.0, arithmetic(1200, 600, 8)},
  };
  return rows;
}

}  // namespace

ExtrapolationSchedule full_schedule() {
  ExtrapolationSchedule s;
  s.rows = full_rows();
  return s;
}

ExtrapolationSchedule reduced_schedule() {
  ExtrapolationSchedule s;
  for (const auto& row : full_rows()) {
    if (row.half_width <= 20.0) s.rows.push_back(row);
  }
  return s;
}

std::vector<int> default_half_counts(double half_width) {
  for (const auto& row : full_rows()) {
    if (row.half_width == half_width) return row.half_counts;
  }
  std::vector<int> out;
  for (int j = 1; j <= 10; ++j) {
    out.push_back(std::max(1, static_cast<int>(std::lround(10.0 * half_width * j))));
  }
  return out;
}

// --- cache -------------------------------------------------------------------

std::optional<EigenvalueCell> EigenvalueCache::find(KernelDomain domain, double half_width,
                                                    int half_count, double tol) const {
  const auto it = cells_.find({static_cast<int>(domain), half_width, half_count, tol});
  if (it == cells_.end()) return std::nullopt;
  EigenvalueCell cell = it->second;
  cell.cached = true;
  return cell;
}

void EigenvalueCache::insert(const EigenvalueCell& cell) {
  EigenvalueCell stored = cell;
  stored.cached = false;
  cells_[{static_cast<int>(cell.domain), cell.half_width, cell.half_count, cell.tol}] = stored;
}

std::vector<EigenvalueCell> EigenvalueCache::cells() const {
  std::vector<EigenvalueCell> out;
  out.reserve(cells_.size());
  for (const auto& [key, cell] : cells_) out.push_back(cell);
  return out;
}

// --- pipeline ----------------------------------------------------------------

EigenvalueCell solve_cell(double half_width, int half_count, double tol, KernelDomain domain,
                          int threads) {
  const KernelMatrix k = domain == KernelDomain::full_line
                             ? build_kernel(half_width, half_count, threads)
                             : build_bm_kernel(half_width, half_count, threads);
  const EigenResult r = largest_eigenpair(k, tol);
  EigenvalueCell cell;
  cell.half_width = half_width;
  cell.half_count = half_count;
  cell.tol = tol;
  cell.domain = domain;
  cell.lambda = r.value;
  cell.residual_norm = r.residual_norm;
  return cell;
}

SupDeltaEstimate estimate_sup_delta(const ExtrapolationSchedule& schedule,
                                    const EstimateOptions& options) {
  schedule.validate();
  if (schedule.rows.size() == 2) {
    throw std::invalid_argument("schedule: the L extrapolation needs one or at least three L values");
  }

  struct Job {
    std::size_t row, column;
  };
  std::vector<Job> jobs;
  SupDeltaEstimate out;
  for (std::size_t r = 0; r < schedule.rows.size(); ++r) {
    LengthEstimate length;
    length.half_width = schedule.rows[r].half_width;
    length.cells.resize(schedule.rows[r].half_counts.size());
    out.lengths.push_back(std::move(length));
    for (std::size_t c = 0; c < schedule.rows[r].half_counts.size(); ++c) jobs.push_back({r, c});
  }

  std::mutex guard;
  const int outer = std::max(1, options.concurrent_cells);
  const int inner = outer > 1 ? 1 : options.threads;
  parallel_for(jobs.size(), outer, [&](std::size_t index) {
    const Job job = jobs[index];
    const double half_width = schedule.rows[job.row].half_width;
    const int half_count = schedule.rows[job.row].half_counts[job.column];
    std::optional<EigenvalueCell> cell;
    if (options.cache) {
      std::lock_guard lock(guard);
      cell = options.cache->find(options.domain, half_width, half_count, schedule.tol);
    }
    if (!cell) cell = solve_cell(half_width, half_count, schedule.tol, options.domain, inner);
    std::lock_guard lock(guard);
    if (options.cache && !cell->cached) options.cache->insert(*cell);
    out.lengths[job.row].cells[job.column] = *cell;
    if (options.progress) options.progress(*cell);
  });

  std::vector<double> ls, intercepts, sigmas;
  for (auto& length : out.lengths) {
    std::vector<double> xs, ys;
    for (const auto& cell : length.cells) {
      xs.push_back(1.0 / cell.half_count);
      ys.push_back(cell.lambda);
    }
    length.fit = fit_unweighted(xs, ys);
    ls.push_back(1.0 / length.half_width);
    intercepts.push_back(length.fit.a);
    sigmas.push_back(length.fit.sigma_a);
  }

  if (out.lengths.size() == 1) {
    out.value = out.lengths.front().fit.a;
    out.sigma = out.lengths.front().fit.sigma_a;
    return out;
  }
  out.length_fit = fit_weighted(ls, intercepts, sigmas);
  out.value = out.length_fit->a;
  out.sigma = out.length_fit->sigma_a;
  return out;
}

}  // namespace backflow
