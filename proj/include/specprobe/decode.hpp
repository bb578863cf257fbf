#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "specprobe/embedding.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/ridge.hpp"
#include "specprobe/rng.hpp"

namespace specprobe {

inline std::vector<double> default_lambda_grid() {
  std::vector<double> grid(10);
  for (std::size_t i = 0; i < grid.size(); ++i)
    grid[i] = std::pow(10.0, -6.0 + double(i));
  return grid;
}

struct DecodeConfig {
  std::size_t k_outer = 5;
  std::size_t k_inner = 5;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::uint64_t shuffle_seed = 0;
};

struct DecodabilityReport {
  std::string target_name;
  double r2_pooled = 0.0;
  std::vector<double> r2_per_fold;
  std::vector<double> chosen_lambdas;
  std::vector<double> predictions;  // original row order
};

namespace decode_detail {

// Balanced contiguous slices of an already-shuffled index list; the first
// (n % k) folds absorb the remainder.
inline std::vector<std::vector<std::size_t>> contiguous_folds(
    const std::vector<std::size_t>& order, std::size_t k) {
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = order.size() / k, extra = order.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + long(pos), order.begin() + long(pos + len));
    pos += len;
  }
  return folds;
}

struct ColumnStats {
  Vector mean;
  Vector sd;
};

inline ColumnStats train_stats(const Matrix& x,
                               const std::vector<std::size_t>& rows) {
  ColumnStats s;
  s.mean = Vector::Zero(x.cols());
  s.sd = Vector::Zero(x.cols());
  for (std::size_t r : rows) s.mean += x.row(Eigen::Index(r)).transpose();
  s.mean /= double(rows.size());
  for (std::size_t r : rows) {
    Vector d = x.row(Eigen::Index(r)).transpose() - s.mean;
    s.sd += d.cwiseProduct(d);
  }
  s.sd = (s.sd / double(rows.size())).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.sd.size(); ++j)
    if (s.sd[j] < 1e-12) s.sd[j] = 1.0;  // constant column passes through
  return s;
}

inline Matrix standardized_rows(const Matrix& x,
                                const std::vector<std::size_t>& rows,
                                const ColumnStats& s) {
  Matrix out(Eigen::Index(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(Eigen::Index(i)) =
        (x.row(Eigen::Index(rows[i])).transpose() - s.mean)
            .cwiseQuotient(s.sd)
            .transpose();
  return out;
}

inline Vector gather(const std::vector<double>& y,
                     const std::vector<std::size_t>& rows) {
  Vector out(Eigen::Index(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[Eigen::Index(i)] = y[rows[i]];
  return out;
}

// Inner k-fold cross-validated SSE over the lambda grid; ties break toward
// the smaller lambda because the scan is ascending with strict improvement.
inline double select_lambda(const Matrix& x, const std::vector<double>& y,
                            const std::vector<std::size_t>& train_rows,
                            const DecodeConfig& cfg, std::uint64_t fold_tag) {
  std::vector<std::size_t> perm(train_rows.size());
  auto stream = derive_stream(cfg.shuffle_seed, fold_tag);
  stream.shuffle_indices(perm);
  std::vector<std::size_t> order(train_rows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) order[i] = train_rows[perm[i]];
  const auto folds = contiguous_folds(order, cfg.k_inner);

  std::vector<double> sse(cfg.lambda_grid.size(), 0.0);
  for (std::size_t g = 0; g < folds.size(); ++g) {
    std::vector<std::size_t> fit_rows;
    for (std::size_t h = 0; h < folds.size(); ++h)
      if (h != g) fit_rows.insert(fit_rows.end(), folds[h].begin(), folds[h].end());
    if (fit_rows.size() < 2 || folds[g].empty())
      throw validation_error("decode: too few rows for the inner folds");

    const ColumnStats stats = train_stats(x, fit_rows);
    const Matrix xtr = standardized_rows(x, fit_rows, stats);
    const Vector ytr = gather(y, fit_rows);
    const Matrix xva = standardized_rows(x, folds[g], stats);
    const Vector yva = gather(y, folds[g]);

    RidgeSolver solver(xtr, ytr);
    for (std::size_t li = 0; li < cfg.lambda_grid.size(); ++li) {
      const Vector pred = solver.solve(cfg.lambda_grid[li]).predict(xva);
      sse[li] += (pred - yva).squaredNorm();
    }
  }

  std::size_t best = 0;
  for (std::size_t li = 1; li < sse.size(); ++li)
    if (sse[li] < sse[best]) best = li;
  return cfg.lambda_grid[best];
}

}  // namespace decode_detail

// Nested cross-validated ridge regression from an embedding to a scalar
// target. Model selection never sees its outer test fold; reported
// predictions are all out-of-fold.
inline DecodabilityReport linear_decodability(const EmbeddingSet& emb,
                                              const std::vector<double>& targets,
                                              const std::string& target_name,
                                              const DecodeConfig& cfg = {}) {
  emb.validate();
  const std::size_t n = emb.rows();
  if (targets.size() != n)
    throw validation_error("decode: " + std::to_string(targets.size()) +
                           " targets for " + std::to_string(n) + " rows");
  if (cfg.k_outer < 2 || cfg.k_inner < 2)
    throw validation_error("decode: need at least 2 folds at both levels");
  if (cfg.lambda_grid.empty())
    throw validation_error("decode: empty lambda grid");
  for (double l : cfg.lambda_grid)
    if (!(l > 0.0) || !std::isfinite(l))
      throw validation_error("decode: lambda grid entries must be positive");
  if (n < cfg.k_outer * cfg.k_inner)
    throw validation_error("decode: need at least " +
                           std::to_string(cfg.k_outer * cfg.k_inner) +
                           " rows for nested folds, got " + std::to_string(n));
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  for (double t : targets) {
    if (!std::isfinite(t)) throw validation_error("decode: non-finite target");
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
  }
  if (tmin == tmax)
    throw validation_error("decode: targets are constant; decodability is undefined");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto outer_stream = derive_stream(cfg.shuffle_seed, 0);
  outer_stream.shuffle_indices(order);
  const auto folds = decode_detail::contiguous_folds(order, cfg.k_outer);

  DecodabilityReport report;
  report.target_name = target_name;
  report.predictions.assign(n, 0.0);
  report.r2_per_fold.reserve(cfg.k_outer);
  report.chosen_lambdas.reserve(cfg.k_outer);

  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t h = 0; h < folds.size(); ++h)
      if (h != f)
        train_rows.insert(train_rows.end(), folds[h].begin(), folds[h].end());

    const double lambda =
        decode_detail::select_lambda(emb.data, targets, train_rows, cfg, 1 + f);
    report.chosen_lambdas.push_back(lambda);

    const decode_detail::ColumnStats stats =
        decode_detail::train_stats(emb.data, train_rows);
    const Matrix xtr = decode_detail::standardized_rows(emb.data, train_rows, stats);
    const Vector ytr = decode_detail::gather(targets, train_rows);
    const RidgeModel model = RidgeSolver(xtr, ytr).solve(lambda);

    const Matrix xte = decode_detail::standardized_rows(emb.data, folds[f], stats);
    const Vector pred = model.predict(xte);
    double fold_mean = 0.0;
    for (std::size_t r : folds[f]) fold_mean += targets[r];
    fold_mean /= double(folds[f].size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < folds[f].size(); ++i) {
      const double yt = targets[folds[f][i]];
      const double yp = pred[Eigen::Index(i)];
      if (!std::isfinite(yp))
        throw training_error("decode: non-finite prediction in outer fold " +
                             std::to_string(f));
      report.predictions[folds[f][i]] = yp;
      ss_res += (yt - yp) * (yt - yp);
      ss_tot += (yt - fold_mean) * (yt - fold_mean);
    }
    report.r2_per_fold.push_back(ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0);
  }

  double global_mean = 0.0;
  for (double t : targets) global_mean += t;
  global_mean /= double(n);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_res += (targets[i] - report.predictions[i]) * (targets[i] - report.predictions[i]);
    ss_tot += (targets[i] - global_mean) * (targets[i] - global_mean);
  }
  report.r2_pooled = 1.0 - ss_res / ss_tot;
  return report;
}

}  // namespace specprobe
