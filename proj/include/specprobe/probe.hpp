#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specprobe/embedding.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/optim.hpp"
#include "specprobe/rng.hpp"

namespace specprobe {

struct KappaResult {
  double kappa = 0.0;
  bool degenerate = false;  // chance agreement is 1, kappa reported as 0
};

// Chance-corrected agreement from a confusion matrix with truth along rows.
inline KappaResult kappa_from_confusion(const Matrix& confusion) {
  if (confusion.rows() != confusion.cols() || confusion.rows() == 0)
    throw validation_error("kappa: confusion matrix must be square and non-empty");
  double total = 0.0;
  for (Eigen::Index i = 0; i < confusion.rows(); ++i)
    for (Eigen::Index j = 0; j < confusion.cols(); ++j) {
      if (confusion(i, j) < 0.0 || !std::isfinite(confusion(i, j)))
        throw validation_error("kappa: confusion counts must be finite and >= 0");
      total += confusion(i, j);
    }
  if (total <= 0.0) throw validation_error("kappa: confusion matrix is empty");

  double p_o = 0.0, p_e = 0.0;
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    p_o += confusion(i, i) / total;
    p_e += (confusion.row(i).sum() / total) * (confusion.col(i).sum() / total);
  }
  KappaResult out;
  if (p_e >= 1.0) {
    out.kappa = 0.0;
    out.degenerate = true;
  } else {
    out.kappa = (p_o - p_e) / (1.0 - p_e);
  }
  return out;
}

inline KappaResult cohens_kappa(const std::vector<int>& predicted,
                                const std::vector<int>& truth,
                                std::size_t n_classes) {
  if (predicted.size() != truth.size() || predicted.empty())
    throw validation_error("kappa: prediction and truth lengths must match");
  Matrix confusion = Matrix::Zero(Eigen::Index(n_classes), Eigen::Index(n_classes));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || std::size_t(truth[i]) >= n_classes || predicted[i] < 0 ||
        std::size_t(predicted[i]) >= n_classes)
      throw validation_error("kappa: label outside [0, n_classes)");
    confusion(truth[i], predicted[i]) += 1.0;
  }
  return kappa_from_confusion(confusion);
}

struct LabelSet {
  std::vector<int> labels;          // dense ids in [0, n_classes)
  std::vector<std::string> names;   // one per class id
  std::string kind;                 // "subject" or "task"

  std::size_t n_classes() const { return names.size(); }

  void validate(std::size_t n_rows) const {
    if (labels.size() != n_rows)
      throw validation_error("label set '" + kind + "': " +
                             std::to_string(labels.size()) + " labels for " +
                             std::to_string(n_rows) + " rows");
    if (names.empty()) throw validation_error("label set '" + kind + "': no classes");
    std::vector<bool> seen(names.size(), false);
    for (int l : labels) {
      if (l < 0 || std::size_t(l) >= names.size())
        throw validation_error("label set '" + kind + "': id outside [0, " +
                               std::to_string(names.size()) + ")");
      seen[std::size_t(l)] = true;
    }
    for (std::size_t c = 0; c < seen.size(); ++c)
      if (!seen[c])
        throw validation_error("label set '" + kind + "': class '" + names[c] +
                               "' has no examples");
  }
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;

  void validate(std::size_t n_rows) const {
    if (train.empty() || test.empty())
      throw validation_error("split: train and test must both be non-empty");
    std::vector<char> mark(n_rows, 0);
    for (std::size_t r : train) {
      if (r >= n_rows) throw validation_error("split: train index out of range");
      if (mark[r]++) throw validation_error("split: duplicate train index");
    }
    for (std::size_t r : test) {
      if (r >= n_rows) throw validation_error("split: test index out of range");
      if (mark[r]++) throw validation_error("split: row in both train and test");
    }
  }
};

struct ProbeTrainConfig {
  std::size_t epochs = 31;
  std::size_t batch = 64;
  std::vector<double> lr_candidates = {1e-2, 1e-3, 5e-4};
  AdamWConfig adamw;
  double lr_min = 1e-5;
  std::size_t n_seeds = 5;
  std::uint64_t seed = 0;
  bool standardize = false;

  void validate() const {
    adamw.validate();
    if (epochs == 0) throw config_error("probe: epochs must be >= 1");
    if (batch == 0) throw config_error("probe: batch must be >= 1");
    if (n_seeds == 0) throw config_error("probe: n_seeds must be >= 1");
    if (lr_candidates.empty()) throw config_error("probe: no learning rates");
    for (double lr : lr_candidates)
      if (!(lr > lr_min) || !std::isfinite(lr))
        throw config_error("probe: learning rates must exceed lr_min");
    if (!(lr_min > 0.0)) throw config_error("probe: lr_min must be > 0");
  }
};

struct ProbeReport {
  std::string label_kind;
  double kappa_mean = 0.0;
  double kappa_std = 0.0;
  std::vector<double> per_run_kappa;
  Matrix confusion;                 // first seed, truth along rows
  double accuracy = 0.0;            // first seed
  std::vector<double> train_loss;   // first seed final retrain, one per epoch
  double chosen_lr = 0.0;           // first seed
  bool degenerate = false;          // any evaluation hit chance agreement 1
};

struct ProbeResult {
  ProbeReport report;
  Matrix weights;  // d x K, first seed
  Matrix bias;     // 1 x K, first seed
};

namespace probe_detail {

struct FitOutput {
  Matrix w;
  Matrix b;
  std::vector<double> loss_log;
};

struct Standardizer {
  Vector mean;
  Vector sd;

  static Standardizer fit(const Matrix& x, const std::vector<std::size_t>& rows) {
    Standardizer s;
    s.mean = Vector::Zero(x.cols());
    s.sd = Vector::Ones(x.cols());
    for (std::size_t r : rows) s.mean += x.row(Eigen::Index(r)).transpose();
    s.mean /= double(rows.size());
    Vector acc = Vector::Zero(x.cols());
    for (std::size_t r : rows) {
      Vector d = x.row(Eigen::Index(r)).transpose() - s.mean;
      acc += d.cwiseProduct(d);
    }
    acc = (acc / double(rows.size())).cwiseSqrt();
    for (Eigen::Index j = 0; j < acc.size(); ++j)
      if (acc[j] >= 1e-12) s.sd[j] = acc[j];
    return s;
  }

  static Standardizer identity(Eigen::Index d) {
    Standardizer s;
    s.mean = Vector::Zero(d);
    s.sd = Vector::Ones(d);
    return s;
  }

  Matrix gather(const Matrix& x, const std::vector<std::size_t>& rows) const {
    Matrix out(Eigen::Index(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.row(Eigen::Index(i)) =
          (x.row(Eigen::Index(rows[i])).transpose() - mean)
              .cwiseQuotient(sd)
              .transpose();
    return out;
  }
};

// Softmax cross-entropy fit of a single linear layer; `stream` drives the
// per-epoch batch order and nothing else, so a fixed stream fixes the run.
inline FitOutput fit_linear_softmax(const Matrix& x,
                                    const std::vector<int>& labels,
                                    const std::vector<std::size_t>& rows,
                                    std::size_t n_classes, double lr,
                                    const ProbeTrainConfig& cfg,
                                    rng_stream stream) {
  const Eigen::Index d = x.cols();
  const Eigen::Index k = Eigen::Index(n_classes);
  FitOutput out;
  out.w = Matrix::Zero(d, k);
  out.b = Matrix::Zero(1, k);
  AdamW opt({&out.w, &out.b}, cfg.adamw);

  std::vector<std::size_t> perm(rows.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr_e = cosine_lr(lr, cfg.lr_min, epoch, cfg.epochs);
    stream.shuffle_indices(perm);
    double epoch_loss = 0.0;

    for (std::size_t start = 0; start < rows.size(); start += cfg.batch) {
      const std::size_t stop = std::min(rows.size(), start + cfg.batch);
      const Eigen::Index bsz = Eigen::Index(stop - start);
      Matrix xb(bsz, d);
      std::vector<int> yb(static_cast<std::size_t>(bsz));
      for (Eigen::Index i = 0; i < bsz; ++i) {
        const std::size_t r = rows[perm[start + std::size_t(i)]];
        xb.row(i) = x.row(Eigen::Index(r));
        yb[std::size_t(i)] = labels[r];
      }

      Matrix logits = xb * out.w;
      logits.rowwise() += out.b.row(0);
      Matrix p(bsz, k);
      for (Eigen::Index i = 0; i < bsz; ++i) {
        const double mx = logits.row(i).maxCoeff();
        const Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
        const double z = e.sum();
        p.row(i) = (e / z).matrix().transpose();
        epoch_loss += -(std::log(p(i, yb[std::size_t(i)]) + 1e-300));
      }

      Matrix g = p;
      for (Eigen::Index i = 0; i < bsz; ++i) g(i, yb[std::size_t(i)]) -= 1.0;
      g /= double(bsz);
      Matrix gw = xb.transpose() * g;
      Matrix gb = g.colwise().sum();
      opt.step({gw, gb}, lr_e);

      if (!out.w.allFinite() || !out.b.allFinite())
        throw training_error("probe: non-finite parameters during training",
                             opt.steps());
    }
    out.loss_log.push_back(epoch_loss / double(rows.size()));
  }
  return out;
}

inline std::vector<int> predict_labels(const Matrix& x, const Matrix& w,
                                       const Matrix& b) {
  std::vector<int> out(std::size_t(x.rows()));
  Matrix logits = x * w;
  logits.rowwise() += b.row(0);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[std::size_t(i)] = int(arg);
  }
  return out;
}

}  // namespace probe_detail

// Linear softmax probe with a per-seed learning-rate pick on a stratified 10%
// holdout, final retrain on the full train split, and evaluation on the test
// split. Mean and sample-std of kappa are taken across n_seeds runs.
inline ProbeResult train_linear_probe(const EmbeddingSet& emb,
                                      const LabelSet& labels, const Split& split,
                                      const ProbeTrainConfig& cfg = {}) {
  emb.validate();
  cfg.validate();
  labels.validate(emb.rows());
  split.validate(emb.rows());
  const std::size_t k = labels.n_classes();

  ProbeResult result;
  ProbeReport& report = result.report;
  report.label_kind = labels.kind;

  for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
    const std::uint64_t base = derive_seed(cfg.seed, s);

    // Stratified holdout: ~10% of each class with at least 2 train examples.
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t r : split.train) members[std::size_t(labels.labels[r])].push_back(r);
    std::vector<std::size_t> fit_rows, val_rows;
    auto holdout_stream = derive_stream(base, 0);
    for (std::size_t c = 0; c < k; ++c) {
      auto& m = members[c];
      if (m.size() < 2) {
        fit_rows.insert(fit_rows.end(), m.begin(), m.end());
        continue;
      }
      std::vector<std::size_t> perm(m.size());
      holdout_stream.shuffle_indices(perm);
      const std::size_t n_val =
          std::max<std::size_t>(1, std::size_t(std::llround(0.1 * double(m.size()))));
      for (std::size_t i = 0; i < m.size(); ++i)
        (i < n_val ? val_rows : fit_rows).push_back(m[perm[i]]);
    }
    if (val_rows.empty())
      throw validation_error(
          "probe: train split too small to reserve a validation holdout");

    const auto stats = cfg.standardize
                           ? probe_detail::Standardizer::fit(emb.data, fit_rows)
                           : probe_detail::Standardizer::identity(emb.data.cols());
    const Matrix x_val = stats.gather(emb.data, val_rows);
    std::vector<int> y_val(val_rows.size());
    for (std::size_t i = 0; i < val_rows.size(); ++i)
      y_val[i] = labels.labels[val_rows[i]];

    double best_lr = 0.0, best_kappa = -2.0;
    for (std::size_t li = 0; li < cfg.lr_candidates.size(); ++li) {
      const double lr = cfg.lr_candidates[li];
      // Standardization for candidate fits reuses fit_rows stats above.
      Matrix x_fit = stats.gather(emb.data, fit_rows);
      std::vector<std::size_t> local(fit_rows.size());
      for (std::size_t i = 0; i < local.size(); ++i) local[i] = i;
      std::vector<int> y_fit(fit_rows.size());
      for (std::size_t i = 0; i < fit_rows.size(); ++i)
        y_fit[i] = labels.labels[fit_rows[i]];
      const auto fit = probe_detail::fit_linear_softmax(
          x_fit, y_fit, local, k, lr, cfg, derive_stream(base, 1 + li));
      const auto pred = probe_detail::predict_labels(x_val, fit.w, fit.b);
      const auto kap = cohens_kappa(pred, y_val, k);
      if (kap.kappa > best_kappa ||
          (kap.kappa == best_kappa && lr < best_lr)) {
        best_kappa = kap.kappa;
        best_lr = lr;
      }
    }

    // Final retrain on the whole train split with the selected rate.
    const auto full_stats =
        cfg.standardize ? probe_detail::Standardizer::fit(emb.data, split.train)
                        : probe_detail::Standardizer::identity(emb.data.cols());
    Matrix x_train = full_stats.gather(emb.data, split.train);
    std::vector<std::size_t> local(split.train.size());
    for (std::size_t i = 0; i < local.size(); ++i) local[i] = i;
    std::vector<int> y_train(split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i)
      y_train[i] = labels.labels[split.train[i]];
    const auto fit = probe_detail::fit_linear_softmax(
        x_train, y_train, local, k, best_lr, cfg, derive_stream(base, 100));

    const Matrix x_test = full_stats.gather(emb.data, split.test);
    const auto pred = probe_detail::predict_labels(x_test, fit.w, fit.b);
    std::vector<int> y_test(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i)
      y_test[i] = labels.labels[split.test[i]];

    Matrix confusion = Matrix::Zero(Eigen::Index(k), Eigen::Index(k));
    std::size_t hits = 0;
    for (std::size_t i = 0; i < y_test.size(); ++i) {
      confusion(y_test[i], pred[i]) += 1.0;
      hits += (y_test[i] == pred[i]);
    }
    const auto kap = kappa_from_confusion(confusion);
    report.per_run_kappa.push_back(kap.kappa);
    report.degenerate = report.degenerate || kap.degenerate;

    if (s == 0) {
      report.confusion = confusion;
      report.accuracy = double(hits) / double(y_test.size());
      report.train_loss = fit.loss_log;
      report.chosen_lr = best_lr;
      result.weights = fit.w;
      result.bias = fit.b;
    }
  }

  double mean = 0.0;
  for (double kv : report.per_run_kappa) mean += kv;
  mean /= double(report.per_run_kappa.size());
  double var = 0.0;
  for (double kv : report.per_run_kappa) var += (kv - mean) * (kv - mean);
  report.kappa_mean = mean;
  report.kappa_std = report.per_run_kappa.size() > 1
                         ? std::sqrt(var / double(report.per_run_kappa.size() - 1))
                         : 0.0;
  return result;
}

struct BatteryReport {
  ProbeReport subject;
  ProbeReport task;
  double kappa_gap = 0.0;  // subject mean minus task mean
};

// Two probes on one embedding with an identical split and config, differing
// only in the label set they are asked to read out.
inline BatteryReport subject_task_battery(const EmbeddingSet& emb,
                                          const LabelSet& subjects,
                                          const LabelSet& tasks,
                                          const Split& split,
                                          const ProbeTrainConfig& cfg = {}) {
  BatteryReport out;
  out.subject = train_linear_probe(emb, subjects, split, cfg).report;
  out.task = train_linear_probe(emb, tasks, split, cfg).report;
  out.kappa_gap = out.subject.kappa_mean - out.task.kappa_mean;
  return out;
}

}  // namespace specprobe
