#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "specprobe/canonical_json.hpp"
#include "specprobe/digest.hpp"
#include "specprobe/embedding.hpp"
#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/optim.hpp"
#include "specprobe/rng.hpp"

namespace specprobe {

struct MaskConfig {
  std::size_t patch_len = 50;
  double mask_frac = 0.5;
  std::uint64_t seed = 0;

  void validate(std::size_t signal_len) const {
    if (patch_len == 0 || signal_len == 0 || signal_len % patch_len != 0)
      throw config_error("mask: patch_len must divide the signal length (" +
                         std::to_string(patch_len) + " vs " +
                         std::to_string(signal_len) + ")");
    if (!(mask_frac > 0.0 && mask_frac < 1.0))
      throw config_error("mask: mask_frac must lie strictly inside (0, 1)");
  }
};

struct AEArch {
  std::size_t hidden = 256;
  std::size_t d_latent = 32;

  void validate() const {
    if (hidden == 0 || d_latent == 0)
      throw config_error("arch: hidden and d_latent must be >= 1");
  }
};

// Input scaling applied before training and again at embedding time.
// per_signal z-scores each row on its own statistics (scale-free shape);
// global shifts and scales every entry by one corpus-wide mean/deviation
// pair learned at training time, so relative signal power stays visible;
// none feeds raw values through.
enum class Normalize { per_signal, global, none };

inline std::string normalize_name(Normalize n) {
  switch (n) {
    case Normalize::per_signal: return "per_signal";
    case Normalize::global: return "global";
    case Normalize::none: return "none";
  }
  throw config_error("normalize: unknown mode");
}

inline Normalize normalize_from_name(const std::string& name) {
  if (name == "per_signal") return Normalize::per_signal;
  if (name == "global") return Normalize::global;
  if (name == "none") return Normalize::none;
  throw config_error("normalize: unknown mode '" + name + "'");
}

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch = 64;
  double lr = 1e-3;
  AdamWConfig adamw;
  double lr_min = 1e-5;
  std::uint64_t seed = 0;
  Normalize normalize = Normalize::per_signal;

  void validate() const {
    adamw.validate();
    if (epochs == 0) throw config_error("train: epochs must be >= 1");
    if (batch == 0) throw config_error("train: batch must be >= 1");
    if (!(lr > lr_min) || !(lr_min > 0.0) || !std::isfinite(lr))
      throw config_error("train: require lr > lr_min > 0");
  }
};

// Two-layer GELU encoder L -> h -> d_latent with a mirrored decoder. Biases
// are stored as 1 x n row vectors so the whole model is eight tensors.
struct MaskedAEModel {
  Matrix w1, b1;  // L x h, 1 x h
  Matrix w2, b2;  // h x d, 1 x d
  Matrix w3, b3;  // d x h, 1 x h
  Matrix w4, b4;  // h x L, 1 x L
  Normalize normalize = Normalize::per_signal;
  double input_shift = 0.0;  // corpus statistics, used by Normalize::global
  double input_scale = 1.0;
  std::vector<double> train_log;  // masked loss per training epoch
  std::string config_digest;

  Eigen::Index input_len() const { return w1.rows(); }
  Eigen::Index hidden() const { return w1.cols(); }
  Eigen::Index d_latent() const { return w2.cols(); }

  void validate() const {
    if (w1.cols() != b1.cols() || w2.rows() != w1.cols() ||
        w2.cols() != b2.cols() || w3.rows() != w2.cols() ||
        w3.cols() != b3.cols() || w4.rows() != w3.cols() ||
        w4.cols() != b4.cols() || w4.cols() != w1.rows())
      throw validation_error("masked ae: inconsistent tensor shapes");
    for (const Matrix* m : {&w1, &b1, &w2, &b2, &w3, &b3, &w4, &b4})
      if (!m->allFinite())
        throw validation_error("masked ae: non-finite weights");
    if (!std::isfinite(input_shift) || !std::isfinite(input_scale) ||
        !(input_scale > 0.0))
      throw validation_error("masked ae: invalid input normalization stats");
  }

  // Training and embedding funnel inputs through here so they agree exactly.
  Matrix apply_normalize(const Matrix& data) const;
};

namespace ae_detail {

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * phi;
}

inline Matrix gelu(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu(v); });
}

inline Matrix gelu_grad(const Matrix& x) {
  return x.unaryExpr([](double v) { return gelu_grad(v); });
}

// Rows are z-scored independently with the population deviation; a flat row
// becomes all zeros instead of dividing by ~0.
inline Matrix standardize_rows(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < 1e-12)
      out.row(i).setZero();
    else
      out.row(i) = (x.row(i).array() - mean) / sd;
  }
  return out;
}

// One visibility mask row (1 = visible, 0 = masked) drawn patch-wise; at
// least one patch is always masked so the objective is never empty.
inline void draw_mask_row(Eigen::Ref<Eigen::RowVectorXd> row,
                          const MaskConfig& cfg, rng_stream& stream) {
  const std::size_t n_patches = std::size_t(row.size()) / cfg.patch_len;
  std::size_t n_masked = std::size_t(
      std::llround(cfg.mask_frac * double(n_patches)));
  n_masked = std::max<std::size_t>(1, std::min(n_masked, n_patches));

  std::vector<std::size_t> order(n_patches);
  stream.shuffle_indices(order);
  row.setOnes();
  for (std::size_t k = 0; k < n_masked; ++k) {
    const std::size_t p = order[k];
    row.segment(Eigen::Index(p * cfg.patch_len), Eigen::Index(cfg.patch_len))
        .setZero();
  }
}

struct ForwardPass {
  Matrix x_tilde, a1, h1, latent, a3, h3, x_hat;
};

inline ForwardPass forward(const MaskedAEModel& m, const Matrix& x_std,
                           const Matrix& mask) {
  ForwardPass f;
  f.x_tilde = mask.cwiseProduct(x_std);
  f.a1 = (f.x_tilde * m.w1).rowwise() + m.b1.row(0);
  f.h1 = gelu(f.a1);
  f.latent = (f.h1 * m.w2).rowwise() + m.b2.row(0);
  f.a3 = (f.latent * m.w3).rowwise() + m.b3.row(0);
  f.h3 = gelu(f.a3);
  f.x_hat = (f.h3 * m.w4).rowwise() + m.b4.row(0);
  return f;
}

}  // namespace ae_detail

inline Matrix MaskedAEModel::apply_normalize(const Matrix& data) const {
  switch (normalize) {
    case Normalize::per_signal: return ae_detail::standardize_rows(data);
    case Normalize::global:
      return (data.array() - input_shift) / input_scale;
    case Normalize::none: return data;
  }
  throw config_error("normalize: unknown mode");
}

// Reconstruction error averaged over masked entries only; zero when nothing
// in the batch is masked.
inline double ae_masked_loss(const MaskedAEModel& model, const Matrix& x_std,
                             const Matrix& mask) {
  const auto f = ae_detail::forward(model, x_std, mask);
  const Matrix hidden_weight = Matrix::Ones(mask.rows(), mask.cols()) - mask;
  const double n_masked = hidden_weight.sum();
  const double sq =
      hidden_weight.cwiseProduct((x_std - f.x_hat).cwiseAbs2()).sum();
  return sq / std::max(1.0, n_masked);
}

struct AEGradients {
  std::vector<Matrix> tensors;  // dW1, db1, dW2, db2, dW3, db3, dW4, db4
  double loss = 0.0;
  double masked_entries = 0.0;
};

inline AEGradients ae_loss_and_grad(const MaskedAEModel& m, const Matrix& x_std,
                                    const Matrix& mask) {
  using ae_detail::gelu_grad;
  const auto f = ae_detail::forward(m, x_std, mask);
  const Matrix hidden_weight = Matrix::Ones(mask.rows(), mask.cols()) - mask;
  const double nm = std::max(1.0, hidden_weight.sum());

  AEGradients out;
  out.masked_entries = hidden_weight.sum();
  const Matrix residual = f.x_hat - x_std;
  out.loss = hidden_weight.cwiseProduct(residual.cwiseAbs2()).sum() / nm;

  const Matrix g4 = 2.0 * hidden_weight.cwiseProduct(residual) / nm;
  const Matrix gh3 = g4 * m.w4.transpose();
  const Matrix ga3 = gh3.cwiseProduct(gelu_grad(f.a3));
  const Matrix glat = ga3 * m.w3.transpose();
  const Matrix gh1 = glat * m.w2.transpose();
  const Matrix ga1 = gh1.cwiseProduct(gelu_grad(f.a1));

  out.tensors.resize(8);
  out.tensors[0] = f.x_tilde.transpose() * ga1;  // dW1
  out.tensors[1] = ga1.colwise().sum();          // db1
  out.tensors[2] = f.h1.transpose() * glat;      // dW2
  out.tensors[3] = glat.colwise().sum();         // db2
  out.tensors[4] = f.latent.transpose() * ga3;   // dW3
  out.tensors[5] = ga3.colwise().sum();          // db3
  out.tensors[6] = f.h3.transpose() * g4;        // dW4
  out.tensors[7] = g4.colwise().sum();           // db4
  return out;
}

// Glorot-uniform weights in declaration order W1, W2, W3, W4 (row-major
// within each tensor), zero biases. A fixed seed fixes every draw.
inline MaskedAEModel init_masked_ae(std::size_t signal_len, const AEArch& arch,
                                    std::uint64_t init_seed,
                                    Normalize normalize) {
  arch.validate();
  if (signal_len == 0) throw config_error("masked ae: empty signal length");
  MaskedAEModel m;
  m.normalize = normalize;
  const Eigen::Index l = Eigen::Index(signal_len);
  const Eigen::Index h = Eigen::Index(arch.hidden);
  const Eigen::Index d = Eigen::Index(arch.d_latent);
  m.w1.resize(l, h);
  m.w2.resize(h, d);
  m.w3.resize(d, h);
  m.w4.resize(h, l);
  m.b1 = Matrix::Zero(1, h);
  m.b2 = Matrix::Zero(1, d);
  m.b3 = Matrix::Zero(1, h);
  m.b4 = Matrix::Zero(1, l);

  auto stream = derive_stream(init_seed, 0);
  for (Matrix* w : {&m.w1, &m.w2, &m.w3, &m.w4}) {
    const double limit = std::sqrt(6.0 / double(w->rows() + w->cols()));
    for (Eigen::Index i = 0; i < w->rows(); ++i)
      for (Eigen::Index j = 0; j < w->cols(); ++j)
        (*w)(i, j) = stream.uniform(-limit, limit);
  }
  return m;
}

// Masked-reconstruction training: masks are redrawn patch-wise per example
// per step, the loss covers masked entries only, and every random choice
// derives from the two config seeds.
inline MaskedAEModel train_masked_ae(const EpochSet& epochs,
                                     const MaskConfig& mask, const AEArch& arch,
                                     const TrainConfig& train) {
  epochs.validate();
  arch.validate();
  train.validate();
  mask.validate(epochs.samples());
  if (epochs.channels != 1)
    throw validation_error("masked ae: training expects single-channel epochs");
  if (epochs.rows() < 10 * train.batch)
    throw validation_error("masked ae: need at least 10 batches of data, got " +
                           std::to_string(epochs.rows()) + " rows for batch " +
                           std::to_string(train.batch));
  if (!epochs.data.allFinite())
    throw validation_error("masked ae: non-finite training data");

  MaskedAEModel model = init_masked_ae(std::size_t(epochs.data.cols()), arch,
                                       train.seed, train.normalize);
  if (train.normalize == Normalize::global) {
    const double mu = epochs.data.mean();
    const double sd = std::sqrt((epochs.data.array() - mu).square().mean());
    if (sd < 1e-12)
      throw validation_error("masked ae: constant corpus, global scale undefined");
    model.input_shift = mu;
    model.input_scale = sd;
  }
  const Matrix x = model.apply_normalize(epochs.data);
  const std::size_t n = std::size_t(x.rows());
  const Eigen::Index l = x.cols();
  AdamW opt({&model.w1, &model.b1, &model.w2, &model.b2, &model.w3, &model.b3,
             &model.w4, &model.b4},
            train.adamw);

  std::vector<std::size_t> perm(n);
  for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
    const double lr_e = cosine_lr(train.lr, train.lr_min, epoch, train.epochs);
    auto shuffle_stream = derive_stream(train.seed, 1 + epoch);
    auto mask_stream = derive_stream(mask.seed, 1 + epoch);
    shuffle_stream.shuffle_indices(perm);

    double epoch_sq = 0.0, epoch_masked = 0.0;
    for (std::size_t start = 0; start < n; start += train.batch) {
      const std::size_t stop = std::min(n, start + train.batch);
      const Eigen::Index bsz = Eigen::Index(stop - start);
      Matrix xb(bsz, l), mb(bsz, l);
      for (Eigen::Index i = 0; i < bsz; ++i) {
        xb.row(i) = x.row(Eigen::Index(perm[start + std::size_t(i)]));
        ae_detail::draw_mask_row(mb.row(i), mask, mask_stream);
      }

      auto grads = ae_loss_and_grad(model, xb, mb);
      if (!std::isfinite(grads.loss))
        throw training_error("masked ae: loss became non-finite", opt.steps() + 1);
      opt.step(grads.tensors, lr_e);
      epoch_sq += grads.loss * std::max(1.0, grads.masked_entries);
      epoch_masked += grads.masked_entries;
    }
    model.train_log.push_back(epoch_sq / std::max(1.0, epoch_masked));
  }

  model.validate();
  if (train.epochs >= 2 && !(model.train_log.back() < model.train_log.front()))
    throw training_error("masked ae: final loss " +
                         std::to_string(model.train_log.back()) +
                         " did not improve on the first epoch's " +
                         std::to_string(model.train_log.front()));

  model.config_digest = digest_hex(canonical_dump(
      json{{"embedder", "masked_ae"},
           {"input_len", std::size_t(l)},
           {"hidden", arch.hidden},
           {"d_latent", arch.d_latent},
           {"patch_len", mask.patch_len},
           {"mask_frac", mask.mask_frac},
           {"mask_seed", mask.seed},
           {"epochs", train.epochs},
           {"batch", train.batch},
           {"lr", train.lr},
           {"beta1", train.adamw.beta1},
           {"beta2", train.adamw.beta2},
           {"eps", train.adamw.eps},
           {"weight_decay", train.adamw.weight_decay},
           {"lr_min", train.lr_min},
           {"seed", train.seed},
           {"normalize", normalize_name(train.normalize)}}));
  return model;
}

// Encoder output on the unmasked (but identically normalized) input.
inline EmbeddingSet embed_ae(const MaskedAEModel& model, const EpochSet& epochs) {
  model.validate();
  epochs.validate();
  if (epochs.channels != 1)
    throw validation_error("masked ae: embedding expects single-channel epochs");
  if (Eigen::Index(epochs.samples()) != model.input_len())
    throw validation_error("masked ae: epochs have " +
                           std::to_string(epochs.samples()) +
                           " samples but the model expects " +
                           std::to_string(model.input_len()));

  const Matrix x = model.apply_normalize(epochs.data);
  EmbeddingSet out;
  const Matrix h1 =
      ae_detail::gelu(((x * model.w1).rowwise() + model.b1.row(0)).eval());
  out.data = (h1 * model.w2).rowwise() + model.b2.row(0);
  out.embedder_id = "masked_ae";
  out.config_digest = model.config_digest;
  out.validate();
  return out;
}

}  // namespace specprobe
