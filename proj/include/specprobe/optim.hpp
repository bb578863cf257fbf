#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "specprobe/errors.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  void validate() const {
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw config_error("adamw: betas must lie strictly inside (0, 1)");
    if (!(eps > 0.0)) throw config_error("adamw: eps must be > 0");
    if (weight_decay < 0.0) throw config_error("adamw: weight_decay must be >= 0");
  }
};

// Decoupled weight decay applied to every registered tensor, biases included;
// moment estimates are bias-corrected with a step counter shared across
// tensors.
class AdamW {
 public:
  AdamW(std::vector<Matrix*> params, const AdamWConfig& cfg)
      : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
    for (const Matrix* p : params_) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }

  void step(const std::vector<Matrix>& grads, double lr) {
    if (grads.size() != params_.size())
      throw validation_error("adamw: gradient count does not match parameters");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Matrix& p = *params_[i];
      const Matrix& g = grads[i];
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw validation_error("adamw: gradient shape mismatch at tensor " +
                               std::to_string(i));
      p *= (1.0 - lr * cfg_.weight_decay);
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      p.array() -=
          lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }

 private:
  std::vector<Matrix*> params_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

// Cosine annealing evaluated once per epoch: starts at lr_max, lands just
// above lr_min on the final epoch.
inline double cosine_lr(double lr_max, double lr_min, std::size_t epoch,
                        std::size_t total_epochs) {
  if (total_epochs == 0) throw config_error("cosine_lr: total_epochs must be > 0");
  if (epoch >= total_epochs)
    throw config_error("cosine_lr: epoch index out of range");
  return lr_min + 0.5 * (lr_max - lr_min) *
                      (1.0 + std::cos(M_PI * double(epoch) / double(total_epochs)));
}

}  // namespace specprobe
