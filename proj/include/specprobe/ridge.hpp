#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "specprobe/errors.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

struct RidgeModel {
  Vector weights;
  double intercept = 0.0;
  double lambda = 0.0;

  double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    return x.dot(weights) + intercept;
  }

  Vector predict(const Matrix& x) const {
    if (x.cols() != weights.size())
      throw validation_error("ridge predict: feature dimension mismatch");
    return (x * weights).array() + intercept;
  }
};

// Centered-data SVD factorization reused across a lambda grid. The intercept
// is left unpenalized by construction: weights act on centered features and
// the intercept restores the means.
class RidgeSolver {
 public:
  RidgeSolver(const Matrix& x, const Vector& y) {
    if (x.rows() != y.size())
      throw validation_error("ridge: X has " + std::to_string(x.rows()) +
                             " rows but y has " + std::to_string(y.size()));
    if (x.rows() < 2) throw validation_error("ridge: need at least 2 rows");
    if (!x.allFinite() || !y.allFinite())
      throw validation_error("ridge: non-finite entries in the training data");

    x_mean_ = x.colwise().mean();
    y_mean_ = y.mean();
    Matrix xc = x.rowwise() - x_mean_.transpose();
    Vector yc = y.array() - y_mean_;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(xc,
                                       Eigen::ComputeThinU | Eigen::ComputeThinV);
    svals_ = svd.singularValues();
    v_ = svd.matrixV();
    uty_ = svd.matrixU().transpose() * yc;
  }

  RidgeModel solve(double lambda) const {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
      throw validation_error("ridge: lambda must be a positive finite number");
    Vector scaled(svals_.size());
    for (Eigen::Index i = 0; i < svals_.size(); ++i) {
      const double s = svals_[i];
      scaled[i] = (s / (s * s + lambda)) * uty_[i];
    }
    RidgeModel model;
    model.weights = v_ * scaled;
    model.intercept = y_mean_ - x_mean_.dot(model.weights);
    model.lambda = lambda;
    return model;
  }

 private:
  Vector x_mean_;
  double y_mean_ = 0.0;
  Vector svals_;
  Eigen::MatrixXd v_;
  Vector uty_;
};

inline RidgeModel ridge_fit(const Matrix& x, const Vector& y, double lambda) {
  return RidgeSolver(x, y).solve(lambda);
}

}  // namespace specprobe
