#pragma once

#include <Eigen/Dense>

namespace specprobe {

// Row-major so in-memory layout matches the on-disk row-major payloads.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

}  // namespace specprobe
