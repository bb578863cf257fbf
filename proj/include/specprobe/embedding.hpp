#pragma once

#include <cmath>
#include <string>

#include "specprobe/errors.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

struct EmbeddingSet {
  Matrix data;  // N x d
  std::string embedder_id;
  std::string config_digest;

  std::size_t rows() const { return std::size_t(data.rows()); }
  std::size_t dim() const { return std::size_t(data.cols()); }

  void validate() const {
    for (Eigen::Index i = 0; i < data.rows(); ++i)
      for (Eigen::Index j = 0; j < data.cols(); ++j)
        if (!std::isfinite(data(i, j)))
          throw validation_error("embedding set: non-finite value at row " +
                                 std::to_string(i));
  }
};

}  // namespace specprobe
