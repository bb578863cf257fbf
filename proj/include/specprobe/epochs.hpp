#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "specprobe/errors.hpp"
#include "specprobe/types.hpp"

namespace specprobe {

struct EpochMeta {
  std::optional<double> theta;
  std::optional<std::string> subject_id;
  std::optional<std::string> task_id;
  std::uint64_t seed_used = 0;
};

// N x L sample matrix plus one meta record per row. Multi-channel recordings
// stack channel-major: trial t occupies rows [t*channels, (t+1)*channels).
struct EpochSet {
  Matrix data;
  double fs = 200.0;
  std::size_t channels = 1;
  std::vector<EpochMeta> meta;

  std::size_t rows() const { return std::size_t(data.rows()); }
  std::size_t samples() const { return std::size_t(data.cols()); }
  std::size_t trials() const { return channels ? rows() / channels : 0; }

  void validate() const {
    if (fs <= 0.0) throw validation_error("epoch set: fs must be > 0");
    if (channels == 0) throw validation_error("epoch set: channels must be >= 1");
    if (meta.size() != rows())
      throw validation_error("epoch set: meta must have exactly one record per row");
    if (rows() % channels != 0)
      throw validation_error("epoch set: row count must be a multiple of channels");
  }
};

}  // namespace specprobe
