#pragma once

#include <stdexcept>
#include <string>

namespace specprobe {

// Bad values inside an otherwise well-formed configuration.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A referenced input file is missing, unreadable, or structurally broken.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Data fails a documented precondition (constant targets, corrupt payload, ...).
class validation_error : public std::runtime_error {
 public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization blew up; `step` is the global step index at which loss went non-finite.
class training_error : public std::runtime_error {
 public:
  training_error(const std::string& msg, long step = -1)
      : std::runtime_error(msg), step(step) {}
  long step;
};

}  // namespace specprobe
