#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bpvae {

// Incompatible tensor or batch shapes. Messages name the op and the shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable input data (IDX, RAWRGB, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or model hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace bpvae
