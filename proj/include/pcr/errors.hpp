#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcr {

// Iterative numerical routine failed to converge or produced a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data. When the failure is tied to one sample, `index()` names it.
class DataError : public std::runtime_error {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  explicit DataError(const std::string& what, std::size_t index = kNoIndex)
      : std::runtime_error(index == kNoIndex ? what : what + " (sample " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace pcr
