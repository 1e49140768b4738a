#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pcr {

// n samples of (x, y, z) with z stored row-major as an n-by-q block. q may be 0.
struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> z;
  std::size_t q = 0;

  std::size_t size() const noexcept { return x.size(); }
  std::span<const double> z_row(std::size_t i) const {
    return {z.data() + i * q, q};
  }

  // Throws DataError on ragged columns, n == 0 or non-finite entries.
  void validate() const;
  // Rows listed in `rows`, in that order.
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

// CSV with header `x,y,z1,...,zq`.
Dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace pcr
