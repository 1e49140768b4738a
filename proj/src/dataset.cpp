#include "pcr/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcr/csv.hpp"
#include "pcr/errors.hpp"

namespace pcr {

void Dataset::validate() const {
  const std::size_t n = x.size();
  if (n == 0) throw DataError("dataset is empty");
  if (y.size() != n) throw DataError("x and y have different lengths");
  if (z.size() != n * q) throw DataError("z block does not match n*q");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DataError("non-finite x or y", i);
    for (std::size_t k = 0; k < q; ++k) {
      if (!std::isfinite(z[i * q + k])) throw DataError("non-finite z", i);
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.q = q;
  out.x.reserve(rows.size());
  out.y.reserve(rows.size());
  out.z.reserve(rows.size() * q);
  for (std::size_t r : rows) {
    out.x.push_back(x.at(r));
    out.y.push_back(y.at(r));
    const auto zr = z_row(r);
    out.z.insert(out.z.end(), zr.begin(), zr.end());
  }
  return out;
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "x" || header[1] != "y") {
    throw DataError(path + ": header must start with x,y");
  }
  Dataset data;
  data.q = header.size() - 2;
  for (std::size_t k = 0; k < data.q; ++k) {
    if (header[k + 2] != "z" + std::to_string(k + 1)) {
      throw DataError(path + ": expected column z" + std::to_string(k + 1) + ", got " + header[k + 2]);
    }
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(cells.size()));
    }
    try {
      data.x.push_back(parse_double(cells[0]));
      data.y.push_back(parse_double(cells[1]));
      for (std::size_t k = 0; k < data.q; ++k) data.z.push_back(parse_double(cells[k + 2]));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  data.validate();
  return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "x,y";
  for (std::size_t k = 0; k < data.q; ++k) out << ",z" << (k + 1);
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.x[i]) << ',' << format_double(data.y[i]);
    for (double v : data.z_row(i)) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace pcr
