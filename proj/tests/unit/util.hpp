#pragma once

#include <initializer_list>
#include <vector>

#include "tpp/tensor.hpp"

namespace testutil {

// Builds a tensor from values listed row by row.
inline tpp::Tensor mat(std::int64_t rows, std::int64_t cols, std::initializer_list<double> row_major,
                       tpp::DType dt = tpp::DType::FP32) {
  tpp::Tensor t(rows, cols, dt);
  auto it = row_major.begin();
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) t.set(i, j, *it++);
  return t;
}

// Values row by row.
inline std::vector<double> values(const tpp::Tensor& t) {
  std::vector<double> v;
  for (std::int64_t i = 0; i < t.rows(); ++i)
    for (std::int64_t j = 0; j < t.cols(); ++j) v.push_back(t.at(i, j));
  return v;
}

}  // namespace testutil
