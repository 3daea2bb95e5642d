#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace elsm {

// Dense row-major array of doubles with shape metadata. Nearly everything in
// this codebase is a matrix (rank 2); scalars are stored as 1x1.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(std::size_t rows, std::size_t cols)
      : shape_{rows, cols}, data_(rows * cols, 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != count(shape_))
      throw std::invalid_argument("Tensor: data length does not match shape");
  }

  static Tensor scalar(double v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
  }

  static Tensor row(const std::vector<double>& v) {
    return Tensor({1, v.size()}, std::vector<double>(v));
  }

  static Tensor column(const std::vector<double>& v) {
    return Tensor({v.size(), 1}, std::vector<double>(v));
  }

  static Tensor full(std::size_t rows, std::size_t cols, double v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    require_rank2();
    return shape_[0];
  }
  std::size_t cols() const {
    require_rank2();
    return shape_[1];
  }

  bool is_scalar() const { return size() == 1; }
  double scalar_value() const {
    if (!is_scalar()) throw std::invalid_argument("Tensor: not a scalar");
    return data_[0];
  }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Row i as a copy (rank 2 only).
  std::vector<double> row_vec(std::size_t i) const {
    require_rank2();
    return {data_.begin() + static_cast<std::ptrdiff_t>(i * shape_[1]),
            data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * shape_[1])};
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }
  void require_rank2() const {
    if (shape_.size() != 2)
      throw std::invalid_argument("Tensor: rank-2 access on tensor of shape " +
                                  shape_str());
  }

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

inline bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace elsm
