#pragma once

#include <functional>
#include <vector>

#include "elsm/tensor.hpp"

namespace elsm::ad {

using VarId = int;

// Reverse-mode tape over dense f64 tensors. Forward values are computed
// eagerly as ops are recorded (define-by-run), so intermediate values can be
// inspected while building, e.g. to subtract a constant row-max before a
// softmax. backward() walks the record once in reverse topological order.
//
// Elementwise binary ops broadcast over rank-2 shapes where each dim matches
// or is 1 (scalar, row and column vectors against matrices).
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(Tape&&) noexcept;
  Tape& operator=(Tape&&) noexcept;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf with gradient tracking (a trainable parameter or checked input).
  VarId leaf(Tensor value);
  // Leaf without gradient tracking (data, noise, masks).
  VarId constant(Tensor value);
  VarId constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId div(VarId a, VarId b);
  VarId matmul(VarId a, VarId b);
  VarId concat_rows(VarId a, VarId b);
  VarId concat_cols(VarId a, VarId b);
  VarId concat_rows(const std::vector<VarId>& parts);
  VarId slice_rows(VarId a, std::size_t lo, std::size_t hi);
  VarId slice_cols(VarId a, std::size_t lo, std::size_t hi);
  VarId reshape(VarId a, std::size_t rows, std::size_t cols);
  VarId sum(VarId a);
  VarId mean(VarId a);
  VarId sum_rows(VarId a);  // (n,m) -> (n,1)
  VarId sum_cols(VarId a);  // (n,m) -> (1,m)
  VarId tanh(VarId a);
  VarId sigmoid(VarId a);
  VarId exp(VarId a);
  VarId log(VarId a);  // requires strictly positive input
  VarId square(VarId a);
  VarId neg(VarId a);
  VarId add_scalar(VarId a, double c);
  VarId mul_scalar(VarId a, double c);
  // Gradient passes only strictly inside (lo, hi).
  VarId clamp(VarId a, double lo, double hi);
  VarId broadcast_to(VarId a, std::size_t rows, std::size_t cols);
  // C[i][j] = squared euclidean distance between row i of X and row j of Y.
  VarId cross_sqdist(VarId x, VarId y);
  // D[i][j] = squared distance between rows i and j of Z.
  VarId pairwise_sqdist(VarId z) { return cross_sqdist(z, z); }

  const Tensor& value(VarId v) const;
  // Zero tensor when the var never received gradient (disconnected).
  Tensor gradient(VarId v) const;
  bool requires_grad(VarId v) const;

  // Accumulates d(loss)/d(leaf) for every tracked leaf; loss must be scalar.
  void backward(VarId loss);

  std::size_t node_count() const;

 private:
  struct Node;
  VarId push(Node node);
  std::vector<Node> nodes_;
};

struct GradCheckReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;     // |ad-fd| / max(|ad|,|fd|,rel_floor)
  double max_scaled_err = 0.0;  // |ad-fd| / max over entries of |gradient|
  double grad_scale = 0.0;      // max |gradient| encountered
};

// Compares reverse-mode gradients of a scalar-valued builder against central
// finite differences, coordinate by coordinate. The builder must be a pure
// deterministic function of the leaf values.
GradCheckReport grad_check(
    const std::function<VarId(Tape&, const std::vector<VarId>&)>& f,
    const std::vector<Tensor>& params, double step = 1e-5,
    double rel_floor = 1e-6);

}  // namespace elsm::ad
