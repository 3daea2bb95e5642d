#include "elsm/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace elsm::ad {

namespace {

enum class Op : std::uint8_t {
  kLeaf,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kMatMul,
  kConcatRows,
  kConcatCols,
  kSliceRows,
  kSliceCols,
  kReshape,
  kSum,
  kMean,
  kSumRows,
  kSumCols,
  kTanh,
  kSigmoid,
  kExp,
  kLog,
  kSquare,
  kNeg,
  kAddScalar,
  kMulScalar,
  kClamp,
  kBroadcast,
  kCrossSqDist,
};

[[noreturn]] void shape_error(const char* op, const Tensor& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape " + a.shape_str());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              a.shape_str() + " and " + b.shape_str());
}

bool broadcastable(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) return false;
  auto ok = [](std::size_t x, std::size_t y) { return x == y || x == 1 || y == 1; };
  return ok(a.shape()[0], b.shape()[0]) && ok(a.shape()[1], b.shape()[1]);
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

// Reduce a full-shape gradient onto a possibly-broadcast input shape.
void reduce_into(const Tensor& grad_out, Tensor& grad_in) {
  std::size_t gr = grad_out.rows(), gc = grad_out.cols();
  std::size_t ir = grad_in.rows(), ic = grad_in.cols();
  for (std::size_t i = 0; i < gr; ++i) {
    std::size_t ii = ir == 1 ? 0 : i;
    for (std::size_t j = 0; j < gc; ++j) {
      grad_in(ii, ic == 1 ? 0 : j) += grad_out(i, j);
    }
  }
}

}  // namespace

struct Tape::Node {
  Op op = Op::kLeaf;
  VarId a = -1;
  VarId b = -1;
  double p0 = 0.0;
  double p1 = 0.0;
  std::size_t i0 = 0;
  std::size_t i1 = 0;
  Tensor value;
  Tensor grad;  // empty until first accumulation
  bool requires_grad = false;
};

Tape::Tape() = default;
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;

VarId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<VarId>(nodes_.size() - 1);
}

std::size_t Tape::node_count() const { return nodes_.size(); }

VarId Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

VarId Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = false;
  return push(std::move(n));
}

const Tensor& Tape::value(VarId v) const { return nodes_.at(v).value; }

bool Tape::requires_grad(VarId v) const { return nodes_.at(v).requires_grad; }

Tensor Tape::gradient(VarId v) const {
  const Node& n = nodes_.at(v);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

namespace {

Tensor broadcast_binary(const Tensor& a, const Tensor& b, Op op) {
  std::size_t r = std::max(a.rows(), b.rows());
  std::size_t c = std::max(a.cols(), b.cols());
  Tensor out(r, c);
  std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double x = a(ar == 1 ? 0 : i, ac == 1 ? 0 : j);
      double y = b(br == 1 ? 0 : i, bc == 1 ? 0 : j);
      double v = 0.0;
      switch (op) {
        case Op::kAdd: v = x + y; break;
        case Op::kSub: v = x - y; break;
        case Op::kMul: v = x * y; break;
        case Op::kDiv: v = x / y; break;
        default: break;
      }
      out(i, j) = v;
    }
  }
  return out;
}

}  // namespace

VarId Tape::add(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!broadcastable(ta, tb)) shape_error("add", ta, tb);
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.value = broadcast_binary(ta, tb, Op::kAdd);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::sub(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!broadcastable(ta, tb)) shape_error("sub", ta, tb);
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.value = broadcast_binary(ta, tb, Op::kSub);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::mul(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!broadcastable(ta, tb)) shape_error("mul", ta, tb);
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.value = broadcast_binary(ta, tb, Op::kMul);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::div(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!broadcastable(ta, tb)) shape_error("div", ta, tb);
  Node n;
  n.op = Op::kDiv;
  n.a = a;
  n.b = b;
  n.value = broadcast_binary(ta, tb, Op::kDiv);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::matmul(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.rows())
    shape_error("matmul", ta, tb);
  std::size_t m = ta.rows(), k = ta.cols(), p = tb.cols();
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.value = Tensor(m, p);
  const double* A = ta.data().data();
  const double* B = tb.data().data();
  double* C = n.value.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      double av = A[i * k + t];
      if (av == 0.0) continue;
      const double* brow = B + t * p;
      double* crow = C + i * p;
      for (std::size_t j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::concat_rows(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.cols()) shape_error("concat_rows", ta, tb);
  Node n;
  n.op = Op::kConcatRows;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.rows() + tb.rows(), ta.cols());
  std::copy(ta.data().begin(), ta.data().end(), n.value.data().begin());
  std::copy(tb.data().begin(), tb.data().end(),
            n.value.data().begin() + static_cast<std::ptrdiff_t>(ta.size()));
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::concat_rows(const std::vector<VarId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty list");
  VarId acc = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) acc = concat_rows(acc, parts[i]);
  return acc;
}

VarId Tape::concat_cols(VarId a, VarId b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.rows() != tb.rows()) shape_error("concat_cols", ta, tb);
  Node n;
  n.op = Op::kConcatCols;
  n.a = a;
  n.b = b;
  n.value = Tensor(ta.rows(), ta.cols() + tb.cols());
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    for (std::size_t j = 0; j < ta.cols(); ++j) n.value(i, j) = ta(i, j);
    for (std::size_t j = 0; j < tb.cols(); ++j)
      n.value(i, ta.cols() + j) = tb(i, j);
  }
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

VarId Tape::slice_rows(VarId a, std::size_t lo, std::size_t hi) {
  const Tensor& ta = value(a);
  if (lo >= hi || hi > ta.rows()) shape_error("slice_rows", ta);
  Node n;
  n.op = Op::kSliceRows;
  n.a = a;
  n.i0 = lo;
  n.i1 = hi;
  n.value = Tensor(hi - lo, ta.cols());
  std::copy(ta.data().begin() + static_cast<std::ptrdiff_t>(lo * ta.cols()),
            ta.data().begin() + static_cast<std::ptrdiff_t>(hi * ta.cols()),
            n.value.data().begin());
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::slice_cols(VarId a, std::size_t lo, std::size_t hi) {
  const Tensor& ta = value(a);
  if (lo >= hi || hi > ta.cols()) shape_error("slice_cols", ta);
  Node n;
  n.op = Op::kSliceCols;
  n.a = a;
  n.i0 = lo;
  n.i1 = hi;
  n.value = Tensor(ta.rows(), hi - lo);
  for (std::size_t i = 0; i < ta.rows(); ++i)
    for (std::size_t j = lo; j < hi; ++j) n.value(i, j - lo) = ta(i, j);
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::reshape(VarId a, std::size_t rows, std::size_t cols) {
  const Tensor& ta = value(a);
  if (rows * cols != ta.size()) shape_error("reshape", ta);
  Node n;
  n.op = Op::kReshape;
  n.a = a;
  n.value = Tensor({rows, cols}, ta.data());
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::sum(VarId a) {
  Node n;
  n.op = Op::kSum;
  n.a = a;
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  n.value = Tensor::scalar(s);
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::mean(VarId a) {
  if (value(a).size() == 0) shape_error("mean", value(a));
  Node n;
  n.op = Op::kMean;
  n.a = a;
  double s = 0.0;
  for (double v : value(a).data()) s += v;
  n.value = Tensor::scalar(s / static_cast<double>(value(a).size()));
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::sum_rows(VarId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSumRows;
  n.a = a;
  n.value = Tensor(ta.rows(), 1);
  for (std::size_t i = 0; i < ta.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < ta.cols(); ++j) s += ta(i, j);
    n.value(i, 0) = s;
  }
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::sum_cols(VarId a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSumCols;
  n.a = a;
  n.value = Tensor(1, ta.cols());
  for (std::size_t i = 0; i < ta.rows(); ++i)
    for (std::size_t j = 0; j < ta.cols(); ++j) n.value(0, j) += ta(i, j);
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

namespace {

template <typename F>
Tensor map_unary(const Tensor& t, F f) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = f(t[i]);
  return out;
}

}  // namespace

VarId Tape::tanh(VarId a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.value = map_unary(value(a), [](double x) { return std::tanh(x); });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::sigmoid(VarId a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.value = map_unary(value(a), stable_sigmoid);
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::exp(VarId a) {
  Node n;
  n.op = Op::kExp;
  n.a = a;
  n.value = map_unary(value(a), [](double x) { return std::exp(x); });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::log(VarId a) {
  for (double v : value(a).data())
    if (!(v > 0.0))
      throw std::domain_error("log: input must be strictly positive");
  Node n;
  n.op = Op::kLog;
  n.a = a;
  n.value = map_unary(value(a), [](double x) { return std::log(x); });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::square(VarId a) {
  Node n;
  n.op = Op::kSquare;
  n.a = a;
  n.value = map_unary(value(a), [](double x) { return x * x; });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::neg(VarId a) {
  Node n;
  n.op = Op::kNeg;
  n.a = a;
  n.value = map_unary(value(a), [](double x) { return -x; });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::add_scalar(VarId a, double c) {
  Node n;
  n.op = Op::kAddScalar;
  n.a = a;
  n.p0 = c;
  n.value = map_unary(value(a), [c](double x) { return x + c; });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::mul_scalar(VarId a, double c) {
  Node n;
  n.op = Op::kMulScalar;
  n.a = a;
  n.p0 = c;
  n.value = map_unary(value(a), [c](double x) { return x * c; });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::clamp(VarId a, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be < hi");
  Node n;
  n.op = Op::kClamp;
  n.a = a;
  n.p0 = lo;
  n.p1 = hi;
  n.value = map_unary(value(a), [lo, hi](double x) {
    return x < lo ? lo : (x > hi ? hi : x);
  });
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::broadcast_to(VarId a, std::size_t rows, std::size_t cols) {
  const Tensor& ta = value(a);
  Tensor target(rows, cols);
  if (!broadcastable(ta, target)) shape_error("broadcast_to", ta);
  if (ta.rows() > rows || ta.cols() > cols) shape_error("broadcast_to", ta);
  Node n;
  n.op = Op::kBroadcast;
  n.a = a;
  n.value = Tensor(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      n.value(i, j) = ta(ta.rows() == 1 ? 0 : i, ta.cols() == 1 ? 0 : j);
  n.requires_grad = requires_grad(a);
  return push(std::move(n));
}

VarId Tape::cross_sqdist(VarId x, VarId y) {
  const Tensor& tx = value(x);
  const Tensor& ty = value(y);
  if (tx.rank() != 2 || ty.rank() != 2 || tx.cols() != ty.cols())
    shape_error("cross_sqdist", tx, ty);
  std::size_t nx = tx.rows(), ny = ty.rows(), d = tx.cols();
  Node n;
  n.op = Op::kCrossSqDist;
  n.a = x;
  n.b = y;
  n.value = Tensor(nx, ny);
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = tx(i, k) - ty(j, k);
        s += diff * diff;
      }
      n.value(i, j) = s;
    }
  }
  n.requires_grad = requires_grad(x) || requires_grad(y);
  return push(std::move(n));
}

void Tape::backward(VarId loss) {
  Node& ln = nodes_.at(loss);
  if (!ln.value.is_scalar())
    throw std::invalid_argument("backward: loss must be scalar");
  ln.grad = Tensor::scalar(1.0);

  auto ensure_grad = [this](VarId v) -> Tensor& {
    Node& n = nodes_[v];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  };

  for (VarId idx = loss; idx >= 0; --idx) {
    Node& n = nodes_[idx];
    if (!n.requires_grad || n.grad.empty() || n.op == Op::kLeaf) continue;
    const Tensor& g = n.grad;
    const Tensor& out = n.value;
    bool need_a = n.a >= 0 && nodes_[n.a].requires_grad;
    bool need_b = n.b >= 0 && nodes_[n.b].requires_grad;
    if (!need_a && !need_b) continue;

    switch (n.op) {
      case Op::kAdd: {
        if (need_a) reduce_into(g, ensure_grad(n.a));
        if (need_b) reduce_into(g, ensure_grad(n.b));
        break;
      }
      case Op::kSub: {
        if (need_a) reduce_into(g, ensure_grad(n.a));
        if (need_b) {
          Tensor neg_g = map_unary(g, [](double v) { return -v; });
          reduce_into(neg_g, ensure_grad(n.b));
        }
        break;
      }
      case Op::kMul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        if (need_a) {
          Tensor contrib(g.rows(), g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j)
              contrib(i, j) = g(i, j) * tb(tb.rows() == 1 ? 0 : i,
                                           tb.cols() == 1 ? 0 : j);
          reduce_into(contrib, ensure_grad(n.a));
        }
        if (need_b) {
          Tensor contrib(g.rows(), g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j)
              contrib(i, j) = g(i, j) * ta(ta.rows() == 1 ? 0 : i,
                                           ta.cols() == 1 ? 0 : j);
          reduce_into(contrib, ensure_grad(n.b));
        }
        break;
      }
      case Op::kDiv: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        if (need_a) {
          Tensor contrib(g.rows(), g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j)
              contrib(i, j) = g(i, j) / tb(tb.rows() == 1 ? 0 : i,
                                           tb.cols() == 1 ? 0 : j);
          reduce_into(contrib, ensure_grad(n.a));
        }
        if (need_b) {
          Tensor contrib(g.rows(), g.cols());
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) {
              double bv = tb(tb.rows() == 1 ? 0 : i, tb.cols() == 1 ? 0 : j);
              double av = ta(ta.rows() == 1 ? 0 : i, ta.cols() == 1 ? 0 : j);
              contrib(i, j) = -g(i, j) * av / (bv * bv);
            }
          reduce_into(contrib, ensure_grad(n.b));
        }
        break;
      }
      case Op::kMatMul: {
        const Tensor& ta = nodes_[n.a].value;
        const Tensor& tb = nodes_[n.b].value;
        std::size_t m = ta.rows(), k = ta.cols(), p = tb.cols();
        if (need_a) {
          Tensor& ga = ensure_grad(n.a);
          // dA = g * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < p; ++j) s += g(i, j) * tb(t, j);
              ga(i, t) += s;
            }
        }
        if (need_b) {
          Tensor& gb = ensure_grad(n.b);
          // dB = A^T * g
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double av = ta(i, t);
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < p; ++j) gb(t, j) += av * g(i, j);
            }
        }
        break;
      }
      case Op::kConcatRows: {
        const Tensor& ta = nodes_[n.a].value;
        if (need_a) {
          Tensor& ga = ensure_grad(n.a);
          for (std::size_t i = 0; i < ta.rows(); ++i)
            for (std::size_t j = 0; j < ta.cols(); ++j) ga(i, j) += g(i, j);
        }
        if (need_b) {
          Tensor& gb = ensure_grad(n.b);
          const Tensor& tb = nodes_[n.b].value;
          for (std::size_t i = 0; i < tb.rows(); ++i)
            for (std::size_t j = 0; j < tb.cols(); ++j)
              gb(i, j) += g(ta.rows() + i, j);
        }
        break;
      }
      case Op::kConcatCols: {
        const Tensor& ta = nodes_[n.a].value;
        if (need_a) {
          Tensor& ga = ensure_grad(n.a);
          for (std::size_t i = 0; i < ta.rows(); ++i)
            for (std::size_t j = 0; j < ta.cols(); ++j) ga(i, j) += g(i, j);
        }
        if (need_b) {
          Tensor& gb = ensure_grad(n.b);
          const Tensor& tb = nodes_[n.b].value;
          for (std::size_t i = 0; i < tb.rows(); ++i)
            for (std::size_t j = 0; j < tb.cols(); ++j)
              gb(i, j) += g(i, ta.cols() + j);
        }
        break;
      }
      case Op::kSliceRows: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j)
            ga(n.i0 + i, j) += g(i, j);
        break;
      }
      case Op::kSliceCols: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < out.rows(); ++i)
          for (std::size_t j = 0; j < out.cols(); ++j)
            ga(i, n.i0 + j) += g(i, j);
        break;
      }
      case Op::kReshape: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kSum: {
        Tensor& ga = ensure_grad(n.a);
        double gv = g.scalar_value();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
        break;
      }
      case Op::kMean: {
        Tensor& ga = ensure_grad(n.a);
        double gv = g.scalar_value() / static_cast<double>(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
        break;
      }
      case Op::kSumRows: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
        break;
      }
      case Op::kSumCols: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
        break;
      }
      case Op::kTanh: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * (1.0 - out[i] * out[i]);
        break;
      }
      case Op::kSigmoid: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * out[i] * (1.0 - out[i]);
        break;
      }
      case Op::kExp: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i];
        break;
      }
      case Op::kLog: {
        Tensor& ga = ensure_grad(n.a);
        const Tensor& ta = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / ta[i];
        break;
      }
      case Op::kSquare: {
        Tensor& ga = ensure_grad(n.a);
        const Tensor& ta = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 2.0 * ta[i];
        break;
      }
      case Op::kNeg: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kAddScalar: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kMulScalar: {
        Tensor& ga = ensure_grad(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.p0;
        break;
      }
      case Op::kClamp: {
        Tensor& ga = ensure_grad(n.a);
        const Tensor& ta = nodes_[n.a].value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (ta[i] > n.p0 && ta[i] < n.p1) ga[i] += g[i];
        break;
      }
      case Op::kBroadcast: {
        reduce_into(g, ensure_grad(n.a));
        break;
      }
      case Op::kCrossSqDist: {
        const Tensor& tx = nodes_[n.a].value;
        const Tensor& ty = nodes_[n.b].value;
        std::size_t nx = tx.rows(), ny = ty.rows(), d = tx.cols();
        if (need_a) {
          Tensor& gx = ensure_grad(n.a);
          for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) {
              double gij = g(i, j);
              if (gij == 0.0) continue;
              for (std::size_t k = 0; k < d; ++k)
                gx(i, k) += gij * 2.0 * (tx(i, k) - ty(j, k));
            }
        }
        if (need_b) {
          Tensor& gy = ensure_grad(n.b);
          for (std::size_t i = 0; i < nx; ++i)
            for (std::size_t j = 0; j < ny; ++j) {
              double gij = g(i, j);
              if (gij == 0.0) continue;
              for (std::size_t k = 0; k < d; ++k)
                gy(j, k) -= gij * 2.0 * (tx(i, k) - ty(j, k));
            }
        }
        break;
      }
      case Op::kLeaf:
        break;
    }
  }
}

GradCheckReport grad_check(
    const std::function<VarId(Tape&, const std::vector<VarId>&)>& f,
    const std::vector<Tensor>& params, double step, double rel_floor) {
  auto eval = [&](const std::vector<Tensor>& values) {
    Tape tape;
    std::vector<VarId> vars;
    vars.reserve(values.size());
    for (const Tensor& t : values) vars.push_back(tape.leaf(t));
    VarId loss = f(tape, vars);
    return tape.value(loss).scalar_value();
  };

  // Reverse-mode gradients.
  Tape tape;
  std::vector<VarId> vars;
  for (const Tensor& t : params) vars.push_back(tape.leaf(t));
  VarId loss = f(tape, vars);
  tape.backward(loss);
  std::vector<Tensor> ad_grads;
  for (VarId v : vars) ad_grads.push_back(tape.gradient(v));

  GradCheckReport report;
  std::vector<Tensor> work = params;
  std::vector<std::pair<double, double>> entries;  // (ad, fd)
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      double orig = work[p][i];
      work[p][i] = orig + step;
      double fp = eval(work);
      work[p][i] = orig - step;
      double fm = eval(work);
      work[p][i] = orig;
      double fd = (fp - fm) / (2.0 * step);
      double adv = ad_grads[p][i];
      entries.emplace_back(adv, fd);
      report.grad_scale = std::max(report.grad_scale,
                                   std::max(std::abs(adv), std::abs(fd)));
    }
  }
  for (auto [adv, fd] : entries) {
    double abs_err = std::abs(adv - fd);
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    double denom = std::max({std::abs(adv), std::abs(fd), rel_floor});
    report.max_rel_err = std::max(report.max_rel_err, abs_err / denom);
    if (report.grad_scale > 0.0)
      report.max_scaled_err =
          std::max(report.max_scaled_err, abs_err / report.grad_scale);
  }
  return report;
}

}  // namespace elsm::ad
