#include <cmath>
#include <vector>

#include "doctest.h"
#include "elsm/rng.hpp"
#include "elsm/tape.hpp"

using elsm::Tensor;
using elsm::ad::GradCheckReport;
using elsm::ad::Tape;
using elsm::ad::VarId;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, elsm::rng::Stream& s,
                     double scale = 1.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * s.normal();
  return t;
}

}  // namespace

TEST_CASE("forward op values") {
  Tape tape;
  VarId x = tape.constant(Tensor::scalar(0.0));
  CHECK(tape.value(tape.tanh(x)).scalar_value() == 0.0);
  CHECK(tape.value(tape.sigmoid(x)).scalar_value() == 0.5);

  VarId a = tape.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  VarId b = tape.constant(Tensor({3, 1}, {1, 1, 1}));
  VarId c = tape.matmul(a, b);
  CHECK(tape.value(c).rows() == 2);
  CHECK(tape.value(c).cols() == 1);
  CHECK(tape.value(c)(0, 0) == 6.0);
  CHECK(tape.value(c)(1, 0) == 15.0);

  VarId ones = tape.constant(Tensor::full(4, 5, 1.0));
  CHECK(tape.value(tape.sum(ones)).scalar_value() == 20.0);
  CHECK(tape.value(tape.mean(ones)).scalar_value() == 1.0);
}

TEST_CASE("forward determinism: identical inputs give bit-identical outputs") {
  elsm::rng::Stream s(11, 0);
  Tensor x = random_tensor(3, 4, s);
  Tensor w = random_tensor(4, 2, s);
  auto run = [&]() {
    Tape tape;
    VarId out = tape.tanh(tape.matmul(tape.constant(x), tape.constant(w)));
    return tape.value(out).data();
  };
  CHECK(run() == run());
}

TEST_CASE("backward of x squared") {
  Tape tape;
  VarId x = tape.leaf(Tensor::scalar(3.0));
  VarId loss = tape.square(x);
  tape.backward(loss);
  CHECK(tape.gradient(x).scalar_value() == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward of sum(tanh(Wx)) matches finite differences") {
  elsm::rng::Stream s(21, 0);
  Tensor w = random_tensor(4, 3, s, 0.5);
  Tensor x = random_tensor(3, 1, s, 0.5);
  auto f = [](Tape& tape, const std::vector<VarId>& params) {
    return tape.sum(tape.tanh(tape.matmul(params[0], params[1])));
  };
  GradCheckReport rep = elsm::ad::grad_check(f, {w, x}, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}

TEST_CASE("disconnected parameter has exactly zero gradient") {
  Tape tape;
  VarId x = tape.leaf(Tensor::scalar(2.0));
  VarId unused = tape.leaf(Tensor::full(2, 2, 5.0));
  VarId loss = tape.square(x);
  tape.backward(loss);
  Tensor g = tape.gradient(unused);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("grad_check on a quadratic form is near exact") {
  elsm::rng::Stream s(31, 0);
  Tensor a = random_tensor(4, 4, s);
  Tensor x = random_tensor(4, 1, s);
  auto f = [&a](Tape& tape, const std::vector<VarId>& params) {
    VarId am = tape.constant(a);
    VarId xv = params[0];
    VarId ax = tape.matmul(am, xv);
    return tape.sum(tape.mul(xv, ax));
  };
  GradCheckReport rep = elsm::ad::grad_check(f, {x}, 1e-5);
  CHECK(rep.max_rel_err < 1e-7);
}

TEST_CASE("grad_check on a constant function is zero") {
  auto f = [](Tape& tape, const std::vector<VarId>& params) {
    (void)params;
    return tape.constant(Tensor::scalar(7.0));
  };
  GradCheckReport rep = elsm::ad::grad_check(f, {Tensor::full(2, 2, 1.0)});
  CHECK(rep.max_abs_err == 0.0);
  CHECK(rep.max_rel_err == 0.0);
}

TEST_CASE("backward is linear in the loss") {
  elsm::rng::Stream s(41, 0);
  Tensor x = random_tensor(3, 3, s);
  double ca = 2.5, cb = -1.25;

  auto grad_of = [&x](auto builder) {
    Tape tape;
    VarId xv = tape.leaf(x);
    tape.backward(builder(tape, xv));
    return tape.gradient(xv);
  };
  auto f = [](Tape& t, VarId xv) { return t.sum(t.tanh(xv)); };
  auto g = [](Tape& t, VarId xv) { return t.sum(t.square(xv)); };
  auto combo = [&](Tape& t, VarId xv) {
    return t.add(t.mul_scalar(f(t, xv), ca), t.mul_scalar(g(t, xv), cb));
  };
  Tensor gf = grad_of(f);
  Tensor gg = grad_of(g);
  Tensor gc = grad_of(combo);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(gc[i] == doctest::Approx(ca * gf[i] + cb * gg[i]).epsilon(1e-12));
}

TEST_CASE("finite differences agree op by op") {
  elsm::rng::Stream s(51, 0);
  Tensor a = random_tensor(3, 4, s, 0.8);
  Tensor b = random_tensor(3, 4, s, 0.8);
  Tensor col = random_tensor(3, 1, s, 0.8);
  Tensor row = random_tensor(1, 4, s, 0.8);
  Tensor pos = random_tensor(3, 4, s, 0.3);
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = 0.5 + std::abs(pos[i]);
  Tensor m1 = random_tensor(3, 4, s, 0.8);
  Tensor m2 = random_tensor(4, 2, s, 0.8);
  Tensor z = random_tensor(4, 2, s, 0.8);
  Tensor y = random_tensor(3, 2, s, 0.8);

  using Builder = std::function<VarId(Tape&, const std::vector<VarId>&)>;
  struct Case {
    const char* name;
    std::vector<Tensor> params;
    Builder f;
  };
  std::vector<Case> cases = {
      {"add", {a, b}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.add(p[0], p[1]));
       }},
      {"sub_bc_col", {a, col}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.sub(p[0], p[1])));
       }},
      {"mul_bc_row", {a, row}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.mul(p[0], p[1]));
       }},
      {"mul_outer", {col, row}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.mul(p[0], p[1])));
       }},
      {"div", {a, pos}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.div(p[0], p[1]));
       }},
      {"div_bc", {a, col}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.div(p[0], t.add_scalar(t.square(p[1]), 1.0)));
       }},
      {"matmul", {m1, m2}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.tanh(t.matmul(p[0], p[1])));
       }},
      {"concat_cols", {a, b}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.concat_cols(p[0], p[1])));
       }},
      {"concat_rows", {a, b}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.concat_rows(p[0], p[1])));
       }},
      {"slice", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.slice_cols(t.slice_rows(p[0], 1, 3), 0, 2)));
       }},
      {"reshape", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.reshape(p[0], 2, 6)));
       }},
      {"mean", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.mean(t.square(p[0]));
       }},
      {"sum_rows", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.sum_rows(p[0])));
       }},
      {"sum_cols", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.sum_cols(p[0])));
       }},
      {"tanh", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.tanh(p[0]));
       }},
      {"sigmoid", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.sigmoid(p[0]));
       }},
      {"exp", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.exp(p[0]));
       }},
      {"log", {pos}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.log(p[0]));
       }},
      {"neg", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.neg(p[0])));
       }},
      {"scalar_ops", {a}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.add_scalar(t.mul_scalar(p[0], 1.7), -0.3));
       }},
      {"broadcast_to", {row}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.square(t.broadcast_to(p[0], 5, 4)));
       }},
      {"cross_sqdist", {z, y}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.tanh(t.cross_sqdist(p[0], p[1])));
       }},
      {"pairwise_sqdist", {z}, [](Tape& t, const std::vector<VarId>& p) {
         return t.sum(t.tanh(t.pairwise_sqdist(p[0])));
       }},
  };
  for (const Case& c : cases) {
    CAPTURE(c.name);
    GradCheckReport rep = elsm::ad::grad_check(c.f, c.params, 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
  }
}

TEST_CASE("clamp passes gradient only strictly inside") {
  Tape tape;
  VarId x = tape.leaf(Tensor({1, 3}, {-5.0, 0.5, 5.0}));
  VarId loss = tape.sum(tape.clamp(x, -1.0, 1.0));
  tape.backward(loss);
  Tensor g = tape.gradient(x);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
}

TEST_CASE("errors: shape mismatch, bad log input, non-scalar backward") {
  Tape tape;
  VarId a = tape.constant(Tensor(2, 3));
  VarId b = tape.constant(Tensor(3, 2));
  CHECK_THROWS_AS(tape.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(tape.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(tape.log(tape.constant(Tensor::scalar(0.0))),
                  std::domain_error);
  CHECK_THROWS_AS(tape.log(tape.constant(Tensor::scalar(-1.0))),
                  std::domain_error);
  VarId leaf = tape.leaf(Tensor::full(2, 2, 1.0));
  CHECK_THROWS_AS(tape.backward(leaf), std::invalid_argument);
}
