#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "elsm/model.hpp"
#include "elsm/rng.hpp"

using elsm::Tensor;

namespace {

// Brute-force transcription of the drift-mean formula, scalar loops only.
std::vector<double> neighbor_mean_oracle(const Tensor& Z, const Tensor& A,
                                         std::size_t i, double s4) {
  std::size_t n = Z.rows(), d = Z.cols();
  double denom = 1.0;
  std::vector<double> num = Z.row_vec(i);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) continue;
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      sq += (Z(i, k) - Z(j, k)) * (Z(i, k) - Z(j, k));
    double w = A(i, j) * std::exp(-sq / (s4 * s4));
    denom += w;
    for (std::size_t k = 0; k < d; ++k) num[k] += w * Z(j, k);
  }
  for (double& v : num) v /= denom;
  return num;
}

}  // namespace

TEST_CASE("edge kernel values") {
  double s2 = 0.7;
  CHECK(elsm::edge_kernel_f({0.0, 0.0}, s2) == 1.0);
  // squared distance equal to s2^2
  double v = elsm::edge_kernel_f_sq(s2 * s2, s2);
  CHECK(v == doctest::Approx(1.0 - std::tanh(1.0)).epsilon(1e-14));
  CHECK(v == doctest::Approx(0.238406).epsilon(1e-5));
  CHECK(elsm::edge_kernel_f_sq(100.0 * s2 * 100.0 * s2, s2) < 1e-12);
}

TEST_CASE("split kernel values") {
  double s3 = 1.3;
  CHECK(elsm::split_kernel_g({0.0}, s3) == 1.0);
  CHECK(elsm::split_kernel_g_sq(s3 * s3, s3) ==
        doctest::Approx(0.238406).epsilon(1e-5));
  CHECK(elsm::split_kernel_g_sq(2.0 * s3 * s3, s3) ==
        doctest::Approx(1.0 - std::tanh(2.0)).epsilon(1e-14));
  CHECK(elsm::split_kernel_g_sq(2.0 * s3 * s3, s3) ==
        doctest::Approx(0.035972).epsilon(1e-4));
}

TEST_CASE("influence kernel values") {
  double s4 = 0.9;
  CHECK(elsm::influence_kernel_l({0.0, 0.0, 0.0}, s4) == 1.0);
  CHECK(elsm::influence_kernel_l_sq(s4 * s4, s4) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(elsm::influence_kernel_l_sq(1e6, s4) < 1e-300);
}

TEST_CASE("kernels reject non-finite inputs and zero scales") {
  double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(elsm::edge_kernel_f({inf}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(elsm::split_kernel_g({std::nan("")}, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(elsm::influence_kernel_l({inf}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(elsm::edge_kernel_f({1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(elsm::influence_kernel_l({1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("kernel monotonicity and range") {
  elsm::rng::Stream s(5, 0);
  for (int trial = 0; trial < 50; ++trial) {
    double scale = 0.1 + s.uniform() * 3.0;
    double r1 = s.uniform() * 5.0;
    double r2 = r1 + 1e-6 + s.uniform();
    CHECK(elsm::edge_kernel_f_sq(r1, scale) > elsm::edge_kernel_f_sq(r2, scale));
    CHECK(elsm::split_kernel_g_sq(r1, scale) >
          elsm::split_kernel_g_sq(r2, scale));
    CHECK(elsm::influence_kernel_l_sq(r1, scale) >
          elsm::influence_kernel_l_sq(r2, scale));
    for (double r : {r1, r2}) {
      double f = elsm::edge_kernel_f_sq(r, scale);
      double l = elsm::influence_kernel_l_sq(r, scale);
      CHECK(f > 0.0);
      CHECK(f <= 1.0);
      CHECK(l > 0.0);
      CHECK(l <= 1.0);
    }
  }
}

TEST_CASE("neighbor_mean on isolated node returns its own embedding") {
  Tensor Z({3, 2}, {0.0, 0.0, 1.0, 1.0, 2.0, 0.5});
  Tensor A(3, 3);  // no edges
  auto mu = elsm::neighbor_mean(Z, A, 1, 0.5);
  CHECK(mu[0] == 1.0);
  CHECK(mu[1] == 1.0);
}

TEST_CASE("neighbor_mean of coincident nodes stays put") {
  Tensor Z({2, 2}, {0.3, -0.2, 0.3, -0.2});
  Tensor A({2, 2}, {0, 1, 1, 0});
  auto mu = elsm::neighbor_mean(Z, A, 0, 1.0);
  CHECK(mu[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(mu[1] == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("neighbor_mean on a 3-node path matches the scalar oracle") {
  // nodes at 0, 1, 2 on a line; middle node connected to both ends
  Tensor Z({3, 1}, {0.0, 1.0, 2.0});
  Tensor A({3, 3}, {0, 1, 0, 1, 0, 1, 0, 1, 0});
  double s4 = 1.0;
  auto mu = elsm::neighbor_mean(Z, A, 1, s4);
  auto expect = neighbor_mean_oracle(Z, A, 1, s4);
  CHECK(mu[0] == doctest::Approx(expect[0]).epsilon(1e-15));
  // weights l(1) = e^-1 on both sides of node 1
  double e1 = std::exp(-1.0);
  CHECK(mu[0] == doctest::Approx((0.0 * e1 + 1.0 + 2.0 * e1) / (1.0 + 2.0 * e1))
                     .epsilon(1e-15));
}

TEST_CASE("neighbor_mean equals brute force on random weighted instances") {
  elsm::rng::Stream s(17, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 2 + static_cast<std::size_t>(s.uniform() * 5);
    std::size_t d = 1 + static_cast<std::size_t>(s.uniform() * 3);
    Tensor Z(n, d);
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = s.normal();
    Tensor A(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) {
        double w = s.uniform() < 0.5 ? std::floor(s.uniform() * 4.0) : 0.0;
        A(i, j) = w;
        A(j, i) = w;
      }
    double s4 = 0.3 + s.uniform();
    for (std::size_t i = 0; i < n; ++i) {
      auto got = elsm::neighbor_mean(Z, A, i, s4);
      auto expect = neighbor_mean_oracle(Z, A, i, s4);
      for (std::size_t k = 0; k < d; ++k)
        CHECK(got[k] == doctest::Approx(expect[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("neighbor_mean output is a convex combination") {
  elsm::rng::Stream s(19, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 4;
    Tensor Z(n, 2);
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = s.normal();
    Tensor A(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        A(i, j) = A(j, i) = s.uniform() < 0.6 ? 1.0 : 0.0;
    double s4 = 0.5;
    std::size_t i = trial % n;
    // Recompute the convex weights independently and check them.
    double denom = 1.0;
    std::vector<double> w(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || A(i, j) == 0.0) continue;
      double sq = 0.0;
      for (std::size_t k = 0; k < 2; ++k)
        sq += (Z(i, k) - Z(j, k)) * (Z(i, k) - Z(j, k));
      w[j] = A(i, j) * std::exp(-sq / (s4 * s4));
      denom += w[j];
    }
    w[i] = 1.0;
    double coeff_sum = 0.0;
    std::vector<double> combo(2, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double coeff = w[j] / denom;
      CHECK(coeff >= 0.0);
      coeff_sum += coeff;
      for (std::size_t k = 0; k < 2; ++k) combo[k] += coeff * Z(j, k);
    }
    CHECK(coeff_sum == doctest::Approx(1.0).epsilon(1e-12));
    auto mu = elsm::neighbor_mean(Z, A, i, s4);
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(mu[k] == doctest::Approx(combo[k]).epsilon(1e-12));
  }
}

TEST_CASE("neighbor_mean is permutation equivariant") {
  elsm::rng::Stream s(23, 0);
  std::size_t n = 5, d = 2;
  Tensor Z(n, d);
  for (std::size_t i = 0; i < Z.size(); ++i) Z[i] = s.normal();
  Tensor A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      A(i, j) = A(j, i) = s.uniform() < 0.5 ? 1.0 : 0.0;
  std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  Tensor Zp(n, d), Ap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) Zp(i, k) = Z(perm[i], k);
    for (std::size_t j = 0; j < n; ++j) Ap(i, j) = A(perm[i], perm[j]);
  }
  Tensor mu = elsm::neighbor_mean_all(Z, A, 0.8);
  Tensor mup = elsm::neighbor_mean_all(Zp, Ap, 0.8);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      CHECK(mup(i, k) == doctest::Approx(mu(perm[i], k)).epsilon(1e-12));
}

TEST_CASE("neighbor_mean rejects mismatched shapes") {
  Tensor Z(3, 2);
  Tensor A(4, 4);
  CHECK_THROWS_AS(elsm::neighbor_mean(Z, A, 0, 1.0), std::invalid_argument);
  Tensor A2(3, 3);
  CHECK_THROWS_AS(elsm::neighbor_mean(Z, A2, 5, 1.0), std::invalid_argument);
}

TEST_CASE("hyperparameter validation") {
  elsm::HyperParams p;
  p.n = 10;
  p.T = 3;
  p.K = 2;
  p.d = 2;
  p.pi = {0.5, 0.5};
  p.m_prior = {0.0, 0.0};
  p.s = 1.0;
  p.s1 = 0.05;
  p.s2 = 0.2;
  p.s3 = 1.0;
  p.s4 = 0.5;
  CHECK_NOTHROW(p.validate());

  auto bad = p;
  bad.pi = {0.6, 0.6};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.pi = {1.2, -0.2};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.s2 = 0.0;  // zero scales rejected, not clamped
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = p;
  bad.m_prior = {0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dynamic network validation") {
  elsm::DynamicNetwork net;
  net.snapshots.push_back(Tensor({2, 2}, {0, 1, 1, 0}));
  CHECK_NOTHROW(net.validate());
  net.snapshots[0](0, 1) = 2.0;
  net.snapshots[0](1, 0) = 2.0;
  CHECK_THROWS_AS(net.validate(), std::invalid_argument);  // binary violated
  net.weighted = true;
  CHECK_NOTHROW(net.validate());
  net.snapshots[0](0, 0) = 1.0;
  CHECK_THROWS_AS(net.validate(), std::invalid_argument);  // diagonal
}
