#include <cmath>
#include <vector>

#include "doctest.h"
#include "elsm/generator.hpp"
#include "elsm/model.hpp"

using elsm::Tensor;

namespace {

elsm::HyperParams paper_synthetic_params() {
  elsm::HyperParams p;
  p.n = 100;
  p.T = 10;
  p.K = 5;
  p.pi.assign(5, 0.2);
  p.m_prior = {0.0, 0.0};
  p.s = 1.0;
  p.s1 = 0.05;
  p.s2 = 0.2;
  p.s3 = 1.0;
  p.s4 = 0.5;
  p.d = 2;
  return p;
}

elsm::HyperParams tiny_params() {
  elsm::HyperParams p;
  p.n = 4;
  p.T = 3;
  p.K = 2;
  p.pi = {0.5, 0.5};
  p.m_prior = {0.0, 0.0};
  p.s = 1.0;
  p.s1 = 0.1;
  p.s2 = 0.5;
  p.s3 = 1.0;
  p.s4 = 0.5;
  p.d = 2;
  return p;
}

}  // namespace

TEST_CASE("explicit centers are returned verbatim") {
  auto p = tiny_params();
  elsm::rng::Stream s(0, 0);
  Tensor centers({2, 2}, {0, 0, 5, 5});
  Tensor got = elsm::sample_initial_centers(p, s, centers);
  CHECK(got.data() == centers.data());
}

TEST_CASE("tiny prior spread collapses centers onto the prior mean") {
  auto p = tiny_params();
  p.s = 1e-12;
  p.m_prior = {1.5, -2.0};
  elsm::rng::Stream s(1, 0);
  Tensor mu = elsm::sample_initial_centers(p, s);
  for (std::size_t j = 0; j < mu.rows(); ++j) {
    CHECK(mu(j, 0) == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(mu(j, 1) == doctest::Approx(-2.0).epsilon(1e-9));
  }
}

TEST_CASE("center sampling matches the gaussian law empirically") {
  auto p = tiny_params();
  p.K = 1;
  p.pi = {1.0};
  p.s = 0.7;
  p.m_prior = {0.3, -0.1};
  const int reps = 100000;
  double sum0 = 0.0, sum1 = 0.0;
  elsm::rng::Stream s(2, 0);
  for (int r = 0; r < reps; ++r) {
    Tensor mu = elsm::sample_initial_centers(p, s);
    sum0 += mu(0, 0);
    sum1 += mu(0, 1);
  }
  double tol = 3.0 * p.s / std::sqrt(static_cast<double>(reps));
  CHECK(std::abs(sum0 / reps - 0.3) < tol);
  CHECK(std::abs(sum1 / reps + 0.1) < tol);
}

TEST_CASE("membership sampling") {
  elsm::rng::Stream s(3, 0);
  std::vector<double> degenerate = {1.0, 0.0, 0.0};
  auto c = elsm::sample_memberships(degenerate, 50, s);
  for (int label : c) CHECK(label == 1);

  CHECK(elsm::sample_memberships(degenerate, 0, s).empty());

  std::vector<double> uniform(5, 0.2);
  auto big = elsm::sample_memberships(uniform, 100000, s);
  std::vector<int> counts(5, 0);
  for (int label : big) counts[label - 1]++;
  for (int j = 0; j < 5; ++j)
    CHECK(std::abs(counts[j] / 100000.0 - 0.2) < 0.01);
}

TEST_CASE("initial embeddings collapse onto centers as s1 goes to zero") {
  elsm::rng::Stream s(4, 0);
  Tensor centers({2, 2}, {0, 0, 5, 5});
  std::vector<int> c = {1, 2, 2, 1};
  Tensor z = elsm::sample_initial_embeddings(centers, c, 1e-12, s);
  CHECK(z(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(z(1, 0) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(z(3, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(elsm::all_finite(z));
}

TEST_CASE("initial embedding spread matches s1 empirically") {
  elsm::rng::Stream s(5, 0);
  Tensor centers({1, 2}, {1.0, -1.0});
  std::size_t n = 100000;
  std::vector<int> c(n, 1);
  double s1 = 0.3;
  Tensor z = elsm::sample_initial_embeddings(centers, c, s1, s);
  double var0 = 0.0, var1 = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    var0 += (z(i, 0) - 1.0) * (z(i, 0) - 1.0);
    var1 += (z(i, 1) + 1.0) * (z(i, 1) + 1.0);
    cov += (z(i, 0) - 1.0) * (z(i, 1) + 1.0);
  }
  CHECK(std::abs(var0 / n - s1 * s1) < 0.005);
  CHECK(std::abs(var1 / n - s1 * s1) < 0.005);
  CHECK(std::abs(cov / n) < 0.005);
}

TEST_CASE("membership labels must index valid centers") {
  elsm::rng::Stream s(6, 0);
  Tensor centers({2, 2}, {0, 0, 5, 5});
  std::vector<int> bad = {1, 3};
  CHECK_THROWS_AS(elsm::sample_initial_embeddings(centers, bad, 0.1, s),
                  std::invalid_argument);
}

TEST_CASE("adjacency sampling: coincident nodes always connect") {
  elsm::rng::Stream s(7, 0);
  Tensor z({2, 2}, {0.4, 0.4, 0.4, 0.4});
  for (int rep = 0; rep < 200; ++rep) {
    Tensor a = elsm::sample_adjacency(z, 0.2, false, s);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(1, 0) == 1.0);
    CHECK(a(0, 0) == 0.0);
  }
}

TEST_CASE("adjacency sampling matches the edge kernel frequency") {
  elsm::rng::Stream s(8, 0);
  double s2 = 0.2;
  Tensor z({2, 1}, {0.0, s2});  // squared distance s2^2
  const int reps = 100000;
  int edges = 0;
  for (int r = 0; r < reps; ++r)
    edges += elsm::sample_adjacency(z, s2, false, s)(1, 0) > 0 ? 1 : 0;
  double p = 1.0 - std::tanh(1.0);
  CHECK(std::abs(edges / static_cast<double>(reps) - p) < 0.01);
}

TEST_CASE("adjacency draws are symmetric with zero diagonal") {
  elsm::rng::Stream s(9, 0);
  Tensor z(6, 2);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = s.normal();
  Tensor a = elsm::sample_adjacency(z, 0.5, false, s);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a(i, i) == 0.0);
    for (std::size_t j = 0; j < 6; ++j) CHECK(a(i, j) == a(j, i));
  }
}

TEST_CASE("split indicators at alpha always fire") {
  elsm::rng::Stream s(10, 0);
  Tensor z({1, 2}, {0.7, -0.3});
  std::vector<double> alpha = {0.7, -0.3};
  for (int rep = 0; rep < 100; ++rep)
    CHECK(elsm::sample_split_indicators(z, alpha, 1.0, s)[0] == 1);
}

TEST_CASE("split indicators far from alpha almost never fire") {
  elsm::rng::Stream s(11, 0);
  Tensor z({1, 1}, {100.0});
  std::vector<double> alpha = {0.0};
  int fires = 0;
  for (int rep = 0; rep < 1000; ++rep)
    fires += elsm::sample_split_indicators(z, alpha, 1.0, s)[0];
  CHECK(fires == 0);
}

TEST_CASE("split frequency matches the split kernel") {
  elsm::rng::Stream s(12, 0);
  double s3 = 1.0;
  Tensor z({1, 1}, {s3});
  std::vector<double> alpha = {0.0};
  const int reps = 100000;
  int fires = 0;
  for (int r = 0; r < reps; ++r)
    fires += elsm::sample_split_indicators(z, alpha, s3, s)[0];
  CHECK(std::abs(fires / static_cast<double>(reps) - (1.0 - std::tanh(1.0))) <
        0.01);
}

TEST_CASE("evolution endpoints at tiny s1") {
  elsm::rng::Stream s(13, 0);
  Tensor z_prev({2, 2}, {1.0, 1.0, -1.0, -1.0});
  Tensor a_prev(2, 2);  // isolated nodes
  std::vector<double> alpha = {3.0, 3.0};
  std::vector<std::uint8_t> h = {1, 0};
  Tensor z = elsm::evolve_embeddings(z_prev, a_prev, h, alpha, 1e-12, 0.5, s);
  CHECK(z(0, 0) == doctest::Approx(3.0).epsilon(1e-9));   // split to alpha
  CHECK(z(1, 0) == doctest::Approx(-1.0).epsilon(1e-9));  // isolated keeps place
}

TEST_CASE("evolution mean matches h·alpha + (1-h)·neighbor_mean") {
  elsm::rng::Stream s(14, 0);
  Tensor z_prev({4, 2}, {0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
  Tensor a_prev({4, 4}, {0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0});
  std::vector<double> alpha = {2.0, -2.0};
  std::vector<std::uint8_t> h = {1, 0, 0, 1};
  double s1 = 0.2, s4 = 0.5;
  Tensor mu = elsm::neighbor_mean_all(z_prev, a_prev, s4);
  const int reps = 100000;
  Tensor sum(4, 2);
  for (int r = 0; r < reps; ++r) {
    Tensor z = elsm::evolve_embeddings(z_prev, a_prev, h, alpha, s1, s4, s);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += z[i];
  }
  double tol = 3.0 * s1 / std::sqrt(static_cast<double>(reps));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 2; ++k) {
      double expect = h[i] ? alpha[k] : mu(i, k);
      CHECK(std::abs(sum(i, k) / reps - expect) < tol);
    }
}

TEST_CASE("generate_network with the reference synthetic configuration") {
  auto p = paper_synthetic_params();
  elsm::GeneratorOutput out = elsm::generate_network(p, 0);
  CHECK(out.network.T() == 10);
  CHECK(out.network.n() == 100);
  CHECK_NOTHROW(out.network.validate());
  CHECK(out.trajectory.Z.size() == 10);
  CHECK(out.trajectory.c.size() == 100);
  CHECK(out.trajectory.mu.rows() == 5);
  CHECK(out.trajectory.h.rows() == 9);
  CHECK(out.trajectory.alpha.rows() == 9);
  for (int c : out.trajectory.c) {
    CHECK(c >= 1);
    CHECK(c <= 5);
  }
  for (double h : out.trajectory.h.data()) CHECK((h == 0.0 || h == 1.0));
}

TEST_CASE("generate_network with T = 1 skips the evolution loop") {
  auto p = tiny_params();
  p.T = 1;
  elsm::GeneratorOutput out = elsm::generate_network(p, 3);
  CHECK(out.network.T() == 1);
  CHECK(out.trajectory.Z.size() == 1);
  CHECK(out.trajectory.h.empty());
  CHECK(out.trajectory.alpha.empty());
}

TEST_CASE("generation is deterministic given the seed") {
  auto p = tiny_params();
  elsm::GeneratorOutput a = elsm::generate_network(p, 123);
  elsm::GeneratorOutput b = elsm::generate_network(p, 123);
  elsm::GeneratorOutput c = elsm::generate_network(p, 124);
  for (std::size_t t = 0; t < p.T; ++t) {
    CHECK(a.network.snapshots[t].data() == b.network.snapshots[t].data());
    CHECK(a.trajectory.Z[t].data() == b.trajectory.Z[t].data());
  }
  bool any_diff = false;
  for (std::size_t t = 0; t < p.T; ++t)
    if (a.network.snapshots[t].data() != c.network.snapshots[t].data())
      any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("single-node networks are valid and edgeless") {
  auto p = tiny_params();
  p.n = 1;
  elsm::GeneratorOutput out = elsm::generate_network(p, 9);
  for (const Tensor& a : out.network.snapshots) {
    CHECK(a.rows() == 1);
    CHECK(a(0, 0) == 0.0);
  }
}

TEST_CASE("frozen-latent edge frequencies follow the kernel within 3 sigma") {
  elsm::rng::Stream latent_stream(15, 0);
  Tensor z(6, 2);
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = latent_stream.normal() * 0.5;
  double s2 = 0.4;
  const int reps = 100000;
  Tensor count(6, 6);
  elsm::rng::Stream s(16, 0);
  for (int r = 0; r < reps; ++r) {
    Tensor a = elsm::sample_adjacency(z, s2, false, s);
    for (std::size_t i = 0; i < a.size(); ++i) count[i] += a[i];
  }
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < 2; ++k)
        sq += (z(i, k) - z(j, k)) * (z(i, k) - z(j, k));
      double p = elsm::edge_kernel_f_sq(sq, s2);
      double sigma = std::sqrt(p * (1.0 - p) / reps);
      CHECK(std::abs(count(i, j) / reps - p) <= 3.0 * sigma + 1e-9);
    }
}

TEST_CASE("expected edge count strictly increases with s2 for fixed latents") {
  auto p = tiny_params();
  p.n = 30;
  elsm::GeneratorOutput out = elsm::generate_network(p, 21);
  const Tensor& z = out.trajectory.Z[0];
  double prev = -1.0;
  for (double s2 : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    double expected_edges = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        double sq = 0.0;
        for (std::size_t k = 0; k < z.cols(); ++k)
          sq += (z(i, k) - z(j, k)) * (z(i, k) - z(j, k));
        expected_edges += elsm::edge_kernel_f_sq(sq, s2);
      }
    CHECK(expected_edges > prev);
    prev = expected_edges;
  }
}

TEST_CASE("weighted generation emits symmetric integer weights") {
  auto p = tiny_params();
  elsm::GeneratorOptions opts;
  opts.weighted = true;
  opts.emission.w_rho = 1.0;
  opts.emission.b_rho = 0.5;
  elsm::GeneratorOutput out = elsm::generate_network(p, 31, opts);
  CHECK(out.network.weighted);
  CHECK_NOTHROW(out.network.validate());
  bool any_weight_gt1 = false;
  for (const Tensor& a : out.network.snapshots)
    for (double v : a.data())
      if (v > 1.0) any_weight_gt1 = true;
  CHECK(any_weight_gt1);
}

TEST_CASE("weighted emission matches the poisson intensity empirically") {
  elsm::rng::Stream s(17, 0);
  Tensor z({2, 1}, {0.0, 0.6});
  elsm::WeightedEmission em{1.3, 0.4};
  double sq = 0.36;
  double rho = std::exp(-em.w_rho * em.w_rho * sq + em.b_rho);
  const int reps = 100000;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r)
    sum += elsm::sample_adjacency(z, 1.0, true, s, em)(1, 0);
  double tol = 4.0 * std::sqrt(rho / reps);
  CHECK(std::abs(sum / reps - rho) < tol);
}
