#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "elsm/rng.hpp"

using elsm::rng::Stream;

TEST_CASE("streams are deterministic and keyed by seed and id") {
  Stream a(42, 0), b(42, 0), c(43, 0), d(42, 1);
  for (int i = 0; i < 100; ++i) {
    auto va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  bool differs_seed = false, differs_id = false;
  Stream a2(42, 0);
  for (int i = 0; i < 10; ++i) {
    auto va = a2.next_u64();
    if (va != c.next_u64()) differs_seed = true;
    if (va != d.next_u64()) differs_id = true;
  }
  CHECK(differs_seed);
  CHECK(differs_id);
}

TEST_CASE("substreams do not collide with parent or siblings") {
  Stream root(7, 0);
  Stream s0 = root.substream(0);
  Stream s1 = root.substream(1);
  CHECK(s0.stream_id() != s1.stream_id());
  CHECK(s0.stream_id() != root.stream_id());
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 64; ++i)
    firsts.insert(root.substream(i).stream_id());
  CHECK(firsts.size() == 64);
}

TEST_CASE("counter restore resumes the sequence") {
  Stream a(5, 9);
  for (int i = 0; i < 17; ++i) a.uniform();
  std::uint64_t ctr = a.counter();
  double next = a.uniform();
  Stream b(5, 9);
  b.set_counter(ctr);
  CHECK(b.uniform() == next);
}

TEST_CASE("uniform moments") {
  Stream s(1, 0);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum_sq += u * u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
  CHECK(std::abs(sum_sq / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
  Stream s(2, 0);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = s.normal();
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("categorical matches probabilities") {
  Stream s(3, 0);
  std::vector<double> pi = {0.5, 0.3, 0.2};
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[s.categorical(pi)]++;
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(static_cast<double>(counts[j]) / n - pi[j]) < 0.01);
}

TEST_CASE("poisson matches mean and variance across regimes") {
  for (double mean : {0.5, 4.0, 60.0}) {
    Stream s(4, static_cast<std::uint64_t>(mean * 10));
    const int n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      double k = static_cast<double>(s.poisson(mean));
      sum += k;
      sum_sq += k * k;
    }
    double m = sum / n;
    double v = sum_sq / n - m * m;
    double tol = 4.0 * std::sqrt(mean / n);
    CHECK(std::abs(m - mean) < tol);
    CHECK(std::abs(v - mean) < 10.0 * tol * std::sqrt(mean + 1.0));
  }
}
