#include "elsm/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace elsm {

namespace {

// Substream ids for the per-entity generator streams.
enum StreamKind : std::uint64_t {
  kCenters = 1,
  kMemberships = 2,
  kInitialEmbeddings = 3,
  kAlpha = 4,
  kSplit = 5,
  kEvolve = 6,
  kAdjacency = 7,
};

rng::Stream stream_for(std::uint64_t seed, StreamKind kind, std::size_t t = 0) {
  return rng::Stream(seed, 0).substream(kind).substream(t);
}

}  // namespace

Tensor sample_initial_centers(const HyperParams& params, rng::Stream& stream,
                              const std::optional<Tensor>& explicit_centers) {
  params.validate();
  if (explicit_centers) {
    const Tensor& mu = *explicit_centers;
    if (mu.rank() != 2 || mu.rows() != params.K || mu.cols() != params.d)
      throw std::invalid_argument("explicit centers must be K x d");
    return mu;
  }
  Tensor mu(params.K, params.d);
  for (std::size_t j = 0; j < params.K; ++j)
    for (std::size_t k = 0; k < params.d; ++k)
      mu(j, k) = stream.normal(params.m_prior[k], params.s);
  return mu;
}

std::vector<int> sample_memberships(const std::vector<double>& pi,
                                    std::size_t n, rng::Stream& stream) {
  std::vector<int> c(n);
  for (std::size_t i = 0; i < n; ++i)
    c[i] = static_cast<int>(stream.categorical(pi)) + 1;
  return c;
}

Tensor sample_initial_embeddings(const Tensor& centers,
                                 const std::vector<int>& c, double s1,
                                 rng::Stream& stream) {
  std::size_t n = c.size(), d = centers.cols();
  Tensor z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    int label = c[i];
    if (label < 1 || static_cast<std::size_t>(label) > centers.rows())
      throw std::invalid_argument("membership label out of range");
    for (std::size_t k = 0; k < d; ++k)
      z(i, k) = stream.normal(centers(static_cast<std::size_t>(label - 1), k), s1);
  }
  return z;
}

Tensor sample_adjacency(const Tensor& Z, double s2, bool weighted,
                        rng::Stream& stream, const WeightedEmission& emission) {
  if (!all_finite(Z)) throw std::invalid_argument("sample_adjacency: non-finite Z");
  std::size_t n = Z.rows(), d = Z.cols();
  Tensor a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = Z(i, k) - Z(j, k);
        sq += diff * diff;
      }
      double v;
      if (weighted) {
        double rho = std::exp(-emission.w_rho * emission.w_rho * sq +
                              emission.b_rho);
        v = static_cast<double>(stream.poisson(rho));
      } else {
        v = stream.bernoulli(edge_kernel_f_sq(sq, s2)) ? 1.0 : 0.0;
      }
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

std::vector<std::uint8_t> sample_split_indicators(
    const Tensor& Z_prev, const std::vector<double>& alpha, double s3,
    rng::Stream& stream) {
  std::size_t n = Z_prev.rows(), d = Z_prev.cols();
  if (alpha.size() != d)
    throw std::invalid_argument("sample_split_indicators: alpha dim mismatch");
  std::vector<std::uint8_t> h(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double diff = Z_prev(i, k) - alpha[k];
      sq += diff * diff;
    }
    h[i] = stream.bernoulli(split_kernel_g_sq(sq, s3)) ? 1 : 0;
  }
  return h;
}

Tensor evolve_embeddings(const Tensor& Z_prev, const Tensor& A_prev,
                         const std::vector<std::uint8_t>& h,
                         const std::vector<double>& alpha, double s1, double s4,
                         rng::Stream& stream) {
  std::size_t n = Z_prev.rows(), d = Z_prev.cols();
  if (h.size() != n || alpha.size() != d)
    throw std::invalid_argument("evolve_embeddings: shape mismatch");
  Tensor mu = neighbor_mean_all(Z_prev, A_prev, s4);
  Tensor z(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      double mean = h[i] ? alpha[k] : mu(i, k);
      z(i, k) = stream.normal(mean, s1);
    }
  return z;
}

GeneratorOutput generate_network(const HyperParams& params, std::uint64_t seed,
                                 const GeneratorOptions& options) {
  params.validate();
  std::size_t n = params.n, T = params.T, d = params.d;

  GeneratorOutput out;
  out.seed = seed;
  out.network.weighted = options.weighted;

  auto centers_stream = stream_for(seed, kCenters);
  Tensor mu = sample_initial_centers(params, centers_stream,
                                     options.explicit_centers);

  auto member_stream = stream_for(seed, kMemberships);
  std::vector<int> c = sample_memberships(params.pi, n, member_stream);

  auto init_stream = stream_for(seed, kInitialEmbeddings);
  Tensor z = sample_initial_embeddings(mu, c, params.s1, init_stream);

  auto adj_stream = stream_for(seed, kAdjacency, 0);
  Tensor a = sample_adjacency(z, params.s2, options.weighted, adj_stream,
                              options.emission);

  out.trajectory.Z.push_back(z);
  out.trajectory.c = std::move(c);
  out.trajectory.mu = std::move(mu);
  out.network.snapshots.push_back(std::move(a));
  if (T > 1) {
    out.trajectory.h = Tensor(T - 1, n);
    out.trajectory.alpha = Tensor(T - 1, d);
  }

  for (std::size_t t = 1; t < T; ++t) {
    auto alpha_stream = stream_for(seed, kAlpha, t);
    std::vector<double> alpha(d);
    for (std::size_t k = 0; k < d; ++k)
      alpha[k] = alpha_stream.normal(params.m_prior[k], params.s);

    const Tensor& z_prev = out.trajectory.Z.back();
    const Tensor& a_prev = out.network.snapshots.back();

    auto split_stream = stream_for(seed, kSplit, t);
    auto h = sample_split_indicators(z_prev, alpha, params.s3, split_stream);

    auto evolve_stream = stream_for(seed, kEvolve, t);
    Tensor z_t = evolve_embeddings(z_prev, a_prev, h, alpha, params.s1,
                                   params.s4, evolve_stream);

    auto adj_t_stream = stream_for(seed, kAdjacency, t);
    Tensor a_t = sample_adjacency(z_t, params.s2, options.weighted,
                                  adj_t_stream, options.emission);

    for (std::size_t k = 0; k < d; ++k) out.trajectory.alpha(t - 1, k) = alpha[k];
    for (std::size_t i = 0; i < n; ++i)
      out.trajectory.h(t - 1, i) = static_cast<double>(h[i]);
    out.trajectory.Z.push_back(std::move(z_t));
    out.network.snapshots.push_back(std::move(a_t));
  }
  return out;
}

}  // namespace elsm
