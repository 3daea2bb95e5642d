#pragma once

#include <cstdint>
#include <optional>

#include "elsm/model.hpp"
#include "elsm/rng.hpp"

namespace elsm {

// Poisson intensity for weighted adjacency emission:
// rho = exp(-w_rho^2 * |z_i - z_j|^2 + b_rho).
struct WeightedEmission {
  double w_rho = 1.0;
  double b_rho = 0.0;
};

struct GeneratorOptions {
  bool weighted = false;
  WeightedEmission emission;
  // When set, used verbatim instead of sampling centers from the prior.
  std::optional<Tensor> explicit_centers;
};

struct GeneratorOutput {
  DynamicNetwork network;
  LatentTrajectory trajectory;
  std::uint64_t seed = 0;
};

// K centers drawn i.i.d. from N(m_prior, s^2 I), or the explicit override.
Tensor sample_initial_centers(const HyperParams& params, rng::Stream& stream,
                              const std::optional<Tensor>& explicit_centers =
                                  std::nullopt);

// n i.i.d. categorical draws from pi; labels are 1-based.
std::vector<int> sample_memberships(const std::vector<double>& pi,
                                    std::size_t n, rng::Stream& stream);

// z_i ~ N(mu_{c_i}, s1^2 I).
Tensor sample_initial_embeddings(const Tensor& centers,
                                 const std::vector<int>& c, double s1,
                                 rng::Stream& stream);

// Symmetric zero-diagonal adjacency: Bernoulli(f(z_i - z_j)) when unweighted,
// Poisson with the configured intensity when weighted.
Tensor sample_adjacency(const Tensor& Z, double s2, bool weighted,
                        rng::Stream& stream,
                        const WeightedEmission& emission = {});

// h_i ~ Bernoulli(g(z_i - alpha)).
std::vector<std::uint8_t> sample_split_indicators(const Tensor& Z_prev,
                                                  const std::vector<double>& alpha,
                                                  double s3,
                                                  rng::Stream& stream);

// z_i ~ N(h_i * alpha + (1 - h_i) * neighbor_mean_i, s1^2 I).
Tensor evolve_embeddings(const Tensor& Z_prev, const Tensor& A_prev,
                         const std::vector<std::uint8_t>& h,
                         const std::vector<double>& alpha, double s1, double s4,
                         rng::Stream& stream);

// Full generative run: initial centers/memberships/embeddings/adjacency,
// then per snapshot a fresh community center, split indicators, evolved
// embeddings and a new adjacency. Deterministic given (params, seed).
GeneratorOutput generate_network(const HyperParams& params, std::uint64_t seed,
                                 const GeneratorOptions& options = {});

}  // namespace elsm
