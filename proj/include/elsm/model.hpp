#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "elsm/tensor.hpp"

namespace elsm {

// Generative hyperparameters. s is the prior spread of community centers,
// s1 the within-community spread, s2 the edge kernel radius, s3 the split
// kernel radius and s4 the neighbor influence radius.
struct HyperParams {
  std::size_t n = 0;            // node count
  std::size_t T = 0;            // snapshot count
  std::size_t K = 0;            // max initial communities
  std::vector<double> pi;       // length K, sums to 1
  std::vector<double> m_prior;  // length d
  double s = 1.0;
  double s1 = 0.1;
  double s2 = 1.0;
  double s3 = 1.0;
  double s4 = 1.0;
  std::size_t d = 2;  // latent dimension

  // Throws std::invalid_argument when any invariant is violated.
  void validate() const;
};

// Ordered sequence of symmetric zero-diagonal adjacency snapshots over a
// fixed node set. Binary entries unless weighted, then non-negative integers.
struct DynamicNetwork {
  std::vector<Tensor> snapshots;
  bool weighted = false;

  std::size_t n() const { return snapshots.empty() ? 0 : snapshots[0].rows(); }
  std::size_t T() const { return snapshots.size(); }
  void validate() const;
};

// Per-snapshot embeddings plus the discrete latents and centers of the full
// generative model. c uses 1-based community labels; h rows cover t = 2..T.
struct LatentTrajectory {
  std::vector<Tensor> Z;   // T matrices, n x d
  std::vector<int> c;      // length n, entries in [1, K]; empty when unused
  Tensor h;                // (T-1) x n binary; empty when unused
  Tensor mu;               // K x d initial centers; empty when unused
  Tensor alpha;            // (T-1) x d new-community centers; empty when unused
};

// Edge kernel f(x) = 1 - tanh(|x|^2 / s2^2); strictly decreasing in |x|,
// value in (0, 1].
double edge_kernel_f(const std::vector<double>& diff, double s2);
double edge_kernel_f_sq(double sq_dist, double s2);

// Split kernel g, same form as f with radius s3.
double split_kernel_g(const std::vector<double>& diff, double s3);
double split_kernel_g_sq(double sq_dist, double s3);

// Influence kernel l(x) = exp(-|x|^2 / s4^2).
double influence_kernel_l(const std::vector<double>& diff, double s4);
double influence_kernel_l_sq(double sq_dist, double s4);

// Mean position a node drifts toward: a convex combination of its own
// previous embedding (weight 1) and each neighbor j (weight a_ij * l(z_i-z_j)).
std::vector<double> neighbor_mean(const Tensor& Z_prev, const Tensor& A_prev,
                                  std::size_t i, double s4);

// neighbor_mean for every node; rows of the result follow node order.
Tensor neighbor_mean_all(const Tensor& Z_prev, const Tensor& A_prev, double s4);

}  // namespace elsm
