#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elsm/model.hpp"
#include "elsm/trainer.hpp"

namespace elsm {

struct CommunityResult {
  std::vector<std::vector<int>> labels;  // per snapshot, 0-based clusters
  std::vector<std::size_t> k_per_t;
  std::vector<double> modularity_per_t;  // on the observed graph
  std::vector<double> successive_nmi;    // between t and t+1
  double avg_modularity = 0.0;
  double avg_nmi = 0.0;
};

struct LinkPredResult {
  Tensor probabilities;  // n x n, symmetric, zero diagonal
  double auc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;  // smallest threshold achieving max F1
};

// Lloyd's algorithm with k-means++ seeding, best of `restarts` runs by
// within-cluster sum of squares. Deterministic given seed.
std::vector<int> kmeans(const Tensor& points, std::size_t k,
                        std::uint64_t seed, std::size_t restarts = 10);

// w_ij = exp(-|z_i - z_j|^2 / (2 var)) off-diagonal, zero diagonal.
Tensor rbf_induced_adjacency(const Tensor& Z, double variance);

// Newman modularity with weighted degrees; 0 for an edgeless graph.
double modularity(const Tensor& A, const std::vector<int>& labels);

// Sweeps k over [k_min, k_max] (capped at n) with k-means on Z, scoring each
// k by modularity on the RBF-induced adjacency (variance 1); ties go to the
// smaller k. Returns the chosen k and its labels.
std::pair<std::size_t, std::vector<int>> select_k(const Tensor& Z,
                                                  std::size_t k_min,
                                                  std::size_t k_max,
                                                  std::uint64_t seed,
                                                  std::size_t restarts = 10);

// Mutual information normalized by the arithmetic mean of entropies. Both
// partitions constant => 1. Invariant to label permutation.
double nmi(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

// Row-normalized bottom-k eigenvectors of the symmetric normalized
// Laplacian; isolated nodes get degree regularization 1e-8.
Tensor spectral_embedding(const Tensor& A, std::size_t k);

std::vector<int> spectral_clustering(const Tensor& A, std::size_t k,
                                     std::uint64_t seed,
                                     std::size_t restarts = 10);

// Mann-Whitney AUC with half credit for ties; requires both classes.
double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& truth);

// Maximum F1 over thresholds taken at every distinct score (predicting
// positive when score >= threshold); returns the smallest such threshold.
std::pair<double, double> f1_max(const std::vector<double>& scores,
                                 const std::vector<int>& truth);

// score_ij = fraction of history snapshots where the pair was connected.
Tensor bas_predict(const std::vector<Tensor>& history);

// One-step-ahead edge probabilities: evolves the last embedding point
// estimates through the neighbor-mean update (no splitting, no noise) and
// decodes with the model's decoder.
Tensor link_predict(const Model& model, const DynamicNetwork& history);

// Flattens the strict lower triangle of a prediction/truth snapshot pair
// into score and binary-label vectors.
void lower_triangle_pairs(const Tensor& probabilities, const Tensor& truth,
                          std::vector<double>& scores_out,
                          std::vector<int>& truth_out);

// Per-snapshot select_k + k-means on given embeddings, modularity on the
// observed graph and NMI between successive assignments.
CommunityResult community_pipeline(const std::vector<Tensor>& embeddings,
                                   const DynamicNetwork& network,
                                   std::size_t k_min = 2, std::size_t k_max = 10,
                                   std::uint64_t seed = 0,
                                   std::size_t restarts = 10);

// Spectral baseline: per snapshot and per candidate k, clusters the spectral
// embedding and scores k on the adjacency induced by that embedding.
CommunityResult spectral_community_pipeline(const DynamicNetwork& network,
                                            std::size_t k_min = 2,
                                            std::size_t k_max = 10,
                                            std::uint64_t seed = 0,
                                            std::size_t restarts = 10);

struct LinkPredRow {
  std::size_t target = 0;  // snapshot index being predicted (0-based)
  std::string method;
  double auc = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
};

// Rolling protocol: for each target t in [first_target, last_target], train
// on snapshots 0..t-1 and score predictions for t. Methods: the model
// variant from `config` (when train_model) and the BAS baseline.
std::vector<LinkPredRow> rolling_link_prediction(const DynamicNetwork& network,
                                                 const TrainConfig& config,
                                                 bool train_model,
                                                 bool run_bas,
                                                 std::size_t first_target,
                                                 std::size_t last_target);

}  // namespace elsm
