#include "elsm/evaluation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "elsm/rng.hpp"

namespace elsm {

namespace {

double sq_dist_rows(const Tensor& a, std::size_t i, const Tensor& b,
                    std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.cols(); ++k) {
    double diff = a(i, k) - b(j, k);
    s += diff * diff;
  }
  return s;
}

double wcss(const Tensor& points, const std::vector<int>& labels,
            const Tensor& centers) {
  double total = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i)
    total += sq_dist_rows(points, i, centers,
                          static_cast<std::size_t>(labels[i]));
  return total;
}

struct KmeansRun {
  std::vector<int> labels;
  double wcss = std::numeric_limits<double>::infinity();
};

KmeansRun kmeans_once(const Tensor& points, std::size_t k,
                      rng::Stream& stream) {
  std::size_t n = points.rows(), d = points.cols();
  Tensor centers(k, d);

  // k-means++ seeding.
  std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
  std::size_t first = static_cast<std::size_t>(stream.uniform() * n);
  if (first >= n) first = n - 1;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t pick = 0;
    if (c == 0) {
      pick = first;
    } else {
      double total = std::accumulate(min_sq.begin(), min_sq.end(), 0.0);
      if (total <= 0.0) {
        pick = static_cast<std::size_t>(stream.uniform() * n);
        if (pick >= n) pick = n - 1;
      } else {
        double u = stream.uniform() * total;
        double acc = 0.0;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += min_sq[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
      }
    }
    for (std::size_t j = 0; j < d; ++j) centers(c, j) = points(pick, j);
    for (std::size_t i = 0; i < n; ++i)
      min_sq[i] = std::min(min_sq[i], sq_dist_rows(points, i, centers, c));
  }

  std::vector<int> labels(n, 0);
  std::vector<std::size_t> counts(k, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_sq = sq_dist_rows(points, i, centers, 0);
      for (std::size_t c = 1; c < k; ++c) {
        double sq = sq_dist_rows(points, i, centers, c);
        if (sq < best_sq) {
          best_sq = sq;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::fill(counts.begin(), counts.end(), 0);
    Tensor next(k, d);
    for (std::size_t i = 0; i < n; ++i) {
      counts[static_cast<std::size_t>(labels[i])]++;
      for (std::size_t j = 0; j < d; ++j)
        next(static_cast<std::size_t>(labels[i]), j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Reseed an empty cluster to the point farthest from its center.
        std::size_t far = 0;
        double far_sq = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double sq = sq_dist_rows(points, i, centers,
                                   static_cast<std::size_t>(labels[i]));
          if (sq > far_sq) {
            far_sq = sq;
            far = i;
          }
        }
        labels[far] = static_cast<int>(c);
        for (std::size_t j = 0; j < d; ++j) next(c, j) = points(far, j);
        counts[c] = 1;
        // One displaced point: recompute its old cluster mean next round.
      }
      for (std::size_t j = 0; j < d; ++j)
        centers(c, j) = next(c, j) / static_cast<double>(counts[c]);
    }
  }

  KmeansRun run;
  run.labels = std::move(labels);
  run.wcss = wcss(points, run.labels, centers);
  return run;
}

std::vector<std::size_t> dense_labels(const std::vector<int>& labels,
                                      std::size_t& k_out) {
  std::map<int, std::size_t> remap;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], remap.size());
    out[i] = it->second;
  }
  k_out = remap.size();
  return out;
}

}  // namespace

std::vector<int> kmeans(const Tensor& points, std::size_t k,
                        std::uint64_t seed, std::size_t restarts) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.rank() != 2 || k > points.rows())
    throw std::invalid_argument("kmeans: k must be <= point count");
  if (restarts < 1) restarts = 1;
  rng::Stream root(seed, 7701);
  KmeansRun best;
  for (std::size_t r = 0; r < restarts; ++r) {
    rng::Stream stream = root.substream(r);
    KmeansRun run = kmeans_once(points, k, stream);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  return best.labels;
}

Tensor rbf_induced_adjacency(const Tensor& Z, double variance) {
  if (!(variance > 0.0))
    throw std::invalid_argument("rbf_induced_adjacency: variance must be > 0");
  std::size_t n = Z.rows();
  Tensor w(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double v = std::exp(-sq_dist_rows(Z, i, Z, j) / (2.0 * variance));
      w(i, j) = v;
      w(j, i) = v;
    }
  return w;
}

double modularity(const Tensor& A, const std::vector<int>& labels) {
  std::size_t n = A.rows();
  if (labels.size() != n)
    throw std::invalid_argument("modularity: label count mismatch");
  std::size_t k = 0;
  std::vector<std::size_t> lab = dense_labels(labels, k);
  double two_m = 0.0;
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      degree[i] += A(i, j);
      two_m += A(i, j);
    }
  if (two_m == 0.0) return 0.0;

  std::vector<double> e_cc(k, 0.0), a_c(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    a_c[lab[i]] += degree[i] / two_m;
    for (std::size_t j = 0; j < n; ++j)
      if (lab[i] == lab[j]) e_cc[lab[i]] += A(i, j) / two_m;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) q += e_cc[c] - a_c[c] * a_c[c];
  return q;
}

std::pair<std::size_t, std::vector<int>> select_k(const Tensor& Z,
                                                  std::size_t k_min,
                                                  std::size_t k_max,
                                                  std::uint64_t seed,
                                                  std::size_t restarts) {
  std::size_t n = Z.rows();
  k_max = std::min(k_max, n);
  k_min = std::min(k_min, k_max);
  if (k_min < 1) k_min = 1;
  Tensor induced = rbf_induced_adjacency(Z, 1.0);

  std::size_t best_k = k_min;
  std::vector<int> best_labels;
  double best_q = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_min; k <= k_max; ++k) {
    std::vector<int> labels = kmeans(Z, k, seed + k, restarts);
    double q = modularity(induced, labels);
    if (q > best_q + 1e-12) {
      best_q = q;
      best_k = k;
      best_labels = std::move(labels);
    }
  }
  return {best_k, best_labels};
}

double nmi(const std::vector<int>& labels_a, const std::vector<int>& labels_b) {
  if (labels_a.size() != labels_b.size())
    throw std::invalid_argument("nmi: length mismatch");
  std::size_t n = labels_a.size();
  if (n == 0) throw std::invalid_argument("nmi: empty labels");
  std::size_t ka = 0, kb = 0;
  std::vector<std::size_t> a = dense_labels(labels_a, ka);
  std::vector<std::size_t> b = dense_labels(labels_b, kb);

  std::vector<std::vector<double>> joint(ka, std::vector<double>(kb, 0.0));
  std::vector<double> pa(ka, 0.0), pb(kb, 0.0);
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    joint[a[i]][b[i]] += inv_n;
    pa[a[i]] += inv_n;
    pb[b[i]] += inv_n;
  }
  auto ent = [](const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
    return h;
  };
  double ha = ent(pa), hb = ent(pb);
  if (ha + hb == 0.0) return 1.0;  // both partitions constant
  double mi = 0.0;
  for (std::size_t i = 0; i < ka; ++i)
    for (std::size_t j = 0; j < kb; ++j)
      if (joint[i][j] > 0.0)
        mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
  if (mi <= 0.0) return 0.0;
  return mi / (0.5 * (ha + hb));
}

Tensor spectral_embedding(const Tensor& A, std::size_t k) {
  std::size_t n = A.rows();
  if (k > n) throw std::invalid_argument("spectral_embedding: k > n");
  Eigen::MatrixXd lap(n, n);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += A(i, j);
    if (deg <= 0.0) deg = 1e-8;
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = -A(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
      if (i == j) v += 1.0;
      lap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("spectral_embedding: eigensolver failed");

  Tensor u(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      double v = solver.eigenvectors()(static_cast<Eigen::Index>(i),
                                       static_cast<Eigen::Index>(j));
      u(i, j) = v;
      norm_sq += v * v;
    }
    if (norm_sq > 0.0) {
      double inv = 1.0 / std::sqrt(norm_sq);
      for (std::size_t j = 0; j < k; ++j) u(i, j) *= inv;
    }
  }
  return u;
}

std::vector<int> spectral_clustering(const Tensor& A, std::size_t k,
                                     std::uint64_t seed, std::size_t restarts) {
  return kmeans(spectral_embedding(A, k), k, seed, restarts);
}

double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& truth) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("auc: length mismatch");
  std::size_t n = scores.size();
  std::size_t pos = 0;
  for (int t : truth) {
    if (t != 0 && t != 1)
      throw std::invalid_argument("auc: truth must be binary");
    pos += static_cast<std::size_t>(t);
  }
  if (pos == 0 || pos == n)
    throw std::invalid_argument("auc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  // Average ranks over ties.
  std::vector<double> rank(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }
  double rank_sum = 0.0;
  for (std::size_t idx = 0; idx < n; ++idx)
    if (truth[idx] == 1) rank_sum += rank[idx];
  double p = static_cast<double>(pos);
  double q = static_cast<double>(n - pos);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::pair<double, double> f1_max(const std::vector<double>& scores,
                                 const std::vector<int>& truth) {
  if (scores.size() != truth.size())
    throw std::invalid_argument("f1_max: length mismatch");
  std::size_t pos_total = 0;
  for (int t : truth) pos_total += static_cast<std::size_t>(t != 0);
  if (pos_total == 0)
    return {0.0, scores.empty() ? 0.0 : *std::min_element(scores.begin(),
                                                          scores.end())};

  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  double best_f1 = -1.0, best_thr = thresholds.front();
  for (double thr : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t idx = 0; idx < scores.size(); ++idx) {
      if (scores[idx] >= thr) {
        if (truth[idx] != 0)
          ++tp;
        else
          ++fp;
      }
    }
    if (tp + fp == 0) continue;
    double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    double recall = static_cast<double>(tp) / static_cast<double>(pos_total);
    double f1 = (precision + recall) > 0.0
                    ? 2.0 * precision * recall / (precision + recall)
                    : 0.0;
    if (f1 > best_f1 + 1e-15) {
      best_f1 = f1;
      best_thr = thr;
    }
  }
  return {best_f1, best_thr};
}

Tensor bas_predict(const std::vector<Tensor>& history) {
  if (history.empty()) throw std::invalid_argument("bas_predict: no history");
  std::size_t n = history[0].rows();
  Tensor score(n, n);
  for (const Tensor& a : history)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && a(i, j) > 0.0) score(i, j) += 1.0;
  double inv_t = 1.0 / static_cast<double>(history.size());
  for (std::size_t i = 0; i < score.size(); ++i) score[i] *= inv_t;
  return score;
}

Tensor link_predict(const Model& model, const DynamicNetwork& history) {
  if (history.T() == 0) throw std::invalid_argument("link_predict: no history");
  VariationalState state = infer_state(model, history);
  const Tensor& z_last = state.nu.back();
  Tensor z_next = neighbor_mean_all(z_last, history.snapshots.back(),
                                    model.priors.s4);
  std::size_t n = z_next.rows();
  Tensor prob(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      double p = edge_probability_sq(sq_dist_rows(z_next, i, z_next, j),
                                     model.dec);
      prob(i, j) = p;
      prob(j, i) = p;
    }
  return prob;
}

void lower_triangle_pairs(const Tensor& probabilities, const Tensor& truth,
                          std::vector<double>& scores_out,
                          std::vector<int>& truth_out) {
  if (!probabilities.same_shape(truth))
    throw std::invalid_argument("lower_triangle_pairs: shape mismatch");
  scores_out.clear();
  truth_out.clear();
  for (std::size_t i = 0; i < probabilities.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) {
      scores_out.push_back(probabilities(i, j));
      truth_out.push_back(truth(i, j) > 0.0 ? 1 : 0);
    }
}

CommunityResult community_pipeline(const std::vector<Tensor>& embeddings,
                                   const DynamicNetwork& network,
                                   std::size_t k_min, std::size_t k_max,
                                   std::uint64_t seed, std::size_t restarts) {
  if (embeddings.size() != network.T())
    throw std::invalid_argument("community_pipeline: embedding count != T");
  CommunityResult result;
  for (std::size_t t = 0; t < embeddings.size(); ++t) {
    auto [k, labels] = select_k(embeddings[t], k_min, k_max, seed, restarts);
    result.k_per_t.push_back(k);
    result.modularity_per_t.push_back(
        modularity(network.snapshots[t], labels));
    result.labels.push_back(std::move(labels));
  }
  for (std::size_t t = 0; t + 1 < result.labels.size(); ++t)
    result.successive_nmi.push_back(nmi(result.labels[t], result.labels[t + 1]));
  if (!result.modularity_per_t.empty())
    result.avg_modularity =
        std::accumulate(result.modularity_per_t.begin(),
                        result.modularity_per_t.end(), 0.0) /
        static_cast<double>(result.modularity_per_t.size());
  if (!result.successive_nmi.empty())
    result.avg_nmi = std::accumulate(result.successive_nmi.begin(),
                                     result.successive_nmi.end(), 0.0) /
                     static_cast<double>(result.successive_nmi.size());
  return result;
}

CommunityResult spectral_community_pipeline(const DynamicNetwork& network,
                                            std::size_t k_min,
                                            std::size_t k_max,
                                            std::uint64_t seed,
                                            std::size_t restarts) {
  CommunityResult result;
  for (std::size_t t = 0; t < network.T(); ++t) {
    const Tensor& a = network.snapshots[t];
    std::size_t n = a.rows();
    std::size_t hi = std::min(k_max, n);
    std::size_t lo = std::min(k_min, hi);
    if (lo < 1) lo = 1;

    std::size_t best_k = lo;
    std::vector<int> best_labels;
    double best_q = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lo; k <= hi; ++k) {
      Tensor u = spectral_embedding(a, k);
      std::vector<int> labels = kmeans(u, k, seed + k, restarts);
      double q = modularity(rbf_induced_adjacency(u, 1.0), labels);
      if (q > best_q + 1e-12) {
        best_q = q;
        best_k = k;
        best_labels = std::move(labels);
      }
    }
    result.k_per_t.push_back(best_k);
    result.modularity_per_t.push_back(modularity(a, best_labels));
    result.labels.push_back(std::move(best_labels));
  }
  for (std::size_t t = 0; t + 1 < result.labels.size(); ++t)
    result.successive_nmi.push_back(nmi(result.labels[t], result.labels[t + 1]));
  if (!result.modularity_per_t.empty())
    result.avg_modularity =
        std::accumulate(result.modularity_per_t.begin(),
                        result.modularity_per_t.end(), 0.0) /
        static_cast<double>(result.modularity_per_t.size());
  if (!result.successive_nmi.empty())
    result.avg_nmi = std::accumulate(result.successive_nmi.begin(),
                                     result.successive_nmi.end(), 0.0) /
                     static_cast<double>(result.successive_nmi.size());
  return result;
}

std::vector<LinkPredRow> rolling_link_prediction(const DynamicNetwork& network,
                                                 const TrainConfig& config,
                                                 bool train_model,
                                                 bool run_bas,
                                                 std::size_t first_target,
                                                 std::size_t last_target) {
  if (first_target < 1 || last_target >= network.T() ||
      first_target > last_target)
    throw std::invalid_argument("rolling_link_prediction: bad target range");
  std::vector<LinkPredRow> rows;
  for (std::size_t target = first_target; target <= last_target; ++target) {
    DynamicNetwork history;
    history.weighted = network.weighted;
    history.snapshots.assign(network.snapshots.begin(),
                             network.snapshots.begin() +
                                 static_cast<std::ptrdiff_t>(target));
    const Tensor& truth = network.snapshots[target];

    auto score = [&](const Tensor& prob, const std::string& method) {
      std::vector<double> scores;
      std::vector<int> labels;
      lower_triangle_pairs(prob, truth, scores, labels);
      LinkPredRow row;
      row.target = target;
      row.method = method;
      row.auc = auc_score(scores, labels);
      auto [f1, thr] = f1_max(scores, labels);
      row.f1 = f1;
      row.threshold = thr;
      rows.push_back(row);
    };

    if (train_model) {
      TrainResult tr = train(history, config);
      score(link_predict(tr.checkpoint.model, history),
            config.variant == ModelVariant::kIelsm ? "ielsm" : "elsm");
    }
    if (run_bas) score(bas_predict(history.snapshots), "bas");
  }
  return rows;
}

}  // namespace elsm
