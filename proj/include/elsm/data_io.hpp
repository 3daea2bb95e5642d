#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "elsm/encoder.hpp"
#include "elsm/evaluation.hpp"
#include "elsm/model.hpp"
#include "elsm/objective.hpp"

namespace elsm {

struct EdgeRecord {
  double timestamp = 0.0;
  std::size_t u = 0;  // dense 0-based index after remapping
  std::size_t v = 0;
  double weight = 1.0;  // non-negative integer
};

struct TemporalEdgeList {
  std::vector<EdgeRecord> records;
  std::vector<std::string> node_ids;  // index -> original id
  std::size_t dropped_self_loops = 0;
};

// Whitespace- or comma-delimited lines `t u v [w]`; `#` starts a comment.
// Node ids may be arbitrary tokens and are remapped to dense 0-based indices
// in first-seen order. Malformed lines and negative weights raise errors
// naming the line number; self-loops are dropped and counted.
TemporalEdgeList load_edge_list(const std::string& path);

// Buckets events into `count` windows of width `window` starting at the
// earliest timestamp; events beyond the last window are ignored. Weights on
// a pair accumulate symmetrically; binarize turns any activity into 1.
DynamicNetwork aggregate_windows(const TemporalEdgeList& edges, double window,
                                 std::size_t count, bool binarize);

enum class TopNodeCriterion { kTotalWeight, kUniqueNeighbors };

// Keeps the k highest-ranked nodes (ties favor the lower original index),
// preserving original relative order.
DynamicNetwork filter_top_nodes(const DynamicNetwork& network, std::size_t k,
                                TopNodeCriterion criterion);

// Drops snapshots with fewer than min_nonzero nonzero entries (full matrix).
DynamicNetwork filter_sparse_snapshots(const DynamicNetwork& network,
                                       std::size_t min_nonzero);

// Text format: header `n T weighted`, then `t i j w` for each nonzero
// strict-lower-triangle entry.
void save_network(const std::string& path, const DynamicNetwork& network);
DynamicNetwork load_network(const std::string& path);

void save_state(const std::string& path, const VariationalState& state);
VariationalState load_state(const std::string& path);

void save_trajectory(const std::string& path, const LatentTrajectory& traj);

// Symmetric zero-diagonal probability matrix as JSON.
void save_probability_matrix(const std::string& path, const Tensor& prob);
Tensor load_probability_matrix(const std::string& path);

void write_training_log_csv(const std::string& path,
                            const std::vector<std::pair<std::size_t,
                                                        ElboReport>>& log);

void write_community_csv(const std::string& path,
                         const CommunityResult& result);
void write_community_json(const std::string& path,
                          const CommunityResult& result);

void write_linkpred_csv(const std::string& path,
                        const std::vector<LinkPredRow>& rows);
void write_linkpred_json(const std::string& path,
                         const std::vector<LinkPredRow>& rows);

// Shortest-round-trip decimal form used by every writer.
std::string format_double(double v);

}  // namespace elsm
