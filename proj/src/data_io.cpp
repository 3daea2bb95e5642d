#include "elsm/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace elsm {

namespace {

using nlohmann::json;

[[noreturn]] void io_error(const std::string& msg) {
  throw std::runtime_error(msg);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::string cleaned = line;
  std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
  std::istringstream is(cleaned);
  std::vector<std::string> fields;
  std::string f;
  while (is >> f) fields.push_back(f);
  return fields;
}

json tensor_to_json(const Tensor& t) {
  json rows = json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor tensor_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty())
    io_error("expected a non-empty array of rows");
  std::size_t r = rows.size();
  std::size_t c = rows[0].size();
  Tensor t(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows[i].size() != c) io_error("ragged matrix in JSON");
    for (std::size_t j = 0; j < c; ++j) t(i, j) = rows[i][j].get<double>();
  }
  return t;
}

json state_tensor_list(const std::vector<Tensor>& list) {
  json arr = json::array();
  for (const Tensor& t : list) arr.push_back(tensor_to_json(t));
  return arr;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) io_error("cannot open for writing: " + path);
  os << content;
  if (!os) io_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_error("cannot open: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

TemporalEdgeList load_edge_list(const std::string& path) {
  std::ifstream is(path);
  if (!is) io_error("cannot open edge list: " + path);
  TemporalEdgeList out;
  std::map<std::string, std::size_t> id_map;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() < 3 || fields.size() > 4)
      io_error("edge list line " + std::to_string(line_no) +
               ": expected `t u v [w]`, got " +
               std::to_string(fields.size()) + " fields");
    EdgeRecord rec;
    try {
      std::size_t used = 0;
      rec.timestamp = std::stod(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      io_error("edge list line " + std::to_string(line_no) +
               ": bad timestamp `" + fields[0] + "`");
    }
    auto intern = [&id_map, &out](const std::string& id) {
      auto [it, inserted] = id_map.try_emplace(id, id_map.size());
      if (inserted) out.node_ids.push_back(id);
      return it->second;
    };
    rec.u = intern(fields[1]);
    rec.v = intern(fields[2]);
    if (fields.size() == 4) {
      try {
        std::size_t used = 0;
        rec.weight = std::stod(fields[3], &used);
        if (used != fields[3].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        io_error("edge list line " + std::to_string(line_no) +
                 ": bad weight `" + fields[3] + "`");
      }
      if (rec.weight < 0.0)
        io_error("edge list line " + std::to_string(line_no) +
                 ": negative weight");
      if (rec.weight != std::floor(rec.weight))
        io_error("edge list line " + std::to_string(line_no) +
                 ": non-integer weight");
    }
    if (rec.u == rec.v) {
      ++out.dropped_self_loops;
      continue;
    }
    out.records.push_back(rec);
  }
  return out;
}

DynamicNetwork aggregate_windows(const TemporalEdgeList& edges, double window,
                                 std::size_t count, bool binarize) {
  if (!(window > 0.0))
    throw std::invalid_argument("aggregate_windows: window must be > 0");
  if (count == 0)
    throw std::invalid_argument("aggregate_windows: count must be > 0");
  std::size_t n = edges.node_ids.size();
  double t_min = 0.0;
  if (!edges.records.empty()) {
    t_min = edges.records[0].timestamp;
    for (const EdgeRecord& r : edges.records)
      t_min = std::min(t_min, r.timestamp);
  }
  DynamicNetwork net;
  net.weighted = !binarize;
  for (std::size_t t = 0; t < count; ++t) net.snapshots.emplace_back(n, n);
  for (const EdgeRecord& r : edges.records) {
    double idx = std::floor((r.timestamp - t_min) / window);
    if (idx < 0.0 || idx >= static_cast<double>(count)) continue;
    Tensor& a = net.snapshots[static_cast<std::size_t>(idx)];
    a(r.u, r.v) += r.weight;
    a(r.v, r.u) += r.weight;
  }
  if (binarize)
    for (Tensor& a : net.snapshots)
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = a[i] > 0.0 ? 1.0 : 0.0;
  return net;
}

DynamicNetwork filter_top_nodes(const DynamicNetwork& network, std::size_t k,
                                TopNodeCriterion criterion) {
  std::size_t n = network.n();
  if (k > n) throw std::invalid_argument("filter_top_nodes: k > n");
  std::vector<double> score(n, 0.0);
  if (criterion == TopNodeCriterion::kTotalWeight) {
    for (const Tensor& a : network.snapshots)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) score[i] += a(i, j);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        for (const Tensor& a : network.snapshots) {
          if (a(i, j) > 0.0) {
            score[i] += 1.0;
            break;
          }
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&score](std::size_t a, std::size_t b) {
                     return score[a] > score[b];
                   });
  std::vector<std::size_t> keep(order.begin(),
                                order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(keep.begin(), keep.end());

  DynamicNetwork out;
  out.weighted = network.weighted;
  for (const Tensor& a : network.snapshots) {
    Tensor b(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) b(i, j) = a(keep[i], keep[j]);
    out.snapshots.push_back(std::move(b));
  }
  return out;
}

DynamicNetwork filter_sparse_snapshots(const DynamicNetwork& network,
                                       std::size_t min_nonzero) {
  DynamicNetwork out;
  out.weighted = network.weighted;
  for (const Tensor& a : network.snapshots) {
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] != 0.0) ++nonzero;
    if (nonzero >= min_nonzero) out.snapshots.push_back(a);
  }
  return out;
}

void save_network(const std::string& path, const DynamicNetwork& network) {
  network.validate();
  std::ostringstream os;
  os << network.n() << ' ' << network.T() << ' ' << (network.weighted ? 1 : 0)
     << '\n';
  for (std::size_t t = 0; t < network.T(); ++t) {
    const Tensor& a = network.snapshots[t];
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (a(i, j) != 0.0)
          os << t << ' ' << i << ' ' << j << ' '
             << static_cast<long long>(a(i, j)) << '\n';
  }
  write_text_file(path, os.str());
}

DynamicNetwork load_network(const std::string& path) {
  std::ifstream is(path);
  if (!is) io_error("cannot open network file: " + path);
  std::size_t n = 0, T = 0;
  int weighted_flag = -1;
  std::string line;
  if (!std::getline(is, line)) io_error("network file empty: " + path);
  {
    std::istringstream hs(line);
    if (!(hs >> n >> T >> weighted_flag) || (weighted_flag != 0 && weighted_flag != 1))
      io_error("network file header must be `n T weighted`: " + path);
  }
  DynamicNetwork net;
  net.weighted = weighted_flag == 1;
  for (std::size_t t = 0; t < T; ++t) net.snapshots.emplace_back(n, n);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    std::vector<std::string> fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != 4)
      io_error("network file line " + std::to_string(line_no) +
               ": expected `t i j w`");
    std::size_t t, i, j;
    double w;
    try {
      t = std::stoul(fields[0]);
      i = std::stoul(fields[1]);
      j = std::stoul(fields[2]);
      w = std::stod(fields[3]);
    } catch (const std::exception&) {
      io_error("network file line " + std::to_string(line_no) +
               ": bad numeric field");
    }
    if (t >= T || i >= n || j >= n)
      io_error("network file line " + std::to_string(line_no) +
               ": index out of range for header");
    if (i <= j)
      io_error("network file line " + std::to_string(line_no) +
               ": entries must be strict lower triangle (i > j)");
    if (w <= 0.0 || w != std::floor(w))
      io_error("network file line " + std::to_string(line_no) +
               ": weight must be a positive integer");
    if (!net.weighted && w != 1.0)
      io_error("network file line " + std::to_string(line_no) +
               ": binary network with weight != 1");
    net.snapshots[t](i, j) = w;
    net.snapshots[t](j, i) = w;
  }
  net.validate();
  return net;
}

void save_state(const std::string& path, const VariationalState& state) {
  json j;
  std::size_t T = state.nu.size();
  j["T"] = T;
  j["n"] = T > 0 ? state.nu[0].rows() : 0;
  j["d"] = T > 0 ? state.nu[0].cols() : 0;
  j["variant"] = state.is_elsm ? "elsm" : "ielsm";
  j["nu"] = state_tensor_list(state.nu);
  j["log_var"] = state_tensor_list(state.log_var);
  if (state.is_elsm) {
    j["c_hat"] = tensor_to_json(state.c_hat);
    if (!state.h_hat.empty()) j["h_hat"] = tensor_to_json(state.h_hat);
    j["alpha_mean"] = state_tensor_list(state.alpha_mean);
    j["alpha_log_var"] = state_tensor_list(state.alpha_log_var);
    if (!state.mu_mean.empty()) {
      j["mu_mean"] = tensor_to_json(state.mu_mean);
      j["mu_log_var"] = tensor_to_json(state.mu_log_var);
    }
  }
  write_text_file(path, j.dump(2) + "\n");
}

VariationalState load_state(const std::string& path) {
  json j = json::parse(read_text_file(path));
  VariationalState s;
  s.is_elsm = j.value("variant", "ielsm") == std::string("elsm");
  for (const json& m : j.at("nu")) s.nu.push_back(tensor_from_json(m));
  for (const json& m : j.at("log_var"))
    s.log_var.push_back(tensor_from_json(m));
  if (s.is_elsm) {
    if (j.contains("c_hat")) s.c_hat = tensor_from_json(j["c_hat"]);
    if (j.contains("h_hat")) s.h_hat = tensor_from_json(j["h_hat"]);
    if (j.contains("alpha_mean"))
      for (const json& m : j["alpha_mean"])
        s.alpha_mean.push_back(tensor_from_json(m));
    if (j.contains("alpha_log_var"))
      for (const json& m : j["alpha_log_var"])
        s.alpha_log_var.push_back(tensor_from_json(m));
    if (j.contains("mu_mean")) s.mu_mean = tensor_from_json(j["mu_mean"]);
    if (j.contains("mu_log_var"))
      s.mu_log_var = tensor_from_json(j["mu_log_var"]);
  }
  return s;
}

void save_trajectory(const std::string& path, const LatentTrajectory& traj) {
  json j;
  j["Z"] = state_tensor_list(traj.Z);
  if (!traj.c.empty()) j["c"] = traj.c;
  if (!traj.h.empty()) j["h"] = tensor_to_json(traj.h);
  if (!traj.mu.empty()) j["mu"] = tensor_to_json(traj.mu);
  if (!traj.alpha.empty()) j["alpha"] = tensor_to_json(traj.alpha);
  write_text_file(path, j.dump(2) + "\n");
}

void save_probability_matrix(const std::string& path, const Tensor& prob) {
  json j;
  j["n"] = prob.rows();
  j["probabilities"] = tensor_to_json(prob);
  write_text_file(path, j.dump(2) + "\n");
}

Tensor load_probability_matrix(const std::string& path) {
  json j = json::parse(read_text_file(path));
  Tensor t = tensor_from_json(j.at("probabilities"));
  if (j.contains("n") && j["n"].get<std::size_t>() != t.rows())
    io_error("probability matrix: n field does not match matrix");
  if (t.rows() != t.cols())
    io_error("probability matrix must be square");
  return t;
}

void write_training_log_csv(
    const std::string& path,
    const std::vector<std::pair<std::size_t, ElboReport>>& log) {
  std::ostringstream os;
  os << "epoch,elbo,joint,entropy,edge,transition,prior,discrete\n";
  for (const auto& [epoch, r] : log) {
    os << epoch << ',' << format_double(r.elbo) << ',' << format_double(r.joint)
       << ',' << format_double(r.entropy) << ',' << format_double(r.edge)
       << ',' << format_double(r.transition) << ',' << format_double(r.prior)
       << ',' << format_double(r.discrete) << '\n';
  }
  write_text_file(path, os.str());
}

void write_community_csv(const std::string& path,
                         const CommunityResult& result) {
  std::ostringstream os;
  os << "t,k,modularity,nmi_with_next\n";
  for (std::size_t t = 0; t < result.labels.size(); ++t) {
    os << t << ',' << result.k_per_t[t] << ','
       << format_double(result.modularity_per_t[t]) << ',';
    if (t < result.successive_nmi.size())
      os << format_double(result.successive_nmi[t]);
    os << '\n';
  }
  os << "average," << ',' << format_double(result.avg_modularity) << ','
     << format_double(result.avg_nmi) << '\n';
  write_text_file(path, os.str());
}

void write_community_json(const std::string& path,
                          const CommunityResult& result) {
  json j;
  j["labels"] = result.labels;
  j["k_per_t"] = result.k_per_t;
  j["modularity_per_t"] = result.modularity_per_t;
  j["successive_nmi"] = result.successive_nmi;
  j["avg_modularity"] = result.avg_modularity;
  j["avg_nmi"] = result.avg_nmi;
  write_text_file(path, j.dump(2) + "\n");
}

void write_linkpred_csv(const std::string& path,
                        const std::vector<LinkPredRow>& rows) {
  std::ostringstream os;
  os << "target,method,auc,f1,threshold\n";
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const LinkPredRow& r : rows) {
    os << r.target << ',' << r.method << ',' << format_double(r.auc) << ','
       << format_double(r.f1) << ',' << format_double(r.threshold) << '\n';
    sums[r.method].first += r.auc;
    sums[r.method].second += r.f1;
    counts[r.method]++;
  }
  for (const auto& [method, sum] : sums) {
    double c = static_cast<double>(counts[method]);
    os << "average," << method << ',' << format_double(sum.first / c) << ','
       << format_double(sum.second / c) << ",\n";
  }
  write_text_file(path, os.str());
}

void write_linkpred_json(const std::string& path,
                         const std::vector<LinkPredRow>& rows) {
  json arr = json::array();
  std::map<std::string, std::pair<double, double>> sums;
  std::map<std::string, std::size_t> counts;
  for (const LinkPredRow& r : rows) {
    arr.push_back({{"target", r.target},
                   {"method", r.method},
                   {"auc", r.auc},
                   {"f1", r.f1},
                   {"threshold", r.threshold}});
    sums[r.method].first += r.auc;
    sums[r.method].second += r.f1;
    counts[r.method]++;
  }
  json averages = json::object();
  for (const auto& [method, sum] : sums) {
    double c = static_cast<double>(counts[method]);
    averages[method] = {{"auc", sum.first / c}, {"f1", sum.second / c}};
  }
  json j;
  j["rows"] = std::move(arr);
  j["averages"] = std::move(averages);
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace elsm
