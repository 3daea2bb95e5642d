#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "elsm/data_io.hpp"
#include "elsm/evaluation.hpp"
#include "elsm/generator.hpp"
#include "elsm/trainer.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw UsageError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

elsm::HyperParams hyperparams_from_json(const json& j) {
  elsm::HyperParams p;
  try {
    p.n = j.at("n").get<std::size_t>();
    p.T = j.at("T").get<std::size_t>();
    p.K = j.at("K").get<std::size_t>();
    p.d = j.value("d", std::size_t{2});
    if (j.contains("pi") && j["pi"].is_array()) {
      p.pi = j["pi"].get<std::vector<double>>();
    } else {
      p.pi.assign(p.K, 1.0 / static_cast<double>(p.K));
    }
    if (j.contains("m"))
      p.m_prior = j["m"].get<std::vector<double>>();
    else
      p.m_prior.assign(p.d, 0.0);
    p.s = j.value("s", 1.0);
    p.s1 = j.value("s1", 0.1);
    p.s2 = j.value("s2", 1.0);
    p.s3 = j.value("s3", 1.0);
    p.s4 = j.value("s4", 1.0);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad generator config: ") + e.what());
  }
  try {
    p.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("invalid generator config: ") + e.what());
  }
  return p;
}

elsm::GeneratorOptions generator_options_from_json(const json& j) {
  elsm::GeneratorOptions opts;
  opts.weighted = j.value("weighted", false);
  if (j.contains("emission")) {
    opts.emission.w_rho = j["emission"].value("w_rho", 1.0);
    opts.emission.b_rho = j["emission"].value("b_rho", 0.0);
  }
  if (j.contains("explicit_centers")) {
    const json& rows = j["explicit_centers"];
    elsm::Tensor centers(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t k = 0; k < rows[i].size(); ++k)
        centers(i, k) = rows[i][k].get<double>();
    opts.explicit_centers = std::move(centers);
  }
  return opts;
}

void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                    const json& resolved, double wall_ms) {
  json m;
  m["subcommand"] = subcommand;
  m["tool_version"] = kToolVersion;
  m["resolved"] = resolved;
  m["wall_clock_ms"] = wall_ms;
  std::ofstream os(out_dir / "manifest.json");
  os << m.dump(2) << "\n";
}

struct Timer {
  std::chrono::steady_clock::time_point start =
      std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output dir: " + out);
}

int run_generate(const std::string& config_path, std::uint64_t seed,
                 const std::string& out) {
  Timer timer;
  json cfg = read_json_file(config_path);
  elsm::HyperParams params = hyperparams_from_json(cfg);
  elsm::GeneratorOptions opts = generator_options_from_json(cfg);
  ensure_out_dir(out);

  elsm::GeneratorOutput gen = elsm::generate_network(params, seed, opts);
  fs::path dir(out);
  elsm::save_network((dir / "network.txt").string(), gen.network);
  elsm::save_trajectory((dir / "truth.json").string(), gen.trajectory);

  json resolved = cfg;
  resolved["seed"] = seed;
  resolved["inputs"] = {{"config", config_path}};
  resolved["outputs"] = {(dir / "network.txt").string(),
                         (dir / "truth.json").string()};
  write_manifest(dir, "generate", resolved, timer.ms());
  std::cout << "wrote " << (dir / "network.txt").string() << " (n=" << params.n
            << ", T=" << params.T << ")\n";
  return 0;
}

elsm::TrainConfig load_train_config(const std::string& config_path,
                                    const std::string& variant_flag,
                                    std::optional<std::uint64_t> seed_flag) {
  json cfg = read_json_file(config_path);
  elsm::TrainConfig config;
  try {
    config = elsm::train_config_from_json_string(cfg.dump());
  } catch (const std::exception& e) {
    throw UsageError(std::string("bad train config: ") + e.what());
  }
  if (!variant_flag.empty()) {
    if (variant_flag == "ielsm")
      config.variant = elsm::ModelVariant::kIelsm;
    else if (variant_flag == "elsm")
      config.variant = elsm::ModelVariant::kElsm;
    else
      throw UsageError("unknown variant: " + variant_flag);
  }
  if (seed_flag) config.seed = *seed_flag;
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw UsageError(std::string("invalid train config: ") + e.what());
  }
  return config;
}

int run_train(const std::string& data_path, const std::string& config_path,
              const std::string& variant_flag,
              std::optional<std::uint64_t> seed_flag, const std::string& out,
              const std::string& resume_path) {
  Timer timer;
  elsm::TrainConfig config =
      load_train_config(config_path, variant_flag, seed_flag);
  elsm::DynamicNetwork network = elsm::load_network(data_path);
  ensure_out_dir(out);
  fs::path dir(out);

  elsm::TrainResult result;
  if (!resume_path.empty()) {
    elsm::TrainerCheckpoint ckpt = elsm::checkpoint_load(resume_path);
    result = elsm::resume_training(network, std::move(ckpt), config.epochs);
  } else {
    result = elsm::train(network, config);
  }

  elsm::checkpoint_save((dir / "checkpoint.bin").string(), result.checkpoint);
  elsm::save_state((dir / "embeddings.json").string(), result.state);
  elsm::write_training_log_csv((dir / "training_log.csv").string(),
                               result.log);

  json resolved = json::parse(elsm::train_config_to_json(config));
  resolved["inputs"] = {{"data", data_path}, {"config", config_path}};
  if (!resume_path.empty()) resolved["resume"] = resume_path;
  resolved["outputs"] = {(dir / "checkpoint.bin").string(),
                         (dir / "embeddings.json").string(),
                         (dir / "training_log.csv").string()};
  write_manifest(dir, "train", resolved, timer.ms());
  std::cout << "final elbo " << result.log.back().second.elbo << " after "
            << result.checkpoint.epoch << " epochs\n";
  return 0;
}

int run_cluster(const std::string& embeddings_path,
                const std::string& graph_path, std::size_t k_min,
                std::size_t k_max, std::uint64_t seed,
                const std::string& out) {
  Timer timer;
  if (k_min < 1 || k_min > k_max) throw UsageError("bad k range");
  elsm::VariationalState state = elsm::load_state(embeddings_path);
  elsm::DynamicNetwork network = elsm::load_network(graph_path);
  if (state.nu.size() != network.T())
    throw UsageError("embeddings and graph disagree on snapshot count");
  ensure_out_dir(out);
  fs::path dir(out);

  elsm::CommunityResult result =
      elsm::community_pipeline(state.nu, network, k_min, k_max, seed);
  elsm::write_community_csv((dir / "communities.csv").string(), result);
  elsm::write_community_json((dir / "communities.json").string(), result);

  json resolved = {{"embeddings", embeddings_path},
                   {"graph", graph_path},
                   {"k_min", k_min},
                   {"k_max", k_max},
                   {"seed", seed},
                   {"outputs",
                    {(dir / "communities.csv").string(),
                     (dir / "communities.json").string()}}};
  write_manifest(dir, "cluster", resolved, timer.ms());
  std::cout << "avg modularity " << result.avg_modularity << ", avg nmi "
            << result.avg_nmi << "\n";
  return 0;
}

int run_linkpred(const std::string& data_path, const std::string& config_path,
                 const std::string& variant_flag,
                 const std::string& baselines, std::size_t first_target,
                 std::size_t last_target, const std::string& out) {
  Timer timer;
  bool train_model = variant_flag != "none";
  bool run_bas = false;
  if (baselines == "bas")
    run_bas = true;
  else if (!baselines.empty())
    throw UsageError("unknown baseline: " + baselines);
  if (!train_model && !run_bas)
    throw UsageError("nothing to evaluate: variant none and no baselines");

  elsm::TrainConfig config = load_train_config(
      config_path, train_model ? variant_flag : std::string(), std::nullopt);
  elsm::DynamicNetwork network = elsm::load_network(data_path);
  if (network.T() < 2) throw UsageError("link prediction needs T >= 2");

  if (last_target == 0 || last_target >= network.T())
    last_target = network.T() - 1;
  if (first_target == 0)
    first_target = last_target >= 2 ? last_target - 2 : 1;
  if (first_target < 1) first_target = 1;
  if (first_target > last_target)
    throw UsageError("bad target range");
  ensure_out_dir(out);
  fs::path dir(out);

  std::vector<elsm::LinkPredRow> rows = elsm::rolling_link_prediction(
      network, config, train_model, run_bas, first_target, last_target);
  elsm::write_linkpred_csv((dir / "linkpred.csv").string(), rows);
  elsm::write_linkpred_json((dir / "linkpred.json").string(), rows);

  json resolved = json::parse(elsm::train_config_to_json(config));
  resolved["inputs"] = {{"data", data_path}, {"config", config_path}};
  resolved["protocol"] = {{"first_target", first_target},
                          {"last_target", last_target},
                          {"train_model", train_model},
                          {"baselines", baselines}};
  resolved["outputs"] = {(dir / "linkpred.csv").string(),
                         (dir / "linkpred.json").string()};
  write_manifest(dir, "linkpred", resolved, timer.ms());
  std::cout << "wrote " << (dir / "linkpred.csv").string() << "\n";
  return 0;
}

int run_eval_metrics(const std::string& pred_path, const std::string& truth_path,
                     long long t_index, const std::string& out_file) {
  elsm::Tensor pred = elsm::load_probability_matrix(pred_path);
  elsm::DynamicNetwork truth_net = elsm::load_network(truth_path);
  std::size_t t = t_index < 0 ? truth_net.T() - 1
                              : static_cast<std::size_t>(t_index);
  if (t >= truth_net.T()) throw UsageError("snapshot index out of range");
  const elsm::Tensor& truth = truth_net.snapshots[t];
  if (!pred.same_shape(truth))
    throw UsageError("prediction and truth shapes differ");
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    if (pred(i, i) != 0.0) throw UsageError("prediction diagonal must be 0");
    for (std::size_t j = 0; j < i; ++j) {
      if (pred(i, j) != pred(j, i))
        throw UsageError("prediction matrix must be symmetric");
      if (pred(i, j) < 0.0 || pred(i, j) > 1.0)
        throw UsageError("prediction entries must be probabilities");
    }
  }

  std::vector<double> scores;
  std::vector<int> labels;
  elsm::lower_triangle_pairs(pred, truth, scores, labels);
  json j;
  j["auc"] = elsm::auc_score(scores, labels);
  auto [f1, thr] = elsm::f1_max(scores, labels);
  j["f1"] = f1;
  j["threshold"] = thr;
  std::string text = j.dump(2) + "\n";
  if (!out_file.empty()) {
    std::ofstream os(out_file);
    os << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolving latent space model toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string config_path, data_path, out_dir, variant, resume_path;
  std::string embeddings_path, graph_path, pred_path, truth_path, baselines;
  std::string metrics_out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t k_min = 2, k_max = 10;
  std::size_t first_target = 0, last_target = 0;
  long long t_index = -1;

  auto* gen = app.add_subcommand("generate", "Sample a synthetic network");
  gen->add_option("--config", config_path, "Generator config JSON")->required();
  gen->add_option("--seed", seed, "RNG seed")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train an inference network");
  tr->add_option("--data", data_path, "Network snapshot file")->required();
  tr->add_option("--variant", variant, "ielsm or elsm")
      ->check(CLI::IsMember({"ielsm", "elsm"}));
  tr->add_option("--config", config_path, "Train config JSON")->required();
  tr->add_option("--seed", seed, "Seed override")->each([&seed_set](const std::string&) {
    seed_set = true;
  });
  tr->add_option("--resume", resume_path, "Checkpoint to resume");
  tr->add_option("--out", out_dir, "Output directory")->required();

  auto* cl = app.add_subcommand("cluster", "Community detection on embeddings");
  cl->add_option("--embeddings", embeddings_path, "Embeddings JSON")->required();
  cl->add_option("--graph", graph_path, "Observed network file")->required();
  cl->add_option("--k-min", k_min, "Smallest k");
  cl->add_option("--k-max", k_max, "Largest k");
  cl->add_option("--seed", seed, "Clustering seed");
  cl->add_option("--out", out_dir, "Output directory")->required();

  auto* lp = app.add_subcommand("linkpred", "Rolling link prediction");
  lp->add_option("--data", data_path, "Network snapshot file")->required();
  lp->add_option("--config", config_path, "Train config JSON")->required();
  lp->add_option("--variant", variant, "ielsm, elsm or none")
      ->check(CLI::IsMember({"ielsm", "elsm", "none"}));
  lp->add_option("--baselines", baselines, "Comma list; supported: bas");
  lp->add_option("--first-target", first_target, "First predicted snapshot");
  lp->add_option("--last-target", last_target, "Last predicted snapshot");
  lp->add_option("--out", out_dir, "Output directory")->required();

  auto* ev = app.add_subcommand("eval-metrics", "Score a prediction matrix");
  ev->add_option("--pred", pred_path, "Prediction JSON")->required();
  ev->add_option("--truth", truth_path, "Truth network file")->required();
  ev->add_option("--t", t_index, "Snapshot index (default: last)");
  ev->add_option("--out", metrics_out, "Optional metrics JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help/--version
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_generate(config_path, seed, out_dir);
    if (tr->parsed())
      return run_train(data_path, config_path, variant,
                       seed_set ? std::optional<std::uint64_t>(seed)
                                : std::nullopt,
                       out_dir, resume_path);
    if (cl->parsed())
      return run_cluster(embeddings_path, graph_path, k_min, k_max, seed,
                         out_dir);
    if (lp->parsed())
      return run_linkpred(data_path, config_path,
                          variant.empty() ? "ielsm" : variant, baselines,
                          first_target, last_target, out_dir);
    if (ev->parsed())
      return run_eval_metrics(pred_path, truth_path, t_index, metrics_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
