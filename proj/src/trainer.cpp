#include "elsm/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace elsm {

namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[8] = {'E', 'L', 'S', 'M',
                                      'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

enum TrainerStreams : std::uint64_t {
  kParamInit = 101,
  kNoise = 102,
};

std::string variant_name(ModelVariant v) {
  return v == ModelVariant::kIelsm ? "ielsm" : "elsm";
}

ModelVariant variant_from_name(const std::string& s) {
  if (s == "ielsm") return ModelVariant::kIelsm;
  if (s == "elsm") return ModelVariant::kElsm;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string decoder_name(DecoderKind k) {
  switch (k) {
    case DecoderKind::kBernoulliKernel: return "bernoulli-kernel";
    case DecoderKind::kBernoulliLearned: return "bernoulli-learned";
    case DecoderKind::kPoissonLearned: return "poisson-learned";
  }
  throw std::logic_error("unknown decoder kind");
}

DecoderKind decoder_from_name(const std::string& s) {
  if (s == "bernoulli-kernel") return DecoderKind::kBernoulliKernel;
  if (s == "bernoulli-learned") return DecoderKind::kBernoulliLearned;
  if (s == "poisson-learned") return DecoderKind::kPoissonLearned;
  throw std::invalid_argument("unknown decoder kind: " + s);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
  if (learning_rate < 0.0)
    throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
  if (d == 0 || hidden == 0 || head_hidden == 0)
    throw std::invalid_argument("TrainConfig: zero size");
  if (mc_samples < 1)
    throw std::invalid_argument("TrainConfig: mc_samples must be >= 1");
  if (variant == ModelVariant::kElsm && priors.pi.empty())
    throw std::invalid_argument("TrainConfig: elsm variant requires pi");
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["variant"] = variant_name(c.variant);
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["grad_clip"] = c.grad_clip;
  j["seed"] = c.seed;
  j["d"] = c.d;
  j["hidden"] = c.hidden;
  j["head_hidden"] = c.head_hidden;
  j["reducer_dim"] = c.reducer_dim;
  j["decoder"] = {{"kind", decoder_name(c.decoder.kind)},
                  {"s2", c.decoder.s2},
                  {"w_rho_init", c.decoder.w_rho_init},
                  {"b_rho_init", c.decoder.b_rho_init}};
  j["priors"] = {{"m", c.priors.m},   {"s", c.priors.s},
                 {"s1", c.priors.s1}, {"s3", c.priors.s3},
                 {"s4", c.priors.s4}, {"pi", c.priors.pi}};
  j["mc_samples"] = c.mc_samples;
  j["log_every"] = c.log_every;
  j["frozen_noise"] = c.frozen_noise;
  return j.dump();
}

TrainConfig train_config_from_json_string(const std::string& text) {
  json j = json::parse(text);
  TrainConfig c;
  if (j.contains("variant")) c.variant = variant_from_name(j["variant"]);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.d = j.value("d", c.d);
  c.hidden = j.value("hidden", c.hidden);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.reducer_dim = j.value("reducer_dim", c.reducer_dim);
  if (j.contains("decoder")) {
    const json& dj = j["decoder"];
    if (dj.contains("kind")) c.decoder.kind = decoder_from_name(dj["kind"]);
    c.decoder.s2 = dj.value("s2", c.decoder.s2);
    c.decoder.w_rho_init = dj.value("w_rho_init", c.decoder.w_rho_init);
    c.decoder.b_rho_init = dj.value("b_rho_init", c.decoder.b_rho_init);
  }
  if (j.contains("priors")) {
    const json& pj = j["priors"];
    if (pj.contains("m")) c.priors.m = pj["m"].get<std::vector<double>>();
    c.priors.s = pj.value("s", c.priors.s);
    c.priors.s1 = pj.value("s1", c.priors.s1);
    c.priors.s3 = pj.value("s3", c.priors.s3);
    c.priors.s4 = pj.value("s4", c.priors.s4);
    if (pj.contains("pi")) c.priors.pi = pj["pi"].get<std::vector<double>>();
  }
  c.mc_samples = j.value("mc_samples", c.mc_samples);
  c.log_every = j.value("log_every", c.log_every);
  c.frozen_noise = j.value("frozen_noise", c.frozen_noise);
  return c;
}

std::vector<ParamRef> model_params(Model& model) {
  std::vector<ParamRef> out;
  auto push = [&out](const std::string& name, Tensor& t) {
    out.push_back({name, &t});
  };
  push("enc.fwd.w_x", model.enc.fwd.w_x);
  push("enc.fwd.w_h", model.enc.fwd.w_h);
  push("enc.fwd.b", model.enc.fwd.b);
  push("enc.bwd.w_x", model.enc.bwd.w_x);
  push("enc.bwd.w_h", model.enc.bwd.w_h);
  push("enc.bwd.b", model.enc.bwd.b);
  push("enc.m.w1", model.enc.mean_head.w1);
  push("enc.m.b1", model.enc.mean_head.b1);
  push("enc.m.w2", model.enc.mean_head.w2);
  push("enc.m.b2", model.enc.mean_head.b2);
  push("enc.v.w1", model.enc.var_head.w1);
  push("enc.v.b1", model.enc.var_head.b1);
  push("enc.v.w2", model.enc.var_head.w2);
  push("enc.v.b2", model.enc.var_head.b2);
  if (model.variant == ModelVariant::kElsm) {
    push("elsm.p_w", model.elsm.p_w);
    push("elsm.p_b", model.elsm.p_b);
    push("elsm.alpha_w", model.elsm.alpha_w);
    push("elsm.alpha_b", model.elsm.alpha_b);
    push("elsm.r_w", model.elsm.r_w);
    push("elsm.r_b", model.elsm.r_b);
    push("elsm.mu_w", model.elsm.mu_w);
    push("elsm.mu_b", model.elsm.mu_b);
    push("elsm.h_w", model.elsm.h_w);
    push("elsm.h_b", model.elsm.h_b);
  }
  if (model.dec.has_learnables()) {
    push("dec.w_rho", model.dec.w_rho);
    push("dec.b_rho", model.dec.b_rho);
  }
  return out;
}

Model init_model(const TrainConfig& config, std::size_t n) {
  config.validate();
  Model model;
  model.variant = config.variant;
  model.priors = config.priors;
  if (model.priors.m.empty()) model.priors.m.assign(config.d, 0.0);
  if (model.priors.m.size() != config.d)
    throw std::invalid_argument("init_model: priors.m length != d");

  EncoderSizes sizes;
  sizes.input_dim = n;
  sizes.hidden = config.hidden;
  sizes.head_hidden = config.head_hidden;
  sizes.d = config.d;
  sizes.reducer_dim = config.reducer_dim;
  sizes.K = config.priors.pi.size();

  rng::Stream init_stream = rng::Stream(config.seed, 0).substream(kParamInit);
  model.enc = init_encoder_params(sizes, init_stream);
  if (config.variant == ModelVariant::kElsm)
    model.elsm = init_elsm_head_params(sizes, init_stream);
  model.dec = DecoderParams::make(config.decoder);
  return model;
}

ModelBinding bind_model(ad::Tape& tape, const Model& model) {
  ModelBinding binding;
  binding.enc = bind_encoder(tape, model.enc);
  if (model.variant == ModelVariant::kElsm)
    binding.elsm = bind_elsm_heads(tape, model.elsm);
  binding.dec = bind_decoder(tape, model.dec);

  binding.leaves = {
      binding.enc.fwd.w_x,       binding.enc.fwd.w_h,
      binding.enc.fwd.b,         binding.enc.bwd.w_x,
      binding.enc.bwd.w_h,       binding.enc.bwd.b,
      binding.enc.mean_head.w1,  binding.enc.mean_head.b1,
      binding.enc.mean_head.w2,  binding.enc.mean_head.b2,
      binding.enc.var_head.w1,   binding.enc.var_head.b1,
      binding.enc.var_head.w2,   binding.enc.var_head.b2,
  };
  if (model.variant == ModelVariant::kElsm) {
    for (ad::VarId v :
         {binding.elsm.p_w, binding.elsm.p_b, binding.elsm.alpha_w,
          binding.elsm.alpha_b, binding.elsm.r_w, binding.elsm.r_b,
          binding.elsm.mu_w, binding.elsm.mu_b, binding.elsm.h_w,
          binding.elsm.h_b})
      binding.leaves.push_back(v);
  }
  if (model.dec.has_learnables()) {
    binding.leaves.push_back(binding.dec.w_rho);
    binding.leaves.push_back(binding.dec.b_rho);
  }
  return binding;
}

EpsDraws make_eps_draws(std::size_t n, std::size_t T, const Model& model,
                        rng::Stream& stream, bool zero) {
  std::size_t d = model.priors.m.size();
  std::size_t K = model.priors.pi.size();
  EpsDraws eps;
  auto fill = [&stream, zero](Tensor& t) {
    if (zero) return;
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stream.normal();
  };
  for (std::size_t t = 0; t < T; ++t) {
    eps.z.emplace_back(n, d);
    fill(eps.z.back());
  }
  if (model.variant == ModelVariant::kElsm) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      eps.alpha.emplace_back(1, d);
      fill(eps.alpha.back());
    }
    for (std::size_t j = 0; j < K; ++j) {
      eps.mu.emplace_back(1, d);
      fill(eps.mu.back());
    }
  }
  return eps;
}

EncodeBuild encode_model(ad::Tape& tape, const ModelBinding& binding,
                         const Model& model, const DynamicNetwork& network,
                         const EpsDraws& eps) {
  std::vector<Tensor> inputs = build_encoder_inputs(network);
  std::vector<ad::VarId> g =
      bilstm_forward(tape, inputs, binding.enc, model.enc.sizes);

  EncodeBuild build;
  std::vector<ad::VarId> mean, log_var;
  heads_forward(tape, g, binding.enc, mean, log_var);
  build.state.log_var = log_var;
  std::size_t T = g.size();

  if (model.variant == ModelVariant::kIelsm) {
    build.state.nu = mean;
    build.z.resize(T);
    for (std::size_t t = 0; t < T; ++t)
      build.z[t] = reparameterize(tape, build.state.nu[t], log_var[t],
                                  tape.constant(eps.z[t]));
    return build;
  }

  build.state.m_pre = mean;
  ad::VarId z_first = reparameterize(tape, mean[0], log_var[0],
                                     tape.constant(eps.z[0]));
  elsm_heads_forward(tape, g, z_first, binding.elsm, model.priors.pi,
                     model.priors.s1, build.state);
  build.z.resize(T);
  build.z[0] = z_first;
  for (std::size_t t = 1; t < T; ++t)
    build.z[t] = reparameterize(tape, build.state.nu[t], log_var[t],
                                tape.constant(eps.z[t]));
  for (std::size_t t = 0; t + 1 < T; ++t)
    build.alpha_samples.push_back(
        reparameterize(tape, build.state.alpha_mean[t],
                       build.state.alpha_log_var[t],
                       tape.constant(eps.alpha[t])));
  for (std::size_t j = 0; j < build.state.mu_mean.size(); ++j)
    build.mu_samples.push_back(reparameterize(tape, build.state.mu_mean[j],
                                              build.state.mu_log_var[j],
                                              tape.constant(eps.mu[j])));
  return build;
}

ElboVars attach_elbo(ad::Tape& tape, const ModelBinding& binding,
                     const Model& model, const DynamicNetwork& network,
                     const EncodeBuild& encode) {
  if (model.variant == ModelVariant::kIelsm)
    return build_elbo_ielsm(tape, network, encode.z, encode.state,
                            model.priors, binding.dec);
  return build_elbo_elsm(tape, network, encode.z, encode.alpha_samples,
                         encode.mu_samples, encode.state, model.priors,
                         binding.dec);
}

VariationalState infer_state(const Model& model,
                             const DynamicNetwork& network) {
  ad::Tape tape;
  ModelBinding binding = bind_model(tape, model);
  rng::Stream unused(0, 0);
  EpsDraws eps = make_eps_draws(network.n(), network.T(), model, unused, true);
  EncodeBuild build = encode_model(tape, binding, model, network, eps);
  return extract_state(tape, build.state,
                       model.variant == ModelVariant::kElsm);
}

namespace {

struct AdamState {
  std::vector<Tensor> m, v;
  std::uint64_t step = 0;
};

void adam_ascent_step(std::vector<ParamRef>& params,
                      const std::vector<Tensor>& grads, AdamState& adam,
                      const TrainConfig& config) {
  double clip = config.grad_clip;
  double norm_sq = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) norm_sq += v * v;
  double scale = 1.0;
  if (clip > 0.0) {
    double norm = std::sqrt(norm_sq);
    if (norm > clip) scale = clip / norm;
  }
  adam.step += 1;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = *params[p].tensor;
    Tensor& m = adam.m[p];
    Tensor& v = adam.v[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      double g = grads[p][i] * scale;
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      theta[i] += config.learning_rate * m_hat /
                  (std::sqrt(v_hat) + config.adam_eps);
    }
  }
}

std::string report_to_string(const ElboReport& r) {
  std::ostringstream os;
  os << "elbo=" << r.elbo << " joint=" << r.joint << " entropy=" << r.entropy
     << " edge=" << r.edge << " transition=" << r.transition
     << " prior=" << r.prior << " discrete=" << r.discrete;
  return os.str();
}

TrainResult run_training(const DynamicNetwork& network, Model model,
                         const TrainConfig& config, AdamState adam,
                         std::uint64_t start_epoch,
                         std::uint64_t noise_counter) {
  network.validate();
  if (network.T() == 0)
    throw std::invalid_argument("train: network has no snapshots");
  std::size_t n = network.n();
  std::size_t T = network.T();

  std::vector<ParamRef> params = model_params(model);
  if (adam.m.empty()) {
    for (const ParamRef& p : params) {
      adam.m.emplace_back(p.tensor->shape());
      adam.v.emplace_back(p.tensor->shape());
    }
  }

  rng::Stream noise = rng::Stream(config.seed, 0).substream(kNoise);
  noise.set_counter(noise_counter);

  std::vector<EpsDraws> frozen;
  if (config.frozen_noise) {
    rng::Stream frozen_stream = rng::Stream(config.seed, 0).substream(kNoise);
    for (std::size_t s = 0; s < config.mc_samples; ++s)
      frozen.push_back(make_eps_draws(n, T, model, frozen_stream, false));
  }

  TrainResult result;
  auto forward_report = [&](bool with_grads)
      -> std::pair<ElboReport, std::vector<Tensor>> {
    ad::Tape tape;
    ModelBinding binding = bind_model(tape, model);
    std::vector<ElboVars> samples;
    for (std::size_t s = 0; s < config.mc_samples; ++s) {
      EpsDraws eps = config.frozen_noise
                         ? frozen[s]
                         : make_eps_draws(n, T, model, noise, false);
      EncodeBuild build = encode_model(tape, binding, model, network, eps);
      samples.push_back(attach_elbo(tape, binding, model, network, build));
    }
    ElboVars total = samples[0];
    if (samples.size() > 1) {
      for (std::size_t s = 1; s < samples.size(); ++s) {
        total.edge = tape.add(total.edge, samples[s].edge);
        total.transition = tape.add(total.transition, samples[s].transition);
        total.prior = tape.add(total.prior, samples[s].prior);
        total.discrete = tape.add(total.discrete, samples[s].discrete);
      }
      double inv = 1.0 / static_cast<double>(samples.size());
      total.edge = tape.mul_scalar(total.edge, inv);
      total.transition = tape.mul_scalar(total.transition, inv);
      total.prior = tape.mul_scalar(total.prior, inv);
      total.discrete = tape.mul_scalar(total.discrete, inv);
      total.entropy = samples[0].entropy;
      total.joint = tape.add(tape.add(total.edge, total.transition),
                             tape.add(total.prior, total.discrete));
      total.elbo = tape.add(total.joint, total.entropy);
    }
    ElboReport report = read_report(tape, total);
    if (!std::isfinite(report.elbo))
      throw std::runtime_error("train: non-finite objective (" +
                               report_to_string(report) + ")");
    std::vector<Tensor> grads;
    if (with_grads) {
      tape.backward(total.elbo);
      for (ad::VarId leaf : binding.leaves) {
        grads.push_back(tape.gradient(leaf));
        if (!all_finite(grads.back()))
          throw std::runtime_error("train: non-finite gradient (" +
                                   report_to_string(report) + ")");
      }
    }
    return {report, std::move(grads)};
  };

  for (std::uint64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    auto [report, grads] = forward_report(true);
    if (epoch % config.log_every == 0 || epoch == start_epoch)
      result.log.emplace_back(epoch, report);
    adam_ascent_step(params, grads, adam, config);
  }
  // Snapshot the noise position before the post-training evaluation so a
  // resumed run replays the same draws an uninterrupted run would see.
  std::uint64_t resume_counter = noise.counter();

  auto [final_report, unused_grads] = forward_report(false);
  (void)unused_grads;
  result.log.emplace_back(config.epochs, final_report);

  result.state = infer_state(model, network);
  result.checkpoint.model = std::move(model);
  result.checkpoint.config = config;
  result.checkpoint.epoch = config.epochs;
  result.checkpoint.adam_step = adam.step;
  result.checkpoint.adam_m = std::move(adam.m);
  result.checkpoint.adam_v = std::move(adam.v);
  result.checkpoint.noise_counter = resume_counter;
  return result;
}

}  // namespace

TrainResult train(const DynamicNetwork& network, const TrainConfig& config) {
  config.validate();
  Model model = init_model(config, network.n());
  return run_training(network, std::move(model), config, AdamState{}, 0, 0);
}

TrainResult resume_training(const DynamicNetwork& network,
                            TrainerCheckpoint checkpoint,
                            std::size_t total_epochs) {
  TrainConfig config = checkpoint.config;
  config.epochs = total_epochs;
  if (checkpoint.epoch > total_epochs)
    throw std::invalid_argument("resume_training: checkpoint beyond target");
  AdamState adam;
  adam.m = std::move(checkpoint.adam_m);
  adam.v = std::move(checkpoint.adam_v);
  adam.step = checkpoint.adam_step;
  return run_training(network, std::move(checkpoint.model), config, adam,
                      checkpoint.epoch, checkpoint.noise_counter);
}

// ---- checkpoint I/O --------------------------------------------------------

namespace {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw CheckpointError("checkpoint: truncated file");
  return v;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_pod<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data().data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  auto rank = read_pod<std::uint32_t>(is);
  if (rank > 4) throw CheckpointError("checkpoint: bad tensor rank");
  std::vector<std::size_t> shape;
  for (std::uint32_t i = 0; i < rank; ++i)
    shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is)));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data().data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw CheckpointError("checkpoint: truncated tensor data");
  return t;
}

}  // namespace

void checkpoint_save(const std::string& path, const TrainerCheckpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("checkpoint: cannot open " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod<std::uint32_t>(os, kCheckpointVersion);

  std::string config_json = train_config_to_json(ckpt.config);
  write_pod<std::uint64_t>(os, config_json.size());
  os.write(config_json.data(),
           static_cast<std::streamsize>(config_json.size()));

  Model& model = const_cast<Model&>(ckpt.model);
  std::vector<ParamRef> params = model_params(model);
  write_pod<std::uint64_t>(os, model.enc.sizes.input_dim);
  write_pod<std::uint64_t>(os, ckpt.epoch);
  write_pod<std::uint64_t>(os, ckpt.adam_step);
  write_pod<std::uint64_t>(os, ckpt.noise_counter);
  write_pod<std::uint64_t>(os, params.size());
  for (const ParamRef& p : params) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_tensor(os, *p.tensor);
  }
  for (const Tensor& t : ckpt.adam_m) write_tensor(os, t);
  for (const Tensor& t : ckpt.adam_v) write_tensor(os, t);
  if (!os) throw CheckpointError("checkpoint: write failed for " + path);
}

TrainerCheckpoint checkpoint_load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw CheckpointError("checkpoint: bad magic");
  auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint: unsupported version " +
                          std::to_string(version));

  auto config_len = read_pod<std::uint64_t>(is);
  std::string config_json(config_len, '\0');
  is.read(config_json.data(), static_cast<std::streamsize>(config_len));
  if (!is) throw CheckpointError("checkpoint: truncated config");

  TrainerCheckpoint ckpt;
  ckpt.config = train_config_from_json_string(config_json);
  auto n = read_pod<std::uint64_t>(is);
  ckpt.epoch = read_pod<std::uint64_t>(is);
  ckpt.adam_step = read_pod<std::uint64_t>(is);
  ckpt.noise_counter = read_pod<std::uint64_t>(is);
  ckpt.model = init_model(ckpt.config, static_cast<std::size_t>(n));

  auto param_count = read_pod<std::uint64_t>(is);
  std::vector<ParamRef> params = model_params(ckpt.model);
  if (param_count != params.size())
    throw CheckpointError("checkpoint: parameter count mismatch");
  for (ParamRef& p : params) {
    auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is || name != p.name)
      throw CheckpointError("checkpoint: parameter name mismatch (" + name +
                            " vs " + p.name + ")");
    Tensor t = read_tensor(is);
    if (!t.same_shape(*p.tensor))
      throw CheckpointError("checkpoint: shape mismatch for " + p.name +
                            " (stored " + t.shape_str() + ", expected " +
                            p.tensor->shape_str() + ")");
    *p.tensor = std::move(t);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = read_tensor(is);
    if (!t.same_shape(*params[i].tensor))
      throw CheckpointError("checkpoint: adam m shape mismatch");
    ckpt.adam_m.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = read_tensor(is);
    if (!t.same_shape(*params[i].tensor))
      throw CheckpointError("checkpoint: adam v shape mismatch");
    ckpt.adam_v.push_back(std::move(t));
  }
  return ckpt;
}

}  // namespace elsm
