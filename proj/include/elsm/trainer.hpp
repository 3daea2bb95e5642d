#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "elsm/encoder.hpp"
#include "elsm/objective.hpp"

namespace elsm {

struct TrainConfig {
  ModelVariant variant = ModelVariant::kIelsm;
  std::size_t epochs = 2000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  std::size_t d = 2;
  std::size_t hidden = 64;
  std::size_t head_hidden = 64;
  std::size_t reducer_dim = 16;
  DecoderSpec decoder;
  InferencePriors priors;  // m defaults to zeros(d) when left empty
  std::size_t mc_samples = 1;
  std::size_t log_every = 1;
  // Test mode: reuse one noise draw every epoch instead of resampling.
  bool frozen_noise = false;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json_string(const std::string& text);

// Trainable bundle: encoder, optional full-model heads, decoder learnables
// and the model constants they are trained against.
struct Model {
  ModelVariant variant = ModelVariant::kIelsm;
  EncoderParams enc;
  ElsmHeadParams elsm;
  DecoderParams dec;
  InferencePriors priors;
};

struct ParamRef {
  std::string name;
  Tensor* tensor;
};
std::vector<ParamRef> model_params(Model& model);

Model init_model(const TrainConfig& config, std::size_t n);

struct ModelBinding {
  EncoderVars enc;
  ElsmHeadVars elsm;
  DecoderVars dec;
  std::vector<ad::VarId> leaves;  // ordered like model_params()
};
ModelBinding bind_model(ad::Tape& tape, const Model& model);

struct EncodeBuild {
  VariationalStateVars state;
  std::vector<ad::VarId> z;
  std::vector<ad::VarId> alpha_samples;
  std::vector<ad::VarId> mu_samples;
};

EpsDraws make_eps_draws(std::size_t n, std::size_t T, const Model& model,
                        rng::Stream& stream, bool zero);

// Encoder forward plus reparameterized samples for one noise draw.
EncodeBuild encode_model(ad::Tape& tape, const ModelBinding& binding,
                         const Model& model, const DynamicNetwork& network,
                         const EpsDraws& eps);

ElboVars attach_elbo(ad::Tape& tape, const ModelBinding& binding,
                     const Model& model, const DynamicNetwork& network,
                     const EncodeBuild& encode);

// Deterministic encode (zero noise) producing the variational state used by
// evaluation and serialization.
VariationalState infer_state(const Model& model, const DynamicNetwork& network);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainerCheckpoint {
  Model model;
  TrainConfig config;
  std::uint64_t epoch = 0;
  std::uint64_t adam_step = 0;
  std::vector<Tensor> adam_m, adam_v;  // ordered like model_params()
  std::uint64_t noise_counter = 0;
};

void checkpoint_save(const std::string& path, const TrainerCheckpoint& ckpt);
TrainerCheckpoint checkpoint_load(const std::string& path);

struct TrainResult {
  TrainerCheckpoint checkpoint;
  VariationalState state;
  // (epoch, report) pairs; epoch 0 is the pre-update evaluation and the last
  // entry is the post-training evaluation.
  std::vector<std::pair<std::size_t, ElboReport>> log;
};

// Full-batch ELBO ascent with adaptive moment estimation; deterministic
// given (network, config). Throws on a non-finite objective with the
// component breakdown in the message.
TrainResult train(const DynamicNetwork& network, const TrainConfig& config);

// Continues a checkpointed run until total_epochs; bit-exact with an
// uninterrupted run of the same length.
TrainResult resume_training(const DynamicNetwork& network,
                            TrainerCheckpoint checkpoint,
                            std::size_t total_epochs);

}  // namespace elsm
