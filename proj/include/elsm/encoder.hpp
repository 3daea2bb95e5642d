#pragma once

#include <optional>
#include <vector>

#include "elsm/model.hpp"
#include "elsm/rng.hpp"
#include "elsm/tape.hpp"
#include "elsm/tensor.hpp"

namespace elsm {

// Architecture sizes. The bidirectional hidden states are concatenated, so
// the per-node output dimension m_out is 2 * hidden.
struct EncoderSizes {
  std::size_t input_dim = 0;    // n, plus feature columns when present
  std::size_t hidden = 64;      // per direction
  std::size_t head_hidden = 64; // hidden width of the M and V heads
  std::size_t d = 2;            // latent dimension
  std::size_t reducer_dim = 16; // per-node reduction in the alpha/mu nets
  std::size_t K = 0;            // mixture components (full-model heads only)

  std::size_t m_out() const { return 2 * hidden; }
};

// One LSTM direction; gate order along the 4H axis is [input, forget,
// output, candidate].
struct LstmDirParams {
  Tensor w_x;  // input_dim x 4H
  Tensor w_h;  // H x 4H
  Tensor b;    // 1 x 4H
};

// Single hidden layer (tanh) followed by a linear map.
struct MlpParams {
  Tensor w1, b1, w2, b2;
};

struct EncoderParams {
  EncoderSizes sizes;
  LstmDirParams fwd, bwd;
  MlpParams mean_head;  // M
  MlpParams var_head;   // V
};

// Extra heads for the full model: the alpha net (reducer P + concat +
// linear), the mu net (reducer R + concat + linear producing K pairs) and
// the split-probability head.
struct ElsmHeadParams {
  Tensor p_w, p_b;          // reducer P: m_out -> reducer_dim, tanh
  Tensor alpha_w, alpha_b;  // (n * reducer_dim) -> 2d
  Tensor r_w, r_b;          // reducer R: m_out -> reducer_dim, tanh
  Tensor mu_w, mu_b;        // (n * reducer_dim) -> K * 2d
  Tensor h_w, h_b;          // m_out -> 1, sigmoid

  bool empty() const { return p_w.empty(); }
};

// All variational parameters produced by the inference network, as plain
// tensors. log_var entries are clamped to [-10, 10] at the heads.
struct VariationalState {
  std::vector<Tensor> nu;       // per t, n x d
  std::vector<Tensor> log_var;  // per t, n x d
  bool is_elsm = false;
  Tensor c_hat;                      // n x K
  Tensor h_hat;                      // (T-1) x n
  std::vector<Tensor> alpha_mean;    // per t >= 2, 1 x d
  std::vector<Tensor> alpha_log_var; // per t >= 2, 1 x d
  Tensor mu_mean;                    // K x d
  Tensor mu_log_var;                 // K x d
};

// Tape-side mirror of VariationalState used while building the objective.
struct VariationalStateVars {
  std::vector<ad::VarId> nu;
  std::vector<ad::VarId> log_var;
  std::vector<ad::VarId> m_pre;  // pre-split means m_i^(t) (full model)
  ad::VarId c_hat = -1;
  std::vector<ad::VarId> h_hat;          // per t >= 2, n x 1
  std::vector<ad::VarId> alpha_mean;     // per t >= 2, 1 x d
  std::vector<ad::VarId> alpha_log_var;  // per t >= 2, 1 x d
  std::vector<ad::VarId> mu_mean;        // per j, 1 x d
  std::vector<ad::VarId> mu_log_var;     // per j, 1 x d
};

struct LstmDirVars {
  ad::VarId w_x = -1, w_h = -1, b = -1;
};
struct MlpVars {
  ad::VarId w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};
struct EncoderVars {
  LstmDirVars fwd, bwd;
  MlpVars mean_head, var_head;
};
struct ElsmHeadVars {
  ad::VarId p_w = -1, p_b = -1, alpha_w = -1, alpha_b = -1;
  ad::VarId r_w = -1, r_b = -1, mu_w = -1, mu_b = -1, h_w = -1, h_b = -1;
};

// Fan-in scaled uniform init; LSTM forget-gate bias set to 1.
EncoderParams init_encoder_params(const EncoderSizes& sizes, rng::Stream& stream);
ElsmHeadParams init_elsm_head_params(const EncoderSizes& sizes,
                                     rng::Stream& stream);

// Register parameters as gradient-tracked leaves.
EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& params);
ElsmHeadVars bind_elsm_heads(ad::Tape& tape, const ElsmHeadParams& params);

// y = x * w2 after a tanh hidden layer; x may batch rows.
ad::VarId mlp_forward(ad::Tape& tape, ad::VarId x, const MlpVars& mlp);

// One LSTM step for a batch of rows. Returns (hidden, cell).
std::pair<ad::VarId, ad::VarId> lstm_cell_step(ad::Tape& tape, ad::VarId x,
                                               ad::VarId hidden, ad::VarId cell,
                                               const LstmDirVars& params,
                                               std::size_t hidden_size);

// Per-snapshot inputs: adjacency rows, optionally concatenated with static
// node features.
std::vector<Tensor> build_encoder_inputs(
    const DynamicNetwork& network,
    const std::optional<Tensor>& node_features = std::nullopt);

// Bidirectional pass; element t of the result is the n x m_out matrix of
// per-node outputs g_i^(t).
std::vector<ad::VarId> bilstm_forward(ad::Tape& tape,
                                      const std::vector<Tensor>& inputs,
                                      const EncoderVars& vars,
                                      const EncoderSizes& sizes);

// Applies the shared M and V heads at every timestep; log-variance clamped
// to [-10, 10].
void heads_forward(ad::Tape& tape, const std::vector<ad::VarId>& g,
                   const EncoderVars& vars, std::vector<ad::VarId>& mean_out,
                   std::vector<ad::VarId>& log_var_out);

// z = nu + exp(log_var / 2) * eps.
ad::VarId reparameterize(ad::Tape& tape, ad::VarId nu, ad::VarId log_var,
                         ad::VarId eps);

// Full-model heads: alpha and mu distributions, split probabilities, the
// convex-combination nu and mixture responsibilities for the first layer.
// state.m_pre and state.log_var must already hold the M/V head outputs.
void elsm_heads_forward(ad::Tape& tape, const std::vector<ad::VarId>& g,
                        ad::VarId z_first, const ElsmHeadVars& vars,
                        const std::vector<double>& pi, double s1,
                        VariationalStateVars& state);

// Materializes plain tensors from tape vars.
VariationalState extract_state(const ad::Tape& tape,
                               const VariationalStateVars& vars, bool is_elsm);

}  // namespace elsm
