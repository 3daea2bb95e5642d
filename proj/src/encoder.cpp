#include "elsm/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace elsm {

namespace {

Tensor uniform_fan_in(std::size_t rows, std::size_t cols, rng::Stream& stream) {
  double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Tensor t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = (2.0 * stream.uniform() - 1.0) * bound;
  return t;
}

LstmDirParams init_lstm_dir(std::size_t input_dim, std::size_t hidden,
                            rng::Stream& stream) {
  LstmDirParams p;
  p.w_x = uniform_fan_in(input_dim, 4 * hidden, stream);
  p.w_h = uniform_fan_in(hidden, 4 * hidden, stream);
  p.b = Tensor(1, 4 * hidden);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.b(0, j) = 1.0;
  return p;
}

MlpParams init_mlp(std::size_t in, std::size_t hidden, std::size_t out,
                   rng::Stream& stream) {
  MlpParams p;
  p.w1 = uniform_fan_in(in, hidden, stream);
  p.b1 = Tensor(1, hidden);
  p.w2 = uniform_fan_in(hidden, out, stream);
  p.b2 = Tensor(1, out);
  return p;
}

constexpr double kLogVarClamp = 10.0;

}  // namespace

EncoderParams init_encoder_params(const EncoderSizes& sizes,
                                  rng::Stream& stream) {
  if (sizes.input_dim == 0 || sizes.hidden == 0 || sizes.d == 0)
    throw std::invalid_argument("init_encoder_params: zero size");
  EncoderParams p;
  p.sizes = sizes;
  p.fwd = init_lstm_dir(sizes.input_dim, sizes.hidden, stream);
  p.bwd = init_lstm_dir(sizes.input_dim, sizes.hidden, stream);
  p.mean_head = init_mlp(sizes.m_out(), sizes.head_hidden, sizes.d, stream);
  p.var_head = init_mlp(sizes.m_out(), sizes.head_hidden, sizes.d, stream);
  return p;
}

ElsmHeadParams init_elsm_head_params(const EncoderSizes& sizes,
                                     rng::Stream& stream) {
  if (sizes.K == 0)
    throw std::invalid_argument("init_elsm_head_params: K must be positive");
  std::size_t n = sizes.input_dim;
  ElsmHeadParams p;
  p.p_w = uniform_fan_in(sizes.m_out(), sizes.reducer_dim, stream);
  p.p_b = Tensor(1, sizes.reducer_dim);
  p.alpha_w = uniform_fan_in(n * sizes.reducer_dim, 2 * sizes.d, stream);
  p.alpha_b = Tensor(1, 2 * sizes.d);
  p.r_w = uniform_fan_in(sizes.m_out(), sizes.reducer_dim, stream);
  p.r_b = Tensor(1, sizes.reducer_dim);
  p.mu_w = uniform_fan_in(n * sizes.reducer_dim, sizes.K * 2 * sizes.d, stream);
  p.mu_b = Tensor(1, sizes.K * 2 * sizes.d);
  p.h_w = uniform_fan_in(sizes.m_out(), 1, stream);
  p.h_b = Tensor(1, 1);
  return p;
}

EncoderVars bind_encoder(ad::Tape& tape, const EncoderParams& params) {
  EncoderVars v;
  v.fwd = {tape.leaf(params.fwd.w_x), tape.leaf(params.fwd.w_h),
           tape.leaf(params.fwd.b)};
  v.bwd = {tape.leaf(params.bwd.w_x), tape.leaf(params.bwd.w_h),
           tape.leaf(params.bwd.b)};
  v.mean_head = {tape.leaf(params.mean_head.w1), tape.leaf(params.mean_head.b1),
                 tape.leaf(params.mean_head.w2), tape.leaf(params.mean_head.b2)};
  v.var_head = {tape.leaf(params.var_head.w1), tape.leaf(params.var_head.b1),
                tape.leaf(params.var_head.w2), tape.leaf(params.var_head.b2)};
  return v;
}

ElsmHeadVars bind_elsm_heads(ad::Tape& tape, const ElsmHeadParams& params) {
  ElsmHeadVars v;
  v.p_w = tape.leaf(params.p_w);
  v.p_b = tape.leaf(params.p_b);
  v.alpha_w = tape.leaf(params.alpha_w);
  v.alpha_b = tape.leaf(params.alpha_b);
  v.r_w = tape.leaf(params.r_w);
  v.r_b = tape.leaf(params.r_b);
  v.mu_w = tape.leaf(params.mu_w);
  v.mu_b = tape.leaf(params.mu_b);
  v.h_w = tape.leaf(params.h_w);
  v.h_b = tape.leaf(params.h_b);
  return v;
}

ad::VarId mlp_forward(ad::Tape& tape, ad::VarId x, const MlpVars& mlp) {
  ad::VarId hidden = tape.tanh(tape.add(tape.matmul(x, mlp.w1), mlp.b1));
  return tape.add(tape.matmul(hidden, mlp.w2), mlp.b2);
}

std::pair<ad::VarId, ad::VarId> lstm_cell_step(ad::Tape& tape, ad::VarId x,
                                               ad::VarId hidden, ad::VarId cell,
                                               const LstmDirVars& params,
                                               std::size_t hidden_size) {
  std::size_t H = hidden_size;
  ad::VarId gates = tape.add(
      tape.add(tape.matmul(x, params.w_x), tape.matmul(hidden, params.w_h)),
      params.b);
  ad::VarId gate_i = tape.sigmoid(tape.slice_cols(gates, 0, H));
  ad::VarId gate_f = tape.sigmoid(tape.slice_cols(gates, H, 2 * H));
  ad::VarId gate_o = tape.sigmoid(tape.slice_cols(gates, 2 * H, 3 * H));
  ad::VarId cand = tape.tanh(tape.slice_cols(gates, 3 * H, 4 * H));
  ad::VarId cell_next =
      tape.add(tape.mul(gate_f, cell), tape.mul(gate_i, cand));
  ad::VarId hidden_next = tape.mul(gate_o, tape.tanh(cell_next));
  return {hidden_next, cell_next};
}

std::vector<Tensor> build_encoder_inputs(
    const DynamicNetwork& network, const std::optional<Tensor>& node_features) {
  std::vector<Tensor> inputs;
  inputs.reserve(network.T());
  for (const Tensor& a : network.snapshots) {
    if (!node_features) {
      inputs.push_back(a);
      continue;
    }
    const Tensor& f = *node_features;
    if (f.rows() != a.rows())
      throw std::invalid_argument("node features row count mismatch");
    Tensor x(a.rows(), a.cols() + f.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < a.cols(); ++j) x(i, j) = a(i, j);
      for (std::size_t j = 0; j < f.cols(); ++j) x(i, a.cols() + j) = f(i, j);
    }
    inputs.push_back(std::move(x));
  }
  return inputs;
}

std::vector<ad::VarId> bilstm_forward(ad::Tape& tape,
                                      const std::vector<Tensor>& inputs,
                                      const EncoderVars& vars,
                                      const EncoderSizes& sizes) {
  if (inputs.empty())
    throw std::invalid_argument("bilstm_forward: no snapshots");
  std::size_t T = inputs.size();
  std::size_t n = inputs[0].rows();
  std::size_t H = sizes.hidden;
  if (inputs[0].cols() != sizes.input_dim)
    throw std::invalid_argument("bilstm_forward: input dim mismatch");

  std::vector<ad::VarId> xs(T);
  for (std::size_t t = 0; t < T; ++t) xs[t] = tape.constant(inputs[t]);

  std::vector<ad::VarId> h_fwd(T), h_bwd(T);
  ad::VarId h = tape.constant(Tensor(n, H));
  ad::VarId c = tape.constant(Tensor(n, H));
  for (std::size_t t = 0; t < T; ++t) {
    std::tie(h, c) = lstm_cell_step(tape, xs[t], h, c, vars.fwd, H);
    h_fwd[t] = h;
  }
  h = tape.constant(Tensor(n, H));
  c = tape.constant(Tensor(n, H));
  for (std::size_t t = T; t-- > 0;) {
    std::tie(h, c) = lstm_cell_step(tape, xs[t], h, c, vars.bwd, H);
    h_bwd[t] = h;
  }

  std::vector<ad::VarId> g(T);
  for (std::size_t t = 0; t < T; ++t)
    g[t] = tape.concat_cols(h_fwd[t], h_bwd[t]);
  return g;
}

void heads_forward(ad::Tape& tape, const std::vector<ad::VarId>& g,
                   const EncoderVars& vars, std::vector<ad::VarId>& mean_out,
                   std::vector<ad::VarId>& log_var_out) {
  mean_out.clear();
  log_var_out.clear();
  for (ad::VarId gt : g) {
    mean_out.push_back(mlp_forward(tape, gt, vars.mean_head));
    log_var_out.push_back(tape.clamp(mlp_forward(tape, gt, vars.var_head),
                                     -kLogVarClamp, kLogVarClamp));
  }
}

ad::VarId reparameterize(ad::Tape& tape, ad::VarId nu, ad::VarId log_var,
                         ad::VarId eps) {
  if (!tape.value(nu).same_shape(tape.value(log_var)) ||
      !tape.value(nu).same_shape(tape.value(eps)))
    throw std::invalid_argument("reparameterize: shape mismatch");
  ad::VarId sigma = tape.exp(tape.mul_scalar(log_var, 0.5));
  return tape.add(nu, tape.mul(sigma, eps));
}

void elsm_heads_forward(ad::Tape& tape, const std::vector<ad::VarId>& g,
                        ad::VarId z_first, const ElsmHeadVars& vars,
                        const std::vector<double>& pi, double s1,
                        VariationalStateVars& state) {
  if (pi.empty())
    throw std::invalid_argument("elsm_heads_forward: K must be positive");
  std::size_t T = g.size();
  std::size_t K = pi.size();
  std::size_t n = tape.value(g[0]).rows();
  std::size_t two_d = tape.value(vars.alpha_b).cols();
  std::size_t d = two_d / 2;

  state.alpha_mean.clear();
  state.alpha_log_var.clear();
  state.h_hat.clear();
  state.mu_mean.clear();
  state.mu_log_var.clear();

  // alpha net and split head run at t to predict quantities for t + 1.
  for (std::size_t t = 0; t + 1 < T; ++t) {
    ad::VarId reduced =
        tape.tanh(tape.add(tape.matmul(g[t], vars.p_w), vars.p_b));
    ad::VarId flat = tape.reshape(reduced, 1, n * tape.value(reduced).cols());
    ad::VarId out = tape.add(tape.matmul(flat, vars.alpha_w), vars.alpha_b);
    state.alpha_mean.push_back(tape.slice_cols(out, 0, d));
    state.alpha_log_var.push_back(
        tape.clamp(tape.slice_cols(out, d, 2 * d), -kLogVarClamp, kLogVarClamp));
    state.h_hat.push_back(
        tape.sigmoid(tape.add(tape.matmul(g[t], vars.h_w), vars.h_b)));
  }

  // mu net reads the first snapshot only.
  {
    ad::VarId reduced =
        tape.tanh(tape.add(tape.matmul(g[0], vars.r_w), vars.r_b));
    ad::VarId flat = tape.reshape(reduced, 1, n * tape.value(reduced).cols());
    ad::VarId out = tape.add(tape.matmul(flat, vars.mu_w), vars.mu_b);
    for (std::size_t j = 0; j < K; ++j) {
      state.mu_mean.push_back(
          tape.slice_cols(out, j * 2 * d, j * 2 * d + d));
      state.mu_log_var.push_back(tape.clamp(
          tape.slice_cols(out, j * 2 * d + d, (j + 1) * 2 * d), -kLogVarClamp,
          kLogVarClamp));
    }
  }

  // nu is the pre-split mean at t = 1 and a convex combination afterwards.
  state.nu.assign(T, -1);
  state.nu[0] = state.m_pre[0];
  ad::VarId one = tape.constant_scalar(1.0);
  for (std::size_t t = 1; t < T; ++t) {
    ad::VarId h = state.h_hat[t - 1];
    ad::VarId keep = tape.sub(one, h);
    state.nu[t] = tape.add(tape.mul(keep, state.m_pre[t]),
                           tape.mul(h, state.alpha_mean[t - 1]));
  }

  // Mixture responsibilities over the K first-layer components with
  // variance s1^2 and prior pi; a constant row-max keeps the softmax stable
  // without touching gradients.
  ad::VarId mu_mtx = tape.concat_rows(state.mu_mean);
  ad::VarId sq = tape.cross_sqdist(z_first, mu_mtx);
  Tensor log_pi(1, K);
  for (std::size_t j = 0; j < K; ++j) {
    if (pi[j] <= 0.0)
      throw std::invalid_argument("elsm_heads_forward: pi entries must be > 0");
    log_pi(0, j) = std::log(pi[j]);
  }
  ad::VarId logits = tape.add(tape.mul_scalar(sq, -0.5 / (s1 * s1)),
                              tape.constant(log_pi));
  const Tensor& lv = tape.value(logits);
  Tensor row_max(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double m = lv(i, 0);
    for (std::size_t j = 1; j < K; ++j) m = std::max(m, lv(i, j));
    row_max(i, 0) = m;
  }
  ad::VarId shifted = tape.sub(logits, tape.constant(row_max));
  ad::VarId expd = tape.exp(shifted);
  state.c_hat = tape.div(expd, tape.sum_rows(expd));
}

VariationalState extract_state(const ad::Tape& tape,
                               const VariationalStateVars& vars, bool is_elsm) {
  VariationalState s;
  s.is_elsm = is_elsm;
  for (ad::VarId v : vars.nu) s.nu.push_back(tape.value(v));
  for (ad::VarId v : vars.log_var) s.log_var.push_back(tape.value(v));
  if (!is_elsm) return s;
  s.c_hat = tape.value(vars.c_hat);
  std::size_t T = vars.nu.size();
  std::size_t n = s.nu.empty() ? 0 : s.nu[0].rows();
  if (T > 1) {
    s.h_hat = Tensor(T - 1, n);
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const Tensor& h = tape.value(vars.h_hat[t]);
      for (std::size_t i = 0; i < n; ++i) s.h_hat(t, i) = h(i, 0);
    }
  }
  for (ad::VarId v : vars.alpha_mean) s.alpha_mean.push_back(tape.value(v));
  for (ad::VarId v : vars.alpha_log_var)
    s.alpha_log_var.push_back(tape.value(v));
  if (!vars.mu_mean.empty()) {
    std::size_t K = vars.mu_mean.size();
    std::size_t d = tape.value(vars.mu_mean[0]).cols();
    s.mu_mean = Tensor(K, d);
    s.mu_log_var = Tensor(K, d);
    for (std::size_t j = 0; j < K; ++j) {
      const Tensor& m = tape.value(vars.mu_mean[j]);
      const Tensor& lv = tape.value(vars.mu_log_var[j]);
      for (std::size_t k = 0; k < d; ++k) {
        s.mu_mean(j, k) = m(0, k);
        s.mu_log_var(j, k) = lv(0, k);
      }
    }
  }
  return s;
}

}  // namespace elsm
