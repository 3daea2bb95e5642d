#include "elsm/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace elsm {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;
constexpr double kLn2PiE = 2.8378770664093453;
constexpr double kEntropyEps = 1e-12;

double clamp_prob(double p) {
  return std::min(std::max(p, kProbEps), 1.0 - kProbEps);
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("vector dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

void check_bernoulli_obs(double a) {
  if (a != 0.0 && a != 1.0)
    throw std::invalid_argument("bernoulli observation must be 0 or 1");
}

double poisson_log_intensity(double sq, double w_rho, double b_rho) {
  double ln_rho = -w_rho * w_rho * sq + b_rho;
  return std::min(std::max(ln_rho, std::log(kPoissonFloor)), kPoissonLogCap);
}

double xlogx(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

}  // namespace

double log_gaussian_density(const std::vector<double>& x,
                            const std::vector<double>& mean, double var) {
  if (!(var > 0.0)) throw std::invalid_argument("variance must be positive");
  if (x.size() != mean.size())
    throw std::invalid_argument("log_gaussian_density: dimension mismatch");
  double s = sq_dist(x, mean);
  double d = static_cast<double>(x.size());
  return -0.5 * (d * (kLn2Pi + std::log(var)) + s / var);
}

double log_gaussian_density(const std::vector<double>& x,
                            const std::vector<double>& mean,
                            const std::vector<double>& var) {
  if (x.size() != mean.size() || x.size() != var.size())
    throw std::invalid_argument("log_gaussian_density: dimension mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(var[k] > 0.0))
      throw std::invalid_argument("variance must be positive");
    double diff = x[k] - mean[k];
    acc += kLn2Pi + std::log(var[k]) + diff * diff / var[k];
  }
  return -0.5 * acc;
}

double edge_log_likelihood(double a, const std::vector<double>& zi,
                           const std::vector<double>& zj,
                           const DecoderParams& dec) {
  double sq = sq_dist(zi, zj);
  switch (dec.spec.kind) {
    case DecoderKind::kBernoulliKernel: {
      check_bernoulli_obs(a);
      double p = clamp_prob(edge_kernel_f_sq(sq, dec.spec.s2));
      return a * std::log(p) + (1.0 - a) * std::log(1.0 - p);
    }
    case DecoderKind::kBernoulliLearned: {
      check_bernoulli_obs(a);
      double w = dec.w_rho.scalar_value();
      double b = dec.b_rho.scalar_value();
      double p = clamp_prob(1.0 - std::tanh(w * w * sq + b * b));
      return a * std::log(p) + (1.0 - a) * std::log(1.0 - p);
    }
    case DecoderKind::kPoissonLearned: {
      if (a < 0.0 || a != std::floor(a))
        throw std::invalid_argument(
            "poisson observation must be a non-negative integer");
      double ln_rho = poisson_log_intensity(sq, dec.w_rho.scalar_value(),
                                            dec.b_rho.scalar_value());
      return a * ln_rho - std::exp(ln_rho) - std::lgamma(a + 1.0);
    }
  }
  throw std::logic_error("unknown decoder kind");
}

double edge_probability_sq(double sq, const DecoderParams& dec) {
  switch (dec.spec.kind) {
    case DecoderKind::kBernoulliKernel:
      return edge_kernel_f_sq(sq, dec.spec.s2);
    case DecoderKind::kBernoulliLearned: {
      double w = dec.w_rho.scalar_value();
      double b = dec.b_rho.scalar_value();
      return 1.0 - std::tanh(w * w * sq + b * b);
    }
    case DecoderKind::kPoissonLearned: {
      double ln_rho = poisson_log_intensity(sq, dec.w_rho.scalar_value(),
                                            dec.b_rho.scalar_value());
      return 1.0 - std::exp(-std::exp(ln_rho));
    }
  }
  throw std::logic_error("unknown decoder kind");
}

double edge_probability(const std::vector<double>& zi,
                        const std::vector<double>& zj,
                        const DecoderParams& dec) {
  return edge_probability_sq(sq_dist(zi, zj), dec);
}

double transition_log_density(const std::vector<double>& z_t,
                              const Tensor& Z_prev, const Tensor& A_prev,
                              std::size_t i, double s1, double s4) {
  std::vector<double> mean = neighbor_mean(Z_prev, A_prev, i, s4);
  return log_gaussian_density(z_t, mean, s1 * s1);
}

double joint_log_likelihood_ielsm(const DynamicNetwork& network,
                                  const std::vector<Tensor>& Z,
                                  const InferencePriors& priors,
                                  const DecoderParams& dec) {
  std::size_t T = network.T();
  if (Z.size() != T)
    throw std::invalid_argument("joint_log_likelihood_ielsm: Z length != T");
  std::size_t n = network.n();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    total += log_gaussian_density(Z[0].row_vec(i), priors.m,
                                  priors.s * priors.s);
  for (std::size_t t = 0; t < T; ++t) {
    const Tensor& a = network.snapshots[t];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        total += edge_log_likelihood(a(i, j), Z[t].row_vec(i), Z[t].row_vec(j),
                                     dec);
  }
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t i = 0; i < n; ++i)
      total += transition_log_density(Z[t].row_vec(i), Z[t - 1],
                                      network.snapshots[t - 1], i, priors.s1,
                                      priors.s4);
  return total;
}

ElsmDiscreteDensities elsm_discrete_densities(const DynamicNetwork& network,
                                              const std::vector<Tensor>& Z,
                                              const Tensor& alpha,
                                              const Tensor& mu,
                                              const InferencePriors& priors) {
  std::size_t T = network.T();
  std::size_t n = network.n();
  std::size_t K = mu.rows();
  double s1sq = priors.s1 * priors.s1;

  ElsmDiscreteDensities out;
  out.log_pi = Tensor(1, K);
  if (priors.pi.size() != K)
    throw std::invalid_argument("elsm_discrete_densities: pi length != K");
  for (std::size_t j = 0; j < K; ++j) {
    if (!(priors.pi[j] > 0.0))
      throw std::invalid_argument(
          "elsm_discrete_densities: pi entries must be strictly positive");
    out.log_pi(0, j) = std::log(priors.pi[j]);
  }

  out.first_layer_logn = Tensor(n, K);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < K; ++j)
      out.first_layer_logn(i, j) =
          log_gaussian_density(Z[0].row_vec(i), mu.row_vec(j), s1sq);

  if (T > 1) {
    out.split_log_p1 = Tensor(T - 1, n);
    out.split_log_p0 = Tensor(T - 1, n);
    out.trans_log_h1 = Tensor(T - 1, n);
    out.trans_log_h0 = Tensor(T - 1, n);
    for (std::size_t t = 1; t < T; ++t) {
      std::vector<double> alpha_t = alpha.row_vec(t - 1);
      Tensor mu_mean = neighbor_mean_all(Z[t - 1], network.snapshots[t - 1],
                                         priors.s4);
      for (std::size_t i = 0; i < n; ++i) {
        double g = clamp_prob(split_kernel_g_sq(
            sq_dist(Z[t - 1].row_vec(i), alpha_t), priors.s3));
        out.split_log_p1(t - 1, i) = std::log(g);
        out.split_log_p0(t - 1, i) = std::log(1.0 - g);
        out.trans_log_h1(t - 1, i) =
            log_gaussian_density(Z[t].row_vec(i), alpha_t, s1sq);
        out.trans_log_h0(t - 1, i) =
            log_gaussian_density(Z[t].row_vec(i), mu_mean.row_vec(i), s1sq);
      }
    }
  }
  return out;
}

double expected_discrete_terms(const Tensor& c_hat, const Tensor& h_hat,
                               const ElsmDiscreteDensities& densities) {
  std::size_t n = c_hat.rows();
  std::size_t K = c_hat.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      double w = c_hat(i, j);
      if (w < -1e-9) throw std::invalid_argument("c_hat entry negative");
      row_sum += w;
      total += w * (densities.log_pi(0, j) + densities.first_layer_logn(i, j));
    }
    if (std::abs(row_sum - 1.0) > 1e-6)
      throw std::invalid_argument("c_hat row does not sum to 1");
  }
  if (!h_hat.empty()) {
    for (std::size_t t = 0; t < h_hat.rows(); ++t)
      for (std::size_t i = 0; i < h_hat.cols(); ++i) {
        double h = h_hat(t, i);
        if (h < -1e-12 || h > 1.0 + 1e-12)
          throw std::invalid_argument("h_hat entry outside [0, 1]");
        total += h * (densities.split_log_p1(t, i) + densities.trans_log_h1(t, i)) +
                 (1.0 - h) *
                     (densities.split_log_p0(t, i) + densities.trans_log_h0(t, i));
      }
  }
  return total;
}

double joint_log_likelihood_elsm(const DynamicNetwork& network,
                                 const std::vector<Tensor>& Z,
                                 const Tensor& c_hat, const Tensor& h_hat,
                                 const Tensor& alpha, const Tensor& mu,
                                 const InferencePriors& priors,
                                 const DecoderParams& dec) {
  std::size_t T = network.T();
  std::size_t n = network.n();
  std::size_t K = mu.rows();
  double total = 0.0;

  for (std::size_t j = 0; j < K; ++j)
    total += log_gaussian_density(mu.row_vec(j), priors.m, priors.s * priors.s);
  for (std::size_t t = 1; t < T; ++t)
    total += log_gaussian_density(alpha.row_vec(t - 1), priors.m,
                                  priors.s * priors.s);

  for (std::size_t t = 0; t < T; ++t) {
    const Tensor& a = network.snapshots[t];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j)
        total += edge_log_likelihood(a(i, j), Z[t].row_vec(i), Z[t].row_vec(j),
                                     dec);
  }

  total += expected_discrete_terms(
      c_hat, h_hat, elsm_discrete_densities(network, Z, alpha, mu, priors));
  return total;
}

Tensor one_hot(const std::vector<int>& labels_1based, std::size_t K) {
  Tensor out(labels_1based.size(), K);
  for (std::size_t i = 0; i < labels_1based.size(); ++i) {
    int label = labels_1based[i];
    if (label < 1 || static_cast<std::size_t>(label) > K)
      throw std::invalid_argument("one_hot: label out of range");
    out(i, static_cast<std::size_t>(label - 1)) = 1.0;
  }
  return out;
}

double entropies(const VariationalState& state) {
  double total = 0.0;
  for (const Tensor& lv : state.log_var)
    for (double v : lv.data()) total += 0.5 * (kLn2PiE + v);
  if (!state.is_elsm) return total;
  for (const Tensor& lv : state.alpha_log_var)
    for (double v : lv.data()) total += 0.5 * (kLn2PiE + v);
  for (double v : state.mu_log_var.data()) total += 0.5 * (kLn2PiE + v);
  for (double h : state.h_hat.data()) total -= xlogx(h) + xlogx(1.0 - h);
  for (std::size_t i = 0; i < state.c_hat.rows(); ++i)
    for (std::size_t j = 0; j < state.c_hat.cols(); ++j)
      total -= xlogx(state.c_hat(i, j));
  return total;
}

// ---- tape builders ---------------------------------------------------------

DecoderVars bind_decoder(ad::Tape& tape, const DecoderParams& dec) {
  DecoderVars v;
  v.kind = dec.spec.kind;
  v.s2 = dec.spec.s2;
  if (dec.has_learnables()) {
    v.w_rho = tape.leaf(dec.w_rho);
    v.b_rho = tape.leaf(dec.b_rho);
  }
  return v;
}

namespace {

using ad::Tape;
using ad::VarId;

// Sum of decoder log-likelihood terms over the strict lower triangle of one
// snapshot.
VarId edge_term_snapshot(Tape& tape, const Tensor& a, VarId z_t,
                         const DecoderVars& dec, bool weighted) {
  std::size_t n = a.rows();
  VarId d_sq = tape.pairwise_sqdist(z_t);
  Tensor lower(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) lower(i, j) = 1.0;

  if (dec.kind == DecoderKind::kPoissonLearned) {
    VarId neg_w2 = tape.neg(tape.square(dec.w_rho));
    VarId ln_rho = tape.add(tape.mul(d_sq, neg_w2), dec.b_rho);
    VarId ln_rho_c =
        tape.clamp(ln_rho, std::log(kPoissonFloor), kPoissonLogCap);
    VarId rho = tape.exp(ln_rho_c);
    Tensor obs_low(n, n);
    double lgamma_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) {
        obs_low(i, j) = a(i, j);
        lgamma_sum += std::lgamma(a(i, j) + 1.0);
      }
    VarId term = tape.sub(tape.sum(tape.mul(tape.constant(obs_low), ln_rho_c)),
                          tape.sum(tape.mul(tape.constant(lower), rho)));
    return tape.add_scalar(term, -lgamma_sum);
  }

  if (weighted)
    throw std::invalid_argument(
        "bernoulli decoder requires a binary network");
  VarId p;
  if (dec.kind == DecoderKind::kBernoulliKernel) {
    p = tape.sub(tape.constant_scalar(1.0),
                 tape.tanh(tape.mul_scalar(d_sq, 1.0 / (dec.s2 * dec.s2))));
  } else {
    VarId arg = tape.add(tape.mul(d_sq, tape.square(dec.w_rho)),
                         tape.square(dec.b_rho));
    p = tape.sub(tape.constant_scalar(1.0), tape.tanh(arg));
  }
  VarId pc = tape.clamp(p, kProbEps, 1.0 - kProbEps);
  VarId log_p = tape.log(pc);
  VarId log_1mp = tape.log(tape.sub(tape.constant_scalar(1.0), pc));
  Tensor edges_low(n, n), nonedges_low(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) {
      edges_low(i, j) = a(i, j);
      nonedges_low(i, j) = 1.0 - a(i, j);
    }
  return tape.add(tape.sum(tape.mul(tape.constant(edges_low), log_p)),
                  tape.sum(tape.mul(tape.constant(nonedges_low), log_1mp)));
}

VarId neighbor_mean_tape(Tape& tape, VarId z_prev, const Tensor& a_prev,
                         double s4) {
  VarId d_sq = tape.pairwise_sqdist(z_prev);
  VarId weights = tape.mul(tape.constant(a_prev),
                           tape.exp(tape.mul_scalar(d_sq, -1.0 / (s4 * s4))));
  VarId denom = tape.add_scalar(tape.sum_rows(weights), 1.0);
  VarId numer = tape.add(z_prev, tape.matmul(weights, z_prev));
  return tape.div(numer, denom);
}

// log N(rows of x | rows of mean, var I) as a column vector.
VarId row_log_gaussian(Tape& tape, VarId x, VarId mean, double var,
                       std::size_t d) {
  VarId sq = tape.sum_rows(tape.square(tape.sub(x, mean)));
  return tape.add_scalar(tape.mul_scalar(sq, -0.5 / var),
                         -0.5 * static_cast<double>(d) * (kLn2Pi + std::log(var)));
}

VarId gaussian_entropy(Tape& tape, VarId log_var) {
  double count = static_cast<double>(tape.value(log_var).size());
  return tape.add_scalar(tape.mul_scalar(tape.sum(log_var), 0.5),
                         0.5 * count * kLn2PiE);
}

// -sum p log p with p clamped inside the log only.
VarId plogp_entropy(Tape& tape, VarId p) {
  VarId logp = tape.log(tape.clamp(p, kEntropyEps, 1.0));
  return tape.neg(tape.sum(tape.mul(p, logp)));
}

VarId bernoulli_entropy(Tape& tape, VarId p) {
  VarId one = tape.constant_scalar(1.0);
  VarId q = tape.sub(one, p);
  VarId term_p = tape.mul(p, tape.log(tape.clamp(p, kEntropyEps, 1.0)));
  VarId term_q = tape.mul(q, tape.log(tape.clamp(q, kEntropyEps, 1.0)));
  return tape.neg(tape.sum(tape.add(term_p, term_q)));
}

}  // namespace

ElboVars build_elbo_ielsm(ad::Tape& tape, const DynamicNetwork& network,
                          const std::vector<ad::VarId>& z,
                          const VariationalStateVars& state,
                          const InferencePriors& priors,
                          const DecoderVars& dec) {
  std::size_t T = network.T();
  std::size_t n = network.n();
  std::size_t d = priors.m.size();
  if (z.size() != T) throw std::invalid_argument("build_elbo_ielsm: bad z");

  VarId edge = tape.constant_scalar(0.0);
  for (std::size_t t = 0; t < T; ++t)
    edge = tape.add(edge, edge_term_snapshot(tape, network.snapshots[t], z[t],
                                             dec, network.weighted));

  VarId transition = tape.constant_scalar(0.0);
  double s1sq = priors.s1 * priors.s1;
  for (std::size_t t = 1; t < T; ++t) {
    VarId mu = neighbor_mean_tape(tape, z[t - 1], network.snapshots[t - 1],
                                  priors.s4);
    VarId sq = tape.sum(tape.square(tape.sub(z[t], mu)));
    VarId term = tape.add_scalar(
        tape.mul_scalar(sq, -0.5 / s1sq),
        -0.5 * static_cast<double>(n * d) * (kLn2Pi + std::log(s1sq)));
    transition = tape.add(transition, term);
  }

  VarId m_row = tape.constant(Tensor::row(priors.m));
  VarId prior_sq = tape.sum(tape.cross_sqdist(z[0], m_row));
  double ssq = priors.s * priors.s;
  VarId prior = tape.add_scalar(
      tape.mul_scalar(prior_sq, -0.5 / ssq),
      -0.5 * static_cast<double>(n * d) * (kLn2Pi + std::log(ssq)));

  VarId discrete = tape.constant_scalar(0.0);

  VarId entropy = tape.constant_scalar(0.0);
  for (std::size_t t = 0; t < T; ++t)
    entropy = tape.add(entropy, gaussian_entropy(tape, state.log_var[t]));

  ElboVars out;
  out.edge = edge;
  out.transition = transition;
  out.prior = prior;
  out.discrete = discrete;
  out.entropy = entropy;
  out.joint = tape.add(tape.add(edge, transition), tape.add(prior, discrete));
  out.elbo = tape.add(out.joint, entropy);
  return out;
}

ElboVars build_elbo_elsm(ad::Tape& tape, const DynamicNetwork& network,
                         const std::vector<ad::VarId>& z,
                         const std::vector<ad::VarId>& alpha_samples,
                         const std::vector<ad::VarId>& mu_samples,
                         const VariationalStateVars& state,
                         const InferencePriors& priors,
                         const DecoderVars& dec) {
  std::size_t T = network.T();
  std::size_t d = priors.m.size();
  std::size_t K = mu_samples.size();
  if (K == 0) throw std::invalid_argument("build_elbo_elsm: K must be > 0");
  if (alpha_samples.size() + 1 != T && T > 1)
    throw std::invalid_argument("build_elbo_elsm: alpha sample count");
  double s1sq = priors.s1 * priors.s1;
  double ssq = priors.s * priors.s;

  VarId edge = tape.constant_scalar(0.0);
  for (std::size_t t = 0; t < T; ++t)
    edge = tape.add(edge, edge_term_snapshot(tape, network.snapshots[t], z[t],
                                             dec, network.weighted));

  VarId one = tape.constant_scalar(1.0);
  VarId m_row = tape.constant(Tensor::row(priors.m));

  // mu / alpha priors and the expected first-layer assignment term.
  VarId mu_mtx = tape.concat_rows(mu_samples);
  VarId prior = tape.add_scalar(
      tape.mul_scalar(tape.sum(tape.cross_sqdist(mu_mtx, m_row)), -0.5 / ssq),
      -0.5 * static_cast<double>(K * d) * (kLn2Pi + std::log(ssq)));
  if (!alpha_samples.empty()) {
    VarId alpha_mtx = tape.concat_rows(alpha_samples);
    VarId pr_alpha = tape.add_scalar(
        tape.mul_scalar(tape.sum(tape.cross_sqdist(alpha_mtx, m_row)),
                        -0.5 / ssq),
        -0.5 * static_cast<double>(alpha_samples.size() * d) *
            (kLn2Pi + std::log(ssq)));
    prior = tape.add(prior, pr_alpha);
  }
  {
    VarId logn = tape.add_scalar(
        tape.mul_scalar(tape.cross_sqdist(z[0], mu_mtx), -0.5 / s1sq),
        -0.5 * static_cast<double>(d) * (kLn2Pi + std::log(s1sq)));
    prior = tape.add(prior, tape.sum(tape.mul(state.c_hat, logn)));
  }

  // Expected c log-prior plus split-indicator terms.
  Tensor log_pi(1, priors.pi.size());
  for (std::size_t j = 0; j < priors.pi.size(); ++j) {
    if (!(priors.pi[j] > 0.0))
      throw std::invalid_argument("build_elbo_elsm: pi must be positive");
    log_pi(0, j) = std::log(priors.pi[j]);
  }
  VarId discrete = tape.sum(tape.mul(state.c_hat, tape.constant(log_pi)));
  for (std::size_t t = 1; t < T; ++t) {
    VarId h = state.h_hat[t - 1];
    VarId sq = tape.cross_sqdist(z[t - 1], alpha_samples[t - 1]);
    VarId g = tape.clamp(
        tape.sub(one, tape.tanh(tape.mul_scalar(
                          sq, 1.0 / (priors.s3 * priors.s3)))),
        kProbEps, 1.0 - kProbEps);
    VarId term = tape.sum(
        tape.add(tape.mul(h, tape.log(g)),
                 tape.mul(tape.sub(one, h), tape.log(tape.sub(one, g)))));
    discrete = tape.add(discrete, term);
  }

  // Expected transition terms: h picks between the neighbor mean and alpha.
  VarId transition = tape.constant_scalar(0.0);
  for (std::size_t t = 1; t < T; ++t) {
    VarId mu = neighbor_mean_tape(tape, z[t - 1], network.snapshots[t - 1],
                                  priors.s4);
    VarId row_keep = row_log_gaussian(tape, z[t], mu, s1sq, d);
    VarId row_split = row_log_gaussian(tape, z[t], alpha_samples[t - 1], s1sq, d);
    VarId h = state.h_hat[t - 1];
    transition = tape.add(
        transition, tape.sum(tape.add(tape.mul(tape.sub(one, h), row_keep),
                                      tape.mul(h, row_split))));
  }

  VarId entropy = tape.constant_scalar(0.0);
  for (std::size_t t = 0; t < T; ++t)
    entropy = tape.add(entropy, gaussian_entropy(tape, state.log_var[t]));
  for (VarId lv : state.alpha_log_var)
    entropy = tape.add(entropy, gaussian_entropy(tape, lv));
  for (VarId lv : state.mu_log_var)
    entropy = tape.add(entropy, gaussian_entropy(tape, lv));
  for (VarId h : state.h_hat)
    entropy = tape.add(entropy, bernoulli_entropy(tape, h));
  entropy = tape.add(entropy, plogp_entropy(tape, state.c_hat));

  ElboVars out;
  out.edge = edge;
  out.transition = transition;
  out.prior = prior;
  out.discrete = discrete;
  out.entropy = entropy;
  out.joint = tape.add(tape.add(edge, transition), tape.add(prior, discrete));
  out.elbo = tape.add(out.joint, entropy);
  return out;
}

ElboReport read_report(const ad::Tape& tape, const ElboVars& vars) {
  ElboReport r;
  r.elbo = tape.value(vars.elbo).scalar_value();
  r.joint = tape.value(vars.joint).scalar_value();
  r.entropy = tape.value(vars.entropy).scalar_value();
  r.edge = tape.value(vars.edge).scalar_value();
  r.transition = tape.value(vars.transition).scalar_value();
  r.prior = tape.value(vars.prior).scalar_value();
  r.discrete = tape.value(vars.discrete).scalar_value();
  return r;
}

// ---- plain evaluation ------------------------------------------------------

EpsDraws zero_eps_draws(const VariationalState& state) {
  EpsDraws e;
  for (const Tensor& nu : state.nu) e.z.emplace_back(nu.rows(), nu.cols());
  if (state.is_elsm) {
    for (const Tensor& am : state.alpha_mean)
      e.alpha.emplace_back(am.rows(), am.cols());
    if (!state.mu_mean.empty())
      for (std::size_t j = 0; j < state.mu_mean.rows(); ++j)
        e.mu.emplace_back(1, state.mu_mean.cols());
  }
  return e;
}

EpsDraws sample_eps_draws(const VariationalState& state, rng::Stream& stream) {
  EpsDraws e = zero_eps_draws(state);
  for (Tensor& t : e.z)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stream.normal();
  for (Tensor& t : e.alpha)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stream.normal();
  for (Tensor& t : e.mu)
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = stream.normal();
  return e;
}

ElboReport elbo_report(ModelVariant variant, const DynamicNetwork& network,
                       const VariationalState& state,
                       const InferencePriors& priors, const DecoderParams& dec,
                       const std::vector<EpsDraws>& draws) {
  if (draws.empty()) throw std::invalid_argument("elbo_report: no draws");
  std::size_t T = network.T();
  ElboReport acc;
  for (const EpsDraws& eps : draws) {
    ad::Tape tape;
    DecoderVars dec_vars;
    dec_vars.kind = dec.spec.kind;
    dec_vars.s2 = dec.spec.s2;
    if (dec.has_learnables()) {
      dec_vars.w_rho = tape.constant(dec.w_rho);
      dec_vars.b_rho = tape.constant(dec.b_rho);
    }
    VariationalStateVars vars;
    std::vector<ad::VarId> z(T);
    for (std::size_t t = 0; t < T; ++t) {
      vars.nu.push_back(tape.constant(state.nu[t]));
      vars.log_var.push_back(tape.constant(state.log_var[t]));
      z[t] = reparameterize(tape, vars.nu[t], vars.log_var[t],
                            tape.constant(eps.z[t]));
    }
    ElboVars ev;
    if (variant == ModelVariant::kIelsm) {
      ev = build_elbo_ielsm(tape, network, z, vars, priors, dec_vars);
    } else {
      std::vector<ad::VarId> alpha_samples, mu_samples;
      for (std::size_t t = 0; t + 1 < T; ++t) {
        ad::VarId am = tape.constant(state.alpha_mean[t]);
        ad::VarId alv = tape.constant(state.alpha_log_var[t]);
        alpha_samples.push_back(
            reparameterize(tape, am, alv, tape.constant(eps.alpha[t])));
        vars.alpha_log_var.push_back(alv);
        Tensor h_col(network.n(), 1);
        for (std::size_t i = 0; i < network.n(); ++i)
          h_col(i, 0) = state.h_hat(t, i);
        vars.h_hat.push_back(tape.constant(h_col));
      }
      for (std::size_t j = 0; j < state.mu_mean.rows(); ++j) {
        ad::VarId mm = tape.constant(Tensor::row(state.mu_mean.row_vec(j)));
        ad::VarId mlv = tape.constant(Tensor::row(state.mu_log_var.row_vec(j)));
        mu_samples.push_back(reparameterize(tape, mm, mlv,
                                            tape.constant(eps.mu[j])));
        vars.mu_log_var.push_back(mlv);
      }
      vars.c_hat = tape.constant(state.c_hat);
      ev = build_elbo_elsm(tape, network, z, alpha_samples, mu_samples, vars,
                           priors, dec_vars);
    }
    ElboReport r = read_report(tape, ev);
    acc.edge += r.edge;
    acc.transition += r.transition;
    acc.prior += r.prior;
    acc.discrete += r.discrete;
    acc.joint += r.joint;
    acc.entropy = r.entropy;  // identical across draws
  }
  double inv = 1.0 / static_cast<double>(draws.size());
  acc.edge *= inv;
  acc.transition *= inv;
  acc.prior *= inv;
  acc.discrete *= inv;
  acc.joint *= inv;
  acc.elbo = acc.joint + acc.entropy;
  return acc;
}

}  // namespace elsm
