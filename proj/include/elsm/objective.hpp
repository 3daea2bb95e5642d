#pragma once

#include <vector>

#include "elsm/encoder.hpp"
#include "elsm/model.hpp"
#include "elsm/rng.hpp"
#include "elsm/tape.hpp"

namespace elsm {

enum class ModelVariant { kIelsm, kElsm };

enum class DecoderKind {
  kBernoulliKernel,   // p = 1 - tanh(|z_i - z_j|^2 / s2^2), fixed s2
  kBernoulliLearned,  // p = 1 - tanh(w_rho^2 |z_i - z_j|^2 + b_rho^2)
  kPoissonLearned,    // rho = exp(-w_rho^2 |z_i - z_j|^2 + b_rho)
};

struct DecoderSpec {
  DecoderKind kind = DecoderKind::kBernoulliKernel;
  double s2 = 1.0;
  double w_rho_init = 1.0;
  double b_rho_init = 0.0;
};

struct DecoderParams {
  DecoderSpec spec;
  Tensor w_rho = Tensor::scalar(1.0);  // learnable for the learned kinds
  Tensor b_rho = Tensor::scalar(0.0);

  static DecoderParams make(const DecoderSpec& spec) {
    DecoderParams p;
    p.spec = spec;
    p.w_rho = Tensor::scalar(spec.w_rho_init);
    p.b_rho = Tensor::scalar(spec.b_rho_init);
    return p;
  }
  bool has_learnables() const {
    return spec.kind != DecoderKind::kBernoulliKernel;
  }
};

// Inference-time model constants (generation values are in HyperParams).
struct InferencePriors {
  std::vector<double> m;   // length d
  double s = 1.0;
  double s1 = 0.1;
  double s3 = 1.0;         // split kernel radius (full model only)
  double s4 = 1.0;
  std::vector<double> pi;  // length K (full model only)
};

// Bernoulli probabilities are clamped to [kProbEps, 1 - kProbEps] and the
// Poisson log-intensity to [log(kPoissonFloor), kPoissonLogCap] so every
// log-probability stays finite for finite inputs.
inline constexpr double kProbEps = 1e-7;
inline constexpr double kPoissonFloor = 1e-10;
inline constexpr double kPoissonLogCap = 50.0;

double log_gaussian_density(const std::vector<double>& x,
                            const std::vector<double>& mean, double var);
double log_gaussian_density(const std::vector<double>& x,
                            const std::vector<double>& mean,
                            const std::vector<double>& var);

double edge_log_likelihood(double a, const std::vector<double>& zi,
                           const std::vector<double>& zj,
                           const DecoderParams& dec);

// Probability of observing at least one edge; Poisson intensities map
// through 1 - exp(-rho).
double edge_probability(const std::vector<double>& zi,
                        const std::vector<double>& zj,
                        const DecoderParams& dec);
double edge_probability_sq(double sq_dist, const DecoderParams& dec);

double transition_log_density(const std::vector<double>& z_t,
                              const Tensor& Z_prev, const Tensor& A_prev,
                              std::size_t i, double s1, double s4);

double joint_log_likelihood_ielsm(const DynamicNetwork& network,
                                  const std::vector<Tensor>& Z,
                                  const InferencePriors& priors,
                                  const DecoderParams& dec);

// Per-variable log densities entering the analytic discrete expectations.
struct ElsmDiscreteDensities {
  Tensor log_pi;            // 1 x K
  Tensor first_layer_logn;  // n x K, log N(z_i^(1) | mu_j, s1^2 I)
  Tensor split_log_p1;      // (T-1) x n, log g  (empty when T = 1)
  Tensor split_log_p0;      // (T-1) x n, log(1 - g)
  Tensor trans_log_h1;      // (T-1) x n, log N(z_i^(t) | alpha^(t), s1^2 I)
  Tensor trans_log_h0;      // (T-1) x n, log N(z_i^(t) | mu_i^(t), s1^2 I)
};

ElsmDiscreteDensities elsm_discrete_densities(const DynamicNetwork& network,
                                              const std::vector<Tensor>& Z,
                                              const Tensor& alpha,
                                              const Tensor& mu,
                                              const InferencePriors& priors);

// Analytic expectation of every c- and h-dependent term: each h term becomes
// h_hat * (term at h=1) + (1-h_hat) * (term at h=0), each c term becomes
// sum_j c_hat_ij * (term at c=j), and the c log-prior sum_j c_hat_ij log pi_j.
double expected_discrete_terms(const Tensor& c_hat, const Tensor& h_hat,
                               const ElsmDiscreteDensities& densities);

// Full-model joint with soft (or one-hot) discrete assignments. alpha is
// (T-1) x d, mu is K x d; both are samples from Q.
double joint_log_likelihood_elsm(const DynamicNetwork& network,
                                 const std::vector<Tensor>& Z,
                                 const Tensor& c_hat, const Tensor& h_hat,
                                 const Tensor& alpha, const Tensor& mu,
                                 const InferencePriors& priors,
                                 const DecoderParams& dec);

Tensor one_hot(const std::vector<int>& labels_1based, std::size_t K);

// Sum of all closed-form entropies: diagonal Gaussians for z (and alpha, mu),
// Bernoulli for h_hat, categorical for c_hat (0 log 0 := 0).
double entropies(const VariationalState& state);

struct ElboReport {
  double elbo = 0.0;
  double joint = 0.0;
  double entropy = 0.0;
  double edge = 0.0;
  double transition = 0.0;
  double prior = 0.0;
  double discrete = 0.0;
};

// ---- tape builders -------------------------------------------------------

struct DecoderVars {
  DecoderKind kind = DecoderKind::kBernoulliKernel;
  double s2 = 1.0;
  ad::VarId w_rho = -1, b_rho = -1;
};

DecoderVars bind_decoder(ad::Tape& tape, const DecoderParams& dec);

struct ElboVars {
  ad::VarId elbo = -1, joint = -1, entropy = -1;
  ad::VarId edge = -1, transition = -1, prior = -1, discrete = -1;
};

// z holds one reparameterized sample per snapshot. Component semantics:
// edge = decoder terms, transition = latent dynamics terms, prior = first
// layer prior (plus mu/alpha priors and the expected first-layer term for
// the full model), discrete = expected c prior and split-indicator terms.
ElboVars build_elbo_ielsm(ad::Tape& tape, const DynamicNetwork& network,
                          const std::vector<ad::VarId>& z,
                          const VariationalStateVars& state,
                          const InferencePriors& priors,
                          const DecoderVars& dec);

ElboVars build_elbo_elsm(ad::Tape& tape, const DynamicNetwork& network,
                         const std::vector<ad::VarId>& z,
                         const std::vector<ad::VarId>& alpha_samples,
                         const std::vector<ad::VarId>& mu_samples,
                         const VariationalStateVars& state,
                         const InferencePriors& priors,
                         const DecoderVars& dec);

ElboReport read_report(const ad::Tape& tape, const ElboVars& vars);

// ---- plain evaluation ------------------------------------------------------

// Standard-normal noise matching a VariationalState's shapes.
struct EpsDraws {
  std::vector<Tensor> z;      // per t, n x d
  std::vector<Tensor> alpha;  // per t >= 2, 1 x d
  std::vector<Tensor> mu;     // per j, 1 x d
};

EpsDraws zero_eps_draws(const VariationalState& state);
EpsDraws sample_eps_draws(const VariationalState& state, rng::Stream& stream);

// ELBO for a fixed VariationalState; the joint term is averaged over the
// supplied Monte Carlo draws, the entropy term is exact.
ElboReport elbo_report(ModelVariant variant, const DynamicNetwork& network,
                       const VariationalState& state,
                       const InferencePriors& priors, const DecoderParams& dec,
                       const std::vector<EpsDraws>& draws);

}  // namespace elsm
