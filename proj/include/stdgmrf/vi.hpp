#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/prior.hpp"
#include "stdgmrf/rng.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

// Variational distribution q(x) = N(nu, P P^T) with
//   P = diag(P_0, ..., P_K) Ftilde,   P_k = diag(rho_k) Stilde_k diag(psi_k),
// where Stilde_k is a single spatial layer (bias unused) and Ftilde an
// optional unit lower block bidiagonal temporal coupling
// (Ftilde z)_k = z_k + Ftilde_k z_{k-1}. rho and psi are kept in log space.
struct VariationalParams {
  Vec nu;
  Vec log_rho;
  Vec log_psi;
  std::vector<SpatialLayerParams> s_tilde;   // one layer per step
  std::vector<TemporalLayerParams> f_tilde;  // f_tilde[k-1] couples step k to k-1; empty = off

  bool has_temporal() const { return !f_tilde.empty(); }
};

struct TrainConfig {
  int iterations = 10000;
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int mc_samples = 1;
  std::uint64_t seed = 0;
  // parameters whose layout name starts with any of these stay at their
  // initial value (e.g. {"theta.bias"} trains a zero-bias model)
  std::vector<std::string> freeze_prefixes;
};

void validate_variational(const VariationalParams& vp, int n_steps, int n_nodes);

// Reparameterized sample x = P (Ftilde z) + nu for caller-supplied noise z.
Vec q_sample(const VariationalParams& vp, const GraphSpec& g, const Vec& noise);

// (1/2) log|det(P P^T)| = sum_k [sum_i log rho + log|det Stilde_k| + sum_i log psi].
double q_entropy_logdet(const VariationalParams& vp, const GraphSpec& g);

// Single-draw-averaged ELBO with additive constants dropped:
//   -1/2 E||g(x)||^2 - 1/2 E sum_k ||R^-1/2 (y_k - H_k x_k)||^2
//   + log|det G| + 1/2 log|det Lambda| - sum log sigma.
double elbo(const ModelParams& m, const VariationalParams& vp, const GraphSpec& g,
            const ObservationSet& obs, const std::vector<Vec>& noise_draws);

// --- flat parameter vector ---

struct ParamBlock {
  std::string name;
  Eigen::Index offset = 0;
  Eigen::Index length = 1;
};

std::vector<ParamBlock> param_layout(const ModelParams& m, const VariationalParams& vp);
Eigen::Index param_count(const ModelParams& m, const VariationalParams& vp);
Vec flatten_params(const ModelParams& m, const VariationalParams& vp);
void unflatten_params(const Vec& flat, ModelParams& m, VariationalParams& vp);

struct GradientResult {
  double value = 0.0;  // the ELBO for the given noise
  Vec grad;            // exact gradient in flatten order
};

// Exact reverse-accumulated gradient of elbo() for the given noise draws.
// Deterministic given (params, noise); log-determinant terms use analytic
// per-layer partials.
GradientResult elbo_gradient(const ModelParams& m, const VariationalParams& vp,
                             const GraphSpec& g, const ObservationSet& obs,
                             const std::vector<Vec>& noise_draws);

struct TrainResult {
  std::vector<double> elbo_trace;
};

// Adam ascent on the ELBO with fresh noise each iteration; updates m and vp
// in place. Throws TrainingDiverged when the objective turns non-finite.
TrainResult train(ModelParams& m, VariationalParams& vp, const GraphSpec& g,
                  const ObservationSet& obs, const TrainConfig& cfg);

// --- default initialization used by the CLI and benchmarks ---

// spatial alpha = 1 + U(-0.1, 0.1), beta = U(-0.1, 0.1), gamma = 1, bias 0;
// temporal lambda = 1, omega = zeta = 0, d = 0.1, v = 0.
ModelParams make_default_model(const GraphSpec& g, int n_steps, int markov_order,
                               int l_spatial, int l_temporal, TemporalVariant variant,
                               bool time_invariant, Rng& rng);

// nu copied from observations (0 where unobserved), rho = psi = 1,
// Stilde near identity, optional temporal diffusion coupling.
VariationalParams make_default_variational(const GraphSpec& g, int n_steps,
                                           const ObservationSet& obs, bool vi_temporal,
                                           Rng& rng);

}  // namespace stdgmrf
