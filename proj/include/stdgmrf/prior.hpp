#pragma once

#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/layers.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

// Joint spatiotemporal model over x_{0:K}:
//   h_k = x_k - sum_{tau=1..min(k,p)} F_{k,tau} x_{k-tau} + b_f[k] * 1
//   z_k = S_k h_k + b_s[k] * 1
// with S_k a composition of spatial layers and F_{k,tau} a composition of
// temporal layers. z ~ N(0, I) implicitly defines the prior with precision
// F^T S^T S F.
//
// Parameter sharing: with time_invariant = true there are two step groups,
// {0} and {1..K}; spatial stacks, temporal stacks, and biases are stored
// once per group so mutating the shared record changes every k >= 1.
// An empty temporal stack means the lag term is absent (F_{k,tau} = 0);
// a model with all stacks empty is a set of independent per-step DGMRFs.
struct ModelParams {
  int n_steps = 1;       // K + 1 time points
  int markov_order = 1;  // p >= 1
  bool time_invariant = false;

  std::vector<std::vector<SpatialLayerParams>> spatial;  // [group][layer]
  std::vector<double> bias_s;                            // [group]
  // temporal[tau-1][group][layer]; group dimension is 1 when time_invariant,
  // otherwise n_steps (entries for k < tau stay unused).
  std::vector<std::vector<std::vector<TemporalLayerParams>>> temporal;
  std::vector<double> bias_f;  // [group]

  int n_groups() const { return time_invariant ? 2 : n_steps; }
  int group_of(int k) const { return time_invariant ? (k > 0 ? 1 : 0) : k; }
  int tgroup_of(int k) const { return time_invariant ? 0 : k; }

  const std::vector<SpatialLayerParams>& spatial_stack(int k) const {
    return spatial[group_of(k)];
  }
  // layers of the lag-tau transition into step k; empty if absent
  const std::vector<TemporalLayerParams>& temporal_stack(int k, int tau) const {
    return temporal[tau - 1][tgroup_of(k)];
  }
  bool has_transition(int k, int tau) const {
    return tau <= markov_order && tau <= k && !temporal_stack(k, tau).empty();
  }
};

// Structural validation against a graph; throws InvalidInput on mismatch.
void validate_model(const ModelParams& m, const GraphSpec& g);

// Temporal map h = F x (+ b_f per step when with_bias).
Vec f_apply(const ModelParams& m, const GraphSpec& g, const Vec& x, bool with_bias = true);
// Transpose temporal map F^T h; never applies bias.
Vec ft_apply(const ModelParams& m, const GraphSpec& g, const Vec& h);
// Spatial map z = S h (+ b_s per step when with_bias).
Vec s_apply(const ModelParams& m, const GraphSpec& g, const Vec& h, bool with_bias = true);
// Transpose spatial map S^T z; never applies bias.
Vec st_apply(const ModelParams& m, const GraphSpec& g, const Vec& z);

// Omega x = F^T S^T S F x via four bias-free sparse passes.
Vec precision_matvec(const ModelParams& m, const GraphSpec& g, const Vec& x);

// eta = Omega mu = -F^T S^T (S b_f + b_s), computed inverse-free.
Vec information_vector(const ModelParams& m, const GraphSpec& g);

// log|det(SF)| = sum_k sum_l log|det G_{k,l}|; independent of all temporal
// parameters since F is unit lower block triangular.
double prior_logdet(const ModelParams& m, const GraphSpec& g);

// Stacked per-step bias vectors b * 1 (helpers shared with the oracles).
Vec stacked_bias_f(const ModelParams& m, const GraphSpec& g);
Vec stacked_bias_s(const ModelParams& m, const GraphSpec& g);

}  // namespace stdgmrf
