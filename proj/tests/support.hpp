#pragma once

// Shared fixtures: small graphs, random model instances, and independent
// reference computations used as test oracles.

#include <functional>
#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/oracle.hpp"
#include "stdgmrf/prior.hpp"
#include "stdgmrf/rng.hpp"
#include "stdgmrf/types.hpp"
#include "stdgmrf/vi.hpp"

namespace testsupport {

using namespace stdgmrf;

// 4-cycle embedded as the unit square (with edge normals), degrees all 2
inline GraphSpec unit_square_graph() {
  std::vector<EdgeRecord> edges = {
      {0, 1, 1.0, true, 1.0, 0.0},
      {1, 2, 1.0, true, 0.0, 1.0},
      {2, 3, 1.0, true, -1.0, 0.0},
      {3, 0, 1.0, true, 0.0, -1.0},
  };
  return precompute_spectrum(load_graph(edges, false));
}

// single node with a unit self-loop (scalar models)
inline GraphSpec scalar_graph() {
  return precompute_spectrum(load_graph({{0, 0, 1.0}}, false));
}

inline GraphSpec path_graph(int n) {
  std::vector<EdgeRecord> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return precompute_spectrum(load_graph(edges, false));
}

// random connected graph: spanning tree plus extra edges, unit weights
inline GraphSpec random_connected_graph(Rng& rng, int n, int extra_edges = 0) {
  std::vector<EdgeRecord> edges;
  std::vector<std::pair<int, int>> present;
  for (int i = 1; i < n; ++i) {
    const int j = static_cast<int>(rng.index(i));
    edges.push_back({j, i, 1.0});
    present.emplace_back(j, i);
  }
  int attempts = 0;
  while (extra_edges > 0 && attempts < 100) {
    ++attempts;
    int a = static_cast<int>(rng.index(n));
    int b = static_cast<int>(rng.index(n));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    bool dup = false;
    for (const auto& e : present) dup |= (e.first == a && e.second == b);
    if (dup) continue;
    edges.push_back({a, b, 1.0});
    present.emplace_back(a, b);
    --extra_edges;
  }
  return precompute_spectrum(load_graph(edges, false));
}

inline SpatialLayerParams random_spatial_layer(Rng& rng) {
  SpatialLayerParams p;
  p.alpha = 1.0 + rng.uniform(-0.3, 0.3);
  p.beta = p.alpha * rng.uniform(-0.6, 0.6);
  p.gamma = rng.uniform(0.0, 1.2);
  p.bias = 0.0;
  return p;
}

inline TemporalLayerParams random_temporal_layer(Rng& rng, bool allow_advdiff) {
  TemporalLayerParams p;
  const int pick = static_cast<int>(rng.index(allow_advdiff ? 4 : 3));
  switch (pick) {
    case 0:
      p.variant = TemporalVariant::AR;
      p.lambda = rng.uniform(0.2, 0.9);
      break;
    case 1:
      p.variant = TemporalVariant::Diffusion;
      p.lambda = rng.uniform(0.2, 0.9);
      p.omega = rng.uniform(-0.15, 0.15);
      break;
    case 2:
      p.variant = TemporalVariant::DirectedFlow;
      p.lambda = rng.uniform(0.2, 0.9);
      p.omega = rng.uniform(-0.1, 0.1);
      p.zeta = rng.uniform(-0.1, 0.1);
      break;
    default:
      p.variant = TemporalVariant::AdvectionDiffusion;
      p.d = rng.uniform(0.05, 0.2);
      p.velocity << rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3);
      break;
  }
  return p;
}

inline ModelParams random_model(Rng& rng, const GraphSpec& g, int n_steps, int markov_order,
                                int l_spatial, int l_temporal, bool time_invariant = false) {
  ModelParams m;
  m.n_steps = n_steps;
  m.markov_order = markov_order;
  m.time_invariant = time_invariant;
  m.spatial.resize(m.n_groups());
  for (auto& stack : m.spatial) {
    stack.resize(l_spatial);
    for (auto& layer : stack) layer = random_spatial_layer(rng);
  }
  m.bias_s.resize(m.n_groups());
  m.bias_f.resize(m.n_groups());
  for (auto& b : m.bias_s) b = rng.uniform(-0.5, 0.5);
  for (auto& b : m.bias_f) b = rng.uniform(-0.5, 0.5);
  const int tgroups = time_invariant ? 1 : n_steps;
  m.temporal.assign(markov_order, {});
  for (auto& lag : m.temporal) {
    lag.resize(tgroups);
    for (auto& stack : lag) {
      stack.resize(l_temporal);
      for (auto& layer : stack) layer = random_temporal_layer(rng, g.has_normals());
    }
  }
  validate_model(m, g);
  return m;
}

inline ObservationSet random_observations(Rng& rng, int n_steps, int n_nodes, double frac,
                                          double sigma_lo = 0.1, double sigma_hi = 0.5) {
  ObservationSet obs;
  obs.steps.resize(n_steps);
  for (int k = 0; k < n_steps; ++k)
    for (int i = 0; i < n_nodes; ++i)
      if (rng.uniform() < frac)
        obs.steps[k].push_back({i, rng.normal(), rng.uniform(sigma_lo, sigma_hi)});
  return obs;
}

inline VariationalParams random_variational(Rng& rng, const GraphSpec& g, int n_steps,
                                            bool temporal) {
  const Eigen::Index dim = static_cast<Eigen::Index>(n_steps) * g.n_nodes;
  VariationalParams vp;
  vp.nu = 0.5 * rng.normal_vector(dim);
  vp.log_rho = 0.3 * rng.normal_vector(dim);
  vp.log_psi = 0.3 * rng.normal_vector(dim);
  vp.s_tilde.resize(n_steps);
  for (auto& layer : vp.s_tilde) layer = random_spatial_layer(rng);
  if (temporal && n_steps > 1) {
    vp.f_tilde.resize(n_steps - 1);
    for (auto& layer : vp.f_tilde) {
      layer.variant = TemporalVariant::Diffusion;
      layer.lambda = rng.uniform(0.2, 0.8);
      layer.omega = rng.uniform(-0.1, 0.1);
    }
  }
  return vp;
}

// central finite differences, step h
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double fp = f(x);
    x[i] = orig - h;
    const double fm = f(x);
    x[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// dense log|det| via LU
inline double dense_logabsdet(const Mat& a) {
  Eigen::PartialPivLU<Mat> lu(a);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) acc += std::log(std::abs(lu.matrixLU()(i, i)));
  return acc;
}

// dense variational transform P = diag(P_k) * Ftilde
inline Mat dense_variational_p(const VariationalParams& vp, const GraphSpec& g) {
  const int n = g.n_nodes;
  const int ks = static_cast<int>(vp.s_tilde.size());
  const Eigen::Index dim = static_cast<Eigen::Index>(ks) * n;
  Mat blocks = Mat::Zero(dim, dim);
  for (int k = 0; k < ks; ++k) {
    const Mat pk = Mat(step(vp.log_rho, k, n).array().exp().matrix().asDiagonal()) *
                   dense_spatial_matrix(g, vp.s_tilde[k]) *
                   Mat(step(vp.log_psi, k, n).array().exp().matrix().asDiagonal());
    blocks.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k) * n, n, n) = pk;
  }
  Mat ftilde = Mat::Identity(dim, dim);
  if (vp.has_temporal())
    for (int k = 1; k < ks; ++k)
      ftilde.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k - 1) * n, n, n) =
          dense_temporal_matrix(g, vp.f_tilde[k - 1]);
  return blocks * ftilde;
}

}  // namespace testsupport
