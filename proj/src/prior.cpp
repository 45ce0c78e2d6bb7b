#include "stdgmrf/prior.hpp"

#include <string>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

void validate_model(const ModelParams& m, const GraphSpec& g) {
  if (m.n_steps < 1) throw InvalidInput("n_steps must be >= 1");
  if (m.markov_order < 1) throw InvalidInput("markov_order must be >= 1");
  const int groups = m.n_groups();
  if (static_cast<int>(m.spatial.size()) != groups)
    throw InvalidInput("spatial stacks: expected " + std::to_string(groups) + " groups");
  if (static_cast<int>(m.bias_s.size()) != groups || static_cast<int>(m.bias_f.size()) != groups)
    throw InvalidInput("bias vectors must have one entry per step group");
  if (static_cast<int>(m.temporal.size()) != m.markov_order)
    throw InvalidInput("temporal stacks: expected one list per lag");
  const int tgroups = m.time_invariant ? 1 : m.n_steps;
  for (const auto& lag : m.temporal)
    if (static_cast<int>(lag.size()) != tgroups)
      throw InvalidInput("temporal lag list has wrong group count");
  for (const auto& stack : m.spatial)
    for (const auto& layer : stack)
      if (layer.bias != 0.0)
        throw InvalidInput("per-layer spatial bias must be 0 inside model stacks; use bias_s");
  (void)g;
}

Vec f_apply(const ModelParams& m, const GraphSpec& g, const Vec& x, bool with_bias) {
  const int n = g.n_nodes;
  Vec h(x.size());
  for (int k = 0; k < m.n_steps; ++k) {
    Vec hk = step(x, k, n);
    for (int tau = 1; tau <= m.markov_order && tau <= k; ++tau) {
      if (!m.has_transition(k, tau)) continue;
      hk -= compose_apply(g, m.temporal_stack(k, tau), step(x, k - tau, n));
    }
    if (with_bias) hk.array() += m.bias_f[m.group_of(k)];
    step(h, k, n) = hk;
  }
  return h;
}

Vec ft_apply(const ModelParams& m, const GraphSpec& g, const Vec& h) {
  const int n = g.n_nodes;
  Vec out = h;
  for (int k = 0; k < m.n_steps; ++k) {
    for (int tau = 1; tau <= m.markov_order && k + tau < m.n_steps; ++tau) {
      if (!m.has_transition(k + tau, tau)) continue;
      step(out, k, n) -=
          compose_apply_transpose(g, m.temporal_stack(k + tau, tau), step(h, k + tau, n));
    }
  }
  return out;
}

Vec s_apply(const ModelParams& m, const GraphSpec& g, const Vec& h, bool with_bias) {
  const int n = g.n_nodes;
  Vec z(h.size());
  for (int k = 0; k < m.n_steps; ++k) {
    Vec zk = step(h, k, n);
    for (const auto& layer : m.spatial_stack(k)) zk = spatial_apply_linear(g, layer, zk);
    if (with_bias) zk.array() += m.bias_s[m.group_of(k)];
    step(z, k, n) = zk;
  }
  return z;
}

Vec st_apply(const ModelParams& m, const GraphSpec& g, const Vec& z) {
  const int n = g.n_nodes;
  Vec out(z.size());
  for (int k = 0; k < m.n_steps; ++k) {
    Vec hk = step(z, k, n);
    const auto& stack = m.spatial_stack(k);
    for (auto it = stack.rbegin(); it != stack.rend(); ++it)
      hk = spatial_apply_transpose(g, *it, hk);
    step(out, k, n) = hk;
  }
  return out;
}

Vec precision_matvec(const ModelParams& m, const GraphSpec& g, const Vec& x) {
  return ft_apply(m, g, st_apply(m, g, s_apply(m, g, f_apply(m, g, x, false), false)));
}

Vec stacked_bias_f(const ModelParams& m, const GraphSpec& g) {
  Vec b(static_cast<Eigen::Index>(m.n_steps) * g.n_nodes);
  for (int k = 0; k < m.n_steps; ++k)
    step(b, k, g.n_nodes).setConstant(m.bias_f[m.group_of(k)]);
  return b;
}

Vec stacked_bias_s(const ModelParams& m, const GraphSpec& g) {
  Vec b(static_cast<Eigen::Index>(m.n_steps) * g.n_nodes);
  for (int k = 0; k < m.n_steps; ++k)
    step(b, k, g.n_nodes).setConstant(m.bias_s[m.group_of(k)]);
  return b;
}

Vec information_vector(const ModelParams& m, const GraphSpec& g) {
  // eta = F^T Q c with Q c = -S^T (S b_f + b_s)
  Vec w = s_apply(m, g, stacked_bias_f(m, g), false) + stacked_bias_s(m, g);
  return -ft_apply(m, g, st_apply(m, g, w));
}

double prior_logdet(const ModelParams& m, const GraphSpec& g) {
  double acc = 0.0;
  for (int k = 0; k < m.n_steps; ++k)
    for (const auto& layer : m.spatial_stack(k)) acc += spatial_logdet(g, layer);
  return acc;
}

}  // namespace stdgmrf
