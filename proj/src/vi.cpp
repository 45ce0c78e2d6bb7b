#include "stdgmrf/vi.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

void validate_variational(const VariationalParams& vp, int n_steps, int n_nodes) {
  const Eigen::Index dim = static_cast<Eigen::Index>(n_steps) * n_nodes;
  if (vp.nu.size() != dim || vp.log_rho.size() != dim || vp.log_psi.size() != dim)
    throw InvalidInput("variational fields must have (K+1)*N entries");
  if (static_cast<int>(vp.s_tilde.size()) != n_steps)
    throw InvalidInput("expected one variational spatial layer per step");
  if (vp.has_temporal() && static_cast<int>(vp.f_tilde.size()) != n_steps - 1)
    throw InvalidInput("expected K variational temporal layers");
}

Vec q_sample(const VariationalParams& vp, const GraphSpec& g, const Vec& noise) {
  const int n = g.n_nodes;
  const int n_steps = static_cast<int>(vp.s_tilde.size());
  Vec x(noise.size());
  for (int k = 0; k < n_steps; ++k) {
    Vec w = step(noise, k, n);
    if (vp.has_temporal() && k >= 1)
      w += temporal_apply(g, vp.f_tilde[k - 1], step(noise, k - 1, n));
    Vec u = step(vp.log_psi, k, n).array().exp() * w.array();
    Vec t = spatial_apply_linear(g, vp.s_tilde[k], u);
    step(x, k, n) = step(vp.log_rho, k, n).array().exp() * t.array() +
                    step(vp.nu, k, n).array();
  }
  return x;
}

double q_entropy_logdet(const VariationalParams& vp, const GraphSpec& g) {
  double acc = vp.log_rho.sum() + vp.log_psi.sum();
  for (const auto& layer : vp.s_tilde) acc += spatial_logdet(g, layer);
  return acc;
}

// ---------------------------------------------------------------------------
// flat parameter vector

namespace {

// Visits every trainable scalar and vector block in a fixed canonical order.
// All flatten/unflatten/layout functions go through this single traversal.
template <typename ScalarFn, typename VectorFn>
void visit_params(ModelParams& m, VariationalParams& vp, ScalarFn&& scalar, VectorFn&& vector) {
  for (int gi = 0; gi < m.n_groups(); ++gi) {
    for (size_t l = 0; l < m.spatial[gi].size(); ++l) {
      const std::string base =
          "theta.spatial.g" + std::to_string(gi) + ".l" + std::to_string(l);
      scalar(base + ".alpha", m.spatial[gi][l].alpha);
      scalar(base + ".beta", m.spatial[gi][l].beta);
      scalar(base + ".gamma", m.spatial[gi][l].gamma);
    }
  }
  for (size_t gi = 0; gi < m.bias_s.size(); ++gi)
    scalar("theta.bias_s.g" + std::to_string(gi), m.bias_s[gi]);
  for (size_t tau = 0; tau < m.temporal.size(); ++tau) {
    for (size_t gi = 0; gi < m.temporal[tau].size(); ++gi) {
      for (size_t l = 0; l < m.temporal[tau][gi].size(); ++l) {
        auto& p = m.temporal[tau][gi][l];
        const std::string base = "theta.temporal.lag" + std::to_string(tau + 1) + ".g" +
                                 std::to_string(gi) + ".l" + std::to_string(l);
        switch (p.variant) {
          case TemporalVariant::AR:
            scalar(base + ".lambda", p.lambda);
            break;
          case TemporalVariant::Diffusion:
            scalar(base + ".lambda", p.lambda);
            scalar(base + ".omega", p.omega);
            break;
          case TemporalVariant::DirectedFlow:
            scalar(base + ".lambda", p.lambda);
            scalar(base + ".omega", p.omega);
            scalar(base + ".zeta", p.zeta);
            break;
          case TemporalVariant::AdvectionDiffusion:
            scalar(base + ".d", p.d);
            scalar(base + ".vx", p.velocity[0]);
            scalar(base + ".vy", p.velocity[1]);
            break;
        }
      }
    }
  }
  for (size_t gi = 0; gi < m.bias_f.size(); ++gi)
    scalar("theta.bias_f.g" + std::to_string(gi), m.bias_f[gi]);

  vector("phi.nu", vp.nu);
  vector("phi.log_rho", vp.log_rho);
  vector("phi.log_psi", vp.log_psi);
  for (size_t k = 0; k < vp.s_tilde.size(); ++k) {
    const std::string base = "phi.s_tilde.k" + std::to_string(k);
    scalar(base + ".alpha", vp.s_tilde[k].alpha);
    scalar(base + ".beta", vp.s_tilde[k].beta);
    scalar(base + ".gamma", vp.s_tilde[k].gamma);
  }
  for (size_t k = 0; k < vp.f_tilde.size(); ++k) {
    auto& p = vp.f_tilde[k];
    const std::string base = "phi.f_tilde.k" + std::to_string(k + 1);
    switch (p.variant) {
      case TemporalVariant::AR:
        scalar(base + ".lambda", p.lambda);
        break;
      case TemporalVariant::Diffusion:
        scalar(base + ".lambda", p.lambda);
        scalar(base + ".omega", p.omega);
        break;
      case TemporalVariant::DirectedFlow:
        scalar(base + ".lambda", p.lambda);
        scalar(base + ".omega", p.omega);
        scalar(base + ".zeta", p.zeta);
        break;
      case TemporalVariant::AdvectionDiffusion:
        scalar(base + ".d", p.d);
        scalar(base + ".vx", p.velocity[0]);
        scalar(base + ".vy", p.velocity[1]);
        break;
    }
  }
}

}  // namespace

std::vector<ParamBlock> param_layout(const ModelParams& m, const VariationalParams& vp) {
  auto& mm = const_cast<ModelParams&>(m);
  auto& vv = const_cast<VariationalParams&>(vp);
  std::vector<ParamBlock> blocks;
  Eigen::Index offset = 0;
  visit_params(
      mm, vv,
      [&](const std::string& name, double&) {
        blocks.push_back({name, offset, 1});
        ++offset;
      },
      [&](const std::string& name, Vec& v) {
        blocks.push_back({name, offset, v.size()});
        offset += v.size();
      });
  return blocks;
}

Eigen::Index param_count(const ModelParams& m, const VariationalParams& vp) {
  const auto blocks = param_layout(m, vp);
  return blocks.empty() ? 0 : blocks.back().offset + blocks.back().length;
}

Vec flatten_params(const ModelParams& m, const VariationalParams& vp) {
  auto& mm = const_cast<ModelParams&>(m);
  auto& vv = const_cast<VariationalParams&>(vp);
  std::vector<double> out;
  visit_params(
      mm, vv, [&](const std::string&, double& x) { out.push_back(x); },
      [&](const std::string&, Vec& v) { out.insert(out.end(), v.data(), v.data() + v.size()); });
  return Eigen::Map<Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void unflatten_params(const Vec& flat, ModelParams& m, VariationalParams& vp) {
  Eigen::Index pos = 0;
  visit_params(
      m, vp,
      [&](const std::string&, double& x) { x = flat[pos++]; },
      [&](const std::string&, Vec& v) {
        v = flat.segment(pos, v.size());
        pos += v.size();
      });
  if (pos != flat.size()) throw InvalidInput("flat parameter vector has wrong length");
}

// ---------------------------------------------------------------------------
// ELBO forward/backward

namespace {

struct DrawCache {
  std::vector<Vec> w, u, t;                       // variational path, per step
  Vec xhat;                                       // sampled state
  std::vector<std::vector<std::vector<Vec>>> tc;  // tc[k][tau-1]: temporal chain a_0..a_L
  std::vector<std::vector<Vec>> sc;               // sc[k]: spatial chain c_0..c_L (pre-bias)
  std::vector<Vec> zp;                            // prior residual per step
  Vec residual_scaled;                            // (y - x)/sigma stacked over observations
};

double forward_draw(const ModelParams& m, const VariationalParams& vp, const GraphSpec& g,
                    const ObservationSet& obs, const Vec& noise, DrawCache& c) {
  const int n = g.n_nodes;
  const int ks = m.n_steps;
  c.w.resize(ks);
  c.u.resize(ks);
  c.t.resize(ks);
  c.xhat.resize(noise.size());
  for (int k = 0; k < ks; ++k) {
    c.w[k] = step(noise, k, n);
    if (vp.has_temporal() && k >= 1)
      c.w[k] += temporal_apply(g, vp.f_tilde[k - 1], step(noise, k - 1, n));
    c.u[k] = step(vp.log_psi, k, n).array().exp() * c.w[k].array();
    c.t[k] = spatial_apply_linear(g, vp.s_tilde[k], c.u[k]);
    step(c.xhat, k, n) =
        step(vp.log_rho, k, n).array().exp() * c.t[k].array() + step(vp.nu, k, n).array();
  }

  c.tc.assign(ks, {});
  c.sc.resize(ks);
  c.zp.resize(ks);
  double value = 0.0;
  for (int k = 0; k < ks; ++k) {
    Vec hk = step(c.xhat, k, n);
    hk.array() += m.bias_f[m.group_of(k)];
    c.tc[k].assign(m.markov_order, {});
    for (int tau = 1; tau <= m.markov_order && tau <= k; ++tau) {
      if (!m.has_transition(k, tau)) continue;
      const auto& stack = m.temporal_stack(k, tau);
      auto& chain = c.tc[k][tau - 1];
      chain.resize(stack.size() + 1);
      chain[0] = step(c.xhat, k - tau, n);
      for (size_t l = 0; l < stack.size(); ++l)
        chain[l + 1] = temporal_apply(g, stack[l], chain[l]);
      hk -= chain.back();
    }
    const auto& sstack = m.spatial_stack(k);
    auto& schain = c.sc[k];
    schain.resize(sstack.size() + 1);
    schain[0] = std::move(hk);
    for (size_t l = 0; l < sstack.size(); ++l)
      schain[l + 1] = spatial_apply_linear(g, sstack[l], schain[l]);
    c.zp[k] = schain.back();
    c.zp[k].array() += m.bias_s[m.group_of(k)];
    value -= 0.5 * c.zp[k].squaredNorm();
  }

  c.residual_scaled.resize(obs.total());
  Eigen::Index ridx = 0;
  for (int k = 0; k < obs.n_steps(); ++k) {
    for (const auto& o : obs.steps[k]) {
      const double r = (o.value - c.xhat[static_cast<Eigen::Index>(k) * n + o.node]) / o.sigma;
      c.residual_scaled[ridx++] = r;
      value -= 0.5 * r * r;
    }
  }
  return value;
}

struct GradAccum {
  ModelParams theta;
  VariationalParams phi;
};

GradAccum make_zero_grads(const ModelParams& m, const VariationalParams& vp) {
  GradAccum grads{m, vp};
  visit_params(
      grads.theta, grads.phi, [](const std::string&, double& x) { x = 0.0; },
      [](const std::string&, Vec& v) { v.setZero(); });
  return grads;
}

void add_spatial(SpatialLayerParams& dst, const SpatialGrad& sg) {
  dst.alpha += sg.alpha;
  dst.beta += sg.beta;
  dst.gamma += sg.gamma;
  dst.bias += sg.bias;
}

void add_temporal(TemporalLayerParams& dst, const TemporalGrad& tg) {
  dst.lambda += tg.lambda;
  dst.omega += tg.omega;
  dst.zeta += tg.zeta;
  dst.d += tg.d;
  dst.velocity[0] += tg.vx;
  dst.velocity[1] += tg.vy;
}

void backward_draw(const ModelParams& m, const VariationalParams& vp, const GraphSpec& g,
                   const ObservationSet& obs, const Vec& noise, const DrawCache& c,
                   double scale, GradAccum& grads) {
  const int n = g.n_nodes;
  const int ks = m.n_steps;
  Vec xb = Vec::Zero(c.xhat.size());

  for (int k = 0; k < ks; ++k) {
    Vec ub = -scale * c.zp[k];
    grads.theta.bias_s[m.group_of(k)] += ub.sum();
    const auto& sstack = m.spatial_stack(k);
    for (int l = static_cast<int>(sstack.size()) - 1; l >= 0; --l) {
      SpatialGrad sg;
      ub = spatial_backprop(g, sstack[l], c.sc[k][l], ub, sg);
      add_spatial(grads.theta.spatial[m.group_of(k)][l], sg);
    }
    // ub is now the adjoint of h_k
    step(xb, k, n) += ub;
    grads.theta.bias_f[m.group_of(k)] += ub.sum();
    for (int tau = 1; tau <= m.markov_order && tau <= k; ++tau) {
      if (!m.has_transition(k, tau)) continue;
      const auto& stack = m.temporal_stack(k, tau);
      const auto& chain = c.tc[k][tau - 1];
      Vec tb = -ub;
      std::vector<TemporalLayerParams>& gstack =
          grads.theta.temporal[tau - 1][m.tgroup_of(k)];
      for (int l = static_cast<int>(stack.size()) - 1; l >= 0; --l) {
        TemporalGrad tg;
        tb = temporal_backprop(g, stack[l], chain[l], tb, tg);
        add_temporal(gstack[l], tg);
      }
      step(xb, k - tau, n) += tb;
    }
  }

  Eigen::Index ridx = 0;
  for (int k = 0; k < obs.n_steps(); ++k) {
    for (const auto& o : obs.steps[k]) {
      xb[static_cast<Eigen::Index>(k) * n + o.node] +=
          scale * c.residual_scaled[ridx++] / o.sigma;
    }
  }

  // back through x = rho .* (Stilde (psi .* w)) + nu
  for (int k = 0; k < ks; ++k) {
    const Vec xbk = step(xb, k, n);
    step(grads.phi.nu, k, n) += xbk;
    const Vec rho = step(vp.log_rho, k, n).array().exp();
    step(grads.phi.log_rho, k, n).array() += xbk.array() * c.t[k].array() * rho.array();
    Vec tb = rho.cwiseProduct(xbk);
    SpatialGrad sg;
    Vec ub = spatial_backprop(g, vp.s_tilde[k], c.u[k], tb, sg);
    add_spatial(grads.phi.s_tilde[k], sg);
    const Vec psi = step(vp.log_psi, k, n).array().exp();
    step(grads.phi.log_psi, k, n).array() += ub.array() * c.w[k].array() * psi.array();
    if (vp.has_temporal() && k >= 1) {
      Vec wb = psi.cwiseProduct(ub);
      TemporalGrad tg;
      temporal_backprop(g, vp.f_tilde[k - 1], step(noise, k - 1, n), wb, tg);
      add_temporal(grads.phi.f_tilde[k - 1], tg);
    }
  }
}

}  // namespace

double elbo(const ModelParams& m, const VariationalParams& vp, const GraphSpec& g,
            const ObservationSet& obs, const std::vector<Vec>& noise_draws) {
  validate_model(m, g);
  validate_variational(vp, m.n_steps, g.n_nodes);
  obs.validate(m.n_steps, g.n_nodes);
  if (noise_draws.empty()) throw InvalidInput("at least one noise draw is required");
  double value = 0.0;
  DrawCache cache;
  for (const auto& z : noise_draws) value += forward_draw(m, vp, g, obs, z, cache);
  value /= static_cast<double>(noise_draws.size());
  return value + prior_logdet(m, g) + q_entropy_logdet(vp, g) - obs.log_sigma_sum();
}

GradientResult elbo_gradient(const ModelParams& m, const VariationalParams& vp,
                             const GraphSpec& g, const ObservationSet& obs,
                             const std::vector<Vec>& noise_draws) {
  validate_model(m, g);
  validate_variational(vp, m.n_steps, g.n_nodes);
  obs.validate(m.n_steps, g.n_nodes);
  if (noise_draws.empty()) throw InvalidInput("at least one noise draw is required");

  GradAccum grads = make_zero_grads(m, vp);
  const double scale = 1.0 / static_cast<double>(noise_draws.size());
  double value = 0.0;
  for (const auto& z : noise_draws) {
    DrawCache cache;
    value += scale * forward_draw(m, vp, g, obs, z, cache);
    backward_draw(m, vp, g, obs, z, cache, scale, grads);
  }

  // deterministic log-determinant terms
  value += prior_logdet(m, g) + q_entropy_logdet(vp, g) - obs.log_sigma_sum();
  for (int k = 0; k < m.n_steps; ++k) {
    const int gi = m.group_of(k);
    for (size_t l = 0; l < m.spatial[gi].size(); ++l)
      add_spatial(grads.theta.spatial[gi][l], spatial_logdet_partials(g, m.spatial[gi][l]));
  }
  grads.phi.log_rho.array() += 1.0;
  grads.phi.log_psi.array() += 1.0;
  for (size_t k = 0; k < vp.s_tilde.size(); ++k)
    add_spatial(grads.phi.s_tilde[k], spatial_logdet_partials(g, vp.s_tilde[k]));

  GradientResult out;
  out.value = value;
  out.grad = flatten_params(grads.theta, grads.phi);
  return out;
}

TrainResult train(ModelParams& m, VariationalParams& vp, const GraphSpec& g,
                  const ObservationSet& obs, const TrainConfig& cfg) {
  validate_model(m, g);
  validate_variational(vp, m.n_steps, g.n_nodes);
  obs.validate(m.n_steps, g.n_nodes);
  if (cfg.mc_samples < 1) throw InvalidInput("mc_samples must be >= 1");

  Rng rng(cfg.seed);
  Vec params = flatten_params(m, vp);
  Vec mom1 = Vec::Zero(params.size());
  Vec mom2 = Vec::Zero(params.size());
  Vec active = Vec::Ones(params.size());
  if (!cfg.freeze_prefixes.empty()) {
    for (const auto& b : param_layout(m, vp))
      for (const auto& prefix : cfg.freeze_prefixes)
        if (b.name.rfind(prefix, 0) == 0) active.segment(b.offset, b.length).setZero();
  }
  TrainResult result;
  result.elbo_trace.reserve(cfg.iterations);
  const Eigen::Index dim = static_cast<Eigen::Index>(m.n_steps) * g.n_nodes;

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    std::vector<Vec> noise;
    noise.reserve(cfg.mc_samples);
    for (int s = 0; s < cfg.mc_samples; ++s) noise.push_back(rng.normal_vector(dim));
    GradientResult gr = elbo_gradient(m, vp, g, obs, noise);
    if (!std::isfinite(gr.value) || !gr.grad.allFinite())
      throw TrainingDiverged(iter, "non-finite ELBO or gradient");
    result.elbo_trace.push_back(gr.value);

    // Adam ascent
    mom1 = cfg.adam_beta1 * mom1 + (1.0 - cfg.adam_beta1) * gr.grad;
    mom2 = cfg.adam_beta2 * mom2.array() + (1.0 - cfg.adam_beta2) * gr.grad.array().square();
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, iter);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, iter);
    params.array() += active.array() * cfg.learning_rate * (mom1.array() / c1) /
                      ((mom2.array() / c2).sqrt() + cfg.adam_epsilon);
    unflatten_params(params, m, vp);
  }
  return result;
}

ModelParams make_default_model(const GraphSpec& g, int n_steps, int markov_order,
                               int l_spatial, int l_temporal, TemporalVariant variant,
                               bool time_invariant, Rng& rng) {
  ModelParams m;
  m.n_steps = n_steps;
  m.markov_order = markov_order;
  m.time_invariant = time_invariant;
  const int groups = m.n_groups();
  const int tgroups = time_invariant ? 1 : n_steps;
  m.spatial.resize(groups);
  for (auto& stack : m.spatial) {
    stack.resize(l_spatial);
    for (auto& layer : stack) {
      layer.alpha = 1.0 + rng.uniform(-0.1, 0.1);
      layer.beta = rng.uniform(-0.1, 0.1);
      layer.gamma = 1.0;
      layer.bias = 0.0;
    }
  }
  m.bias_s.assign(groups, 0.0);
  m.bias_f.assign(groups, 0.0);
  m.temporal.resize(markov_order);
  for (auto& lag : m.temporal) {
    lag.resize(tgroups);
    for (auto& stack : lag) {
      stack.resize(l_temporal);
      for (auto& layer : stack) {
        layer.variant = variant;
        layer.lambda = 1.0;
        layer.omega = 0.0;
        layer.zeta = 0.0;
        layer.d = 0.1;
        layer.velocity.setZero();
      }
    }
  }
  validate_model(m, g);
  return m;
}

VariationalParams make_default_variational(const GraphSpec& g, int n_steps,
                                           const ObservationSet& obs, bool vi_temporal,
                                           Rng& rng) {
  const int n = g.n_nodes;
  VariationalParams vp;
  vp.nu = Vec::Zero(static_cast<Eigen::Index>(n_steps) * n);
  for (int k = 0; k < obs.n_steps(); ++k)
    for (const auto& o : obs.steps[k])
      vp.nu[static_cast<Eigen::Index>(k) * n + o.node] = o.value;
  vp.log_rho = Vec::Zero(vp.nu.size());
  vp.log_psi = Vec::Zero(vp.nu.size());
  vp.s_tilde.resize(n_steps);
  for (auto& layer : vp.s_tilde) {
    layer.alpha = 1.0 + rng.uniform(-0.1, 0.1);
    layer.beta = rng.uniform(-0.1, 0.1);
    layer.gamma = 1.0;
    layer.bias = 0.0;
  }
  if (vi_temporal) {
    vp.f_tilde.resize(n_steps - 1);
    for (auto& layer : vp.f_tilde) {
      layer.variant = TemporalVariant::Diffusion;
      layer.lambda = 1.0;
      layer.omega = 0.0;
    }
  }
  return vp;
}

}  // namespace stdgmrf
