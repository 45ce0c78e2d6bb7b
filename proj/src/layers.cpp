#include "stdgmrf/layers.hpp"

#include <cmath>
#include <string>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

namespace {

// d_i^gamma with fast paths for the common exponents
inline double dpow(double d, double gamma) {
  if (gamma == 0.0) return 1.0;
  if (gamma == 1.0) return d;
  return std::pow(d, gamma);
}

void require_normals(const GraphSpec& g) {
  if (!g.has_normals())
    throw UnsupportedGraph("advection-diffusion layer requires edge normals");
  if (g.directed)
    throw UnsupportedGraph("advection-diffusion layer requires an undirected graph");
}

// (A - D) x on the out-degree convention
Vec graph_laplacian_apply(const GraphSpec& g, const Vec& x) {
  return g.adjacency * x - g.degrees.cwiseProduct(x);
}

// advection-diffusion matvec; sign = +1 for M, -1 for M^T (which flips the
// normal direction on an undirected graph)
Vec advdiff_m_apply(const GraphSpec& g, const TemporalLayerParams& p, const Vec& x, double sign) {
  require_normals(g);
  const double dsq = p.d * p.d;
  const auto& normals = *g.edge_normals;
  const auto* outer = g.adjacency.outerIndexPtr();
  const auto* inner = g.adjacency.innerIndexPtr();
  const auto* vals = g.adjacency.valuePtr();
  Vec out(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i) {
    double acc = -g.degrees[i] * dsq * x[i];
    for (auto e = outer[i]; e < outer[i + 1]; ++e) {
      const int j = inner[e];
      const double ndotv = normals(e, 0) * p.velocity[0] + normals(e, 1) * p.velocity[1];
      acc += vals[e] * (dsq - 0.5 * sign * ndotv) * x[j];
    }
    out[i] = acc;
  }
  return out;
}

// advection-only matvec split by velocity component, used for gradients:
// (N_c x)_i = sum_j w_ij * n_ij[c] * x_j
Vec advection_component_apply(const GraphSpec& g, const Vec& x, int comp) {
  const auto& normals = *g.edge_normals;
  const auto* outer = g.adjacency.outerIndexPtr();
  const auto* inner = g.adjacency.innerIndexPtr();
  const auto* vals = g.adjacency.valuePtr();
  Vec out = Vec::Zero(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i) {
    double acc = 0.0;
    for (auto e = outer[i]; e < outer[i + 1]; ++e)
      acc += vals[e] * normals(e, comp) * x[inner[e]];
    out[i] = acc;
  }
  return out;
}

}  // namespace

Vec spatial_apply_linear(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h) {
  Vec ah = g.adjacency * h;
  Vec out(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i) {
    const double d = g.degrees[i];
    out[i] = p.alpha * dpow(d, p.gamma) * h[i] + p.beta * dpow(d, p.gamma - 1.0) * ah[i];
  }
  return out;
}

Vec spatial_apply(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h) {
  Vec out = spatial_apply_linear(g, p, h);
  if (p.bias != 0.0) out.array() += p.bias;
  return out;
}

Vec spatial_apply_transpose(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h) {
  // G^T = alpha D^gamma + A^T D^(gamma-1)
  Vec scaled(g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i)
    scaled[i] = p.beta * dpow(g.degrees[i], p.gamma - 1.0) * h[i];
  Vec out = g.adjacency_t * scaled;
  for (int i = 0; i < g.n_nodes; ++i)
    out[i] += p.alpha * dpow(g.degrees[i], p.gamma) * h[i];
  return out;
}

double spatial_logdet(const GraphSpec& g, const SpatialLayerParams& p) {
  if (!g.has_spectrum()) throw InvalidInput("spectrum not precomputed; call precompute_spectrum");
  const Vec& ev = *g.spectrum;
  double acc = 0.0;
  for (int i = 0; i < g.n_nodes; ++i) {
    const double t = p.alpha + p.beta * ev[i];
    if (std::abs(t) < 1e-12)
      throw SingularLayer("alpha + beta * lambda vanishes (lambda = " + std::to_string(ev[i]) + ")");
    acc += p.gamma * std::log(g.degrees[i]) + std::log(std::abs(t));
  }
  return acc;
}

SpatialGrad spatial_logdet_partials(const GraphSpec& g, const SpatialLayerParams& p) {
  if (!g.has_spectrum()) throw InvalidInput("spectrum not precomputed; call precompute_spectrum");
  const Vec& ev = *g.spectrum;
  SpatialGrad grad;
  for (int i = 0; i < g.n_nodes; ++i) {
    const double t = p.alpha + p.beta * ev[i];
    if (std::abs(t) < 1e-12) throw SingularLayer("alpha + beta * lambda vanishes");
    grad.alpha += 1.0 / t;
    grad.beta += ev[i] / t;
    grad.gamma += std::log(g.degrees[i]);
  }
  return grad;
}

Vec spatial_backprop(const GraphSpec& g, const SpatialLayerParams& p, const Vec& a,
                     const Vec& u, SpatialGrad& grad) {
  Vec aa = g.adjacency * a;
  for (int i = 0; i < g.n_nodes; ++i) {
    const double d = g.degrees[i];
    const double t1 = dpow(d, p.gamma) * a[i];
    const double t2 = dpow(d, p.gamma - 1.0) * aa[i];
    grad.alpha += u[i] * t1;
    grad.beta += u[i] * t2;
    grad.gamma += u[i] * std::log(d) * (p.alpha * t1 + p.beta * t2);
  }
  return spatial_apply_transpose(g, p, u);
}

Vec temporal_apply(const GraphSpec& g, const TemporalLayerParams& p, const Vec& x) {
  switch (p.variant) {
    case TemporalVariant::AR:
      return p.lambda * x;
    case TemporalVariant::Diffusion: {
      if (g.directed) throw UnsupportedGraph("diffusion layer requires a symmetric adjacency");
      return p.lambda * x + p.omega * graph_laplacian_apply(g, x);
    }
    case TemporalVariant::DirectedFlow: {
      Vec out = p.lambda * x;
      out += p.omega * (g.adjacency * x - g.degrees.cwiseProduct(x));
      out += p.zeta * (g.adjacency_t * x - g.degrees_in.cwiseProduct(x));
      return out;
    }
    case TemporalVariant::AdvectionDiffusion:
      return x + advdiff_m_apply(g, p, x, +1.0);
  }
  throw InvalidInput("unknown temporal variant");
}

Vec temporal_apply_transpose(const GraphSpec& g, const TemporalLayerParams& p, const Vec& x) {
  switch (p.variant) {
    case TemporalVariant::AR:
      return p.lambda * x;
    case TemporalVariant::Diffusion: {
      if (g.directed) throw UnsupportedGraph("diffusion layer requires a symmetric adjacency");
      return p.lambda * x + p.omega * graph_laplacian_apply(g, x);
    }
    case TemporalVariant::DirectedFlow: {
      Vec out = p.lambda * x;
      out += p.omega * (g.adjacency_t * x - g.degrees.cwiseProduct(x));
      out += p.zeta * (g.adjacency * x - g.degrees_in.cwiseProduct(x));
      return out;
    }
    case TemporalVariant::AdvectionDiffusion:
      return x + advdiff_m_apply(g, p, x, -1.0);
  }
  throw InvalidInput("unknown temporal variant");
}

Vec temporal_backprop(const GraphSpec& g, const TemporalLayerParams& p, const Vec& a,
                      const Vec& u, TemporalGrad& grad) {
  switch (p.variant) {
    case TemporalVariant::AR:
      grad.lambda += u.dot(a);
      break;
    case TemporalVariant::Diffusion:
      grad.lambda += u.dot(a);
      grad.omega += u.dot(graph_laplacian_apply(g, a));
      break;
    case TemporalVariant::DirectedFlow:
      grad.lambda += u.dot(a);
      grad.omega += u.dot(g.adjacency * a - g.degrees.cwiseProduct(a));
      grad.zeta += u.dot(g.adjacency_t * a - g.degrees_in.cwiseProduct(a));
      break;
    case TemporalVariant::AdvectionDiffusion: {
      require_normals(g);
      grad.d += 2.0 * p.d * u.dot(graph_laplacian_apply(g, a));
      grad.vx += -0.5 * u.dot(advection_component_apply(g, a, 0));
      grad.vy += -0.5 * u.dot(advection_component_apply(g, a, 1));
      break;
    }
  }
  return temporal_apply_transpose(g, p, u);
}

Vec compose_apply(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers, Vec x) {
  if (layers.empty()) throw InvalidInput("empty temporal composition");
  for (const auto& layer : layers) x = temporal_apply(g, layer, x);
  return x;
}

Vec compose_apply_transpose(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers, Vec x) {
  if (layers.empty()) throw InvalidInput("empty temporal composition");
  for (auto it = layers.rbegin(); it != layers.rend(); ++it)
    x = temporal_apply_transpose(g, *it, x);
  return x;
}

Stencil temporal_stencil(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers) {
  if (!g.lattice_side) throw UnsupportedGraph("stencil extraction requires a periodic lattice");
  if (layers.empty()) return {};
  return extract_stencil(g, static_cast<int>(layers.size()), [&](const Vec& e) {
    return compose_apply_transpose(g, layers, e);
  });
}

}  // namespace stdgmrf
