#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stdgmrf/errors.hpp"
#include "stdgmrf/graph.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

// Spatial layer G = alpha * D^gamma + beta * D^(gamma-1) * A, bias b * 1.
struct SpatialLayerParams {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double bias = 0.0;
};

enum class TemporalVariant { AR, Diffusion, DirectedFlow, AdvectionDiffusion };

// Temporal transition layer. Variants:
//   AR:                  F = lambda * I
//   Diffusion:           F = lambda * I + omega * (A - D)
//   DirectedFlow:        F = lambda * I + omega * (A - D_out) + zeta * (A^T - D_in)
//   AdvectionDiffusion:  F = I + M,  M_ij = w_ij * (d^2 - n_ij.v / 2),
//                        M_ii = -d_i * d^2
// The composed-transition bias b_f lives on the model, not on the layer.
struct TemporalLayerParams {
  TemporalVariant variant = TemporalVariant::AR;
  double lambda = 1.0;
  double omega = 0.0;
  double zeta = 0.0;
  double d = 0.0;  // diffusion root, D_diff = d^2
  Eigen::Vector2d velocity{0.0, 0.0};
};

// Accumulated partial derivatives for one layer's scalar parameters.
struct SpatialGrad {
  double alpha = 0, beta = 0, gamma = 0, bias = 0;
};
struct TemporalGrad {
  double lambda = 0, omega = 0, zeta = 0, d = 0, vx = 0, vy = 0;
};

// --- spatial layer ---

Vec spatial_apply(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h);
// matvec without the bias term
Vec spatial_apply_linear(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h);
Vec spatial_apply_transpose(const GraphSpec& g, const SpatialLayerParams& p, const Vec& h);

// log|det G| = gamma * sum_i log d_i + sum_i log|alpha + beta * lambda_i|.
// Requires a precomputed spectrum; throws SingularLayer near singularity.
double spatial_logdet(const GraphSpec& g, const SpatialLayerParams& p);
SpatialGrad spatial_logdet_partials(const GraphSpec& g, const SpatialLayerParams& p);

// Reverse step for out = G * a with upstream adjoint u: accumulates
// d(u . G a)/d{alpha,beta,gamma} into grad and returns G^T u.
Vec spatial_backprop(const GraphSpec& g, const SpatialLayerParams& p, const Vec& a,
                     const Vec& u, SpatialGrad& grad);

// --- temporal layer ---

Vec temporal_apply(const GraphSpec& g, const TemporalLayerParams& p, const Vec& x);
Vec temporal_apply_transpose(const GraphSpec& g, const TemporalLayerParams& p, const Vec& x);
Vec temporal_backprop(const GraphSpec& g, const TemporalLayerParams& p, const Vec& a,
                      const Vec& u, TemporalGrad& grad);

// --- composed transitions ---

Vec compose_apply(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers, Vec x);
Vec compose_apply_transpose(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers, Vec x);

// Lattice stencil: weights of the composed transition row for a center
// pixel, keyed by (dx, dy) = (col_j - col_i, row_j - row_i) with periodic
// wrap, radius = number of layers.
using Stencil = std::map<std::pair<int, int>, double>;
Stencil temporal_stencil(const GraphSpec& g, const std::vector<TemporalLayerParams>& layers);

// Stencil of an arbitrary linear operator, given a callback computing
// op^T * e for a basis vector e (i.e. extracting one matrix row).
template <typename TransposeApply>
Stencil extract_stencil(const GraphSpec& g, int radius, TransposeApply&& at) {
  if (!g.lattice_side)
    throw UnsupportedGraph("stencil extraction requires a periodic lattice");
  const int side = *g.lattice_side;
  if (2 * radius + 1 > side)
    throw UnsupportedGraph("stencil radius " + std::to_string(radius) +
                           " is ambiguous on a side-" + std::to_string(side) + " lattice");
  const int rc = side / 2, cc = side / 2;
  Vec e = Vec::Zero(g.n_nodes);
  e[rc * side + cc] = 1.0;
  const Vec row = at(e);
  Stencil st;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const int r = ((rc + dy) % side + side) % side;
      const int c = ((cc + dx) % side + side) % side;
      st[{dx, dy}] = row[r * side + c];
    }
  }
  return st;
}

}  // namespace stdgmrf
