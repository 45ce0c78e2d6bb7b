#include "stdgmrf/datagen.hpp"

#include <algorithm>
#include <string>

#include "stdgmrf/errors.hpp"
#include "stdgmrf/rng.hpp"

namespace stdgmrf {

ObservationSet SyntheticDataset::observed(bool include_val) const {
  const int n = side * side;
  ObservationSet out;
  out.steps.resize(n_steps());
  Eigen::Index oi = 0;
  for (int k = 0; k < n_steps(); ++k) {
    for (const auto& o : observations.steps[k]) {
      const Role role = roles[static_cast<size_t>(k) * n + o.node];
      if (role == Role::Train || (include_val && role == Role::Val)) out.steps[k].push_back(o);
      ++oi;
    }
  }
  return out;
}

SpMat build_adv_diff_transition(const GraphSpec& g, double d_diff,
                                const Eigen::Vector2d& velocity, int steps_per_frame) {
  if (!g.lattice_side) throw UnsupportedGraph("advection-diffusion generator requires a lattice");
  if (steps_per_frame < 1) throw InvalidInput("steps_per_frame must be >= 1");
  const int n = g.n_nodes;
  const auto& normals = *g.edge_normals;
  const auto* outer = g.adjacency.outerIndexPtr();
  const auto* inner = g.adjacency.innerIndexPtr();
  const auto* vals = g.adjacency.valuePtr();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(g.adjacency.nonZeros() + n);
  for (int i = 0; i < n; ++i) {
    trips.emplace_back(i, i, -4.0 * d_diff);
    for (auto e = outer[i]; e < outer[i + 1]; ++e) {
      const double ndotv = normals(e, 0) * velocity[0] + normals(e, 1) * velocity[1];
      trips.emplace_back(i, inner[e], vals[e] * (d_diff - 0.5 * ndotv));
    }
  }
  SpMat m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());

  SpMat eye(n, n);
  eye.setIdentity();
  const SpMat m2 = SpMat(m * m);
  const SpMat m3 = SpMat(m2 * m);
  SpMat taylor = SpMat(eye + m + 0.5 * m2 + (1.0 / 6.0) * m3);
  SpMat frame = taylor;
  for (int s = 1; s < steps_per_frame; ++s) frame = SpMat(frame * taylor);
  frame.makeCompressed();
  return frame;
}

namespace {

// eps ~ N(0, (S^T S)^-1) via S eps = z with symmetric PD S, solved by CG
Vec sample_gmrf(const SpMat& s, const Vec& z) {
  const MatVec apply = [&](const Vec& v) -> Vec { return s * v; };
  CgResult res = cg_solve(apply, z, Vec::Zero(z.size()), 1e-10, 4 * static_cast<int>(z.size()));
  return std::move(res.x);
}

}  // namespace

Vec simulate(const GraphSpec& g, const SimulateConfig& cfg) {
  if (!g.lattice_side) throw UnsupportedGraph("simulate requires a periodic lattice");
  if (cfg.n_transitions < 0) throw InvalidInput("n_transitions must be >= 0");
  const int n = g.n_nodes;
  const int n_steps = cfg.n_transitions + 1;

  SpMat eye(n, n);
  eye.setIdentity();
  const SpMat s0 = SpMat((4.0 + cfg.s0_jitter) * eye - g.adjacency);
  const SpMat s_noise = SpMat(10.0 * eye - g.adjacency);
  const SpMat frame = build_adv_diff_transition(g, cfg.d_diff, cfg.velocity, cfg.steps_per_frame);

  Rng rng(cfg.seed);
  Vec truth(static_cast<Eigen::Index>(n_steps) * n);
  step(truth, 0, n) = cfg.noise_scale * sample_gmrf(s0, rng.normal_vector(n));
  for (int k = 1; k < n_steps; ++k) {
    const Vec eps = cfg.noise_scale * sample_gmrf(s_noise, rng.normal_vector(n));
    step(truth, k, n) = frame * step(truth, k - 1, n) + eps;
  }
  return truth;
}

int resolve_mask_start(const MaskConfig& mask, int n_transitions) {
  const int n_steps = n_transitions + 1;
  int start = mask.start_step >= 0 ? mask.start_step : n_transitions / 2 - 5;
  start = std::max(0, std::min(start, n_steps - mask.length));
  return start;
}

SyntheticDataset mask_and_observe(const GraphSpec& g, const Vec& truth,
                                  const SimulateConfig& sim, const MaskConfig& mask) {
  if (!g.lattice_side) throw UnsupportedGraph("masking requires a periodic lattice");
  const int side = *g.lattice_side;
  const int n = g.n_nodes;
  const int n_steps = sim.n_transitions + 1;
  if (truth.size() != static_cast<Eigen::Index>(n_steps) * n)
    throw InvalidInput("truth has wrong length");
  if (mask.width < 0 || mask.width > side) throw InvalidMask("mask width exceeds lattice");
  if (mask.length < 0 || mask.length > n_steps) throw InvalidMask("mask length exceeds sequence");
  const int start = resolve_mask_start(mask, sim.n_transitions);
  int row0 = mask.corner_row >= 0 ? mask.corner_row : (side - mask.width) / 2;
  int col0 = mask.corner_col >= 0 ? mask.corner_col : (side - mask.width) / 2;
  if (mask.width > 0 && (row0 + mask.width > side || col0 + mask.width > side))
    throw InvalidMask("mask square does not fit in the lattice");

  SyntheticDataset ds;
  ds.truth = truth;
  ds.sim = sim;
  ds.mask = mask;
  ds.mask.start_step = start;
  ds.mask.corner_row = row0;
  ds.mask.corner_col = col0;
  ds.side = side;
  ds.roles.assign(static_cast<size_t>(n_steps) * n, Role::Train);

  for (int k = start; k < start + mask.length && k < n_steps; ++k)
    for (int r = row0; r < row0 + mask.width; ++r)
      for (int c = col0; c < col0 + mask.width; ++c)
        ds.roles[static_cast<size_t>(k) * n + r * side + c] = Role::Test;

  // hold out validation coordinates uniformly without replacement
  Rng rng(mask.seed);
  std::vector<size_t> observed_idx;
  for (size_t i = 0; i < ds.roles.size(); ++i)
    if (ds.roles[i] == Role::Train) observed_idx.push_back(i);
  const size_t n_val = static_cast<size_t>(mask.val_frac * static_cast<double>(observed_idx.size()));
  for (size_t v = 0; v < n_val; ++v) {
    const size_t pick = v + rng.index(observed_idx.size() - v);
    std::swap(observed_idx[v], observed_idx[pick]);
    ds.roles[observed_idx[v]] = Role::Val;
  }

  ds.observations.steps.resize(n_steps);
  for (int k = 0; k < n_steps; ++k) {
    for (int i = 0; i < n; ++i) {
      const size_t idx = static_cast<size_t>(k) * n + i;
      if (ds.roles[idx] == Role::Test) continue;
      const double noise = mask.sigma > 0.0 ? mask.sigma * rng.normal() : 0.0;
      ds.observations.steps[k].push_back({i, truth[idx] + noise, mask.sigma});
    }
  }
  return ds;
}

}  // namespace stdgmrf
