#pragma once

#include <cstdint>
#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

struct SimulateConfig {
  int n_transitions = 20;  // K
  double d_diff = 0.01;
  Eigen::Vector2d velocity{-0.3, 0.3};
  int steps_per_frame = 4;
  double noise_scale = 1.0;
  double s0_jitter = 0.01;  // delta added to the (singular) initial-state D - A
  std::uint64_t seed = 1;
};

struct MaskConfig {
  int width = 9;
  int start_step = -1;  // -1: K/2 - 5, clamped to [0, K+1-length]
  int length = 10;
  int corner_row = -1;  // -1: centered
  int corner_col = -1;
  double sigma = 0.01;
  double val_frac = 0.1;
  std::uint64_t seed = 1;
};

enum class Role : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct SyntheticDataset {
  Vec truth;                // (K+1)N
  std::vector<Role> roles;  // per flattened (k, node)
  // all coordinates observed during generation (train + val), with noise
  ObservationSet observations;
  SimulateConfig sim;
  MaskConfig mask;
  int side = 0;

  int n_steps() const { return sim.n_transitions + 1; }
  // observation subset by role; Train, or Train + Val
  ObservationSet observed(bool include_val) const;
};

// Frame transition (I + M + M^2/2 + M^3/6)^steps_per_frame with
// M_ij = D_diff - n_ij.v / 2 on lattice neighbors and M_ii = -4 D_diff.
SpMat build_adv_diff_transition(const GraphSpec& g, double d_diff,
                                const Eigen::Vector2d& velocity, int steps_per_frame);

// x_0 solved from ((4 + delta) I - A) x_0 = z_0, then
// x_k = F_frame x_{k-1} + eps_k with (10 I - A) eps_k = z_k, z ~ N(0, I).
Vec simulate(const GraphSpec& g, const SimulateConfig& cfg);

// Masks a square of the lattice for `length` consecutive steps (test set),
// observes everything else with N(0, sigma^2) noise, and holds out val_frac
// of the observed coordinates as validation.
SyntheticDataset mask_and_observe(const GraphSpec& g, const Vec& truth,
                                  const SimulateConfig& sim, const MaskConfig& mask);

// Resolved mask start step (applies the K/2 - 5 default and clamping).
int resolve_mask_start(const MaskConfig& mask, int n_transitions);

}  // namespace stdgmrf
