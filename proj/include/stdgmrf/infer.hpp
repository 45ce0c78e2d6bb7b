#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/prior.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

struct Observation {
  int node = 0;
  double value = 0.0;
  double sigma = 1.0;
};

// Per-step sparse observations; row k lists the observed nodes (defining the
// selection matrix H_k), values y_k and noise levels sigma.
struct ObservationSet {
  std::vector<std::vector<Observation>> steps;

  int n_steps() const { return static_cast<int>(steps.size()); }
  int total() const {
    int m = 0;
    for (const auto& s : steps) m += static_cast<int>(s.size());
    return m;
  }
  // throws InvalidObservation on duplicate/out-of-range nodes or sigma <= 0
  void validate(int expected_steps, int n_nodes) const;
  // sum of log sigma over all observations
  double log_sigma_sum() const;
};

struct CgResult {
  Vec x;
  int iterations = 0;
  double residual_norm = 0.0;
};

using MatVec = std::function<Vec(const Vec&)>;

// Standard conjugate gradients from x0 for an SPD operator; stops when
// ||r||_2 < tol (absolute) or max_iter. Breakdown or non-finite values
// throw SolverDiverged.
CgResult cg_solve(const MatVec& matvec, const Vec& rhs, const Vec& x0,
                  double tol = 1e-7, int max_iter = 200);

// Outer iteration on the regularized systems (nu I + A) x = nu x_i + b,
// starting at nu = 10 and dividing nu by 10 every 10 outer iterations.
// Inner systems are solved by CG (tol 1e-7, at most 200 iterations); the
// loop returns once the unregularized residual A x_i - b drops below 1e-7
// or after 100 outer iterations.
CgResult regularized_cg_solve(const MatVec& matvec, const Vec& rhs, const Vec& x0,
                              double outer_tol = 1e-7, int max_outer = 100,
                              double inner_tol = 1e-7, int max_inner = 200,
                              double nu0 = 10.0, int nu_hold = 10, double nu_drop = 10.0);

// Omega+ x = F^T S^T S F x + H^T R^-1 H x.
Vec posterior_matvec(const ModelParams& m, const GraphSpec& g, const ObservationSet& obs,
                     const Vec& x);

struct SolveDiagnostics {
  int iterations = 0;
  double residual_norm = 0.0;
  double seconds = 0.0;
};

// mu+ solves Omega+ mu+ = eta + H^T R^-1 y via regularized CG, warm-started
// at the variational mean (pass a zero vector when no mean is available).
Vec posterior_mean(const ModelParams& m, const GraphSpec& g, const ObservationSet& obs,
                   const Vec& x0, SolveDiagnostics* diag = nullptr);

// Perturbation sampling: each draw solves
//   Omega+ x = F^T S^T (z1 - (S b_f + b_s)) + H^T R^-1 (y + sigma u)
// with z1 ~ N(0, I), u ~ N(0, 1), warm-started at `mean`. Solutions are
// exact posterior samples up to solver tolerance.
std::vector<Vec> posterior_sample(const ModelParams& m, const GraphSpec& g,
                                  const ObservationSet& obs, const Vec& mean,
                                  int n_samples, std::uint64_t seed,
                                  std::vector<SolveDiagnostics>* diag = nullptr);

// Unbiased per-coordinate sample standard deviation; needs >= 2 samples.
Vec marginal_std(const std::vector<Vec>& samples);

struct PosteriorSummary {
  Vec mean;
  std::vector<Vec> samples;
  Vec marginal_std;
  SolveDiagnostics mean_solve;
  std::vector<SolveDiagnostics> sample_solves;
};

PosteriorSummary compute_posterior(const ModelParams& m, const GraphSpec& g,
                                   const ObservationSet& obs, const Vec& x0,
                                   int n_samples, std::uint64_t seed);

}  // namespace stdgmrf
