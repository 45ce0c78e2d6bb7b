#pragma once

#include <vector>

#include "stdgmrf/graph.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/layers.hpp"
#include "stdgmrf/prior.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

// Dense layer matrices (test-scale references for the sparse operators).
Mat dense_spatial_matrix(const GraphSpec& g, const SpatialLayerParams& p);
Mat dense_temporal_matrix(const GraphSpec& g, const TemporalLayerParams& p);

// Fully materialized first-or-higher-order linear-Gaussian model:
//   x_k = sum_tau F[k][tau-1] x_{k-tau} + c_k + eps_k,  eps_k ~ N(0, (S_k^T S_k)^-1)
// with c_0 = mu_0. Transition blocks may come from composed layers or from
// any external dynamics (e.g. the synthetic-data generator).
struct DenseModel {
  int n_steps = 1;
  int markov_order = 1;
  std::vector<Mat> s_blocks;             // S_k, dense N x N
  std::vector<std::vector<Mat>> f_blocks;  // f_blocks[k][tau-1]; empty Mat = absent
  Vec c;                                 // stacked (mu_0, c_1, ..., c_K)

  int n_nodes() const { return s_blocks.empty() ? 0 : static_cast<int>(s_blocks[0].rows()); }
};

// Materializes a layered model; c is recovered as -(b_f + S^-1 b_s).
DenseModel densify(const ModelParams& m, const GraphSpec& g);

Mat dense_f_matrix(const DenseModel& dm);
Mat dense_s_matrix(const DenseModel& dm);
// Omega = F^T S^T S F via explicit products.
Mat dense_precision(const DenseModel& dm);
// Omega assembled block-wise from the transition/noise blocks
// (block p-banded closed form), without forming F.
Mat dense_precision_blocks(const DenseModel& dm);
// mu computed by forward recursion mu_k = sum_tau F_{k,tau} mu_{k-tau} + c_k.
Vec dense_prior_mean(const DenseModel& dm);

struct DensePosterior {
  Vec mean;
  Vec marginal_std;
  Mat covariance;
  double log_evidence = 0.0;  // log p(y), constants included
};

// Exact posterior via symmetric factorization of Omega+ = Omega + H^T R^-1 H.
// Guarded to (K+1)N <= 4096; throws TooLarge beyond.
DensePosterior dense_posterior(const DenseModel& dm, const ObservationSet& obs);

struct SmootherResult {
  std::vector<Vec> means;  // E[x_k | y_{0:K}]
  std::vector<Mat> covs;   // Cov[x_k | y_{0:K}]
};

// Forward Kalman filter + Rauch-Tung-Striebel backward pass. First-order
// models only; noise_prec are the Q_k (precisions, not covariances).
SmootherResult rts_smoother(const Vec& init_mean, const Mat& init_prec,
                            const std::vector<Mat>& transitions, const std::vector<Vec>& offsets,
                            const std::vector<Mat>& noise_prec, const ObservationSet& obs);

struct BenchRow {
  std::string path;   // "engine" or "rts"
  int side = 0;
  int n_nodes = 0;
  int k = 0;
  std::string phase;  // "train_iter" or "cg_iter"
  double seconds = 0.0;
};

// Times the sparse engine against the dense smoother path on periodic
// lattices of the given sides. The smoother path refuses (TooLarge) above
// N = 1024, mirroring its memory cliff; those rows are skipped.
std::vector<BenchRow> benchmark_scaling(const std::vector<int>& sides, int k_transitions,
                                        int iters, int reps, std::uint64_t seed);

}  // namespace stdgmrf
