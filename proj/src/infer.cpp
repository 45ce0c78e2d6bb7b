#include "stdgmrf/infer.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include "stdgmrf/errors.hpp"
#include "stdgmrf/rng.hpp"

namespace stdgmrf {

void ObservationSet::validate(int expected_steps, int n_nodes) const {
  if (n_steps() != expected_steps)
    throw InvalidObservation("expected " + std::to_string(expected_steps) + " steps, got " +
                             std::to_string(n_steps()));
  for (int k = 0; k < n_steps(); ++k) {
    std::set<int> seen;
    for (const auto& o : steps[k]) {
      if (o.node < 0 || o.node >= n_nodes)
        throw InvalidObservation("node index out of range at step " + std::to_string(k));
      if (!seen.insert(o.node).second)
        throw InvalidObservation("duplicate node " + std::to_string(o.node) + " at step " +
                                 std::to_string(k));
      if (!(o.sigma > 0.0)) throw InvalidObservation("sigma must be positive");
    }
  }
}

double ObservationSet::log_sigma_sum() const {
  double acc = 0.0;
  for (const auto& s : steps)
    for (const auto& o : s) acc += std::log(o.sigma);
  return acc;
}

CgResult cg_solve(const MatVec& matvec, const Vec& rhs, const Vec& x0, double tol, int max_iter) {
  CgResult res;
  res.x = x0;
  Vec r = rhs - matvec(res.x);
  double rs = r.squaredNorm();
  if (!std::isfinite(rs)) throw SolverDiverged("non-finite residual at start");
  if (std::sqrt(rs) < tol) {
    res.residual_norm = std::sqrt(rs);
    return res;
  }
  Vec p = r;
  for (int it = 1; it <= max_iter; ++it) {
    Vec ap = matvec(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw SolverDiverged("non-finite curvature");
    if (pap <= 0.0) throw SolverDiverged("non-positive curvature: operator is not SPD");
    const double alpha = rs / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rs_new = r.squaredNorm();
    if (!std::isfinite(rs_new)) throw SolverDiverged("non-finite residual");
    res.iterations = it;
    if (std::sqrt(rs_new) < tol) {
      res.residual_norm = std::sqrt(rs_new);
      return res;
    }
    p = r + (rs_new / rs) * p;
    rs = rs_new;
  }
  res.residual_norm = std::sqrt(rs);
  return res;
}

CgResult regularized_cg_solve(const MatVec& matvec, const Vec& rhs, const Vec& x0,
                              double outer_tol, int max_outer, double inner_tol, int max_inner,
                              double nu0, int nu_hold, double nu_drop) {
  CgResult res;
  res.x = x0;
  for (int outer = 0; outer < max_outer; ++outer) {
    const double rnorm = (matvec(res.x) - rhs).norm();
    if (!std::isfinite(rnorm)) throw SolverDiverged("non-finite residual in outer loop");
    res.residual_norm = rnorm;
    res.iterations = outer;
    if (rnorm < outer_tol) return res;
    const double nu = nu0 / std::pow(nu_drop, outer / nu_hold);
    const MatVec reg = [&](const Vec& v) -> Vec { return nu * v + matvec(v); };
    res.x = cg_solve(reg, nu * res.x + rhs, res.x, inner_tol, max_inner).x;
  }
  res.residual_norm = (matvec(res.x) - rhs).norm();
  res.iterations = max_outer;
  return res;
}

Vec posterior_matvec(const ModelParams& m, const GraphSpec& g, const ObservationSet& obs,
                     const Vec& x) {
  Vec out = precision_matvec(m, g, x);
  const int n = g.n_nodes;
  for (int k = 0; k < obs.n_steps(); ++k) {
    for (const auto& o : obs.steps[k]) {
      const Eigen::Index idx = static_cast<Eigen::Index>(k) * n + o.node;
      out[idx] += x[idx] / (o.sigma * o.sigma);
    }
  }
  return out;
}

namespace {

Vec scatter_obs(const ObservationSet& obs, int n_steps, int n, const Vec* perturb) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(n_steps) * n);
  Eigen::Index u_idx = 0;
  for (int k = 0; k < obs.n_steps(); ++k) {
    for (const auto& o : obs.steps[k]) {
      double y = o.value;
      if (perturb) y += o.sigma * (*perturb)[u_idx++];
      out[static_cast<Eigen::Index>(k) * n + o.node] += y / (o.sigma * o.sigma);
    }
  }
  return out;
}

}  // namespace

Vec posterior_mean(const ModelParams& m, const GraphSpec& g, const ObservationSet& obs,
                   const Vec& x0, SolveDiagnostics* diag) {
  obs.validate(m.n_steps, g.n_nodes);
  const Vec rhs = information_vector(m, g) + scatter_obs(obs, m.n_steps, g.n_nodes, nullptr);
  const MatVec a = [&](const Vec& v) { return posterior_matvec(m, g, obs, v); };
  const auto t0 = std::chrono::steady_clock::now();
  CgResult res = regularized_cg_solve(a, rhs, x0);
  if (diag) {
    diag->iterations = res.iterations;
    diag->residual_norm = res.residual_norm;
    diag->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return std::move(res.x);
}

std::vector<Vec> posterior_sample(const ModelParams& m, const GraphSpec& g,
                                  const ObservationSet& obs, const Vec& mean, int n_samples,
                                  std::uint64_t seed, std::vector<SolveDiagnostics>* diag) {
  obs.validate(m.n_steps, g.n_nodes);
  const int n = g.n_nodes;
  const Eigen::Index dim = static_cast<Eigen::Index>(m.n_steps) * n;
  const Vec prior_shift = s_apply(m, g, stacked_bias_f(m, g), false) + stacked_bias_s(m, g);
  const MatVec a = [&](const Vec& v) { return posterior_matvec(m, g, obs, v); };
  Rng rng(seed);
  std::vector<Vec> samples;
  samples.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    const Vec z1 = rng.normal_vector(dim);
    const Vec u = rng.normal_vector(obs.total());
    Vec rhs = ft_apply(m, g, st_apply(m, g, z1 - prior_shift));
    rhs += scatter_obs(obs, m.n_steps, n, &u);
    const auto t0 = std::chrono::steady_clock::now();
    CgResult res = regularized_cg_solve(a, rhs, mean);
    if (diag) {
      SolveDiagnostics d;
      d.iterations = res.iterations;
      d.residual_norm = res.residual_norm;
      d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      diag->push_back(d);
    }
    samples.push_back(std::move(res.x));
  }
  return samples;
}

Vec marginal_std(const std::vector<Vec>& samples) {
  if (samples.size() < 2) throw InvalidInput("marginal_std needs at least 2 samples");
  const Eigen::Index dim = samples.front().size();
  Vec mean = Vec::Zero(dim);
  for (const auto& s : samples) mean += s;
  mean /= static_cast<double>(samples.size());
  Vec ss = Vec::Zero(dim);
  for (const auto& s : samples) ss += (s - mean).cwiseAbs2();
  return (ss / static_cast<double>(samples.size() - 1)).cwiseSqrt();
}

PosteriorSummary compute_posterior(const ModelParams& m, const GraphSpec& g,
                                   const ObservationSet& obs, const Vec& x0, int n_samples,
                                   std::uint64_t seed) {
  PosteriorSummary out;
  out.mean = posterior_mean(m, g, obs, x0, &out.mean_solve);
  out.samples = posterior_sample(m, g, obs, out.mean, n_samples, seed, &out.sample_solves);
  out.marginal_std = marginal_std(out.samples);
  return out;
}

}  // namespace stdgmrf
