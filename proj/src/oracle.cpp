#include "stdgmrf/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <algorithm>
#include <chrono>
#include <cmath>

#include "stdgmrf/errors.hpp"
#include "stdgmrf/rng.hpp"
#include "stdgmrf/vi.hpp"

namespace stdgmrf {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Mat dense_from_normals(const GraphSpec& g, int comp) {
  const auto& normals = *g.edge_normals;
  const auto* outer = g.adjacency.outerIndexPtr();
  const auto* inner = g.adjacency.innerIndexPtr();
  const auto* vals = g.adjacency.valuePtr();
  Mat out = Mat::Zero(g.n_nodes, g.n_nodes);
  for (int i = 0; i < g.n_nodes; ++i)
    for (auto e = outer[i]; e < outer[i + 1]; ++e)
      out(i, inner[e]) = vals[e] * normals(e, comp);
  return out;
}

}  // namespace

Mat dense_spatial_matrix(const GraphSpec& g, const SpatialLayerParams& p) {
  const Mat a = Mat(g.adjacency);
  Vec dg = g.degrees.array().pow(p.gamma);
  Vec dgm1 = g.degrees.array().pow(p.gamma - 1.0);
  return p.alpha * Mat(dg.asDiagonal()) + p.beta * dgm1.asDiagonal() * a;
}

Mat dense_temporal_matrix(const GraphSpec& g, const TemporalLayerParams& p) {
  const int n = g.n_nodes;
  const Mat a = Mat(g.adjacency);
  const Mat eye = Mat::Identity(n, n);
  switch (p.variant) {
    case TemporalVariant::AR:
      return p.lambda * eye;
    case TemporalVariant::Diffusion:
      return p.lambda * eye + p.omega * (a - Mat(g.degrees.asDiagonal()));
    case TemporalVariant::DirectedFlow:
      return p.lambda * eye + p.omega * (a - Mat(g.degrees.asDiagonal())) +
             p.zeta * (a.transpose() - Mat(g.degrees_in.asDiagonal()));
    case TemporalVariant::AdvectionDiffusion: {
      if (!g.has_normals()) throw UnsupportedGraph("advection-diffusion requires normals");
      const double dsq = p.d * p.d;
      Mat m = dsq * (a - Mat(g.degrees.asDiagonal()));
      m -= 0.5 * (p.velocity[0] * dense_from_normals(g, 0) +
                  p.velocity[1] * dense_from_normals(g, 1));
      return eye + m;
    }
  }
  throw InvalidInput("unknown temporal variant");
}

DenseModel densify(const ModelParams& m, const GraphSpec& g) {
  validate_model(m, g);
  const int n = g.n_nodes;
  DenseModel dm;
  dm.n_steps = m.n_steps;
  dm.markov_order = m.markov_order;
  dm.s_blocks.resize(m.n_steps);
  dm.f_blocks.assign(m.n_steps, std::vector<Mat>(m.markov_order));
  dm.c.resize(static_cast<Eigen::Index>(m.n_steps) * n);
  for (int k = 0; k < m.n_steps; ++k) {
    Mat s = Mat::Identity(n, n);
    for (const auto& layer : m.spatial_stack(k)) s = dense_spatial_matrix(g, layer) * s;
    dm.s_blocks[k] = s;
    for (int tau = 1; tau <= m.markov_order && tau <= k; ++tau) {
      if (!m.has_transition(k, tau)) continue;
      Mat f = Mat::Identity(n, n);
      for (const auto& layer : m.temporal_stack(k, tau)) f = dense_temporal_matrix(g, layer) * f;
      dm.f_blocks[k][tau - 1] = std::move(f);
    }
    // c_k = -(b_f + S^-1 b_s)
    const Vec bs = Vec::Constant(n, m.bias_s[m.group_of(k)]);
    Vec ck = -(Vec::Constant(n, m.bias_f[m.group_of(k)]) + s.partialPivLu().solve(bs));
    step(dm.c, k, n) = ck;
  }
  return dm;
}

Mat dense_f_matrix(const DenseModel& dm) {
  const int n = dm.n_nodes();
  const Eigen::Index dim = static_cast<Eigen::Index>(dm.n_steps) * n;
  Mat f = Mat::Identity(dim, dim);
  for (int k = 0; k < dm.n_steps; ++k)
    for (int tau = 1; tau <= dm.markov_order && tau <= k; ++tau)
      if (dm.f_blocks[k][tau - 1].size() > 0)
        f.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k - tau) * n, n, n) =
            -dm.f_blocks[k][tau - 1];
  return f;
}

Mat dense_s_matrix(const DenseModel& dm) {
  const int n = dm.n_nodes();
  const Eigen::Index dim = static_cast<Eigen::Index>(dm.n_steps) * n;
  Mat s = Mat::Zero(dim, dim);
  for (int k = 0; k < dm.n_steps; ++k)
    s.block(static_cast<Eigen::Index>(k) * n, static_cast<Eigen::Index>(k) * n, n, n) =
        dm.s_blocks[k];
  return s;
}

Mat dense_precision(const DenseModel& dm) {
  const Mat sf = dense_s_matrix(dm) * dense_f_matrix(dm);
  return sf.transpose() * sf;
}

Mat dense_precision_blocks(const DenseModel& dm) {
  const int n = dm.n_nodes();
  const Eigen::Index dim = static_cast<Eigen::Index>(dm.n_steps) * n;
  Mat omega = Mat::Zero(dim, dim);
  const Mat eye = Mat::Identity(n, n);
  for (int k = 0; k < dm.n_steps; ++k) {
    const Mat qk = dm.s_blocks[k].transpose() * dm.s_blocks[k];
    // nonzero blocks of block-row k of F: (k, I) and (k - tau, -F_{k,tau})
    std::vector<std::pair<int, Mat>> row;
    row.emplace_back(k, eye);
    for (int tau = 1; tau <= dm.markov_order && tau <= k; ++tau)
      if (dm.f_blocks[k][tau - 1].size() > 0)
        row.emplace_back(k - tau, -dm.f_blocks[k][tau - 1]);
    for (const auto& [i, bi] : row)
      for (const auto& [j, bj] : row)
        omega.block(static_cast<Eigen::Index>(i) * n, static_cast<Eigen::Index>(j) * n, n, n) +=
            bi.transpose() * qk * bj;
  }
  return omega;
}

Vec dense_prior_mean(const DenseModel& dm) {
  const int n = dm.n_nodes();
  Vec mu = dm.c;
  for (int k = 1; k < dm.n_steps; ++k)
    for (int tau = 1; tau <= dm.markov_order && tau <= k; ++tau)
      if (dm.f_blocks[k][tau - 1].size() > 0)
        step(mu, k, n) += dm.f_blocks[k][tau - 1] * step(mu, k - tau, n);
  return mu;
}

DensePosterior dense_posterior(const DenseModel& dm, const ObservationSet& obs) {
  const int n = dm.n_nodes();
  const Eigen::Index dim = static_cast<Eigen::Index>(dm.n_steps) * n;
  if (dim > 4096) throw TooLarge("dense posterior limited to (K+1)N <= 4096");
  obs.validate(dm.n_steps, n);

  const Mat f = dense_f_matrix(dm);
  const Mat s = dense_s_matrix(dm);
  const Mat sf = s * f;
  const Mat omega = sf.transpose() * sf;

  // eta = F^T Q c with Q block-diagonal
  Vec qc(dim);
  for (int k = 0; k < dm.n_steps; ++k)
    step(qc, k, n) = dm.s_blocks[k].transpose() * (dm.s_blocks[k] * step(dm.c, k, n));
  const Vec eta = f.transpose() * qc;

  Mat omega_post = omega;
  Vec rhs = eta;
  std::vector<Eigen::Index> obs_idx;
  Vec obs_y(obs.total()), obs_var(obs.total());
  Eigen::Index oi = 0;
  for (int k = 0; k < obs.n_steps(); ++k) {
    for (const auto& o : obs.steps[k]) {
      const Eigen::Index idx = static_cast<Eigen::Index>(k) * n + o.node;
      omega_post(idx, idx) += 1.0 / (o.sigma * o.sigma);
      rhs[idx] += o.value / (o.sigma * o.sigma);
      obs_idx.push_back(idx);
      obs_y[oi] = o.value;
      obs_var[oi] = o.sigma * o.sigma;
      ++oi;
    }
  }

  Eigen::LLT<Mat> llt(omega_post);
  if (llt.info() != Eigen::Success) throw NumericalFailure("posterior precision is not PD");
  DensePosterior out;
  out.mean = llt.solve(rhs);
  out.covariance = llt.solve(Mat::Identity(dim, dim));
  out.marginal_std = out.covariance.diagonal().cwiseSqrt();

  // log evidence: y ~ N(H mu, H Omega^-1 H^T + R)
  Eigen::LLT<Mat> prior_llt(omega);
  if (prior_llt.info() != Eigen::Success) throw NumericalFailure("prior precision is not PD");
  const Vec mu = prior_llt.solve(eta);
  const Mat prior_cov = prior_llt.solve(Mat::Identity(dim, dim));
  const Eigen::Index m_total = static_cast<Eigen::Index>(obs_idx.size());
  if (m_total > 0) {
    Mat cov_y(m_total, m_total);
    Vec resid(m_total);
    for (Eigen::Index a = 0; a < m_total; ++a) {
      resid[a] = obs_y[a] - mu[obs_idx[a]];
      for (Eigen::Index b = 0; b < m_total; ++b) cov_y(a, b) = prior_cov(obs_idx[a], obs_idx[b]);
      cov_y(a, a) += obs_var[a];
    }
    Eigen::LLT<Mat> ylt(cov_y);
    if (ylt.info() != Eigen::Success) throw NumericalFailure("observation covariance is not PD");
    double logdet = 0.0;
    for (Eigen::Index a = 0; a < m_total; ++a) logdet += 2.0 * std::log(ylt.matrixL()(a, a));
    out.log_evidence = -0.5 * resid.dot(ylt.solve(resid)) - 0.5 * logdet -
                       0.5 * static_cast<double>(m_total) * std::log(2.0 * M_PI);
  }
  return out;
}

SmootherResult rts_smoother(const Vec& init_mean, const Mat& init_prec,
                            const std::vector<Mat>& transitions, const std::vector<Vec>& offsets,
                            const std::vector<Mat>& noise_prec, const ObservationSet& obs) {
  const int n = static_cast<int>(init_mean.size());
  if (n > 1024) throw TooLarge("smoother path limited to N <= 1024");
  const int n_steps = static_cast<int>(transitions.size()) + 1;
  if (static_cast<int>(offsets.size()) != n_steps - 1 ||
      static_cast<int>(noise_prec.size()) != n_steps - 1)
    throw InvalidInput("transitions, offsets and noise precisions must all have K entries");
  obs.validate(n_steps, n);

  auto prec_to_cov = [&](const Mat& q) -> Mat {
    Eigen::LLT<Mat> llt(q);
    if (llt.info() != Eigen::Success) throw NumericalFailure("noise precision is not PD");
    return llt.solve(Mat::Identity(n, n));
  };

  std::vector<Vec> m_pred(n_steps), m_filt(n_steps);
  std::vector<Mat> p_pred(n_steps), p_filt(n_steps);

  auto update = [&](int k) {
    const auto& ob = obs.steps[k];
    if (ob.empty()) {
      m_filt[k] = m_pred[k];
      p_filt[k] = p_pred[k];
      return;
    }
    const int mk = static_cast<int>(ob.size());
    Mat s_inn(mk, mk);
    Mat ph_t(n, mk);  // P H^T
    Vec innov(mk);
    for (int a = 0; a < mk; ++a) {
      innov[a] = ob[a].value - m_pred[k][ob[a].node];
      ph_t.col(a) = p_pred[k].col(ob[a].node);
      for (int b = 0; b < mk; ++b) s_inn(a, b) = p_pred[k](ob[a].node, ob[b].node);
      s_inn(a, a) += ob[a].sigma * ob[a].sigma;
    }
    Eigen::LLT<Mat> llt(s_inn);
    if (llt.info() != Eigen::Success) throw NumericalFailure("innovation covariance is not PD");
    const Mat gain = llt.solve(ph_t.transpose()).transpose();  // N x M
    m_filt[k] = m_pred[k] + gain * innov;
    Mat p = p_pred[k] - gain * ph_t.transpose();
    p_filt[k] = 0.5 * (p + p.transpose());
  };

  m_pred[0] = init_mean;
  p_pred[0] = prec_to_cov(init_prec);
  update(0);
  for (int k = 1; k < n_steps; ++k) {
    m_pred[k] = transitions[k - 1] * m_filt[k - 1] + offsets[k - 1];
    Mat p = transitions[k - 1] * p_filt[k - 1] * transitions[k - 1].transpose() +
            prec_to_cov(noise_prec[k - 1]);
    p_pred[k] = 0.5 * (p + p.transpose());
    update(k);
  }

  SmootherResult out;
  out.means.resize(n_steps);
  out.covs.resize(n_steps);
  out.means[n_steps - 1] = m_filt[n_steps - 1];
  out.covs[n_steps - 1] = p_filt[n_steps - 1];
  for (int k = n_steps - 2; k >= 0; --k) {
    Eigen::LLT<Mat> llt(p_pred[k + 1]);
    if (llt.info() != Eigen::Success) throw NumericalFailure("predicted covariance is not PD");
    const Mat c = llt.solve(transitions[k] * p_filt[k]).transpose();  // P_f F^T P_pred^-1
    out.means[k] = m_filt[k] + c * (out.means[k + 1] - m_pred[k + 1]);
    Mat p = p_filt[k] + c * (out.covs[k + 1] - p_pred[k + 1]) * c.transpose();
    out.covs[k] = 0.5 * (p + p.transpose());
  }
  return out;
}

std::vector<BenchRow> benchmark_scaling(const std::vector<int>& sides, int k_transitions,
                                        int iters, int reps, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  const int n_steps = k_transitions + 1;
  for (int side : sides) {
    GraphSpec g = build_periodic_lattice(side);
    ensure_spectrum(g);
    const int n = g.n_nodes;
    Rng rng(seed);

    // synthetic observations on 90% of coordinates; values only affect
    // right-hand sides, not per-iteration cost
    ObservationSet obs;
    obs.steps.resize(n_steps);
    for (int k = 0; k < n_steps; ++k)
      for (int i = 0; i < n; ++i)
        if (rng.uniform() < 0.9) obs.steps[k].push_back({i, rng.normal(), 0.1});

    ModelParams model = make_default_model(g, n_steps, 1, 2, 2,
                                           TemporalVariant::AdvectionDiffusion, true, rng);
    VariationalParams vp = make_default_variational(g, n_steps, obs, true, rng);

    // engine: median training-iteration time over reps
    {
      std::vector<double> times;
      for (int rep = 0; rep < reps; ++rep) {
        TrainConfig cfg;
        cfg.iterations = iters;
        cfg.seed = seed + rep;
        const auto t0 = clock::now();
        train(model, vp, g, obs, cfg);
        times.push_back(std::chrono::duration<double>(clock::now() - t0).count() / iters);
      }
      rows.push_back({"engine", side, n, k_transitions, "train_iter", median(times)});
    }
    // engine: median time per CG iteration (plain CG, as in inference)
    {
      Vec rhs = information_vector(model, g);
      for (int k = 0; k < n_steps; ++k)
        for (const auto& o : obs.steps[k])
          rhs[static_cast<Eigen::Index>(k) * n + o.node] += o.value / (o.sigma * o.sigma);
      const MatVec a = [&](const Vec& v) { return posterior_matvec(model, g, obs, v); };
      std::vector<double> times;
      for (int rep = 0; rep < reps; ++rep) {
        const auto t0 = clock::now();
        CgResult res = cg_solve(a, rhs, vp.nu, 1e-7, 300);
        const double dt = std::chrono::duration<double>(clock::now() - t0).count();
        times.push_back(dt / std::max(1, res.iterations));
      }
      rows.push_back({"engine", side, n, k_transitions, "cg_iter", median(times)});
    }
    // smoother path: one EM-style iteration = extract dense matrices + one
    // forward/backward pass; refuses above its memory guard
    if (n <= 1024) {
      std::vector<double> times;
      for (int rep = 0; rep < reps; ++rep) {
        const auto t0 = clock::now();
        DenseModel dm = densify(model, g);
        std::vector<Mat> trans(n_steps - 1), qs(n_steps - 1);
        std::vector<Vec> offs(n_steps - 1);
        for (int k = 1; k < n_steps; ++k) {
          trans[k - 1] = dm.f_blocks[k][0];
          qs[k - 1] = dm.s_blocks[k].transpose() * dm.s_blocks[k];
          offs[k - 1] = step(dm.c, k, n);
        }
        const Mat q0 = dm.s_blocks[0].transpose() * dm.s_blocks[0];
        rts_smoother(step(dm.c, 0, n), q0, trans, offs, qs, obs);
        times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      }
      rows.push_back({"rts", side, n, k_transitions, "train_iter", median(times)});
    }
  }
  return rows;
}

}  // namespace stdgmrf
