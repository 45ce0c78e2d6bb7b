// Command-line interface: simulate / train / infer / evaluate / oracle-check / bench.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stdgmrf/datagen.hpp"
#include "stdgmrf/errors.hpp"
#include "stdgmrf/graph.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/io.hpp"
#include "stdgmrf/metrics.hpp"
#include "stdgmrf/oracle.hpp"
#include "stdgmrf/prior.hpp"
#include "stdgmrf/vi.hpp"

using namespace stdgmrf;
using nlohmann::json;

namespace {

struct SimulateArgs {
  int side = 30;
  int k = 20;
  int w = 9;
  double sigma = 0.01;
  double d_diff = 0.01;
  double vx = -0.3, vy = 0.3;
  int steps_per_frame = 4;
  int mask_start = -1;
  int mask_len = -1;  // -1: min(10, K+1)
  int mask_row = -1, mask_col = -1;
  double val_frac = 0.1;
  std::uint64_t seed = 1;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string out;
  int iterations = 10000;
  double lr = 0.01;
  int mc_samples = 1;
  int markov_order = 1;
  int l_spatial = 2;
  int l_temporal = 4;
  std::string temporal_variant = "advdiff";
  bool time_invariant = true;
  bool vi_temporal = true;
  std::uint64_t seed = 0;
};

struct InferArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  int n_posterior_samples = 100;
  std::uint64_t seed = 0;
};

struct EvaluateArgs {
  std::string data;
  std::string posterior;
  std::string checkpoint;
  std::string out = "metrics.json";
  std::string residuals;
  std::string reference = "auto";
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::vector<int> sides = {16, 32, 64};
  int k = 20;
  int iters = 10;
  int reps = 5;
  std::uint64_t seed = 1;
  std::string out = "bench.csv";
};


// flat key=value config file; values act as defaults, command-line flags win
std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidInput("config line without '=': " + line);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

using ConfigMap = std::map<std::string, std::string>;
void cfg_get(const ConfigMap& kv, const char* key, int& out) {
  if (auto it = kv.find(key); it != kv.end()) out = std::stoi(it->second);
}
void cfg_get(const ConfigMap& kv, const char* key, double& out) {
  if (auto it = kv.find(key); it != kv.end()) out = std::stod(it->second);
}
void cfg_get(const ConfigMap& kv, const char* key, std::uint64_t& out) {
  if (auto it = kv.find(key); it != kv.end()) out = std::stoull(it->second);
}
void cfg_get(const ConfigMap& kv, const char* key, std::string& out) {
  if (auto it = kv.find(key); it != kv.end()) out = it->second;
}
void cfg_get(const ConfigMap& kv, const char* key, bool& out) {
  if (auto it = kv.find(key); it != kv.end()) {
    if (it->second == "true" || it->second == "1") out = true;
    else if (it->second == "false" || it->second == "0") out = false;
    else throw InvalidInput(std::string("config key ") + key + " expects a boolean");
  }
}

GraphSpec dataset_graph(const SyntheticDataset& ds) {
  GraphSpec g = build_periodic_lattice(ds.side);
  ensure_spectrum(g);
  return g;
}

// ground-truth generative model of the synthetic dataset as dense blocks
DenseModel truth_dense_model(const SyntheticDataset& ds, const GraphSpec& g) {
  const int n = g.n_nodes;
  SpMat eye(n, n);
  eye.setIdentity();
  const Mat s0 = Mat(SpMat((4.0 + ds.sim.s0_jitter) * eye - g.adjacency));
  const Mat sk = Mat(SpMat(10.0 * eye - g.adjacency));
  const Mat frame =
      Mat(build_adv_diff_transition(g, ds.sim.d_diff, ds.sim.velocity, ds.sim.steps_per_frame));
  DenseModel dm;
  dm.n_steps = ds.n_steps();
  dm.markov_order = 1;
  dm.s_blocks.resize(dm.n_steps);
  dm.f_blocks.assign(dm.n_steps, std::vector<Mat>(1));
  dm.s_blocks[0] = s0;
  for (int k = 1; k < dm.n_steps; ++k) {
    dm.s_blocks[k] = sk;
    dm.f_blocks[k][0] = frame;
  }
  dm.c = Vec::Zero(static_cast<Eigen::Index>(dm.n_steps) * n);
  return dm;
}

// exact posterior marginals of the generative model: dense when the joint
// fits, otherwise through the smoother
std::optional<std::pair<Vec, Vec>> oracle_marginals(const SyntheticDataset& ds,
                                                    const GraphSpec& g,
                                                    const ObservationSet& obs) {
  const int n = g.n_nodes;
  const Eigen::Index dim = static_cast<Eigen::Index>(ds.n_steps()) * n;
  const DenseModel dm = truth_dense_model(ds, g);
  if (dim <= 4096) {
    const DensePosterior dp = dense_posterior(dm, obs);
    return std::make_pair(dp.mean, dp.marginal_std);
  }
  if (n <= 1024) {
    std::vector<Mat> trans(ds.n_steps() - 1), qs(ds.n_steps() - 1);
    std::vector<Vec> offs(ds.n_steps() - 1);
    for (int k = 1; k < ds.n_steps(); ++k) {
      trans[k - 1] = dm.f_blocks[k][0];
      qs[k - 1] = dm.s_blocks[k].transpose() * dm.s_blocks[k];
      offs[k - 1] = step(dm.c, k, n);
    }
    const Mat q0 = dm.s_blocks[0].transpose() * dm.s_blocks[0];
    const SmootherResult sm = rts_smoother(step(dm.c, 0, n), q0, trans, offs, qs, obs);
    Vec mean(dim), sd(dim);
    for (int k = 0; k < ds.n_steps(); ++k) {
      step(mean, k, n) = sm.means[k];
      step(sd, k, n) = sm.covs[k].diagonal().cwiseSqrt();
    }
    return std::make_pair(std::move(mean), std::move(sd));
  }
  return std::nullopt;
}

int run_simulate(const SimulateArgs& a) {
  GraphSpec g = build_periodic_lattice(a.side);
  SimulateConfig sim;
  sim.n_transitions = a.k;
  sim.d_diff = a.d_diff;
  sim.velocity = {a.vx, a.vy};
  sim.steps_per_frame = a.steps_per_frame;
  sim.seed = a.seed;
  MaskConfig mask;
  mask.width = a.w;
  mask.start_step = a.mask_start;
  mask.length = a.mask_len >= 0 ? a.mask_len : std::min(10, a.k + 1);
  mask.corner_row = a.mask_row;
  mask.corner_col = a.mask_col;
  mask.sigma = a.sigma;
  mask.val_frac = a.val_frac;
  mask.seed = a.seed;
  const Vec truth = simulate(g, sim);
  const SyntheticDataset ds = mask_and_observe(g, truth, sim, mask);
  write_dataset(a.out, ds);
  std::cout << "wrote dataset to " << a.out << " (" << ds.n_steps() << " steps, "
            << g.n_nodes << " nodes, " << ds.observations.total() << " observations)\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  const SyntheticDataset ds = read_dataset(a.data);
  GraphSpec g = dataset_graph(ds);
  const ObservationSet obs = ds.observed(false);  // training split only
  Rng rng(a.seed);
  ModelParams m = make_default_model(g, ds.n_steps(), a.markov_order, a.l_spatial, a.l_temporal,
                                     variant_from_string(a.temporal_variant), a.time_invariant,
                                     rng);
  VariationalParams vp = make_default_variational(g, ds.n_steps(), obs, a.vi_temporal, rng);
  TrainConfig cfg;
  cfg.iterations = a.iterations;
  cfg.learning_rate = a.lr;
  cfg.mc_samples = a.mc_samples;
  cfg.seed = a.seed;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult result = train(m, vp, g, obs, cfg);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::filesystem::create_directories(a.out);
  CheckpointInfo info;
  info.side = ds.side;
  info.n_steps = ds.n_steps();
  info.markov_order = a.markov_order;
  info.l_spatial = a.l_spatial;
  info.l_temporal = a.l_temporal;
  info.temporal_variant = a.temporal_variant;
  info.time_invariant = a.time_invariant;
  info.vi_temporal = a.vi_temporal;
  write_checkpoint(a.out + "/checkpoint.bin", info, m, vp);
  write_loss_csv(a.out + "/loss.csv", result.elbo_trace);
  if (!result.elbo_trace.empty())
    std::cout << "final ELBO " << result.elbo_trace.back() << " after " << a.iterations
              << " iterations (" << seconds << " s)\n";
  std::cout << "wrote " << a.out << "/checkpoint.bin and loss.csv\n";
  return 0;
}

int run_infer(const InferArgs& a) {
  const SyntheticDataset ds = read_dataset(a.data);
  GraphSpec g = dataset_graph(ds);
  const Checkpoint ck = read_checkpoint(a.checkpoint, g);
  const ObservationSet obs = ds.observed(true);  // train + validation
  const PosteriorSummary post =
      compute_posterior(ck.model, g, obs, ck.variational.nu, a.n_posterior_samples, a.seed);

  std::filesystem::create_directories(a.out);
  write_posterior_csv(a.out + "/posterior.csv", post.mean, post.marginal_std, g.n_nodes);
  json diag;
  diag["mean_solve"] = {{"iterations", post.mean_solve.iterations},
                        {"residual_norm", post.mean_solve.residual_norm},
                        {"seconds", post.mean_solve.seconds}};
  double sample_seconds = 0.0;
  int sample_iters = 0;
  for (const auto& s : post.sample_solves) {
    sample_seconds += s.seconds;
    sample_iters += s.iterations;
  }
  diag["samples"] = {{"count", static_cast<int>(post.samples.size())},
                     {"total_iterations", sample_iters},
                     {"total_seconds", sample_seconds}};
  std::ofstream(a.out + "/diagnostics.json") << diag.dump(2) << '\n';
  std::cout << "wrote " << a.out << "/posterior.csv (mean solve: "
            << post.mean_solve.iterations << " outer iterations, residual "
            << post.mean_solve.residual_norm << ")\n";
  return 0;
}

int run_evaluate(const EvaluateArgs& a) {
  const SyntheticDataset ds = read_dataset(a.data);
  GraphSpec g = dataset_graph(ds);
  const int n = g.n_nodes;
  auto [mean, sd] = read_posterior_csv(a.posterior, ds.n_steps(), n);

  std::vector<Eigen::Index> test_idx;
  for (size_t i = 0; i < ds.roles.size(); ++i)
    if (ds.roles[i] == Role::Test) test_idx.push_back(static_cast<Eigen::Index>(i));
  if (test_idx.empty()) throw InvalidInput("dataset has an empty test set");

  json metrics;
  std::optional<std::pair<Vec, Vec>> oracle;
  if (a.reference != "truth") oracle = oracle_marginals(ds, g, ds.observed(true));
  if (a.reference == "oracle" && !oracle)
    throw TooLarge("oracle reference requested but the instance exceeds the oracle guards");

  if (oracle) {
    metrics["rmse_mu"] = rmse(mean, oracle->first, test_idx);
    metrics["rmse_sigma"] = rmse(sd, oracle->second, test_idx);
  } else {
    metrics["rmse_mu"] = rmse(mean, ds.truth, test_idx);
    metrics["rmse_sigma"] = nullptr;
  }
  double crps_acc = 0.0;
  for (const auto idx : test_idx) crps_acc += crps_gaussian(mean[idx], sd[idx], ds.truth[idx]);
  metrics["crps"] = crps_acc / static_cast<double>(test_idx.size());

  metrics["stencil_pearson"] = nullptr;
  if (!a.checkpoint.empty()) {
    const Checkpoint ck = read_checkpoint(a.checkpoint, g);
    if (ck.info.l_temporal > 0) {
      const auto& stack = ck.model.temporal_stack(1, 1);
      const Stencil learned = temporal_stencil(g, stack);
      const SpMat frame = build_adv_diff_transition(g, ds.sim.d_diff, ds.sim.velocity,
                                                    ds.sim.steps_per_frame);
      const SpMat frame_t = SpMat(frame.transpose());
      const Stencil truth_stencil = extract_stencil(
          g, static_cast<int>(stack.size()), [&](const Vec& e) -> Vec { return frame_t * e; });
      const auto corr = stencil_pearson(learned, truth_stencil);
      if (corr) metrics["stencil_pearson"] = *corr;
    }
  }

  json cfg;
  cfg["side"] = ds.side;
  cfg["k"] = ds.sim.n_transitions;
  cfg["w"] = ds.mask.width;
  cfg["sigma"] = ds.mask.sigma;
  cfg["reference"] = oracle ? "oracle" : "truth";
  metrics["config"] = cfg;
  metrics["seed"] = a.seed;
  std::ofstream(a.out) << metrics.dump(2) << '\n';

  if (!a.residuals.empty()) {
    std::ofstream f(a.residuals);
    f << std::setprecision(17) << "k,node,residual_mean,residual_std\n";
    const Vec& ref_mean = oracle ? oracle->first : ds.truth;
    for (const auto idx : test_idx) {
      const int k = static_cast<int>(idx / n), node = static_cast<int>(idx % n);
      const double rs = oracle ? sd[idx] - oracle->second[idx] : 0.0;
      f << k << ',' << node << ',' << mean[idx] - ref_mean[idx] << ',' << rs << '\n';
    }
  }
  std::cout << metrics.dump(2) << '\n';
  return 0;
}

int run_oracle_check(std::uint64_t seed) {
  int failures = 0;
  auto report = [&](const std::string& name, bool ok, double value) {
    std::printf("[%s] %-55s %.3e\n", ok ? "ok" : "FAIL", name.c_str(), value);
    failures += ok ? 0 : 1;
  };
  Rng rng(seed);

  auto random_graph = [&](int n, int extra) {
    std::vector<EdgeRecord> edges;
    for (int i = 1; i < n; ++i) edges.push_back({static_cast<int>(rng.index(i)), i, 1.0});
    for (int e = 0; e < extra; ++e) {
      const int x = static_cast<int>(rng.index(n)), y = static_cast<int>(rng.index(n));
      if (x != y) edges.push_back({std::min(x, y), std::max(x, y), 1.0});
    }
    std::sort(edges.begin(), edges.end(), [](const EdgeRecord& p, const EdgeRecord& q) {
      return std::pair{p.src, p.dst} < std::pair{q.src, q.dst};
    });
    edges.erase(std::unique(edges.begin(), edges.end(),
                            [](const EdgeRecord& p, const EdgeRecord& q) {
                              return p.src == q.src && p.dst == q.dst;
                            }),
                edges.end());
    return precompute_spectrum(load_graph(edges, false));
  };
  auto random_model = [&](const GraphSpec&, int n_steps, int p) {
    ModelParams m;
    m.n_steps = n_steps;
    m.markov_order = p;
    m.time_invariant = false;
    m.spatial.resize(n_steps);
    m.bias_s.resize(n_steps);
    m.bias_f.resize(n_steps);
    for (int k = 0; k < n_steps; ++k) {
      m.spatial[k].resize(2);
      for (auto& layer : m.spatial[k]) {
        layer.alpha = 1.0 + rng.uniform(-0.3, 0.3);
        layer.beta = layer.alpha * rng.uniform(-0.6, 0.6);
        layer.gamma = rng.uniform(0.0, 1.2);
      }
      m.bias_s[k] = rng.uniform(-0.5, 0.5);
      m.bias_f[k] = rng.uniform(-0.5, 0.5);
    }
    m.temporal.assign(p, std::vector<std::vector<TemporalLayerParams>>(n_steps));
    for (int tau = 1; tau <= p; ++tau)
      for (int k = tau; k < n_steps; ++k) {
        TemporalLayerParams layer;
        layer.variant = TemporalVariant::Diffusion;
        layer.lambda = rng.uniform(0.2, 0.9);
        layer.omega = rng.uniform(-0.15, 0.15);
        m.temporal[tau - 1][k] = {layer};
      }
    return m;
  };
  auto random_obs = [&](int n_steps, int n) {
    ObservationSet obs;
    obs.steps.resize(n_steps);
    for (int k = 0; k < n_steps; ++k)
      for (int i = 0; i < n; ++i)
        if (rng.uniform() < 0.6) obs.steps[k].push_back({i, rng.normal(), rng.uniform(0.1, 0.4)});
    return obs;
  };

  // block formula vs product factorization
  {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 4 + static_cast<int>(rng.index(5));
      const GraphSpec g = random_graph(n, 3);
      const ModelParams m = random_model(g, 2 + static_cast<int>(rng.index(3)),
                                         1 + static_cast<int>(rng.index(2)));
      const DenseModel dm = densify(m, g);
      worst = std::max(worst,
                       (dense_precision_blocks(dm) - dense_precision(dm)).cwiseAbs().maxCoeff());
    }
    report("precision blocks vs F^T S^T S F (20 instances)", worst < 1e-10, worst);
  }
  // CG posterior mean vs dense solve
  {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      const int n = 5 + static_cast<int>(rng.index(4));
      const GraphSpec g = random_graph(n, 3);
      const ModelParams m = random_model(g, 3, 1);
      const ObservationSet obs = random_obs(3, n);
      const Vec mean = posterior_mean(m, g, obs, Vec::Zero(3 * n));
      const DensePosterior dp = dense_posterior(densify(m, g), obs);
      worst = std::max(worst, (mean - dp.mean).norm() / dp.mean.norm());
    }
    report("regularized CG vs dense posterior mean (5 instances)", worst < 1e-5, worst);
  }
  // smoother vs dense joint posterior
  {
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const GraphSpec g = random_graph(4, 2);
      const ModelParams m = random_model(g, 5, 1);
      const ObservationSet obs = random_obs(5, 4);
      const DenseModel dm = densify(m, g);
      const DensePosterior dp = dense_posterior(dm, obs);
      std::vector<Mat> trans(4), qs(4);
      std::vector<Vec> offs(4);
      for (int k = 1; k < 5; ++k) {
        trans[k - 1] = dm.f_blocks[k][0];
        qs[k - 1] = dm.s_blocks[k].transpose() * dm.s_blocks[k];
        offs[k - 1] = step(dm.c, k, 4);
      }
      const SmootherResult sm = rts_smoother(
          step(dm.c, 0, 4), dm.s_blocks[0].transpose() * dm.s_blocks[0], trans, offs, qs, obs);
      for (int k = 0; k < 5; ++k)
        for (int i = 0; i < 4; ++i) {
          worst = std::max(worst, std::abs(sm.means[k][i] - dp.mean[4 * k + i]));
          worst = std::max(worst,
                           std::abs(sm.covs[k](i, i) - dp.covariance(4 * k + i, 4 * k + i)));
        }
    }
    report("smoother vs dense joint marginals (3 instances)", worst < 1e-6, worst);
  }
  // log-determinant identity
  {
    double worst = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
      const GraphSpec g = random_graph(6, 3);
      const ModelParams m = random_model(g, 4, 1);
      const DenseModel dm = densify(m, g);
      Eigen::PartialPivLU<Mat> lu(dense_s_matrix(dm) * dense_f_matrix(dm));
      double expected = 0.0;
      for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i)
        expected += std::log(std::abs(lu.matrixLU()(i, i)));
      worst = std::max(worst, std::abs(prior_logdet(m, g) - expected));
    }
    report("prior logdet vs dense log|det(SF)| (3 instances)", worst < 1e-7, worst);
  }
  // gradient vs central finite differences
  {
    const GraphSpec g = random_graph(4, 2);
    ModelParams m = random_model(g, 3, 1);
    VariationalParams vp;
    vp.nu = 0.5 * rng.normal_vector(12);
    vp.log_rho = 0.3 * rng.normal_vector(12);
    vp.log_psi = 0.3 * rng.normal_vector(12);
    vp.s_tilde.assign(3, {1.1, -0.2, 1.0, 0.0});
    const ObservationSet obs = random_obs(3, 4);
    const std::vector<Vec> noise = {rng.normal_vector(12)};
    const auto res = elbo_gradient(m, vp, g, obs, noise);
    const Vec flat = flatten_params(m, vp);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
      Vec pert = flat;
      const double h = 1e-5;
      pert[i] = flat[i] + h;
      ModelParams m2 = m;
      VariationalParams vp2 = vp;
      unflatten_params(pert, m2, vp2);
      const double fp = elbo(m2, vp2, g, obs, noise);
      pert[i] = flat[i] - h;
      unflatten_params(pert, m2, vp2);
      const double fm = elbo(m2, vp2, g, obs, noise);
      const double fd = (fp - fm) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - res.grad[i]) /
                                  std::max({std::abs(fd), std::abs(res.grad[i]), 1e-4}));
    }
    report("elbo gradient vs finite differences", worst < 1e-4, worst);
  }
  if (failures == 0) std::cout << "all oracle checks passed\n";
  return failures == 0 ? 0 : 1;
}

int run_bench(const BenchArgs& a) {
  const auto rows = benchmark_scaling(a.sides, a.k, a.iters, a.reps, a.seed);
  write_bench_csv(a.out, rows);
  std::printf("%-8s %6s %8s %4s %-12s %12s\n", "path", "side", "N", "K", "phase", "seconds");
  for (const auto& r : rows)
    std::printf("%-8s %6d %8d %4d %-12s %12.6e\n", r.path.c_str(), r.side, r.n_nodes, r.k,
                r.phase.c_str(), r.seconds);
  std::cout << "wrote " << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse inference engine for spatiotemporal deep GMRFs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  TrainArgs tr;
  InferArgs in;
  EvaluateArgs ev;
  std::string config_path_opt;
  try {
    const std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) {
      const ConfigMap kv = load_config_file(config_path);
      cfg_get(kv, "side", sim.side);
      cfg_get(kv, "k", sim.k);
      cfg_get(kv, "w", sim.w);
      cfg_get(kv, "sigma", sim.sigma);
      cfg_get(kv, "seed", sim.seed);
      cfg_get(kv, "iterations", tr.iterations);
      cfg_get(kv, "lr", tr.lr);
      cfg_get(kv, "mc_samples", tr.mc_samples);
      cfg_get(kv, "markov_order", tr.markov_order);
      cfg_get(kv, "l_spatial", tr.l_spatial);
      cfg_get(kv, "l_temporal", tr.l_temporal);
      cfg_get(kv, "temporal_variant", tr.temporal_variant);
      cfg_get(kv, "time_invariant", tr.time_invariant);
      cfg_get(kv, "vi_temporal", tr.vi_temporal);
      cfg_get(kv, "seed", tr.seed);
      cfg_get(kv, "n_posterior_samples", in.n_posterior_samples);
      cfg_get(kv, "seed", in.seed);
      cfg_get(kv, "seed", ev.seed);
    }
  } catch (const Error& e) {
    json diag;
    diag["error"] = e.what();
    std::cerr << diag.dump() << '\n';
    return 1;
  }
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic advection-diffusion dataset");
  c_sim->add_option("--side", sim.side, "lattice side length");
  c_sim->add_option("--k", sim.k, "number of transitions (K)");
  c_sim->add_option("--w", sim.w, "mask square width");
  c_sim->add_option("--sigma", sim.sigma, "observation noise std");
  c_sim->add_option("--d-diff", sim.d_diff, "diffusion coefficient");
  c_sim->add_option("--vx", sim.vx, "velocity x");
  c_sim->add_option("--vy", sim.vy, "velocity y");
  c_sim->add_option("--steps-per-frame", sim.steps_per_frame, "simulation steps per frame");
  c_sim->add_option("--mask-start", sim.mask_start, "first masked step (-1: K/2 - 5)");
  c_sim->add_option("--mask-len", sim.mask_len, "number of masked steps (-1: min(10, K+1))");
  c_sim->add_option("--mask-row", sim.mask_row, "mask corner row (-1: centered)");
  c_sim->add_option("--mask-col", sim.mask_col, "mask corner col (-1: centered)");
  c_sim->add_option("--val-frac", sim.val_frac, "validation fraction of observed coords");
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--out", sim.out, "output dataset directory")->required();
  c_sim->add_option("--config", config_path_opt, "key=value config file (flags win)");

  auto* c_tr = app.add_subcommand("train", "fit model and variational parameters via the ELBO");
  c_tr->add_option("--data", tr.data, "dataset directory")->required();
  c_tr->add_option("--out", tr.out, "output directory")->required();
  c_tr->add_option("--iterations", tr.iterations, "training iterations");
  c_tr->add_option("--lr", tr.lr, "Adam learning rate");
  c_tr->add_option("--mc_samples,--mc-samples", tr.mc_samples, "Monte Carlo samples per iteration");
  c_tr->add_option("--markov_order,--markov-order", tr.markov_order, "Markov order p");
  c_tr->add_option("--l_spatial,--l-spatial", tr.l_spatial, "spatial layers per step");
  c_tr->add_option("--l_temporal,--l-temporal", tr.l_temporal, "temporal layers per transition");
  c_tr->add_option("--temporal_variant,--temporal-variant", tr.temporal_variant,
                   "ar|diffusion|directed|advdiff");
  c_tr->add_flag("--time_invariant,--time-invariant,!--no-time-invariant", tr.time_invariant,
                 "share parameters across steps k >= 1");
  c_tr->add_flag("--vi_temporal,--vi-temporal,!--no-vi-temporal", tr.vi_temporal,
                 "temporal layer in the variational distribution");
  c_tr->add_option("--seed", tr.seed, "random seed");
  c_tr->add_option("--config", config_path_opt, "key=value config file (flags win)");

  auto* c_in = app.add_subcommand("infer", "posterior mean, samples and marginal stds");
  c_in->add_option("--data", in.data, "dataset directory")->required();
  c_in->add_option("--checkpoint", in.checkpoint, "trained checkpoint")->required();
  c_in->add_option("--out", in.out, "output directory")->required();
  c_in->add_option("--n_posterior_samples,--n-posterior-samples", in.n_posterior_samples,
                   "posterior samples for marginal stds");
  c_in->add_option("--seed", in.seed, "random seed");
  c_in->add_option("--config", config_path_opt, "key=value config file (flags win)");

  auto* c_ev = app.add_subcommand("evaluate", "metric report against oracle posterior and truth");
  c_ev->add_option("--data", ev.data, "dataset directory")->required();
  c_ev->add_option("--posterior", ev.posterior, "posterior.csv from infer")->required();
  c_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint (enables stencil correlation)");
  c_ev->add_option("--out", ev.out, "metrics JSON path");
  c_ev->add_option("--residuals", ev.residuals, "per-coordinate residual CSV path");
  c_ev->add_option("--reference", ev.reference, "auto|oracle|truth")
      ->check(CLI::IsMember({"auto", "oracle", "truth"}));
  c_ev->add_option("--seed", ev.seed, "seed recorded in the report");
  c_ev->add_option("--config", config_path_opt, "key=value config file (flags win)");

  std::uint64_t check_seed = 1;
  auto* c_ok = app.add_subcommand("oracle-check", "run the cross-module equivalence suite");
  c_ok->add_option("--seed", check_seed, "random seed");

  BenchArgs be;
  auto* c_be = app.add_subcommand("bench", "scaling comparison of the engine vs the dense smoother");
  c_be->add_option("--sides", be.sides, "lattice sides")->delimiter(',');
  c_be->add_option("--k", be.k, "number of transitions");
  c_be->add_option("--iters", be.iters, "training iterations per measurement");
  c_be->add_option("--reps", be.reps, "repetitions (median reported)");
  c_be->add_option("--seed", be.seed, "random seed");
  c_be->add_option("--out", be.out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << app.help() << '\n';
    return 2;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_tr->parsed()) return run_train(tr);
    if (c_in->parsed()) return run_infer(in);
    if (c_ev->parsed()) return run_evaluate(ev);
    if (c_ok->parsed()) return run_oracle_check(check_seed);
    if (c_be->parsed()) return run_bench(be);
  } catch (const Error& e) {
    json diag;
    diag["error"] = e.what();
    std::cerr << diag.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    json diag;
    diag["error"] = std::string("unexpected: ") + e.what();
    std::cerr << diag.dump() << '\n';
    return 1;
  }
  return 2;
}
