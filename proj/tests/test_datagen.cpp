#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>
#include <set>

#include "stdgmrf/datagen.hpp"
#include "stdgmrf/errors.hpp"
#include "stdgmrf/rng.hpp"
#include "support.hpp"

using namespace stdgmrf;

TEST_CASE("frame transition is the identity without dynamics") {
  const GraphSpec g = build_periodic_lattice(5);
  const SpMat f = build_adv_diff_transition(g, 0.0, {0.0, 0.0}, 1);
  const Mat dense = Mat(f);
  CHECK((dense - Mat::Identity(25, 25)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("frame transition preserves constants") {
  const GraphSpec g = build_periodic_lattice(6);
  for (const double d : {0.0, 0.01, 0.05}) {
    const SpMat f = build_adv_diff_transition(g, d, {-0.3, 0.3}, 4);
    const Vec ones = Vec::Ones(36);
    CHECK(((f * ones) - ones).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("frame transition matches the dense Taylor power oracle") {
  const GraphSpec g = build_periodic_lattice(5);
  const double d = 0.01;
  const Eigen::Vector2d v{-0.3, 0.3};
  const SpMat f = build_adv_diff_transition(g, d, v, 4);

  // independent dense construction of (I + M + M^2/2 + M^3/6)^4
  TemporalLayerParams layer;
  layer.variant = TemporalVariant::AdvectionDiffusion;
  layer.d = std::sqrt(d);
  layer.velocity = v;
  const Mat m = dense_temporal_matrix(g, layer) - Mat::Identity(25, 25);
  const Mat taylor = Mat::Identity(25, 25) + m + 0.5 * m * m + (1.0 / 6.0) * m * m * m;
  Mat expected = taylor;
  for (int s = 1; s < 4; ++s) expected = expected * taylor;
  CHECK((Mat(f) - expected).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("simulation is bit-reproducible") {
  const GraphSpec g = build_periodic_lattice(4);
  SimulateConfig cfg;
  cfg.n_transitions = 5;
  cfg.seed = 42;
  const Vec a = simulate(g, cfg);
  const Vec b = simulate(g, cfg);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  cfg.seed = 43;
  CHECK((simulate(g, cfg) - a).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero dynamics and zero noise give a constant trajectory") {
  const GraphSpec g = build_periodic_lattice(4);
  SimulateConfig cfg;
  cfg.n_transitions = 4;
  cfg.d_diff = 0.0;
  cfg.velocity = {0.0, 0.0};
  cfg.noise_scale = 0.0;
  const Vec truth = simulate(g, cfg);
  for (int k = 1; k <= 4; ++k)
    CHECK((Vec(step(truth, k, 16)) - Vec(step(truth, 0, 16))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("noise draws have the generating precision") {
  // eps solves (10 I - A) eps = z, so Cov(eps) = ((10I-A)^T (10I-A))^-1
  const GraphSpec g = build_periodic_lattice(3);
  SpMat eye(9, 9);
  eye.setIdentity();
  const Mat s = Mat(SpMat(10.0 * eye - g.adjacency));
  const Mat cov_expected = (s.transpose() * s).llt().solve(Mat::Identity(9, 9));

  Rng rng(7);
  const int n_draws = 2000;
  const MatVec apply = [&](const Vec& v) -> Vec { return s * v; };
  Mat cov = Mat::Zero(9, 9);
  Vec mean = Vec::Zero(9);
  std::vector<Vec> draws;
  for (int i = 0; i < n_draws; ++i) {
    draws.push_back(cg_solve(apply, rng.normal_vector(9), Vec::Zero(9), 1e-10, 100).x);
    mean += draws.back();
  }
  mean /= n_draws;
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose();
  cov /= n_draws - 1;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      const double se = std::sqrt((cov_expected(i, i) * cov_expected(j, j) +
                                   cov_expected(i, j) * cov_expected(i, j)) /
                                  n_draws);
      CHECK(std::abs(cov(i, j) - cov_expected(i, j)) < 5.0 * se + 1e-12);
    }
}

TEST_CASE("masking bookkeeping") {
  const GraphSpec g = build_periodic_lattice(30);
  SimulateConfig sim;
  sim.n_transitions = 20;
  sim.seed = 1;
  const Vec truth = simulate(g, sim);

  SUBCASE("benchmark mask removes 810 coordinates") {
    MaskConfig mask;
    mask.width = 9;
    mask.seed = 1;
    const SyntheticDataset ds = mask_and_observe(g, truth, sim, mask);
    int n_test = 0, n_val = 0, n_train = 0;
    for (const Role r : ds.roles) {
      n_test += r == Role::Test;
      n_val += r == Role::Val;
      n_train += r == Role::Train;
    }
    CHECK(n_test == 810);  // 81 pixels x 10 steps
    CHECK(n_train + n_val + n_test == 900 * 21);
    CHECK(n_val == static_cast<int>(0.1 * (900 * 21 - 810)));
    CHECK(ds.mask.start_step == 5);  // K/2 - 5 default keeps the window interior

    // masked coordinates never appear among the observations
    std::set<std::pair<int, int>> observed;
    for (int k = 0; k < ds.n_steps(); ++k)
      for (const auto& o : ds.observations.steps[k]) observed.insert({k, o.node});
    CHECK(static_cast<int>(observed.size()) == n_train + n_val);
    for (int k = 0; k < ds.n_steps(); ++k)
      for (int i = 0; i < 900; ++i)
        if (ds.roles[static_cast<size_t>(k) * 900 + i] == Role::Test)
          CHECK(observed.count({k, i}) == 0);

    // role-filtered views
    CHECK(ds.observed(false).total() == n_train);
    CHECK(ds.observed(true).total() == n_train + n_val);
  }
  SUBCASE("zero-width mask observes everything") {
    MaskConfig mask;
    mask.width = 0;
    mask.val_frac = 0.0;
    const SyntheticDataset ds = mask_and_observe(g, truth, sim, mask);
    CHECK(ds.observations.total() == 900 * 21);
    for (const Role r : ds.roles) CHECK(r == Role::Train);
  }
  SUBCASE("zero noise reproduces the truth at observed coordinates") {
    MaskConfig mask;
    mask.width = 4;
    mask.sigma = 0.0;
    const SyntheticDataset ds = mask_and_observe(g, truth, sim, mask);
    for (int k = 0; k < ds.n_steps(); ++k)
      for (const auto& o : ds.observations.steps[k])
        CHECK(o.value == truth[static_cast<Eigen::Index>(k) * 900 + o.node]);
  }
  SUBCASE("oversized mask is rejected") {
    MaskConfig mask;
    mask.width = 31;
    CHECK_THROWS_AS(mask_and_observe(g, truth, sim, mask), InvalidMask);
  }
}

TEST_CASE("masking is reproducible") {
  const GraphSpec g = build_periodic_lattice(6);
  SimulateConfig sim;
  sim.n_transitions = 6;
  sim.seed = 9;
  const Vec truth = simulate(g, sim);
  MaskConfig mask;
  mask.width = 2;
  mask.length = 3;
  mask.seed = 4;
  const SyntheticDataset a = mask_and_observe(g, truth, sim, mask);
  const SyntheticDataset b = mask_and_observe(g, truth, sim, mask);
  REQUIRE(a.roles.size() == b.roles.size());
  for (size_t i = 0; i < a.roles.size(); ++i) CHECK(a.roles[i] == b.roles[i]);
  for (int k = 0; k <= 6; ++k) {
    REQUIRE(a.observations.steps[k].size() == b.observations.steps[k].size());
    for (size_t i = 0; i < a.observations.steps[k].size(); ++i)
      CHECK(a.observations.steps[k][i].value == b.observations.steps[k][i].value);
  }
}
