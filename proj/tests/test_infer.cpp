#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <cmath>

#include "stdgmrf/errors.hpp"
#include "stdgmrf/infer.hpp"
#include "stdgmrf/oracle.hpp"
#include "support.hpp"

using namespace stdgmrf;
using namespace testsupport;

namespace {

Mat random_spd(Rng& rng, int n) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a.transpose() * a + 0.5 * Mat::Identity(n, n);
}

}  // namespace

TEST_CASE("observation set validation") {
  ObservationSet obs;
  obs.steps.resize(2);
  obs.steps[0] = {{0, 1.0, 0.1}, {2, -1.0, 0.2}};
  obs.validate(2, 4);
  CHECK(obs.total() == 2);

  SUBCASE("duplicate node") {
    obs.steps[1] = {{1, 0.0, 0.1}, {1, 0.5, 0.1}};
    CHECK_THROWS_AS(obs.validate(2, 4), InvalidObservation);
  }
  SUBCASE("out of range") {
    obs.steps[1] = {{4, 0.0, 0.1}};
    CHECK_THROWS_AS(obs.validate(2, 4), InvalidObservation);
  }
  SUBCASE("bad sigma") {
    obs.steps[1] = {{1, 0.0, 0.0}};
    CHECK_THROWS_AS(obs.validate(2, 4), InvalidObservation);
  }
  SUBCASE("wrong step count") {
    CHECK_THROWS_AS(obs.validate(3, 4), InvalidObservation);
  }
}

TEST_CASE("cg on the identity converges in one iteration") {
  Rng rng(1);
  const Vec b = rng.normal_vector(10);
  const auto res = cg_solve([](const Vec& v) { return v; }, b, Vec::Zero(10));
  CHECK(res.iterations <= 1);
  CHECK((res.x - b).norm() < 1e-12);
}

TEST_CASE("cg matches a dense solve on a random SPD system") {
  Rng rng(2);
  const Mat a = random_spd(rng, 16);
  const Vec b = rng.normal_vector(16);
  const Vec expected = a.llt().solve(b);
  const auto res = cg_solve([&](const Vec& v) -> Vec { return a * v; }, b, Vec::Zero(16), 1e-9, 200);
  CHECK((res.x - expected).norm() / expected.norm() < 1e-6);

  SUBCASE("finite termination within n + 5 iterations") {
    CHECK(res.iterations <= 16 + 5);
  }
}

TEST_CASE("cg reports divergence on an indefinite operator") {
  Rng rng(3);
  Vec d = Vec::Ones(8);
  d[3] = -1.0;
  const Vec b = rng.normal_vector(8);
  CHECK_THROWS_AS(cg_solve([&](const Vec& v) -> Vec { return d.cwiseProduct(v); }, b, Vec::Zero(8)),
                  SolverDiverged);
}

TEST_CASE("regularized cg agrees with plain cg on a well-conditioned system") {
  Rng rng(4);
  const Mat a = random_spd(rng, 12);
  const Vec b = rng.normal_vector(12);
  const MatVec mv = [&](const Vec& v) -> Vec { return a * v; };
  const auto plain = cg_solve(mv, b, Vec::Zero(12), 1e-9, 300);
  const auto reg = regularized_cg_solve(mv, b, Vec::Zero(12));
  CHECK((plain.x - reg.x).norm() < 1e-6);
}

TEST_CASE("regularized cg solves the identity to its stopping tolerance") {
  Rng rng(5);
  const Vec b = rng.normal_vector(9);
  const auto res = regularized_cg_solve([](const Vec& v) { return v; }, b, Vec::Zero(9));
  // for A = I the unregularized residual equals the solution error
  CHECK((res.x - b).norm() < 1e-7);
}

TEST_CASE("regularized cg converges where plain cg stalls") {
  // diagonal system with condition number 1e10: a near-null cluster plus a
  // dense band of eigenvalues; 200 plain CG iterations cannot reach the
  // absolute tolerance, the regularized outer loop can
  Rng rng(6);
  const int n = 400;
  Vec d(n);
  for (int i = 0; i < 8; ++i) d[i] = 1e-7;
  for (int i = 8; i < n; ++i) d[i] = std::pow(1e3, static_cast<double>(i - 8) / (n - 9));
  Vec xstar(n);
  for (int i = 0; i < n; ++i) xstar[i] = rng.normal();
  const Vec b = d.cwiseProduct(xstar);
  const MatVec mv = [&](const Vec& v) -> Vec { return d.cwiseProduct(v); };

  const auto plain = cg_solve(mv, b, Vec::Zero(n), 1e-7, 200);
  CHECK(plain.residual_norm > 1e-7);  // stalls within its iteration cap

  const auto reg = regularized_cg_solve(mv, b, Vec::Zero(n));
  CHECK(reg.residual_norm < 1e-7);
  CHECK((d.cwiseProduct(reg.x) - b).norm() < 1e-6);
}

TEST_CASE("posterior matvec") {
  Rng rng(7);
  const GraphSpec g = unit_square_graph();

  SUBCASE("no observations reduces to the prior precision") {
    const ModelParams m = random_model(rng, g, 3, 1, 2, 1);
    ObservationSet obs;
    obs.steps.resize(3);
    const Vec x = rng.normal_vector(12);
    CHECK((posterior_matvec(m, g, obs, x) - precision_matvec(m, g, x)).cwiseAbs().maxCoeff() ==
          doctest::Approx(0.0));
  }
  SUBCASE("identity model fully observed with unit noise doubles x") {
    ModelParams m = random_model(rng, g, 2, 1, 0, 0);
    ObservationSet obs;
    obs.steps.resize(2);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 4; ++i) obs.steps[k].push_back({i, 0.0, 1.0});
    const Vec x = rng.normal_vector(8);
    CHECK((posterior_matvec(m, g, obs, x) - 2.0 * x).cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("matches the dense posterior precision") {
    const ModelParams m = random_model(rng, g, 3, 1, 2, 1);
    const ObservationSet obs = random_observations(rng, 3, 4, 0.6);
    const DenseModel dm = densify(m, g);
    Mat omega_post = dense_precision(dm);
    for (int k = 0; k < 3; ++k)
      for (const auto& o : obs.steps[k])
        omega_post(4 * k + o.node, 4 * k + o.node) += 1.0 / (o.sigma * o.sigma);
    const Vec x = rng.normal_vector(12);
    CHECK((posterior_matvec(m, g, obs, x) - omega_post * x).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("is symmetric") {
    const ModelParams m = random_model(rng, g, 3, 2, 2, 1);
    const ObservationSet obs = random_observations(rng, 3, 4, 0.5);
    const Vec x = rng.normal_vector(12), y = rng.normal_vector(12);
    CHECK(posterior_matvec(m, g, obs, x).dot(y) ==
          doctest::Approx(x.dot(posterior_matvec(m, g, obs, y))).epsilon(1e-9));
  }
}

TEST_CASE("posterior mean pinned by near-exact observations") {
  Rng rng(8);
  const GraphSpec g = unit_square_graph();
  const ModelParams m = random_model(rng, g, 2, 1, 1, 1);
  ObservationSet obs;
  obs.steps.resize(2);
  Vec y = rng.normal_vector(8);
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 4; ++i) obs.steps[k].push_back({i, y[4 * k + i], 1e-4});
  const Vec mean = posterior_mean(m, g, obs, Vec::Zero(8));
  CHECK((mean - y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("posterior mean without observations is the prior mean") {
  Rng rng(9);
  const GraphSpec g = unit_square_graph();
  const ModelParams m = random_model(rng, g, 3, 1, 2, 1);
  ObservationSet obs;
  obs.steps.resize(3);
  const Vec mean = posterior_mean(m, g, obs, Vec::Zero(12));
  const Vec mu = dense_prior_mean(densify(m, g));
  CHECK((mean - mu).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("posterior mean matches the dense solve") {
  Rng rng(10);
  const GraphSpec g = random_connected_graph(rng, 16, 8);
  const ModelParams m = random_model(rng, g, 4, 1, 2, 1);
  const ObservationSet obs = random_observations(rng, 4, 16, 0.5);
  const Vec mean = posterior_mean(m, g, obs, Vec::Zero(64));
  const DensePosterior dp = dense_posterior(densify(m, g), obs);
  CHECK((mean - dp.mean).norm() / dp.mean.norm() < 1e-5);
}

TEST_CASE("posterior mean matches the dense solve for second-order models") {
  Rng rng(13);
  const GraphSpec g = random_connected_graph(rng, 8, 4);
  const ModelParams m = random_model(rng, g, 5, 2, 2, 1);
  const ObservationSet obs = random_observations(rng, 5, 8, 0.5);
  const Vec mean = posterior_mean(m, g, obs, Vec::Zero(40));
  const DensePosterior dp = dense_posterior(densify(m, g), obs);
  CHECK((mean - dp.mean).norm() / dp.mean.norm() < 1e-5);
}

TEST_CASE("perturbation samples are posterior draws") {
  Rng rng(11);
  const GraphSpec g = unit_square_graph();

  SUBCASE("sample mean approaches the posterior mean") {
    const ModelParams m = random_model(rng, g, 3, 1, 1, 1);
    const ObservationSet obs = random_observations(rng, 3, 4, 0.7);
    const Vec mean = posterior_mean(m, g, obs, Vec::Zero(12));
    const auto samples = posterior_sample(m, g, obs, mean, 5000, 77);
    Vec avg = Vec::Zero(12);
    for (const auto& s : samples) avg += s;
    avg /= static_cast<double>(samples.size());
    const DensePosterior dp = dense_posterior(densify(m, g), obs);
    for (int i = 0; i < 12; ++i) {
      const double se = dp.marginal_std[i] / std::sqrt(5000.0);
      CHECK(std::abs(avg[i] - dp.mean[i]) < 4.0 * se + 1e-6);
    }
  }
  SUBCASE("empirical covariance matches the dense inverse") {
    const ModelParams m = random_model(rng, g, 2, 1, 1, 1);
    const ObservationSet obs = random_observations(rng, 2, 4, 0.6);
    const Vec mean = posterior_mean(m, g, obs, Vec::Zero(8));
    const int n_samples = 5000;
    const auto samples = posterior_sample(m, g, obs, mean, n_samples, 78);
    Vec avg = Vec::Zero(8);
    for (const auto& s : samples) avg += s;
    avg /= static_cast<double>(n_samples);
    Mat cov = Mat::Zero(8, 8);
    for (const auto& s : samples) cov += (s - avg) * (s - avg).transpose();
    cov /= static_cast<double>(n_samples - 1);
    const DensePosterior dp = dense_posterior(densify(m, g), obs);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) {
        const double c = dp.covariance(i, j);
        const double se = std::sqrt((dp.covariance(i, i) * dp.covariance(j, j) + c * c) /
                                    static_cast<double>(n_samples));
        CHECK(std::abs(cov(i, j) - c) < 5.0 * se + 1e-9);
      }
  }
  SUBCASE("huge noise reduces samples to prior draws") {
    ModelParams m = random_model(rng, g, 2, 1, 1, 1);
    for (auto& b : m.bias_s) b = 0.0;
    for (auto& b : m.bias_f) b = 0.0;
    ObservationSet obs;
    obs.steps.resize(2);
    for (int k = 0; k < 2; ++k)
      for (int i = 0; i < 4; ++i) obs.steps[k].push_back({i, rng.normal(), 1e6});
    const Vec mean = posterior_mean(m, g, obs, Vec::Zero(8));
    const int n_samples = 4000;
    const auto samples = posterior_sample(m, g, obs, mean, n_samples, 79);
    const Mat prior_cov = dense_precision(densify(m, g)).llt().solve(Mat::Identity(8, 8));
    Vec avg = Vec::Zero(8);
    for (const auto& s : samples) avg += s;
    avg /= static_cast<double>(n_samples);
    for (int i = 0; i < 8; ++i) {
      double var = 0.0;
      for (const auto& s : samples) var += (s[i] - avg[i]) * (s[i] - avg[i]);
      var /= static_cast<double>(n_samples - 1);
      const double se = prior_cov(i, i) * std::sqrt(2.0 / n_samples);
      CHECK(std::abs(var - prior_cov(i, i)) < 5.0 * se);
    }
  }
}

TEST_CASE("marginal std") {
  SUBCASE("identical samples give zero") {
    const Vec a = Vec::Constant(5, 1.7);
    CHECK(marginal_std({a, a, a}).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
  SUBCASE("two samples use the |a-b|/sqrt(2) formula") {
    Vec a(3), b(3);
    a << 1.0, 2.0, 3.0;
    b << 0.0, 5.0, 3.0;
    const Vec sd = marginal_std({a, b});
    for (int i = 0; i < 3; ++i)
      CHECK(sd[i] == doctest::Approx(std::abs(a[i] - b[i]) / std::sqrt(2.0)));
  }
  SUBCASE("needs at least two samples") {
    CHECK_THROWS_AS(marginal_std({Vec::Zero(3)}), InvalidInput);
  }
  SUBCASE("100 standard normal draws land in the chi-square band") {
    Rng rng(12);
    std::vector<Vec> samples;
    for (int s = 0; s < 100; ++s) samples.push_back(rng.normal_vector(16));
    const Vec sd = marginal_std(samples);
    for (int i = 0; i < 16; ++i) {
      CHECK(sd[i] > 0.8);
      CHECK(sd[i] < 1.2);
    }
  }
}
