#include "stdgmrf/metrics.hpp"

#include <cmath>
#include <set>

#include "stdgmrf/errors.hpp"

namespace stdgmrf {

double rmse(const Vec& estimate, const Vec& reference, const std::vector<Eigen::Index>& indices) {
  if (indices.empty()) throw InvalidInput("rmse over an empty index set");
  double acc = 0.0;
  for (const auto idx : indices) {
    const double d = estimate[idx] - reference[idx];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(indices.size()));
}

double crps_gaussian(double mu, double sigma, double y) {
  if (sigma < 0.0) throw InvalidInput("sigma must be nonnegative");
  if (sigma == 0.0) return std::abs(y - mu);
  const double z = (y - mu) / sigma;
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  return sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(M_PI));
}

std::optional<double> stencil_pearson(const Stencil& learned, const Stencil& truth) {
  std::set<std::pair<int, int>> keys;
  for (const auto& [k, v] : learned) keys.insert(k);
  for (const auto& [k, v] : truth) keys.insert(k);
  if (keys.size() < 2) return std::nullopt;
  auto at = [](const Stencil& s, const std::pair<int, int>& k) {
    const auto it = s.find(k);
    return it == s.end() ? 0.0 : it->second;
  };
  const double n = static_cast<double>(keys.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (const auto& k : keys) {
    const double x = at(learned, k), y = at(truth, k);
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const double vx = sxx - sx * sx / n;
  const double vy = syy - sy * sy / n;
  if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
  return (sxy - sx * sy / n) / std::sqrt(vx * vy);
}

}  // namespace stdgmrf
