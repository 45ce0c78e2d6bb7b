#pragma once

#include <optional>
#include <vector>

#include "stdgmrf/layers.hpp"
#include "stdgmrf/types.hpp"

namespace stdgmrf {

// sqrt(mean((estimate - reference)^2)) over the given flat indices.
double rmse(const Vec& estimate, const Vec& reference, const std::vector<Eigen::Index>& indices);

// Closed-form CRPS of a Gaussian N(mu, sigma^2) forecast against outcome y:
// sigma * [z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)], z = (y - mu)/sigma.
// Degenerate sigma = 0 returns |y - mu|.
double crps_gaussian(double mu, double sigma, double y);

// Pearson correlation of two stencils over the union of their keys (missing
// entries read as 0). Returns nullopt when either side has zero variance.
std::optional<double> stencil_pearson(const Stencil& learned, const Stencil& truth);

}  // namespace stdgmrf
