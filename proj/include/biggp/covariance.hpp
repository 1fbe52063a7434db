#pragma once

/** @file
 *
 * Built-in mean and covariance generators.
 *
 * A kernel id K registers three entrywise generators used by the kriging
 * engine: "K:cov" (observations x observations, nugget included),
 * "K:cross" (observations x prediction points) and "K:pred" (prediction
 * points x prediction points, latent process only). Mean generators are
 * "zero-mean" and "constant-mean" (scalar input "mean").
 *
 * Generator inputs: "x" holds observation inputs, "xstar" prediction
 * inputs, both point-major with "dim" (default 1) coordinates per point;
 * "nu" selects the Matern smoothness; "v" adds known per-observation
 * variances.
 *
 * Kernels and their parameter vectors:
 *   white                  (sigma2)
 *   sqexp                  (sigma2, rho, tau2)
 *   matern                 (sigma2, rho, tau2), nu in {0.5, 1.5, 2.5}, default 0.5
 *   matern-product-nugget  (sigma2, rho1, rho2, tau2, eta2) on 2-d inputs:
 *       sigma2 M(dx1/rho1) M(dx2/rho2) + tau2 [x2 equal] + (eta2 + v_i) [i == j]
 *     the second coordinate is the grouping (phase) variable; nu defaults to 2.5.
 */

#include <string>
#include <vector>

namespace biggp {

/// Half-integer Matern correlation with sqrt(2 nu) d / rho scaling.
/// Throws UnsupportedSmoothness unless nu is 0.5, 1.5 or 2.5.
double matern_correlation(double d, double rho, double nu);

/// exp(-d^2 / (2 rho^2)).
double sqexp_correlation(double d, double rho);

/// Ids accepted by kernel_parameter_names.
std::vector<std::string> builtin_kernels();

/// Parameter names of a built-in kernel. Throws InvalidArgument.
std::vector<std::string> kernel_parameter_names(const std::string& kernel);

/// Registers the built-in generators (idempotent).
void register_covariance_generators();

}  // namespace biggp
