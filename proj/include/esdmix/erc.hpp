#pragma once

#include <vector>

#include <Eigen/Dense>

#include "esdmix/esd.hpp"
#include "esdmix/mixture.hpp"

namespace esdmix {

/// Eigen-ratio constraint: the largest eigenvalue across all component
/// scatter matrices may exceed the smallest by at most a factor gamma.
/// gamma = 1 forces spherical, equal scatters.
struct ErcConfig {
  double gamma = 1.0;

  explicit ErcConfig(double g) : gamma(g) {
    if (!(g >= 1.0)) throw std::invalid_argument("ErcConfig: gamma must be >= 1");
  }
};

/// True iff max/min over all eigenvalues of all components is
/// <= gamma * (1 + tol).
bool satisfies_erc(const MixtureParams& theta, const ErcConfig& cfg, double tol);

/// Replaces every eigenvalue lambda by min(lambda, gamma * lambda_min)
/// where lambda_min is the smallest eigenvalue across all scatters,
/// keeping eigenvectors. Output satisfies the constraint exactly; already
/// feasible inputs pass through unchanged.
std::vector<Scatter> feasibility_truncate(const std::vector<Scatter>& scatters,
                                          const ErcConfig& cfg);

/// The conditional M-step eigenvalue problem: given per-component target
/// eigenvalues d_{k,j} (from the unconstrained weighted scatter update)
/// and component weights w_k, returns lambda_{k,j} = clip(d_{k,j}, m, gamma*m)
/// with m chosen to minimize
///   F(m) = sum_k w_k sum_j [ log clip(d,m,gamma*m) + d / clip(d,m,gamma*m) ].
/// F is piecewise smooth with breakpoints at {d} and {d/gamma}; the exact
/// optimum is found by evaluating each interval's stationary point.
std::vector<Eigen::VectorXd> optimal_constrained_eigenvalues(
    const std::vector<Eigen::VectorXd>& targets, const std::vector<double>& weights,
    const ErcConfig& cfg);

/// Objective value F for a given truncation level m (exposed for tests).
double erc_profile_objective(const std::vector<Eigen::VectorXd>& targets,
                             const std::vector<double>& weights, double gamma,
                             double m);

}  // namespace esdmix
