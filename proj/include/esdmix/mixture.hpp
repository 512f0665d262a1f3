#pragma once

#include <vector>

#include <Eigen/Dense>

#include "esdmix/esd.hpp"
#include "esdmix/generators.hpp"

namespace esdmix {

/// Full parameter vector of a K-component mixture of elliptically
/// symmetric densities: weights, centers, scatter matrices and the shared
/// density generator. Immutable by convention once validated.
struct MixtureParams {
  int K = 0;
  int p = 0;
  Eigen::VectorXd weights;             // K, nonneg, sums to 1
  std::vector<Eigen::VectorXd> means;  // K vectors of length p
  std::vector<Scatter> scatters;       // K
  DensityGenerator gen;

  /// Throws if the simplex or dimension invariants are violated.
  void validate() const;
};

/// n x K matrix of posterior component probabilities; each row sums to 1.
using PosteriorMatrix = Eigen::MatrixXd;

/// log psi(x; theta) = log sum_k pi_k f_k(x), via log-sum-exp over the
/// components with positive weight.
double log_mixture_density(const Eigen::VectorXd& x, const MixtureParams& theta);

/// Mean of log psi over the rows of `data`.
double sample_loglik(const Eigen::MatrixXd& data, const MixtureParams& theta);

/// Posterior probabilities tau_k(x; theta), computed stably in log space.
/// Components with zero weight get exactly zero posterior mass.
Eigen::VectorXd posterior(const Eigen::VectorXd& x, const MixtureParams& theta);

/// MAP component index in {0..K-1}; ties broken by lowest index.
int map_classify(const Eigen::VectorXd& x, const MixtureParams& theta);

/// Label-switching-invariant distance between two parameter vectors:
/// min over component permutations of
///   sum_k |pi_a - pi_b| + ||mu_a - mu_b|| + ||Sigma_a - Sigma_b||_F.
/// Exact enumeration for K <= 8, Hungarian assignment above.
double param_distance(const MixtureParams& a, const MixtureParams& b);

/// Minimum-cost assignment (Hungarian algorithm) for a square cost
/// matrix; returns the column matched to each row. Exposed for the
/// component-matching logic of the separation experiments.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace esdmix
