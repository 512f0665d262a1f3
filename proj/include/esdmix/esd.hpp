#pragma once

#include <Eigen/Dense>

#include "esdmix/generators.hpp"

namespace esdmix {

/// Symmetric positive-definite scatter matrix with its eigendecomposition
/// cached. The eigendecomposition is the canonical representation; the
/// dense matrix is kept for I/O round-trips. Immutable after construction.
struct Scatter {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd eigvals;  // ascending
  Eigen::MatrixXd eigvecs;  // orthonormal columns, matching eigvals order
  double log_det = 0.0;

  int dim() const { return static_cast<int>(eigvals.size()); }
  double lambda_min() const { return eigvals(0); }
  double lambda_max() const { return eigvals(eigvals.size() - 1); }
};

/// Floor below which eigenvalues are clamped at construction. Anything
/// materially negative is rejected instead.
inline double eigenvalue_floor(double lambda_max) {
  return 1e-12 * std::max(1.0, lambda_max);
}

/// Builds a Scatter from a dense symmetric matrix. Eigenvalues in
/// [0, floor) are clamped up to the floor; eigenvalues below
/// -1e-8*||matrix|| raise a not-PSD error; an asymmetric input raises a
/// shape error.
Scatter make_scatter(const Eigen::MatrixXd& matrix);

/// Builds a Scatter directly from an eigensystem (orthonormal columns in
/// `eigvecs`, nonnegative `eigvals`). Used by the M-step so that exactly
/// clipped eigenvalues survive unperturbed.
Scatter make_scatter_from_eigen(const Eigen::MatrixXd& eigvecs,
                                const Eigen::VectorXd& eigvals);

/// (x - mu)' S^{-1} (x - mu), computed through the eigendecomposition.
double mahalanobis_sq(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                      const Scatter& S);

/// log f(x; mu, S) = -log_det(S)/2 + log g(mahalanobis_sq).
double esd_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                       const Scatter& S, const DensityGenerator& gen);

/// g(0) * lambda_min(S)^{-p/2}: a uniform bound on the density over x.
double density_upper_bound(const Scatter& S, const DensityGenerator& gen, int p);

}  // namespace esdmix
