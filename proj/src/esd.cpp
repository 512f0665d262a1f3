#include "esdmix/esd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace esdmix {

namespace {

Scatter finish_scatter(Eigen::MatrixXd matrix, Eigen::VectorXd eigvals,
                       Eigen::MatrixXd eigvecs) {
  Scatter s;
  s.matrix = std::move(matrix);
  s.eigvals = std::move(eigvals);
  s.eigvecs = std::move(eigvecs);
  s.log_det = s.eigvals.array().log().sum();
  return s;
}

}  // namespace

Scatter make_scatter(const Eigen::MatrixXd& matrix) {
  if (matrix.rows() != matrix.cols())
    throw std::invalid_argument("make_scatter: matrix must be square");
  const double scale = matrix.norm();
  if ((matrix - matrix.transpose()).norm() > 1e-8 * (1.0 + scale))
    throw std::invalid_argument("make_scatter: matrix must be symmetric");

  Eigen::MatrixXd sym = 0.5 * (matrix + matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("make_scatter: eigendecomposition failed");

  Eigen::VectorXd vals = solver.eigenvalues();
  if (vals(0) < -1e-8 * scale)
    throw std::invalid_argument("make_scatter: matrix is not positive semi-definite");

  const double floor = eigenvalue_floor(vals(vals.size() - 1));
  for (Eigen::Index j = 0; j < vals.size(); ++j)
    if (vals(j) < floor) vals(j) = floor;

  return finish_scatter(std::move(sym), std::move(vals), solver.eigenvectors());
}

Scatter make_scatter_from_eigen(const Eigen::MatrixXd& eigvecs,
                                const Eigen::VectorXd& eigvals) {
  if (eigvecs.rows() != eigvecs.cols() || eigvecs.rows() != eigvals.size())
    throw std::invalid_argument("make_scatter_from_eigen: dimension mismatch");
  if ((eigvals.array() <= 0.0).any())
    throw std::invalid_argument("make_scatter_from_eigen: eigenvalues must be > 0");

  // Keep eigvals ascending to match the make_scatter convention.
  std::vector<Eigen::Index> order(eigvals.size());
  for (Eigen::Index j = 0; j < eigvals.size(); ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return eigvals(a) < eigvals(b);
  });
  Eigen::VectorXd vals(eigvals.size());
  Eigen::MatrixXd vecs(eigvecs.rows(), eigvecs.cols());
  for (Eigen::Index j = 0; j < eigvals.size(); ++j) {
    vals(j) = eigvals(order[j]);
    vecs.col(j) = eigvecs.col(order[j]);
  }

  Eigen::MatrixXd matrix = vecs * vals.asDiagonal() * vecs.transpose();
  matrix = 0.5 * (matrix + matrix.transpose());
  return finish_scatter(std::move(matrix), std::move(vals), std::move(vecs));
}

double mahalanobis_sq(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                      const Scatter& S) {
  if (x.size() != mu.size() || x.size() != S.dim())
    throw std::invalid_argument("mahalanobis_sq: dimension mismatch");
  const Eigen::VectorXd proj = S.eigvecs.transpose() * (x - mu);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < proj.size(); ++j)
    acc += proj(j) * proj(j) / S.eigvals(j);
  return acc;
}

double esd_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                       const Scatter& S, const DensityGenerator& gen) {
  return -0.5 * S.log_det + eval_log_g(gen, mahalanobis_sq(x, mu, S), S.dim());
}

double density_upper_bound(const Scatter& S, const DensityGenerator& gen, int p) {
  return std::exp(eval_log_g(gen, 0.0, p)) * std::pow(S.lambda_min(), -0.5 * p);
}

}  // namespace esdmix
