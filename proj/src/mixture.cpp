#include "esdmix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace esdmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log pi_k + log f_k(x) for every component; -inf where pi_k = 0.
Eigen::VectorXd component_log_scores(const Eigen::VectorXd& x,
                                     const MixtureParams& theta) {
  Eigen::VectorXd scores(theta.K);
  for (int k = 0; k < theta.K; ++k) {
    if (theta.weights(k) > 0.0)
      scores(k) = std::log(theta.weights(k))
                  + esd_log_density(x, theta.means[k], theta.scatters[k], theta.gen);
    else
      scores(k) = kNegInf;
  }
  return scores;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - m);
  return m + std::log(acc);
}

}  // namespace

void MixtureParams::validate() const {
  if (K < 1) throw std::invalid_argument("MixtureParams: K must be >= 1");
  if (weights.size() != K || static_cast<int>(means.size()) != K ||
      static_cast<int>(scatters.size()) != K)
    throw std::invalid_argument("MixtureParams: component count mismatch");
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("MixtureParams: weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) >= 1e-10)
    throw std::invalid_argument("MixtureParams: weights must sum to 1");
  for (int k = 0; k < K; ++k)
    if (means[k].size() != p || scatters[k].dim() != p)
      throw std::invalid_argument("MixtureParams: dimension mismatch in component");
}

double log_mixture_density(const Eigen::VectorXd& x, const MixtureParams& theta) {
  if (x.size() != theta.p)
    throw std::invalid_argument("log_mixture_density: dimension mismatch");
  return log_sum_exp(component_log_scores(x, theta));
}

double sample_loglik(const Eigen::MatrixXd& data, const MixtureParams& theta) {
  if (data.rows() < 1)
    throw std::invalid_argument("sample_loglik: data must be non-empty");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    acc += log_mixture_density(data.row(i).transpose(), theta);
  return acc / static_cast<double>(data.rows());
}

Eigen::VectorXd posterior(const Eigen::VectorXd& x, const MixtureParams& theta) {
  const Eigen::VectorXd scores = component_log_scores(x, theta);
  const double lse = log_sum_exp(scores);
  Eigen::VectorXd tau(theta.K);
  for (int k = 0; k < theta.K; ++k)
    tau(k) = std::isfinite(scores(k)) ? std::exp(scores(k) - lse) : 0.0;
  tau /= tau.sum();
  return tau;
}

int map_classify(const Eigen::VectorXd& x, const MixtureParams& theta) {
  const Eigen::VectorXd scores = component_log_scores(x, theta);
  int best = 0;
  for (int k = 1; k < theta.K; ++k)
    if (scores(k) > scores(best)) best = k;
  return best;
}

namespace {

double pair_cost(const MixtureParams& a, int i, const MixtureParams& b, int j) {
  return std::abs(a.weights(i) - b.weights(j))
         + (a.means[i] - b.means[j]).norm()
         + (a.scatters[i].matrix - b.scatters[j].matrix).norm();
}

}  // namespace

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  // Hungarian algorithm, O(n^3) shortest augmenting path formulation.
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("min_cost_assignment: square matrix required");
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0);  // match[j]: row (1-based) assigned to column j
  for (int i = 1; i <= n; ++i) {
    std::vector<double> min_slack(n + 1, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n + 1, 0);
    std::vector<bool> used(n + 1, false);
    int j0 = 0;
    match[0] = i;
    do {
      used[j0] = true;
      const int i0 = match[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (slack < min_slack[j]) {
          min_slack[j] = slack;
          prev[j] = j0;
        }
        if (min_slack[j] < delta) {
          delta = min_slack[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          min_slack[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    while (j0 != 0) {
      const int j1 = prev[j0];
      match[j0] = match[j1];
      j0 = j1;
    }
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j)
    if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

double param_distance(const MixtureParams& a, const MixtureParams& b) {
  if (a.K != b.K || a.p != b.p)
    throw std::invalid_argument("param_distance: K and p must match");
  const int K = a.K;

  if (K <= 8) {
    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (int k = 0; k < K; ++k) total += pair_cost(a, k, b, perm[k]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
  }

  Eigen::MatrixXd cost(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) cost(i, j) = pair_cost(a, i, b, j);
  const std::vector<int> assign = min_cost_assignment(cost);
  double total = 0.0;
  for (int i = 0; i < K; ++i) total += cost(i, assign[i]);
  return total;
}

}  // namespace esdmix
