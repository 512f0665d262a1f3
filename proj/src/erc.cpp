#include "esdmix/erc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace esdmix {

namespace {

/// Largest cap <= gamma*m whose computed ratio cap/m does not exceed
/// gamma; shaves at most a couple of ulps so the constraint holds exactly
/// in floating point.
double exact_cap(double gamma, double m) {
  double cap = gamma * m;
  while (cap / m > gamma) cap = std::nextafter(cap, 0.0);
  return cap;
}

double clip(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

}  // namespace

bool satisfies_erc(const MixtureParams& theta, const ErcConfig& cfg, double tol) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const Scatter& s : theta.scatters) {
    lo = std::min(lo, s.lambda_min());
    hi = std::max(hi, s.lambda_max());
  }
  return hi / lo <= cfg.gamma * (1.0 + tol);
}

std::vector<Scatter> feasibility_truncate(const std::vector<Scatter>& scatters,
                                          const ErcConfig& cfg) {
  if (scatters.empty())
    throw std::invalid_argument("feasibility_truncate: empty scatter list");
  double lambda_min = std::numeric_limits<double>::infinity();
  for (const Scatter& s : scatters) lambda_min = std::min(lambda_min, s.lambda_min());
  if (!(lambda_min > 0.0))
    throw std::invalid_argument("feasibility_truncate: degenerate scatter (lambda_min <= 0)");

  const double cap = exact_cap(cfg.gamma, lambda_min);
  std::vector<Scatter> out;
  out.reserve(scatters.size());
  for (const Scatter& s : scatters) {
    if (s.lambda_max() <= cap) {
      out.push_back(s);
      continue;
    }
    Eigen::VectorXd vals = s.eigvals;
    for (Eigen::Index j = 0; j < vals.size(); ++j) vals(j) = std::min(vals(j), cap);
    out.push_back(make_scatter_from_eigen(s.eigvecs, vals));
  }
  return out;
}

double erc_profile_objective(const std::vector<Eigen::VectorXd>& targets,
                             const std::vector<double>& weights, double gamma,
                             double m) {
  const double cap = gamma * m;
  double acc = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    for (Eigen::Index j = 0; j < targets[k].size(); ++j) {
      const double lam = clip(targets[k](j), m, cap);
      acc += weights[k] * (std::log(lam) + targets[k](j) / lam);
    }
  }
  return acc;
}

std::vector<Eigen::VectorXd> optimal_constrained_eigenvalues(
    const std::vector<Eigen::VectorXd>& targets, const std::vector<double>& weights,
    const ErcConfig& cfg) {
  if (targets.empty() || targets.size() != weights.size())
    throw std::invalid_argument("optimal_constrained_eigenvalues: size mismatch");

  double d_max = 0.0;
  double w_sum = 0.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if ((targets[k].array() < 0.0).any())
      throw std::invalid_argument("optimal_constrained_eigenvalues: negative target");
    if (weights[k] < 0.0)
      throw std::invalid_argument("optimal_constrained_eigenvalues: negative weight");
    if (targets[k].size() > 0) d_max = std::max(d_max, targets[k].maxCoeff());
    w_sum += weights[k];
  }
  if (d_max == 0.0)
    throw std::invalid_argument("optimal_constrained_eigenvalues: all targets zero");
  if (!(w_sum > 0.0))
    throw std::invalid_argument("optimal_constrained_eigenvalues: weights sum to zero");

  // Degenerate-cluster guard: lift vanishing targets to the scatter floor
  // so the per-interval objective stays bounded.
  const double floor = eigenvalue_floor(d_max);
  std::vector<Eigen::VectorXd> d = targets;
  double d_min = d_max;
  for (auto& dk : d)
    for (Eigen::Index j = 0; j < dk.size(); ++j) {
      if (dk(j) < floor) dk(j) = floor;
      d_min = std::min(d_min, dk(j));
    }

  // Already feasible: the clip is the identity at the optimum.
  if (d_max / d_min <= cfg.gamma) return d;

  const double gamma = cfg.gamma;
  struct Entry {
    double value;
    double weight;
  };
  std::vector<Entry> flat;
  std::vector<double> breakpoints;
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (Eigen::Index j = 0; j < d[k].size(); ++j) {
      flat.push_back({d[k](j), weights[k]});
      breakpoints.push_back(d[k](j));
      breakpoints.push_back(d[k](j) / gamma);
    }
  }
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()),
                    breakpoints.end());

  const auto objective = [&](double m) {
    return erc_profile_objective(d, weights, gamma, m);
  };

  double best_m = breakpoints.front();
  double best_f = objective(best_m);
  const auto consider = [&](double m) {
    if (!(m > 0.0)) return;
    const double f = objective(m);
    if (f < best_f || (f == best_f && m < best_m)) {
      best_f = f;
      best_m = m;
    }
  };
  for (double b : breakpoints) consider(b);

  // Each open interval between breakpoints has a fixed clip pattern, so
  // F(m) = den*log(m) + num/m + const there; check its stationary point.
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i <= breakpoints.size(); ++i) {
    const double lo = (i == 0) ? 0.0 : breakpoints[i - 1];
    const double hi = (i == breakpoints.size()) ? inf : breakpoints[i];
    const double probe = (hi == inf) ? lo * 2.0 : 0.5 * (lo + hi);
    if (!(probe > lo && probe < hi)) continue;
    double num = 0.0, den = 0.0;
    for (const Entry& e : flat) {
      if (e.value < probe) {  // clipped up to m
        num += e.weight * e.value;
        den += e.weight;
      } else if (e.value > gamma * probe) {  // clipped down to gamma*m
        num += e.weight * e.value / gamma;
        den += e.weight;
      }
    }
    if (den <= 0.0) {
      consider(probe);  // F constant on this interval
      continue;
    }
    consider(clip(num / den, std::max(lo, std::numeric_limits<double>::min()), hi));
  }

  const double cap = exact_cap(gamma, best_m);
  std::vector<Eigen::VectorXd> out = d;
  for (auto& dk : out)
    for (Eigen::Index j = 0; j < dk.size(); ++j) dk(j) = clip(dk(j), best_m, cap);
  return out;
}

}  // namespace esdmix
