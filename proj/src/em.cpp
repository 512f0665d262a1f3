#include "esdmix/em.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "esdmix/rng.hpp"

namespace esdmix {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;
constexpr double kErcCheckTol = 1e-10;

/// Squared Mahalanobis distance of every row to (mu, S).
Eigen::VectorXd mahalanobis_sq_rows(const Eigen::MatrixXd& data,
                                    const Eigen::VectorXd& mu, const Scatter& S) {
  Eigen::MatrixXd proj = (data.rowwise() - mu.transpose()) * S.eigvecs;
  for (Eigen::Index j = 0; j < proj.cols(); ++j)
    proj.col(j) /= std::sqrt(S.eigvals(j));
  return proj.rowwise().squaredNorm();
}

/// log f(x_i; mu_k, Sigma_k) for every row, vectorized per component.
Eigen::VectorXd component_log_density_rows(const Eigen::MatrixXd& data,
                                           const Eigen::VectorXd& mu, const Scatter& S,
                                           const DensityGenerator& gen) {
  const int p = S.dim();
  const Eigen::VectorXd maha = mahalanobis_sq_rows(data, mu, S);
  Eigen::VectorXd out(maha.size());
  switch (gen.kind) {
    case GeneratorKind::Gaussian:
      out = (-0.5 * S.log_det - 0.5 * p * kLogTwoPi) - 0.5 * maha.array();
      break;
    case GeneratorKind::StudentT: {
      const double nu = gen.nu;
      const double log_c = std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu)
                           - 0.5 * p * std::log(nu * M_PI);
      out = (-0.5 * S.log_det + log_c)
            - 0.5 * (nu + p)
                  * maha.array().unaryExpr([nu](double t) { return std::log1p(t / nu); });
      break;
    }
    case GeneratorKind::Custom:
      for (Eigen::Index i = 0; i < maha.size(); ++i)
        out(i) = -0.5 * S.log_det + eval_log_g(gen, maha(i), p);
      break;
  }
  return out;
}

struct EStepResult {
  PosteriorMatrix tau;
  double loglik = 0.0;  // mean of row log-sum-exp, i.e. sample_loglik(theta)
};

EStepResult e_step_full(const Eigen::MatrixXd& data, const MixtureParams& theta) {
  const Eigen::Index n = data.rows();
  const int K = theta.K;
  Eigen::MatrixXd scores(n, K);
  for (int k = 0; k < K; ++k) {
    if (theta.weights(k) > 0.0)
      scores.col(k) = component_log_density_rows(data, theta.means[k],
                                                 theta.scatters[k], theta.gen)
                          .array()
                      + std::log(theta.weights(k));
    else
      scores.col(k).setConstant(-std::numeric_limits<double>::infinity());
  }

  EStepResult res;
  res.tau.resize(n, K);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = scores.row(i).maxCoeff();
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      const double e = std::isfinite(scores(i, k)) ? std::exp(scores(i, k) - m) : 0.0;
      res.tau(i, k) = e;
      acc += e;
    }
    res.tau.row(i) /= acc;
    total += m + std::log(acc);
  }
  res.loglik = total / static_cast<double>(n);
  return res;
}

/// Shared tail of both M-steps: weights, the constrained eigenvalue
/// update, and assembly of the new parameter vector.
MixtureParams assemble_constrained(const Eigen::MatrixXd& data,
                                   const Eigen::VectorXd& col_sums,
                                   std::vector<Eigen::VectorXd> means,
                                   const std::vector<Eigen::MatrixXd>& raw_scatters,
                                   const FitConfig& cfg) {
  const int K = cfg.K;
  std::vector<Eigen::VectorXd> target_vals(K);
  std::vector<Eigen::MatrixXd> target_vecs(K);
  std::vector<double> weights(K);
  for (int k = 0; k < K; ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(raw_scatters[k]);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("m_step: eigendecomposition failed");
    target_vals[k] = solver.eigenvalues().cwiseMax(0.0);
    target_vecs[k] = solver.eigenvectors();
    weights[k] = col_sums(k);
  }
  const std::vector<Eigen::VectorXd> lambda =
      optimal_constrained_eigenvalues(target_vals, weights, ErcConfig(cfg.gamma));

  MixtureParams theta;
  theta.K = K;
  theta.p = static_cast<int>(data.cols());
  theta.gen = cfg.generator();
  theta.weights = col_sums / static_cast<double>(data.rows());
  theta.weights /= theta.weights.sum();
  theta.means = std::move(means);
  theta.scatters.reserve(K);
  for (int k = 0; k < K; ++k)
    theta.scatters.push_back(make_scatter_from_eigen(target_vecs[k], lambda[k]));
  return theta;
}

Eigen::VectorXd column_sums_checked(const PosteriorMatrix& tau, const FitConfig& cfg,
                                    Eigen::Index n) {
  Eigen::VectorXd col_sums = tau.colwise().sum();
  for (int k = 0; k < cfg.K; ++k)
    if (col_sums(k) <= 0.0 || col_sums(k) < cfg.min_weight * static_cast<double>(n))
      throw EmptyComponentError(k);
  return col_sums;
}

}  // namespace

void FitConfig::validate() const {
  if (K < 1) throw std::invalid_argument("FitConfig: K must be >= 1");
  if (!(gamma >= 1.0)) throw std::invalid_argument("FitConfig: gamma must be >= 1");
  if (model == ModelFamily::StudentT && !(nu > 0.0))
    throw std::invalid_argument("FitConfig: nu must be > 0");
  if (n_starts < 1) throw std::invalid_argument("FitConfig: n_starts must be >= 1");
  if (max_iter < 1) throw std::invalid_argument("FitConfig: max_iter must be >= 1");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("FitConfig: rel_tol must be > 0");
  if (min_weight < 0.0 || min_weight >= 1.0 / K)
    throw std::invalid_argument("FitConfig: min_weight must be in [0, 1/K)");
  if (n_threads < 1) throw std::invalid_argument("FitConfig: n_threads must be >= 1");
}

ExistenceError::ExistenceError(ExistenceCheck check)
    : std::runtime_error([&check] {
        std::ostringstream os;
        os << "finite-sample existence check failed:";
        for (const std::string& r : check.reasons) os << " [" << r << "]";
        return os.str();
      }()),
      check_(std::move(check)) {}

ExistenceCheck check_finite_sample_existence(const Eigen::MatrixXd& data,
                                             const FitConfig& cfg) {
  ExistenceCheck out;
  out.n = static_cast<int>(data.rows());
  out.p = static_cast<int>(data.cols());
  out.K = cfg.K;

  if (out.n <= cfg.K) out.reasons.push_back("n>K violated");

  std::set<std::vector<double>> distinct;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    std::vector<double> row(data.cols());
    for (Eigen::Index j = 0; j < data.cols(); ++j) row[j] = data(i, j);
    distinct.insert(std::move(row));
    if (static_cast<int>(distinct.size()) > cfg.K) break;
  }
  if (static_cast<int>(distinct.size()) < cfg.K + 1)
    out.reasons.push_back("fewer than K+1 distinct points");

  out.min_n = min_sample_size(cfg.generator(), out.p, cfg.K);
  if (out.n < out.min_n) {
    std::ostringstream os;
    os << "n below generator existence threshold (need n >= " << out.min_n << ")";
    out.reasons.push_back(os.str());
  }

  out.ok = out.reasons.empty();
  return out;
}

MixtureParams init_params(const Eigen::MatrixXd& data, const FitConfig& cfg,
                          std::uint64_t start_seed) {
  const Eigen::Index n = data.rows();
  const int p = static_cast<int>(data.cols());
  const int K = cfg.K;
  Rng rng(start_seed);

  // K distinct rows as centers: the first uniform, the rest sampled with
  // probability proportional to the squared distance to the nearest chosen
  // center. Rows equal to a chosen center carry zero weight, so the
  // centers are distinct whenever K distinct rows exist.
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(data.row(rng.uniform_int(static_cast<std::uint64_t>(n))).transpose());
  Eigen::VectorXd sq_dist(n);
  for (Eigen::Index i = 0; i < n; ++i)
    sq_dist(i) = (data.row(i).transpose() - centers.front()).squaredNorm();
  while (static_cast<int>(centers.size()) < K) {
    const double total = sq_dist.sum();
    if (!(total > 0.0))
      throw std::invalid_argument("init_params: fewer than K distinct rows");
    double u = rng.uniform01() * total;
    Eigen::Index pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      u -= sq_dist(i);
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    if (sq_dist(pick) == 0.0) {  // rounding pushed u past a zero-weight row
      for (Eigen::Index i = 0; i < n; ++i)
        if (sq_dist(i) > sq_dist(pick)) pick = i;
    }
    centers.push_back(data.row(pick).transpose());
    for (Eigen::Index i = 0; i < n; ++i)
      sq_dist(i) = std::min(sq_dist(i),
                            (data.row(i).transpose() - centers.back()).squaredNorm());
  }

  // Nearest-center hard partition.
  std::vector<int> label(n);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (data.row(i).transpose() - centers[0]).squaredNorm();
    for (int k = 1; k < K; ++k) {
      const double dk = (data.row(i).transpose() - centers[k]).squaredNorm();
      if (dk < best_d) {
        best_d = dk;
        best = k;
      }
    }
    label[i] = best;
    counts(best) += 1.0;
  }

  const Eigen::VectorXd grand_mean = data.colwise().mean().transpose();
  Eigen::MatrixXd whole = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd c = data.row(i).transpose() - grand_mean;
    whole += c * c.transpose();
  }
  whole /= static_cast<double>(n);

  std::vector<Eigen::VectorXd> means(K);
  std::vector<Scatter> scatters;
  Eigen::VectorXd weights(K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (Eigen::Index i = 0; i < n; ++i)
      if (label[i] == k) mean += data.row(i).transpose();
    mean /= std::max(counts(k), 1.0);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (label[i] != k) continue;
      const Eigen::VectorXd c = data.row(i).transpose() - mean;
      cov += c * c.transpose();
    }
    if (counts(k) > 0.0) cov /= counts(k);
    if (!(cov.trace() > 0.0)) {
      cov = whole;  // empty or singleton cluster
      mean = centers[k];
    }
    cov += (1e-6 * cov.trace() / p) * Eigen::MatrixXd::Identity(p, p);

    means[k] = mean;
    scatters.push_back(make_scatter(cov));
    weights(k) = std::max(counts(k) / static_cast<double>(n), 1.0 / (10.0 * K));
  }
  weights /= weights.sum();

  MixtureParams theta;
  theta.K = K;
  theta.p = p;
  theta.gen = cfg.generator();
  theta.weights = weights;
  theta.means = std::move(means);
  theta.scatters = feasibility_truncate(scatters, ErcConfig(cfg.gamma));
  return theta;
}

PosteriorMatrix e_step(const Eigen::MatrixXd& data, const MixtureParams& theta) {
  return e_step_full(data, theta).tau;
}

MixtureParams m_step_gaussian(const Eigen::MatrixXd& data, const PosteriorMatrix& tau,
                              const FitConfig& cfg) {
  const Eigen::Index n = data.rows();
  const Eigen::VectorXd col_sums = column_sums_checked(tau, cfg, n);

  std::vector<Eigen::VectorXd> means(cfg.K);
  std::vector<Eigen::MatrixXd> raw(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    means[k] = (data.transpose() * tau.col(k)) / col_sums(k);
    const Eigen::MatrixXd centered = data.rowwise() - means[k].transpose();
    raw[k] = (centered.transpose() * tau.col(k).asDiagonal() * centered) / col_sums(k);
  }
  return assemble_constrained(data, col_sums, std::move(means), raw, cfg);
}

MixtureParams m_step_student_t(const Eigen::MatrixXd& data, const PosteriorMatrix& tau,
                               const MixtureParams& current, const FitConfig& cfg) {
  const Eigen::Index n = data.rows();
  const int p = static_cast<int>(data.cols());
  const double nu = cfg.nu;
  const Eigen::VectorXd col_sums = column_sums_checked(tau, cfg, n);

  std::vector<Eigen::VectorXd> means(cfg.K);
  std::vector<Eigen::MatrixXd> raw(cfg.K);
  for (int k = 0; k < cfg.K; ++k) {
    const Eigen::VectorXd delta =
        mahalanobis_sq_rows(data, current.means[k], current.scatters[k]);
    const Eigen::VectorXd u =
        (nu + p) * (delta.array() + nu).inverse().matrix();
    const Eigen::VectorXd tu = tau.col(k).cwiseProduct(u);
    means[k] = (data.transpose() * tu) / tu.sum();
    const Eigen::MatrixXd centered = data.rowwise() - means[k].transpose();
    raw[k] = (centered.transpose() * tu.asDiagonal() * centered) / col_sums(k);
  }
  return assemble_constrained(data, col_sums, std::move(means), raw, cfg);
}

namespace {

struct ChainResult {
  FitResult result;
  bool failed = false;
};

ChainResult run_chain(const Eigen::MatrixXd& data, const FitConfig& cfg,
                      std::uint64_t chain_seed, int start_index) {
  ChainResult out;
  out.result.start_index = start_index;

  MixtureParams theta = init_params(data, cfg, chain_seed);
  EStepResult es = e_step_full(data, theta);
  std::vector<double> trace{es.loglik};
  bool erc_ok = satisfies_erc(theta, ErcConfig(cfg.gamma), kErcCheckTol);
  bool converged = false;
  int iters = 0;
  double prev = es.loglik;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    theta = cfg.model == ModelFamily::Gaussian
                ? m_step_gaussian(data, es.tau, cfg)
                : m_step_student_t(data, es.tau, theta, cfg);
    const bool erc_now = satisfies_erc(theta, ErcConfig(cfg.gamma), kErcCheckTol);
    assert(erc_now && "ERC must hold after every M-step");
    erc_ok = erc_ok && erc_now;

    es = e_step_full(data, theta);
    trace.push_back(es.loglik);
    ++iters;
    if (std::abs(es.loglik - prev) / (1.0 + std::abs(es.loglik)) < cfg.rel_tol) {
      converged = true;
      break;
    }
    prev = es.loglik;
  }

  FitResult& r = out.result;
  r.theta = std::move(theta);
  r.loglik = trace.back();
  r.loglik_trace = std::move(trace);
  r.posterior = std::move(es.tau);
  r.n_iter = iters;
  r.converged = converged;
  r.diagnostics.erc_ok_every_iteration = erc_ok;

  const Eigen::Index n = data.rows();
  r.assignments.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < cfg.K; ++k)
      if (r.posterior(i, k) > r.posterior(i, best)) best = k;
    r.assignments[i] = best;
  }
  return out;
}

ChainResult run_start_with_retries(const Eigen::MatrixXd& data, const FitConfig& cfg,
                                   int start_index) {
  const std::uint64_t base = derive_seed(cfg.seed, static_cast<std::uint64_t>(start_index));
  constexpr int kMaxRetries = 3;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const std::uint64_t chain_seed =
        attempt == 0 ? base : derive_seed(base, static_cast<std::uint64_t>(attempt));
    try {
      return run_chain(data, cfg, chain_seed, start_index);
    } catch (const EmptyComponentError&) {
      continue;
    }
  }
  ChainResult failed;
  failed.failed = true;
  failed.result.start_index = start_index;
  return failed;
}

}  // namespace

FitResult fit(const Eigen::MatrixXd& data, const FitConfig& cfg) {
  cfg.validate();
  ExistenceCheck existence = check_finite_sample_existence(data, cfg);
  if (!existence.ok) throw ExistenceError(existence);

  std::vector<ChainResult> slots(cfg.n_starts);
  const int n_threads = std::min(cfg.n_threads, cfg.n_starts);
  if (n_threads <= 1) {
    for (int s = 0; s < cfg.n_starts; ++s) slots[s] = run_start_with_retries(data, cfg, s);
  } else {
    // Static partition by start index; each slot is written by exactly one
    // thread, so the outcome cannot depend on scheduling.
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t] {
        for (int s = t; s < cfg.n_starts; s += n_threads)
          slots[s] = run_start_with_retries(data, cfg, s);
      });
    }
    for (std::thread& th : pool) th.join();
  }

  int best = -1;
  for (int s = 0; s < cfg.n_starts; ++s) {
    if (slots[s].failed) continue;
    if (best < 0 || slots[s].result.loglik > slots[best].result.loglik) best = s;
  }
  if (best < 0) throw FitFailedError();

  FitResult result = std::move(slots[best].result);
  result.diagnostics.existence = std::move(existence);
  return result;
}

}  // namespace esdmix
