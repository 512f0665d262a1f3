#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esdmix/erc.hpp"
#include "esdmix/generators.hpp"
#include "esdmix/mixture.hpp"

namespace esdmix {

enum class ModelFamily { Gaussian, StudentT };

/// Configuration of one constrained maximum-likelihood fit.
struct FitConfig {
  int K = 1;
  double gamma = 1.0;
  ModelFamily model = ModelFamily::Gaussian;
  double nu = 4.0;  // StudentT only, fixed degrees of freedom
  int n_starts = 10;
  int max_iter = 500;
  double rel_tol = 1e-8;
  std::uint64_t seed = 0;
  double min_weight = 1e-6;  // empty-component threshold
  int n_threads = 1;         // starts may run concurrently; results do not depend on this

  DensityGenerator generator() const {
    return model == ModelFamily::Gaussian ? DensityGenerator::gaussian()
                                          : DensityGenerator::student_t(nu);
  }

  void validate() const;
};

/// Outcome of the finite-sample existence pre-check: n > K, at least
/// K + 1 distinct points, and n at or above the generator-specific
/// threshold. Diagnostic only, never throws.
struct ExistenceCheck {
  bool ok = false;
  std::vector<std::string> reasons;
  int n = 0;
  int p = 0;
  int K = 0;
  int min_n = 0;  // generator threshold, 0 if not computable
};

struct FitDiagnostics {
  ExistenceCheck existence;
  bool erc_ok_every_iteration = true;  // checked after every M-step, tol 1e-10
};

struct FitResult {
  MixtureParams theta;
  double loglik = 0.0;                // mean log-likelihood at theta
  std::vector<double> loglik_trace;   // one entry per evaluated iterate, non-decreasing
  PosteriorMatrix posterior;          // n x K at theta
  std::vector<int> assignments;       // MAP labels, 0-based
  int n_iter = 0;
  bool converged = false;
  int start_index = 0;
  FitDiagnostics diagnostics;
};

/// Signals that a component's responsibility mass collapsed below the
/// configured threshold during an M-step; the owning start is restarted.
class EmptyComponentError : public std::runtime_error {
 public:
  explicit EmptyComponentError(int component)
      : std::runtime_error("component " + std::to_string(component)
                           + " collapsed below the weight threshold"),
        component_(component) {}
  int component() const { return component_; }

 private:
  int component_;
};

/// The existence pre-check failed; carries the diagnostics.
class ExistenceError : public std::runtime_error {
 public:
  explicit ExistenceError(ExistenceCheck check);
  const ExistenceCheck& check() const { return check_; }

 private:
  ExistenceCheck check_;
};

/// Every start ran out of retries on empty components.
class FitFailedError : public std::runtime_error {
 public:
  FitFailedError() : std::runtime_error("all starts failed with empty components") {}
};

ExistenceCheck check_finite_sample_existence(const Eigen::MatrixXd& data,
                                             const FitConfig& cfg);

/// Seeded initializer: K distinct rows as centers, nearest-center
/// partition moments, then the feasibility truncation.
MixtureParams init_params(const Eigen::MatrixXd& data, const FitConfig& cfg,
                          std::uint64_t start_seed);

/// Row-wise posterior probabilities at theta.
PosteriorMatrix e_step(const Eigen::MatrixXd& data, const MixtureParams& theta);

/// Weighted-moment update with the constrained eigenvalue step.
MixtureParams m_step_gaussian(const Eigen::MatrixXd& data, const PosteriorMatrix& tau,
                              const FitConfig& cfg);

/// Fixed-nu Student-t update: latent scale weights u = (nu+p)/(nu+delta)
/// at the current theta, then the same constrained eigenvalue step.
MixtureParams m_step_student_t(const Eigen::MatrixXd& data, const PosteriorMatrix& tau,
                               const MixtureParams& current, const FitConfig& cfg);

/// Multi-start constrained ECM fit. Deterministic given cfg.seed,
/// independent of cfg.n_threads.
FitResult fit(const Eigen::MatrixXd& data, const FitConfig& cfg);

}  // namespace esdmix
