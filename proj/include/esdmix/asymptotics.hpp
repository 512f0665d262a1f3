#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esdmix/em.hpp"
#include "esdmix/mixture.hpp"
#include "esdmix/rng.hpp"

namespace esdmix {

enum class LawKind { Gaussian, UniformBall, UniformCube, ContaminatedGaussian };

/// Nonparametric component law Q_k, centered at the origin. All built-in
/// laws have finite second moments and closed-form mean and covariance.
struct ComponentLaw {
  LawKind kind = LawKind::Gaussian;
  int p = 1;
  Eigen::VectorXd mean;       // Gaussian only; zero by default
  Eigen::MatrixXd cov;        // Gaussian / ContaminatedGaussian
  Eigen::MatrixXd chol;       // cached lower Cholesky factor of cov
  double radius = 0.0;        // UniformBall
  double half_width = 0.0;    // UniformCube
  double contamination = 0.0; // ContaminatedGaussian mixing fraction
  double inflation = 1.0;     // ContaminatedGaussian covariance blow-up

  static ComponentLaw gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  static ComponentLaw uniform_ball(int p, double radius);
  static ComponentLaw uniform_cube(int p, double half_width);
  static ComponentLaw contaminated_gaussian(const Eigen::MatrixXd& cov,
                                            double contamination, double inflation);

  Eigen::VectorXd sample(Rng& rng) const;
  Eigen::VectorXd theoretical_mean() const;
  Eigen::MatrixXd theoretical_cov() const;
  bool is_continuous() const;
};

/// The shifted-mixture construction: K component laws with proportions
/// xi, and a schedule of shift vectors rho[level][k] whose minimum
/// pairwise distance is non-decreasing in the level. Construction checks
/// the central-set mass condition Q_k{||x|| < epsilon} >= 1 - eta by
/// Monte Carlo (1e5 draws, tolerance 2*eta).
struct ShiftedMixtureSpec {
  std::vector<ComponentLaw> laws;
  Eigen::VectorXd xi;
  std::vector<std::vector<Eigen::VectorXd>> shifts;  // [level][component]
  double epsilon = 0.0;
  double eta = 0.0;

  ShiftedMixtureSpec(std::vector<ComponentLaw> laws, Eigen::VectorXd xi,
                     std::vector<std::vector<Eigen::VectorXd>> shifts, double epsilon,
                     double eta);

  /// Collinear schedule: component k at level m sits at gap_m * k * e1.
  static ShiftedMixtureSpec collinear(std::vector<ComponentLaw> laws,
                                      Eigen::VectorXd xi, const std::vector<double>& gaps,
                                      double epsilon, double eta);

  int K() const { return static_cast<int>(laws.size()); }
  int p() const { return laws.empty() ? 0 : laws.front().p; }
  int n_levels() const { return static_cast<int>(shifts.size()); }
};

struct LabeledSample {
  Eigen::MatrixXd data;      // n x p
  std::vector<int> labels;   // 0-based component of origin
};

/// Draws n points from P_level: a categorical label from xi, a draw from
/// the component law, plus the level's shift. Deterministic given seed.
LabeledSample sample_mixture(const ShiftedMixtureSpec& spec, int level, int n,
                             std::uint64_t seed);

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo estimate of the population mean log-likelihood
/// L(theta, P_level) from M draws.
McEstimate mc_population_loglik(const MixtureParams& theta, const ShiftedMixtureSpec& spec,
                                int level, int M, std::uint64_t seed);

struct ConsistencyRow {
  int n = 0;
  double param_distance = 0.0;
  double loglik_gap = 0.0;
  std::string error;  // non-empty when the fit for this row failed
};

struct ConsistencyResult {
  std::vector<ConsistencyRow> rows;
  MixtureParams reference_theta;
  double reference_loglik_mc = 0.0;
  double reference_loglik_mc_se = 0.0;
};

/// Fits a reference parameter on a size reference_M sample, then measures
/// the parameter distance of fits on fresh samples of each requested size.
ConsistencyResult run_consistency_experiment(const ShiftedMixtureSpec& spec, int level,
                                             const std::vector<int>& sample_sizes,
                                             const FitConfig& cfg, int reference_M,
                                             std::uint64_t seed);

struct ContainmentResult {
  std::vector<double> fractions;  // per spec component
  std::vector<int> matching;      // spec component k -> fitted component
  bool degenerate = false;        // two shifts competed for one fitted center
};

/// Numbers fitted components by the nearest-shift rule (greedy on
/// ascending distance, injective), then measures the fraction of points
/// drawn uniformly in each central ball that the MAP rule assigns to the
/// matched component.
ContainmentResult central_set_containment(const MixtureParams& theta,
                                          const ShiftedMixtureSpec& spec, int level,
                                          int n_test, std::uint64_t seed);

struct SeparationRow {
  int level = 0;
  ContainmentResult containment;
  std::vector<double> pi_err;     // |pi_hat_k - xi_k|
  std::vector<double> mu_err;     // ||mu_hat_k - rho_mk - mean(Q_k)||
  std::vector<double> sigma_err;  // ||Sigma_hat_k - cov(Q_k)||_F
  std::string error;
};

struct SeparationResult {
  std::vector<SeparationRow> rows;
  std::string assumption_check;  // which scenario validity check was applied
};

/// Per level: sample n points, fit, match components to shifts, and
/// report the containment fractions and the three parameter error
/// columns. Requires the Gaussian model (the moment comparisons are only
/// meaningful there) and continuous component laws.
SeparationResult run_separation_experiment(const ShiftedMixtureSpec& spec,
                                           const std::vector<int>& levels,
                                           const FitConfig& cfg, int n, std::uint64_t seed,
                                           int n_test = 2000);

}  // namespace esdmix
