#include "esdmix/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace esdmix {

namespace {

Eigen::MatrixXd lower_cholesky(const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("component law covariance is not positive definite");
  return llt.matrixL();
}

Eigen::VectorXd standard_normal_vector(Rng& rng, int p) {
  Eigen::VectorXd z(p);
  for (int j = 0; j < p; ++j) z(j) = rng.normal();
  return z;
}

}  // namespace

ComponentLaw ComponentLaw::gaussian(const Eigen::VectorXd& mean,
                                    const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw std::invalid_argument("ComponentLaw::gaussian: dimension mismatch");
  ComponentLaw law;
  law.kind = LawKind::Gaussian;
  law.p = static_cast<int>(mean.size());
  law.mean = mean;
  law.cov = cov;
  law.chol = lower_cholesky(cov);
  return law;
}

ComponentLaw ComponentLaw::uniform_ball(int p, double radius) {
  if (p < 1 || radius < 0.0)
    throw std::invalid_argument("ComponentLaw::uniform_ball: bad arguments");
  ComponentLaw law;
  law.kind = LawKind::UniformBall;
  law.p = p;
  law.radius = radius;
  return law;
}

ComponentLaw ComponentLaw::uniform_cube(int p, double half_width) {
  if (p < 1 || half_width < 0.0)
    throw std::invalid_argument("ComponentLaw::uniform_cube: bad arguments");
  ComponentLaw law;
  law.kind = LawKind::UniformCube;
  law.p = p;
  law.half_width = half_width;
  return law;
}

ComponentLaw ComponentLaw::contaminated_gaussian(const Eigen::MatrixXd& cov,
                                                 double contamination, double inflation) {
  if (cov.rows() != cov.cols())
    throw std::invalid_argument("ComponentLaw::contaminated_gaussian: square cov required");
  if (contamination < 0.0 || contamination > 1.0 || inflation <= 0.0)
    throw std::invalid_argument("ComponentLaw::contaminated_gaussian: bad mixing parameters");
  ComponentLaw law;
  law.kind = LawKind::ContaminatedGaussian;
  law.p = static_cast<int>(cov.rows());
  law.mean = Eigen::VectorXd::Zero(law.p);
  law.cov = cov;
  law.chol = lower_cholesky(cov);
  law.contamination = contamination;
  law.inflation = inflation;
  return law;
}

Eigen::VectorXd ComponentLaw::sample(Rng& rng) const {
  switch (kind) {
    case LawKind::Gaussian:
      return mean + chol * standard_normal_vector(rng, p);
    case LawKind::UniformBall: {
      Eigen::VectorXd z = standard_normal_vector(rng, p);
      const double norm = z.norm();
      if (norm == 0.0) return Eigen::VectorXd::Zero(p);
      const double r = radius * std::pow(rng.uniform01(), 1.0 / p);
      return (r / norm) * z;
    }
    case LawKind::UniformCube: {
      Eigen::VectorXd x(p);
      for (int j = 0; j < p; ++j) x(j) = half_width * (2.0 * rng.uniform01() - 1.0);
      return x;
    }
    case LawKind::ContaminatedGaussian: {
      const bool inflate = rng.uniform01() < contamination;
      Eigen::VectorXd x = chol * standard_normal_vector(rng, p);
      return inflate ? std::sqrt(inflation) * x : x;
    }
  }
  throw std::logic_error("ComponentLaw::sample: unknown law kind");
}

Eigen::VectorXd ComponentLaw::theoretical_mean() const {
  if (kind == LawKind::Gaussian) return mean;
  return Eigen::VectorXd::Zero(p);
}

Eigen::MatrixXd ComponentLaw::theoretical_cov() const {
  switch (kind) {
    case LawKind::Gaussian:
      return cov;
    case LawKind::UniformBall:
      return (radius * radius / (p + 2.0)) * Eigen::MatrixXd::Identity(p, p);
    case LawKind::UniformCube:
      return (half_width * half_width / 3.0) * Eigen::MatrixXd::Identity(p, p);
    case LawKind::ContaminatedGaussian:
      return (1.0 - contamination + contamination * inflation) * cov;
  }
  throw std::logic_error("ComponentLaw::theoretical_cov: unknown law kind");
}

bool ComponentLaw::is_continuous() const {
  switch (kind) {
    case LawKind::Gaussian:
    case LawKind::ContaminatedGaussian: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
      return solver.eigenvalues()(0) > 0.0;
    }
    case LawKind::UniformBall:
      return radius > 0.0;
    case LawKind::UniformCube:
      return half_width > 0.0;
  }
  return false;
}

ShiftedMixtureSpec::ShiftedMixtureSpec(std::vector<ComponentLaw> laws_in,
                                       Eigen::VectorXd xi_in,
                                       std::vector<std::vector<Eigen::VectorXd>> shifts_in,
                                       double epsilon_in, double eta_in)
    : laws(std::move(laws_in)),
      xi(std::move(xi_in)),
      shifts(std::move(shifts_in)),
      epsilon(epsilon_in),
      eta(eta_in) {
  const int K = static_cast<int>(laws.size());
  if (K < 1) throw std::invalid_argument("ShiftedMixtureSpec: at least one law required");
  if (xi.size() != K || (xi.array() <= 0.0).any() || std::abs(xi.sum() - 1.0) > 1e-10)
    throw std::invalid_argument("ShiftedMixtureSpec: xi must be positive and sum to 1");
  const int dim = laws.front().p;
  for (const ComponentLaw& law : laws)
    if (law.p != dim) throw std::invalid_argument("ShiftedMixtureSpec: law dimensions differ");
  if (shifts.empty()) throw std::invalid_argument("ShiftedMixtureSpec: empty shift schedule");
  if (!(epsilon > 0.0) || !(eta > 0.0) || eta >= 1.0)
    throw std::invalid_argument("ShiftedMixtureSpec: epsilon must be > 0 and eta in (0,1)");

  double prev_sep = 0.0;
  for (std::size_t m = 0; m < shifts.size(); ++m) {
    if (static_cast<int>(shifts[m].size()) != K)
      throw std::invalid_argument("ShiftedMixtureSpec: shift count mismatch");
    for (const Eigen::VectorXd& rho : shifts[m])
      if (rho.size() != dim)
        throw std::invalid_argument("ShiftedMixtureSpec: shift dimension mismatch");
    double sep = std::numeric_limits<double>::infinity();
    for (int a = 0; a < K; ++a)
      for (int b = a + 1; b < K; ++b)
        sep = std::min(sep, (shifts[m][a] - shifts[m][b]).norm());
    if (K > 1) {
      if (m > 0 && sep < prev_sep)
        throw std::invalid_argument(
            "ShiftedMixtureSpec: minimum pairwise shift distance must be non-decreasing");
      prev_sep = sep;
    }
  }

  // Central-set mass condition, checked by Monte Carlo.
  constexpr int kDraws = 100000;
  for (int k = 0; k < K; ++k) {
    Rng rng(derive_seed(0x5b1ced0fULL, static_cast<std::uint64_t>(k)));
    int inside = 0;
    for (int i = 0; i < kDraws; ++i)
      if (laws[k].sample(rng).norm() < epsilon) ++inside;
    const double mass = static_cast<double>(inside) / kDraws;
    if (mass < 1.0 - 2.0 * eta)
      throw std::invalid_argument(
          "ShiftedMixtureSpec: law " + std::to_string(k)
          + " violates the central-set mass condition Q{||x|| < epsilon} >= 1 - eta");
  }
}

ShiftedMixtureSpec ShiftedMixtureSpec::collinear(std::vector<ComponentLaw> laws,
                                                 Eigen::VectorXd xi,
                                                 const std::vector<double>& gaps,
                                                 double epsilon, double eta) {
  if (laws.empty()) throw std::invalid_argument("collinear: at least one law required");
  const int dim = laws.front().p;
  std::vector<std::vector<Eigen::VectorXd>> shifts;
  shifts.reserve(gaps.size());
  for (double gap : gaps) {
    std::vector<Eigen::VectorXd> level;
    for (std::size_t k = 0; k < laws.size(); ++k) {
      Eigen::VectorXd rho = Eigen::VectorXd::Zero(dim);
      rho(0) = gap * static_cast<double>(k);
      level.push_back(std::move(rho));
    }
    shifts.push_back(std::move(level));
  }
  return ShiftedMixtureSpec(std::move(laws), std::move(xi), std::move(shifts), epsilon, eta);
}

LabeledSample sample_mixture(const ShiftedMixtureSpec& spec, int level, int n,
                             std::uint64_t seed) {
  if (level < 0 || level >= spec.n_levels())
    throw std::out_of_range("sample_mixture: level outside the shift schedule");
  if (n < 1) throw std::invalid_argument("sample_mixture: n must be >= 1");

  Rng rng(seed);
  LabeledSample out;
  out.data.resize(n, spec.p());
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    int k = 0;
    double cum = spec.xi(0);
    while (k + 1 < spec.K() && u >= cum) cum += spec.xi(++k);
    out.labels[i] = k;
    out.data.row(i) = (spec.laws[k].sample(rng) + spec.shifts[level][k]).transpose();
  }
  return out;
}

McEstimate mc_population_loglik(const MixtureParams& theta, const ShiftedMixtureSpec& spec,
                                int level, int M, std::uint64_t seed) {
  if (M < 100) throw std::invalid_argument("mc_population_loglik: M must be >= 100");
  const LabeledSample sample = sample_mixture(spec, level, M, seed);
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < M; ++i) {
    const double v = log_mixture_density(sample.data.row(i).transpose(), theta);
    const double d = v - mean;
    mean += d / (i + 1);
    m2 += d * (v - mean);
  }
  McEstimate out;
  out.estimate = mean;
  out.std_error = std::sqrt(m2 / (M - 1.0) / M);
  return out;
}

ConsistencyResult run_consistency_experiment(const ShiftedMixtureSpec& spec, int level,
                                             const std::vector<int>& sample_sizes,
                                             const FitConfig& cfg, int reference_M,
                                             std::uint64_t seed) {
  if (sample_sizes.empty())
    throw std::invalid_argument("run_consistency_experiment: no sample sizes");
  if (!std::is_sorted(sample_sizes.begin(), sample_sizes.end()))
    throw std::invalid_argument("run_consistency_experiment: sample sizes must ascend");
  if (reference_M < 10 * sample_sizes.back())
    throw std::invalid_argument(
        "run_consistency_experiment: reference_M must be >= 10 * max sample size");

  ConsistencyResult out;
  const LabeledSample ref_sample =
      sample_mixture(spec, level, reference_M, derive_seed(seed, 0));
  const FitResult ref_fit = fit(ref_sample.data, cfg);
  out.reference_theta = ref_fit.theta;
  const McEstimate ref_mc =
      mc_population_loglik(out.reference_theta, spec, level, reference_M, derive_seed(seed, 1));
  out.reference_loglik_mc = ref_mc.estimate;
  out.reference_loglik_mc_se = ref_mc.std_error;

  for (std::size_t i = 0; i < sample_sizes.size(); ++i) {
    ConsistencyRow row;
    row.n = sample_sizes[i];
    const LabeledSample sample =
        sample_mixture(spec, level, row.n, derive_seed(seed, 100 + i));
    try {
      const FitResult fr = fit(sample.data, cfg);
      row.param_distance = param_distance(fr.theta, out.reference_theta);
      row.loglik_gap = std::abs(fr.loglik - out.reference_loglik_mc);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

namespace {

/// Greedy injective matching of shifts to fitted centers on ascending
/// distance; flags the matching as degenerate when some shift does not
/// get its independently nearest center.
ContainmentResult match_components(const MixtureParams& theta,
                                   const std::vector<Eigen::VectorXd>& shifts) {
  const int K = static_cast<int>(shifts.size());
  struct Pair {
    double dist;
    int k, j;
  };
  std::vector<Pair> pairs;
  std::vector<int> nearest(K, -1);
  for (int k = 0; k < K; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < theta.K; ++j) {
      const double d = (shifts[k] - theta.means[j]).norm();
      pairs.push_back({d, k, j});
      if (d < best) {
        best = d;
        nearest[k] = j;
      }
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.k != b.k) return a.k < b.k;
    return a.j < b.j;
  });

  ContainmentResult out;
  out.matching.assign(K, -1);
  std::vector<bool> used(theta.K, false);
  for (const Pair& pr : pairs) {
    if (out.matching[pr.k] >= 0 || used[pr.j]) continue;
    out.matching[pr.k] = pr.j;
    used[pr.j] = true;
  }
  for (int k = 0; k < K; ++k)
    if (out.matching[k] != nearest[k]) out.degenerate = true;
  return out;
}

}  // namespace

ContainmentResult central_set_containment(const MixtureParams& theta,
                                          const ShiftedMixtureSpec& spec, int level,
                                          int n_test, std::uint64_t seed) {
  if (theta.K != spec.K())
    throw std::invalid_argument("central_set_containment: component count mismatch");
  if (level < 0 || level >= spec.n_levels())
    throw std::out_of_range("central_set_containment: level outside the shift schedule");

  ContainmentResult out = match_components(theta, spec.shifts[level]);
  const ComponentLaw ball = ComponentLaw::uniform_ball(spec.p(), spec.epsilon);
  out.fractions.resize(spec.K());
  Rng rng(seed);
  for (int k = 0; k < spec.K(); ++k) {
    int hits = 0;
    for (int i = 0; i < n_test; ++i) {
      const Eigen::VectorXd x = ball.sample(rng) + spec.shifts[level][k];
      if (map_classify(x, theta) == out.matching[k]) ++hits;
    }
    out.fractions[k] = static_cast<double>(hits) / n_test;
  }
  return out;
}

SeparationResult run_separation_experiment(const ShiftedMixtureSpec& spec,
                                           const std::vector<int>& levels,
                                           const FitConfig& cfg, int n, std::uint64_t seed,
                                           int n_test) {
  if (cfg.model != ModelFamily::Gaussian)
    throw std::invalid_argument(
        "run_separation_experiment: moment comparisons require the Gaussian model");
  for (const ComponentLaw& law : spec.laws)
    if (!law.is_continuous())
      throw std::invalid_argument(
          "run_separation_experiment: component laws must be continuous");
  if (cfg.K != spec.K())
    throw std::invalid_argument("run_separation_experiment: cfg.K must match the spec");

  SeparationResult out;
  out.assumption_check =
      "scenario validity: continuous component laws with the Gaussian generator "
      "(degenerate-scatter divergence holds; central-set mass condition checked "
      "by Monte Carlo at spec construction)";

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const int level = levels[li];
    SeparationRow row;
    row.level = level;
    const LabeledSample sample =
        sample_mixture(spec, level, n, derive_seed(seed, 200 + li));
    try {
      const FitResult fr = fit(sample.data, cfg);
      row.containment = central_set_containment(fr.theta, spec, level, n_test,
                                                derive_seed(seed, 300 + li));
      for (int k = 0; k < spec.K(); ++k) {
        const int j = row.containment.matching[k];
        row.pi_err.push_back(std::abs(fr.theta.weights(j) - spec.xi(k)));
        row.mu_err.push_back((fr.theta.means[j] - spec.shifts[level][k]
                              - spec.laws[k].theoretical_mean())
                                 .norm());
        row.sigma_err.push_back(
            (fr.theta.scatters[j].matrix - spec.laws[k].theoretical_cov()).norm());
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace esdmix
