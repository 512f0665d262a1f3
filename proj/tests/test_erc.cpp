#include <cmath>

#include <doctest.h>

#include "esdmix/erc.hpp"
#include "esdmix/rng.hpp"

using esdmix::ErcConfig;
using esdmix::Scatter;

namespace {

esdmix::MixtureParams theta_with_eigvals(const std::vector<Eigen::VectorXd>& vals) {
  esdmix::MixtureParams theta;
  theta.K = static_cast<int>(vals.size());
  theta.p = static_cast<int>(vals.front().size());
  theta.gen = esdmix::DensityGenerator::gaussian();
  theta.weights = Eigen::VectorXd::Constant(theta.K, 1.0 / theta.K);
  for (const Eigen::VectorXd& v : vals) {
    theta.means.push_back(Eigen::VectorXd::Zero(theta.p));
    theta.scatters.push_back(esdmix::make_scatter(Eigen::MatrixXd(v.asDiagonal())));
  }
  return theta;
}

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

// 1-D grid-search oracle over the truncation level m: 2000 log-spaced
// values on [1e-3, 1e3], then the same again between the neighbours of
// the coarse minimum so the oracle itself resolves F well below 1e-6.
double grid_search_m(const std::vector<Eigen::VectorXd>& targets,
                     const std::vector<double>& weights, double gamma) {
  const auto scan = [&](double lo, double hi) {
    double best_m = lo, best_f = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2000; ++i) {
      const double m = lo * std::pow(hi / lo, i / 1999.0);
      const double f = esdmix::erc_profile_objective(targets, weights, gamma, m);
      if (f < best_f) {
        best_f = f;
        best_m = m;
      }
    }
    return best_m;
  };
  const double coarse = scan(1e-3, 1e3);
  const double step = std::pow(1e6, 1.0 / 1999.0);
  return scan(coarse / step, coarse * step);
}

}  // namespace

TEST_CASE("satisfies_erc") {
  CHECK(esdmix::satisfies_erc(theta_with_eigvals({vec({1.0, 1.0}), vec({1.0, 1.0})}),
                              ErcConfig(1.0), 0.0));
  CHECK_FALSE(esdmix::satisfies_erc(theta_with_eigvals({vec({1.0, 100.0})}), ErcConfig(10.0), 0.0));
  CHECK_FALSE(esdmix::satisfies_erc(theta_with_eigvals({vec({1.0, 2.0}), vec({100.0, 100.0})}),
                                    ErcConfig(10.0), 0.0));
  CHECK(esdmix::satisfies_erc(theta_with_eigvals({vec({2.0, 20.0})}), ErcConfig(10.0), 0.0));
  CHECK_THROWS_AS(ErcConfig(0.5), std::invalid_argument);
}

TEST_CASE("feasibility_truncate: examples") {
  const Scatter wide = esdmix::make_scatter(Eigen::Vector2d(1.0, 100.0).asDiagonal());
  const auto one = esdmix::feasibility_truncate({wide}, ErcConfig(10.0));
  CHECK(one[0].eigvals(0) == doctest::Approx(1.0));
  CHECK(one[0].eigvals(1) == doctest::Approx(10.0));

  const Scatter ok1 = esdmix::make_scatter(Eigen::Vector2d(2.0, 3.0).asDiagonal());
  const Scatter ok2 = esdmix::make_scatter(Eigen::Vector2d(1.0, 4.0).asDiagonal());
  const auto same = esdmix::feasibility_truncate({ok1, ok2}, ErcConfig(10.0));
  CHECK(same[0].matrix == ok1.matrix);
  CHECK(same[1].matrix == ok2.matrix);

  const Scatter a = esdmix::make_scatter(Eigen::MatrixXd::Constant(1, 1, 2.0));
  const Scatter b = esdmix::make_scatter(Eigen::Vector2d(3.0, 50.0).asDiagonal());
  const auto two = esdmix::feasibility_truncate({a, b}, ErcConfig(10.0));
  CHECK(two[0].eigvals(0) == doctest::Approx(2.0));
  CHECK(two[1].eigvals(0) == doctest::Approx(3.0));
  CHECK(two[1].eigvals(1) == doctest::Approx(20.0));
}

TEST_CASE("feasibility_truncate: eigenvectors kept, constraint exact") {
  esdmix::Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int K = 1 + static_cast<int>(rng.uniform_int(3));
    const int p = 1 + static_cast<int>(rng.uniform_int(3));
    const double gamma = std::pow(10.0, rng.uniform_int(3));
    std::vector<Scatter> scatters;
    for (int k = 0; k < K; ++k) {
      Eigen::MatrixXd m(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) m(i, j) = rng.normal();
      scatters.push_back(
          esdmix::make_scatter(m * m.transpose()
                               + std::pow(10.0, -3.0 * rng.uniform01())
                                     * Eigen::MatrixXd::Identity(p, p)));
    }
    const auto truncated = esdmix::feasibility_truncate(scatters, ErcConfig(gamma));
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < truncated.size(); ++k) {
      lo = std::min(lo, truncated[k].lambda_min());
      hi = std::max(hi, truncated[k].lambda_max());
      // Same eigenvectors up to column sign.
      for (int j = 0; j < p; ++j)
        CHECK(std::abs(std::abs(truncated[k].eigvecs.col(j).dot(scatters[k].eigvecs.col(j)))
                       - 1.0)
              < 1e-9);
    }
    CHECK(hi / lo <= gamma);
  }
}

TEST_CASE("optimal_constrained_eigenvalues: frozen examples") {
  // One component, d = {1, 100}, gamma = 10: F(m) = 2 log m + 11/m + log 10
  // on the active interval, stationary at m = 5.5.
  const auto one = esdmix::optimal_constrained_eigenvalues({vec({1.0, 100.0})}, {1.0},
                                                           ErcConfig(10.0));
  CHECK(one[0](0) == doctest::Approx(5.5).epsilon(1e-12));
  CHECK(one[0](1) == doctest::Approx(55.0).epsilon(1e-12));

  const auto feasible = esdmix::optimal_constrained_eigenvalues({vec({2.0, 4.0})}, {1.0},
                                                                ErcConfig(10.0));
  CHECK(feasible[0](0) == 2.0);
  CHECK(feasible[0](1) == 4.0);

  // gamma = 1 collapses to the weighted mean of all targets.
  const auto spherical = esdmix::optimal_constrained_eigenvalues(
      {vec({1.0}), vec({100.0})}, {0.5, 0.5}, ErcConfig(1.0));
  CHECK(spherical[0](0) == doctest::Approx(50.5).epsilon(1e-12));
  CHECK(spherical[1](0) == doctest::Approx(50.5).epsilon(1e-12));

  CHECK_THROWS_AS(esdmix::optimal_constrained_eigenvalues({vec({0.0, 0.0})}, {1.0},
                                                          ErcConfig(10.0)),
                  std::invalid_argument);
}

TEST_CASE("optimal_constrained_eigenvalues: grid oracle, feasibility, ordering") {
  esdmix::Rng rng(2024);
  int improved = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int K = 1 + static_cast<int>(rng.uniform_int(3));
    const int p = 1 + static_cast<int>(rng.uniform_int(4));
    const double gamma = std::pow(10.0, rng.uniform_int(3));
    std::vector<Eigen::VectorXd> targets;
    std::vector<double> weights;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd d(p);
      for (int j = 0; j < p; ++j) d(j) = std::pow(10.0, 4.0 * rng.uniform01() - 2.0);
      targets.push_back(d);
      weights.push_back(0.1 + rng.uniform01());
    }
    const auto lambda =
        esdmix::optimal_constrained_eigenvalues(targets, weights, ErcConfig(gamma));

    // Constraint holds exactly.
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& lk : lambda) {
      lo = std::min(lo, lk.minCoeff());
      hi = std::max(hi, lk.maxCoeff());
    }
    CHECK(hi / lo <= gamma);

    // Order preservation within each component.
    for (int k = 0; k < K; ++k)
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          if (targets[k](i) < targets[k](j)) CHECK(lambda[k](i) <= lambda[k](j));

    // The returned solution is optimal: never worse than the feasibility
    // truncation of the same targets, and it matches a fine grid search.
    const double f_opt = [&] {
      double acc = 0.0;
      for (int k = 0; k < K; ++k)
        for (int j = 0; j < p; ++j)
          acc += weights[k] * (std::log(lambda[k](j)) + targets[k](j) / lambda[k](j));
      return acc;
    }();

    std::vector<Scatter> as_scatters;
    for (const auto& d : targets)
      as_scatters.push_back(esdmix::make_scatter(Eigen::MatrixXd(d.asDiagonal())));
    const auto truncated = esdmix::feasibility_truncate(as_scatters, ErcConfig(gamma));
    double f_trunc = 0.0;
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd sorted_targets = [&] {
        Eigen::VectorXd s = targets[k];
        std::sort(s.data(), s.data() + s.size());
        return s;
      }();
      for (int j = 0; j < p; ++j)
        f_trunc += weights[k] * (std::log(truncated[k].eigvals(j))
                                 + sorted_targets(j) / truncated[k].eigvals(j));
    }
    CHECK(f_opt <= f_trunc + 1e-9);
    if (f_opt < f_trunc - 1e-9) ++improved;

    const double m_grid = grid_search_m(targets, weights, gamma);
    const double f_grid = esdmix::erc_profile_objective(targets, weights, gamma, m_grid);
    CHECK(f_opt <= f_grid + 1e-9 * (1.0 + std::abs(f_grid)));
    CHECK(std::abs(f_opt - f_grid) <= 1e-6 * (1.0 + std::abs(f_grid)));
  }
  CHECK(improved > 0);  // the optimal step genuinely beats plain truncation sometimes
}
