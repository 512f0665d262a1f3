#include <cmath>

#include <doctest.h>

#include "esdmix/esd.hpp"
#include "esdmix/rng.hpp"

using esdmix::DensityGenerator;
using esdmix::Scatter;

namespace {

Eigen::MatrixXd random_spd(esdmix::Rng& rng, int p, double spread) {
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  Eigen::MatrixXd spd = a * a.transpose() + spread * Eigen::MatrixXd::Identity(p, p);
  return spd;
}

Eigen::MatrixXd random_orthogonal(esdmix::Rng& rng, int p) {
  Eigen::MatrixXd a(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
  return Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
}

Eigen::VectorXd random_vector(esdmix::Rng& rng, int p, double scale) {
  Eigen::VectorXd v(p);
  for (int i = 0; i < p; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST_CASE("make_scatter: reference decompositions") {
  const Scatter id3 = esdmix::make_scatter(Eigen::MatrixXd::Identity(3, 3));
  CHECK(id3.eigvals.isApprox(Eigen::VectorXd::Ones(3)));
  CHECK(id3.log_det == doctest::Approx(0.0));

  Eigen::MatrixXd diag(2, 2);
  diag << 4.0, 0.0, 0.0, 1.0;
  const Scatter d = esdmix::make_scatter(diag);
  CHECK(d.eigvals(0) == doctest::Approx(1.0));
  CHECK(d.eigvals(1) == doctest::Approx(4.0));
  CHECK(d.log_det == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  // Characteristic polynomial of [[2,1],[1,2]] is l^2 - 4l + 3 = (l-1)(l-3).
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 1.0, 1.0, 2.0;
  const Scatter s = esdmix::make_scatter(m);
  CHECK(s.eigvals(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.eigvals(1) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(s.log_det == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("make_scatter: structural invariants on random inputs") {
  esdmix::Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int p = 1 + static_cast<int>(rng.uniform_int(5));
    const Eigen::MatrixXd m = random_spd(rng, p, 0.1);
    const Scatter s = esdmix::make_scatter(m);
    const Eigen::MatrixXd rebuilt = s.eigvecs * s.eigvals.asDiagonal() * s.eigvecs.transpose();
    CHECK((rebuilt - s.matrix).norm() <= 1e-8 * (1.0 + s.matrix.norm()));
    CHECK((s.eigvecs.transpose() * s.eigvecs - Eigen::MatrixXd::Identity(p, p)).norm() < 1e-8);
    CHECK(s.log_det == doctest::Approx(s.eigvals.array().log().sum()));
    for (int j = 0; j + 1 < p; ++j) CHECK(s.eigvals(j) <= s.eigvals(j + 1));
  }
}

TEST_CASE("make_scatter: rejects bad inputs, clamps the tiny-but-PSD case") {
  Eigen::MatrixXd asym(2, 2);
  asym << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(esdmix::make_scatter(asym), std::invalid_argument);

  Eigen::MatrixXd indef(2, 2);
  indef << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(esdmix::make_scatter(indef), std::invalid_argument);

  Eigen::MatrixXd rank1(2, 2);
  rank1 << 1.0, 1.0, 1.0, 1.0;  // eigenvalues {0, 2}
  const Scatter s = esdmix::make_scatter(rank1);
  CHECK(s.eigvals(0) == doctest::Approx(esdmix::eigenvalue_floor(2.0)));
}

TEST_CASE("mahalanobis_sq: frozen values") {
  Eigen::MatrixXd diag(2, 2);
  diag << 4.0, 0.0, 0.0, 1.0;
  const Scatter d = esdmix::make_scatter(diag);
  CHECK(esdmix::mahalanobis_sq(Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.0, 0.0), d)
        == doctest::Approx(0.0));
  CHECK(esdmix::mahalanobis_sq(Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(0.0, 0.0), d)
        == doctest::Approx(1.0).epsilon(1e-12));

  // Explicit inverse of [[2,1],[1,2]] is [[2,-1],[-1,2]]/3.
  Eigen::MatrixXd m(2, 2);
  m << 2.0, 1.0, 1.0, 2.0;
  const Scatter s = esdmix::make_scatter(m);
  const Eigen::Vector2d x(1.0, 1.0);
  const double oracle = (x.transpose() * m.inverse() * x)(0);
  CHECK(oracle == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(esdmix::mahalanobis_sq(x, Eigen::Vector2d::Zero(), s)
        == doctest::Approx(oracle).epsilon(1e-12));

  CHECK_THROWS_AS(esdmix::mahalanobis_sq(Eigen::Vector3d::Zero(), Eigen::Vector2d::Zero(), s),
                  std::invalid_argument);
}

TEST_CASE("esd_log_density: frozen values") {
  const DensityGenerator gauss = DensityGenerator::gaussian();
  const Scatter unit1 = esdmix::make_scatter(Eigen::MatrixXd::Identity(1, 1));
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  CHECK(esdmix::esd_log_density(zero1, zero1, unit1, gauss)
        == doctest::Approx(-0.9189385332046727).epsilon(1e-12));

  Eigen::MatrixXd diag(2, 2);
  diag << 4.0, 0.0, 0.0, 1.0;
  const Scatter d = esdmix::make_scatter(diag);
  const double oracle = -std::log(2.0 * M_PI) - 0.5 * std::log(4.0) - 0.5;
  CHECK(esdmix::esd_log_density(Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d::Zero(), d, gauss)
        == doctest::Approx(oracle).epsilon(1e-12));

  // Standard Cauchy at the origin: density 1/pi.
  const DensityGenerator cauchy = DensityGenerator::student_t(1.0);
  CHECK(esdmix::esd_log_density(zero1, zero1, unit1, cauchy)
        == doctest::Approx(std::log(1.0 / M_PI)).epsilon(1e-12));
}

TEST_CASE("density_upper_bound: frozen values and a grid maximum") {
  const DensityGenerator gauss = DensityGenerator::gaussian();
  Eigen::MatrixXd diag(2, 2);
  diag << 0.25, 0.0, 0.0, 1.0;
  const Scatter s = esdmix::make_scatter(diag);
  const double bound = esdmix::density_upper_bound(s, gauss, 2);
  CHECK(bound == doctest::Approx(1.0 / (2.0 * M_PI) / 0.25).epsilon(1e-12));
  CHECK(bound == doctest::Approx(0.636620).epsilon(1e-5));

  // The grid maximum is the true density peak det(S)^{-1/2} g(0); the
  // bound dominates it and coincides with it only for spherical scatters.
  double grid_max = 0.0;
  for (double x = -2.0; x <= 2.0; x += 0.01)
    for (double y = -2.0; y <= 2.0; y += 0.05)
      grid_max = std::max(grid_max,
                          std::exp(esdmix::esd_log_density(Eigen::Vector2d(x, y),
                                                           Eigen::Vector2d::Zero(), s, gauss)));
  CHECK(grid_max <= bound * (1.0 + 1e-12));
  CHECK(grid_max == doctest::Approx(std::exp(-0.5 * s.log_det) / (2.0 * M_PI)).epsilon(1e-6));

  const Scatter sphere = esdmix::make_scatter(0.25 * Eigen::MatrixXd::Identity(2, 2));
  double sphere_peak = std::exp(esdmix::esd_log_density(Eigen::Vector2d::Zero(),
                                                        Eigen::Vector2d::Zero(), sphere, gauss));
  CHECK(sphere_peak == doctest::Approx(esdmix::density_upper_bound(sphere, gauss, 2))
                           .epsilon(1e-12));

  const Scatter unit1 = esdmix::make_scatter(Eigen::MatrixXd::Identity(1, 1));
  CHECK(esdmix::density_upper_bound(unit1, gauss, 1)
        == doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));

  const Scatter unit2 = esdmix::make_scatter(Eigen::MatrixXd::Identity(2, 2));
  CHECK(esdmix::density_upper_bound(unit2, DensityGenerator::student_t(4.0), 2)
        == doctest::Approx(1.0 / (2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("esd density: bound holds on random draws") {
  esdmix::Rng rng(99);
  for (const DensityGenerator& gen :
       {DensityGenerator::gaussian(), DensityGenerator::student_t(3.0)}) {
    for (int trial = 0; trial < 1000; ++trial) {
      const int p = 1 + static_cast<int>(rng.uniform_int(4));
      const Scatter s = esdmix::make_scatter(random_spd(rng, p, 0.05));
      const Eigen::VectorXd mu = random_vector(rng, p, 2.0);
      const Eigen::VectorXd x = random_vector(rng, p, 3.0);
      CHECK(std::exp(esdmix::esd_log_density(x, mu, s, gen))
            <= esdmix::density_upper_bound(s, gen, p) * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("esd density: rotation invariance") {
  esdmix::Rng rng(4242);
  const DensityGenerator gauss = DensityGenerator::gaussian();
  for (int trial = 0; trial < 100; ++trial) {
    const int p = 2 + static_cast<int>(rng.uniform_int(3));
    const Eigen::MatrixXd m = random_spd(rng, p, 0.1);
    const Eigen::MatrixXd rot = random_orthogonal(rng, p);
    const Eigen::VectorXd mu = random_vector(rng, p, 1.0);
    const Eigen::VectorXd x = random_vector(rng, p, 2.0);
    const double base = esdmix::esd_log_density(x, mu, esdmix::make_scatter(m), gauss);
    const double rotated = esdmix::esd_log_density(
        rot * x, rot * mu, esdmix::make_scatter(rot * m * rot.transpose()), gauss);
    CHECK(rotated == doctest::Approx(base).epsilon(1e-10));
  }
}

TEST_CASE("esd density: non-increasing along rays, peak scaling") {
  const DensityGenerator gauss = DensityGenerator::gaussian();
  esdmix::Rng rng(5);
  const Scatter s = esdmix::make_scatter(random_spd(rng, 2, 0.2));
  const Eigen::Vector2d mu(0.3, -0.7);
  const Eigen::Vector2d dir = Eigen::Vector2d(1.0, 2.0).normalized();
  double prev = esdmix::esd_log_density(mu, mu, s, gauss);
  for (double r = 0.1; r < 8.0; r += 0.1) {
    const double cur = esdmix::esd_log_density(mu + r * dir, mu, s, gauss);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }

  // Shrinking sigma^2 I raises the log peak by (p/2) log(1/sigma^2).
  for (int p : {1, 2, 3}) {
    const Eigen::VectorXd center = Eigen::VectorXd::Zero(p);
    double last = -std::numeric_limits<double>::infinity();
    for (int t = 0; t <= 6; ++t) {
      const double sigma2 = std::pow(10.0, -t);
      const Scatter shrink =
          esdmix::make_scatter(sigma2 * Eigen::MatrixXd::Identity(p, p));
      const double peak = esdmix::esd_log_density(center, center, shrink, gauss);
      if (t > 0)
        CHECK(peak - last == doctest::Approx(0.5 * p * std::log(10.0)).epsilon(1e-9));
      last = peak;
    }
  }
}
