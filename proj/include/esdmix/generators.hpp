#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace esdmix {

enum class GeneratorKind { Gaussian, StudentT, Custom };

/// Radial density generator g(.) of an elliptically symmetric family,
/// together with the normalizing constant that makes the implied density
/// integrate to one.
///
/// Built-ins:
///   Gaussian    g(t) = (2*pi)^{-p/2} exp(-t/2)
///   Student-t   g(t) = c_{p,nu} (1 + t/nu)^{-(nu+p)/2},
///               c_{p,nu} = Gamma((nu+p)/2) / (Gamma(nu/2) (nu*pi)^{p/2})
///
/// A Custom generator supplies log g directly and carries no tail
/// metadata, so the operations that depend on tail behaviour
/// (min_sample_size, check_population_tail) reject it.
struct DensityGenerator {
  GeneratorKind kind = GeneratorKind::Gaussian;
  double nu = 0.0;  // degrees of freedom, StudentT only
  std::function<double(double, int)> custom_log_g;  // (t, p) -> log g(t)

  static DensityGenerator gaussian() { return DensityGenerator{}; }

  static DensityGenerator student_t(double nu) {
    if (!(nu > 0.0)) throw std::invalid_argument("student_t: nu must be > 0");
    DensityGenerator g;
    g.kind = GeneratorKind::StudentT;
    g.nu = nu;
    return g;
  }

  static DensityGenerator custom(std::function<double(double, int)> log_g) {
    DensityGenerator g;
    g.kind = GeneratorKind::Custom;
    g.custom_log_g = std::move(log_g);
    return g;
  }
};

/// log g(t) for dimension p, including the normalizing constant.
double eval_log_g(const DensityGenerator& gen, double t, int p);

/// Smallest sample size n for which the finite-sample existence condition
/// on the generator tail holds: n > K for the Gaussian family and
/// n > K(1 + p/nu) for Student-t. Custom generators are rejected because
/// their threshold is not analytically known.
int min_sample_size(const DensityGenerator& gen, int p, int K);

/// Whether the population-level tail condition holds: always for the
/// Gaussian family, nu + p > 2 for Student-t.
bool check_population_tail(const DensityGenerator& gen, int p);

}  // namespace esdmix
