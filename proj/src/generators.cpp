#include "esdmix/generators.hpp"

#include <cmath>

namespace esdmix {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void require_valid_args(double t, int p) {
  if (t < 0.0) throw std::invalid_argument("eval_log_g: t must be >= 0");
  if (p < 1) throw std::invalid_argument("eval_log_g: p must be >= 1");
}

}  // namespace

double eval_log_g(const DensityGenerator& gen, double t, int p) {
  require_valid_args(t, p);
  switch (gen.kind) {
    case GeneratorKind::Gaussian:
      return -0.5 * p * kLogTwoPi - 0.5 * t;
    case GeneratorKind::StudentT: {
      const double nu = gen.nu;
      const double log_c = std::lgamma(0.5 * (nu + p)) - std::lgamma(0.5 * nu)
                           - 0.5 * p * std::log(nu * M_PI);
      // log1p keeps precision for small t/nu (large nu limit).
      return log_c - 0.5 * (nu + p) * std::log1p(t / nu);
    }
    case GeneratorKind::Custom:
      if (!gen.custom_log_g)
        throw std::invalid_argument("eval_log_g: custom generator has no function");
      return gen.custom_log_g(t, p);
  }
  throw std::logic_error("eval_log_g: unknown generator kind");
}

int min_sample_size(const DensityGenerator& gen, int p, int K) {
  if (p < 1 || K < 1)
    throw std::invalid_argument("min_sample_size: p and K must be >= 1");
  switch (gen.kind) {
    case GeneratorKind::Gaussian:
      return K + 1;
    case GeneratorKind::StudentT: {
      // Smallest integer strictly greater than K(1 + p/nu). Snap values
      // that are integral up to rounding noise before taking the floor.
      const double threshold = K * (1.0 + static_cast<double>(p) / gen.nu);
      const double rounded = std::round(threshold);
      if (std::abs(threshold - rounded) < 1e-9 * std::max(1.0, std::abs(threshold)))
        return static_cast<int>(rounded) + 1;
      return static_cast<int>(std::floor(threshold)) + 1;
    }
    case GeneratorKind::Custom:
      throw std::invalid_argument(
          "min_sample_size: no closed-form threshold for a custom generator");
  }
  throw std::logic_error("min_sample_size: unknown generator kind");
}

bool check_population_tail(const DensityGenerator& gen, int p) {
  if (p < 1) throw std::invalid_argument("check_population_tail: p must be >= 1");
  switch (gen.kind) {
    case GeneratorKind::Gaussian:
      return true;
    case GeneratorKind::StudentT:
      return gen.nu + p > 2.0;
    case GeneratorKind::Custom:
      throw std::invalid_argument(
          "check_population_tail: tail condition unknown for a custom generator");
  }
  throw std::logic_error("check_population_tail: unknown generator kind");
}

}  // namespace esdmix
