#include "skmfit/observation.hpp"

#include "skmfit/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace skmfit {

void AuxParams::validate() const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("background constant c must be nonnegative");
  if (!(std::abs(nu) < 1.0)) throw InputError("AR(1) coefficient nu must satisfy |nu| < 1");
  if (!(r >= 0.0 && r <= 1.0)) throw InputError("reporting proportion r must lie in [0, 1]");
  if (!(sigma_obs > 0.0) || !std::isfinite(sigma_obs)) throw InputError("Sigma must be positive");
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError("variance inflation v must be positive");
}

bool Dataset::has_virological(std::size_t week) const {
  return !(std::isnan(n1[week]) || std::isnan(n2[week]) || std::isnan(n3[week]));
}

void Dataset::validate() const {
  const std::size_t m = y.size();
  if (m == 0) throw InputError("dataset is empty");
  if (times.size() != m || n1.size() != m || n2.size() != m || n3.size() != m) {
    throw InputError("dataset columns have unequal lengths");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!(y[i] >= 0.0) || !std::isfinite(y[i])) {
      throw InputError("aggregate count at week " + std::to_string(i + 1) + " is not a nonnegative number");
    }
    for (const auto* col : {&n1, &n2, &n3}) {
      const double v = (*col)[i];
      if (!std::isnan(v) && !(v >= 0.0 && std::isfinite(v))) {
        throw InputError("virological count at week " + std::to_string(i + 1) + " is negative");
      }
    }
    if (i > 0 && !(times[i] > times[i - 1])) throw InputError("observation times must increase");
  }
  constants.validate();
}

std::array<double, 3> virological_means(const StateVector& x, double d, const AuxParams& tau,
                                        const FixedConstants& k) {
  const StateVector xc = x.cwiseMax(0.0);
  const double scale = k.r_h * tau.r * (k.omega_c / k.omega);
  return {std::max(scale * (xc[IS] + xc[IR]), kMinVirologicalMean),
          std::max(scale * (xc[SI] + xc[RI]), kMinVirologicalMean),
          std::max(scale * std::max(d, 0.0), kMinVirologicalMean)};
}

double negbin_log_pmf(double n, double mean, double v) {
  if (!std::isfinite(n) || !std::isfinite(mean) || !std::isfinite(v) || n < 0.0 || !(mean > 0.0) ||
      !(v > 0.0)) {
    return -std::numeric_limits<double>::infinity();
  }
  const double size = v * mean;
  // log q and log(1 - q) for q = v / (1 + v), written to stay accurate for extreme v.
  const double log_q = -std::log1p(1.0 / v);
  const double log_1mq = -std::log1p(v);
  return std::lgamma(n + size) - std::lgamma(size) - std::lgamma(n + 1.0) + size * log_q + n * log_1mq;
}

long negbin_sample(double mean, double v, Rng& rng) {
  // Gamma(shape v m, scale 1 / v) has mean m and variance m / v; the Poisson layer adds m.
  std::gamma_distribution<double> gamma(v * mean, 1.0 / v);
  const double lambda = gamma(rng);
  if (!(lambda > 0.0)) return 0;
  std::poisson_distribution<long> poisson(lambda);
  return poisson(rng);
}

double background_stationary_mean(const AuxParams& tau, const FixedConstants& k) {
  return k.omega * tau.c / (1.0 - tau.nu);
}

double background_stationary_variance(const AuxParams& tau, double kappa, const FixedConstants& k) {
  return std::pow(k.omega, 1.5) * kappa / (1.0 - tau.nu * tau.nu);
}

std::vector<double> simulate_background(std::size_t weeks, const AuxParams& tau, double kappa,
                                        const FixedConstants& k, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> d(weeks);
  if (weeks == 0) return d;
  const double innovation_sd = std::sqrt(std::pow(k.omega, 1.5) * kappa);
  d[0] = background_stationary_mean(tau, k) +
         std::sqrt(background_stationary_variance(tau, kappa, k)) * normal(rng);
  for (std::size_t i = 1; i < weeks; ++i) {
    d[i] = k.omega * tau.c + tau.nu * d[i - 1] + innovation_sd * normal(rng);
  }
  return d;
}

}  // namespace skmfit
