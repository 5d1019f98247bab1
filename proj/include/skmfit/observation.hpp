#pragma once

#include "skmfit/model.hpp"
#include "skmfit/random.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace skmfit {

/// Parameters of the background and observation processes.
/// The background noise scale kappa is not stored: it is tied to the kinetic c0.
struct AuxParams {
  double c = 0.01;           // AR(1) additive constant, per capita
  double nu = 0.2;           // AR(1) coefficient
  double r = 0.1;            // reporting proportion
  double sigma_obs = 1e-7;   // observation variance scale Sigma
  double v = 1.0;            // negative-binomial variance inflation

  void validate() const;
};

inline double background_noise_scale(const KineticParams& theta) { return theta.c0; }

inline constexpr double kWeeksPerYear = 52.0;

/// Weekly aggregate reports and virological test counts. Missing virological weeks are NaN.
struct Dataset {
  std::vector<double> times;  // years
  std::vector<double> y;
  std::vector<double> n1;  // influenza positive
  std::vector<double> n2;  // RSV positive
  std::vector<double> n3;  // negative for both
  FixedConstants constants;

  std::size_t size() const { return y.size(); }
  bool has_virological(std::size_t week) const;
  void validate() const;
};

/// Week index (1-based) to years.
inline double week_time(std::size_t week) { return static_cast<double>(week) / kWeeksPerYear; }

/// Expected virological counts (flu, RSV, neither) for a latent state and background level.
/// Compartments are clamped at zero and means floored at kMinVirologicalMean.
inline constexpr double kMinVirologicalMean = 1e-8;
std::array<double, 3> virological_means(const StateVector& x, double d, const AuxParams& tau,
                                        const FixedConstants& k);

/// Log-pmf of the variance-inflated negative binomial with mean m and variance m (1 + 1/v).
/// Size s = v m, success probability q = v / (1 + v):
///   log p(n) = lgamma(n + s) - lgamma(s) - lgamma(n + 1) + s log q + n log(1 - q).
double negbin_log_pmf(double n, double mean, double v);

/// Draw from the same distribution as a gamma-Poisson mixture.
long negbin_sample(double mean, double v, Rng& rng);

/// AR(1) background D_i = omega c + nu D_{i-1} + eta_i, eta_i ~ N(0, omega^{3/2} kappa),
/// with D_1 drawn from the stationary law.
std::vector<double> simulate_background(std::size_t weeks, const AuxParams& tau, double kappa,
                                        const FixedConstants& k, Rng& rng);

double background_stationary_mean(const AuxParams& tau, const FixedConstants& k);
double background_stationary_variance(const AuxParams& tau, double kappa, const FixedConstants& k);

}  // namespace skmfit
