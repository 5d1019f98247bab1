#pragma once

#include "skmfit/lna.hpp"
#include "skmfit/model.hpp"
#include "skmfit/observation.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace skmfit {

// Augmented state [X_SS .. X_RR, D] in counts.
inline constexpr int kAugmentedSize = kNumCompartments + 1;
inline constexpr int kBackgroundIndex = kNumCompartments;
using AugmentedVector = Eigen::Matrix<double, kAugmentedSize, 1>;
using AugmentedMatrix = Eigen::Matrix<double, kAugmentedSize, kAugmentedSize>;

struct AugmentedMoments {
  AugmentedVector mean;
  AugmentedMatrix cov;
};

/// Observation row H = r [G; 1]: reports see the reported share of flu, RSV and background cases.
AugmentedVector observation_row(const AuxParams& tau);

/// Prior at the first observation week: mean [x0, omega c], covariance diag(omega c0 I, omega^{3/2} kappa).
AugmentedMoments init_filter(const KineticParams& theta, const AuxParams& tau, const FixedConstants& k);

struct AnalysisResult {
  AugmentedMoments moments;
  double log_increment = 0.0;        // log N(y; predictive_mean, predictive_variance)
  double predictive_mean = 0.0;      // H m
  double predictive_variance = 0.0;  // H V H^T + omega^2 Sigma
};

/// Scalar Kalman update with noise variance omega^2 Sigma. Throws NumericalError when the
/// innovation variance is not positive.
AnalysisResult analysis_update(const AugmentedMoments& forecast, double y, const AuxParams& tau,
                               const FixedConstants& k);

/// LNA restart forecast over dt for the kinetic block, AR(1) moment recursion for the
/// background, zero cross-covariance.
AugmentedMoments forecast(const AugmentedMoments& analysis, const KineticParams& theta, const AuxParams& tau,
                          const FixedConstants& k, double dt, const IntegratorConfig& cfg = {});

/// Maps analysis moments at t0 to forecast moments at t1.
using Forecaster = std::function<AugmentedMoments(const AugmentedMoments&, double t0, double t1)>;

struct FilterStep {
  AugmentedMoments forecast;  // for week 1 this is the prior
  AugmentedMoments analysis;
  double log_increment = 0.0;
  double predictive_mean = 0.0;
  double predictive_variance = 0.0;
};

struct FilterTrace {
  std::vector<FilterStep> steps;
  double log_likelihood = 0.0;  // left-to-right sum of the increments; -inf on failure
  bool failed = false;
  std::string diagnostic;
};

/// Alternates analysis and forecast over every week of `data`, starting from `prior`.
/// Errors are caught: the trace is marked failed and carries log-likelihood -inf.
FilterTrace run_filter(const Dataset& data, const AugmentedMoments& prior, const Forecaster& step,
                       const AuxParams& tau);

/// Approximate marginal likelihood of the aggregate reports under the LNA.
FilterTrace marginal_log_likelihood(const Dataset& data, const KineticParams& theta, const AuxParams& tau,
                                    const IntegratorConfig& cfg = {});

struct SampledPath {
  std::vector<StateVector> x;
  std::vector<double> d;
};

/// Independent draws from each week's analysis distribution. Throws NumericalError when a
/// covariance has eigenvalues too negative to be floored.
SampledPath sample_smoothed_states(const FilterTrace& trace, std::uint64_t seed);

/// Sum of negative-binomial log-pmfs for the three test-count series over weeks with tests.
double virological_log_likelihood(const std::vector<double>& n1, const std::vector<double>& n2,
                                  const std::vector<double>& n3, const SampledPath& path, const AuxParams& tau,
                                  const FixedConstants& k);

struct PredictiveMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// One-step-ahead predictive moments of the aggregate report for every week.
std::vector<PredictiveMoments> one_step_ahead_predictive(const FilterTrace& trace, const AuxParams& tau,
                                                         const FixedConstants& k);

/// Square-root factor L with L L^T = V. Eigenvalues in [-1e-9 max(1, |lambda|max), 0) are
/// floored to zero; anything more negative throws NumericalError.
template <int N>
Eigen::Matrix<double, N, N> covariance_factor(const Eigen::Matrix<double, N, N>& V);

}  // namespace skmfit
