#include "skmfit/filter.hpp"

#include "skmfit/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <numbers>

namespace skmfit {

AugmentedVector observation_row(const AuxParams& tau) {
  AugmentedVector h;
  h.head<kNumCompartments>() = tau.r * aggregate_observation_vector();
  h[kBackgroundIndex] = tau.r;
  return h;
}

AugmentedMoments init_filter(const KineticParams& theta, const AuxParams& tau, const FixedConstants& k) {
  AugmentedMoments m;
  m.mean.head<kNumCompartments>() = theta.x0;
  m.mean[kBackgroundIndex] = k.omega * tau.c;
  m.cov.setZero();
  m.cov.topLeftCorner<kNumCompartments, kNumCompartments>().diagonal().setConstant(k.omega * theta.c0);
  m.cov(kBackgroundIndex, kBackgroundIndex) = std::pow(k.omega, 1.5) * background_noise_scale(theta);
  return m;
}

AnalysisResult analysis_update(const AugmentedMoments& fc, double y, const AuxParams& tau, const FixedConstants& k) {
  const AugmentedVector h = observation_row(tau);
  const AugmentedVector vh = fc.cov * h;
  const double noise = k.omega * k.omega * tau.sigma_obs;
  const double s = h.dot(vh) + noise;
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("nonpositive innovation variance");
  const double predicted = h.dot(fc.mean);
  const double innovation = y - predicted;

  AnalysisResult out;
  out.predictive_mean = predicted;
  out.predictive_variance = s;
  out.log_increment = -0.5 * (std::log(2.0 * std::numbers::pi * s) + innovation * innovation / s);
  const AugmentedVector gain = vh / s;
  out.moments.mean = fc.mean + gain * innovation;
  const AugmentedMatrix updated = fc.cov - gain * vh.transpose();
  out.moments.cov = 0.5 * (updated + updated.transpose());
  return out;
}

AugmentedMoments forecast(const AugmentedMoments& an, const KineticParams& theta, const AuxParams& tau,
                          const FixedConstants& k, double dt, const IntegratorConfig& cfg) {
  if (dt < 0.0) throw std::invalid_argument("forecast interval must be nonnegative");
  const double omega = k.omega;
  const Concentration phi = an.mean.head<kNumCompartments>() / omega;
  const CovarianceState C = an.cov.topLeftCorner<kNumCompartments, kNumCompartments>() / omega;
  const LnaMoments next = integrate_lna(phi, C, 0.0, dt, theta, k, cfg);

  AugmentedMoments out;
  out.mean.head<kNumCompartments>() = omega * next.phi;
  out.cov.setZero();
  out.cov.topLeftCorner<kNumCompartments, kNumCompartments>() = omega * next.C;
  if (dt == 0.0) {
    out.mean[kBackgroundIndex] = an.mean[kBackgroundIndex];
    out.cov(kBackgroundIndex, kBackgroundIndex) = an.cov(kBackgroundIndex, kBackgroundIndex);
    return out;
  }
  out.mean[kBackgroundIndex] = omega * tau.c + tau.nu * an.mean[kBackgroundIndex];
  out.cov(kBackgroundIndex, kBackgroundIndex) = tau.nu * tau.nu * an.cov(kBackgroundIndex, kBackgroundIndex) +
                                                 std::pow(omega, 1.5) * background_noise_scale(theta);
  return out;
}

FilterTrace run_filter(const Dataset& data, const AugmentedMoments& prior, const Forecaster& step,
                       const AuxParams& tau) {
  FilterTrace trace;
  const std::size_t m = data.size();
  trace.steps.reserve(m);
  AugmentedMoments current = prior;
  try {
    for (std::size_t i = 0; i < m; ++i) {
      if (i > 0) current = step(trace.steps.back().analysis, data.times[i - 1], data.times[i]);
      const AnalysisResult a = analysis_update(current, data.y[i], tau, data.constants);
      FilterStep s;
      s.forecast = current;
      s.analysis = a.moments;
      s.log_increment = a.log_increment;
      s.predictive_mean = a.predictive_mean;
      s.predictive_variance = a.predictive_variance;
      trace.steps.push_back(s);
      trace.log_likelihood += a.log_increment;
    }
    if (!std::isfinite(trace.log_likelihood)) {
      trace.failed = true;
      trace.diagnostic = "non-finite log-likelihood";
    }
  } catch (const std::exception& e) {
    trace.failed = true;
    trace.diagnostic = e.what();
  }
  if (trace.failed) trace.log_likelihood = -std::numeric_limits<double>::infinity();
  return trace;
}

FilterTrace marginal_log_likelihood(const Dataset& data, const KineticParams& theta, const AuxParams& tau,
                                    const IntegratorConfig& cfg) {
  const FixedConstants& k = data.constants;
  const Forecaster lna_step = [&](const AugmentedMoments& an, double t0, double t1) {
    return forecast(an, theta, tau, k, t1 - t0, cfg);
  };
  return run_filter(data, init_filter(theta, tau, k), lna_step, tau);
}

template <int N>
Eigen::Matrix<double, N, N> covariance_factor(const Eigen::Matrix<double, N, N>& V) {
  using Mat = Eigen::Matrix<double, N, N>;
  Eigen::LLT<Mat> llt(V);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat> eig(V);
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of covariance failed");
  const auto& lambda = eig.eigenvalues();
  const double tol = 1e-9 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -tol) throw NumericalError("covariance has a materially negative eigenvalue");
  return eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

template Eigen::Matrix<double, kAugmentedSize, kAugmentedSize> covariance_factor<kAugmentedSize>(
    const Eigen::Matrix<double, kAugmentedSize, kAugmentedSize>&);
template Eigen::Matrix<double, kNumCompartments, kNumCompartments> covariance_factor<kNumCompartments>(
    const Eigen::Matrix<double, kNumCompartments, kNumCompartments>&);

SampledPath sample_smoothed_states(const FilterTrace& trace, std::uint64_t seed) {
  if (trace.failed) throw NumericalError("cannot sample states from a failed filter trace");
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SampledPath path;
  path.x.reserve(trace.steps.size());
  path.d.reserve(trace.steps.size());
  for (const FilterStep& s : trace.steps) {
    const AugmentedMatrix L = covariance_factor<kAugmentedSize>(s.analysis.cov);
    AugmentedVector z;
    for (int i = 0; i < kAugmentedSize; ++i) z[i] = normal(rng);
    const AugmentedVector draw = s.analysis.mean + L * z;
    path.x.push_back(draw.head<kNumCompartments>());
    path.d.push_back(draw[kBackgroundIndex]);
  }
  return path;
}

double virological_log_likelihood(const std::vector<double>& n1, const std::vector<double>& n2,
                                  const std::vector<double>& n3, const SampledPath& path, const AuxParams& tau,
                                  const FixedConstants& k) {
  const std::size_t m = path.x.size();
  if (n1.size() != m || n2.size() != m || n3.size() != m || path.d.size() != m) {
    throw std::invalid_argument("virological series and sampled path differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (std::isnan(n1[i]) || std::isnan(n2[i]) || std::isnan(n3[i])) continue;
    if (!path.x[i].allFinite() || !std::isfinite(path.d[i])) return -std::numeric_limits<double>::infinity();
    const auto means = virological_means(path.x[i], path.d[i], tau, k);
    total += negbin_log_pmf(n1[i], means[0], tau.v);
    total += negbin_log_pmf(n2[i], means[1], tau.v);
    total += negbin_log_pmf(n3[i], means[2], tau.v);
  }
  return std::isnan(total) ? -std::numeric_limits<double>::infinity() : total;
}

std::vector<PredictiveMoments> one_step_ahead_predictive(const FilterTrace& trace, const AuxParams& tau,
                                                         const FixedConstants& k) {
  const AugmentedVector h = observation_row(tau);
  const double noise = k.omega * k.omega * tau.sigma_obs;
  std::vector<PredictiveMoments> out;
  out.reserve(trace.steps.size());
  for (const FilterStep& s : trace.steps) {
    out.push_back({h.dot(s.forecast.mean), h.dot(s.forecast.cov * h) + noise});
  }
  return out;
}

}  // namespace skmfit
