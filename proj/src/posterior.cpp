#include "skmfit/posterior.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace skmfit {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sigmoid(double u) { return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }
double sigmoid(double u) { return std::exp(log_sigmoid(u)); }
double logit(double p) { return std::log(p) - std::log1p(-p); }

// Proportions from additive log-ratios against X_SS.
StateVector simplex_from_ratios(const Eigen::VectorXd& u) {
  double zmax = 0.0;
  for (int j = 0; j < kNumCompartments - 1; ++j) zmax = std::max(zmax, u[kSimplexBegin + j]);
  StateVector w;
  w[SS] = std::exp(-zmax);
  for (int j = 1; j < kNumCompartments; ++j) w[j] = std::exp(u[kSimplexBegin + j - 1] - zmax);
  return w / w.sum();
}

}  // namespace

double GammaPrior::log_density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double GammaPrior::sample(Rng& rng) const {
  std::gamma_distribution<double> g(shape, scale);
  return g(rng);
}

double log_dirichlet_density(const StateVector& p, double alpha) {
  if ((p.array() <= 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) return kNegInf;
  const double n = kNumCompartments;
  double lp = std::lgamma(n * alpha) - n * std::lgamma(alpha);
  if (alpha != 1.0) lp += (alpha - 1.0) * p.array().log().sum();
  return lp;
}

StateVector sample_dirichlet(double alpha, Rng& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  StateVector w;
  for (int i = 0; i < kNumCompartments; ++i) w[i] = g(rng);
  const double total = w.sum();
  // Snap to multiples of 2^-53: every partial sum is then exact, so the components add to 1 in any order.
  constexpr std::int64_t kUnit = std::int64_t{1} << 53;
  std::array<std::int64_t, kNumCompartments> n{};
  std::int64_t used = 0;
  for (int i = 0; i < kNumCompartments - 1; ++i) {
    const std::int64_t room = kUnit - used - (kNumCompartments - 1 - i);
    n[i] = std::clamp<std::int64_t>(std::llround(w[i] / total * static_cast<double>(kUnit)), 1, room);
    used += n[i];
  }
  n[kNumCompartments - 1] = kUnit - used;
  StateVector p;
  for (int i = 0; i < kNumCompartments; ++i) p[i] = std::ldexp(static_cast<double>(n[i]), -53);
  return p;
}

double log_prior(const ModelParameters& p, const PriorConfig& pr, const FixedConstants& k) {
  const KineticParams& th = p.theta;
  const AuxParams& tau = p.tau;
  if (!(tau.r > 0.0 && tau.r < 1.0) || !(tau.nu > 0.0 && tau.nu < 1.0)) return kNegInf;
  double lp = pr.beta.log_density(th.beta1) + pr.beta.log_density(th.beta2) + pr.sigma.log_density(th.sigma1) +
              pr.sigma.log_density(th.sigma2) + pr.v.log_density(tau.v) + pr.c0.log_density(th.c0) +
              pr.sigma_obs.log_density(tau.sigma_obs) + pr.c.log_density(tau.c);
  if (!std::isfinite(lp)) return kNegInf;
  lp += log_dirichlet_density(th.x0 / k.omega, pr.dirichlet_alpha);
  return std::isfinite(lp) ? lp : kNegInf;
}

ModelParameters sample_prior(const PriorConfig& pr, const FixedConstants& k, Rng& rng) {
  ModelParameters p;
  p.theta.beta1 = pr.beta.sample(rng);
  p.theta.beta2 = pr.beta.sample(rng);
  p.theta.sigma1 = pr.sigma.sample(rng);
  p.theta.sigma2 = pr.sigma.sample(rng);
  p.theta.c0 = pr.c0.sample(rng);
  p.tau.sigma_obs = pr.sigma_obs.sample(rng);
  p.tau.r = uniform_open(rng);
  p.tau.c = pr.c.sample(rng);
  p.tau.v = pr.v.sample(rng);
  p.tau.nu = uniform_open(rng);
  p.theta.x0 = k.omega * sample_dirichlet(pr.dirichlet_alpha, rng);
  return p;
}

Eigen::VectorXd to_unconstrained(const ModelParameters& p) {
  Eigen::VectorXd u(kNumFree);
  u[kBeta1] = std::log(p.theta.beta1);
  u[kBeta2] = std::log(p.theta.beta2);
  u[kSigma1] = std::log(p.theta.sigma1);
  u[kSigma2] = std::log(p.theta.sigma2);
  u[kLogC0] = std::log(p.theta.c0);
  u[kLogSigmaObs] = std::log(p.tau.sigma_obs);
  u[kLogitR] = logit(p.tau.r);
  u[kLogC] = std::log(p.tau.c);
  u[kLogV] = std::log(p.tau.v);
  u[kLogitNu] = logit(p.tau.nu);
  const double log_ss = std::log(p.theta.x0[SS]);
  for (int j = 1; j < kNumCompartments; ++j) u[kSimplexBegin + j - 1] = std::log(p.theta.x0[j]) - log_ss;
  return u;
}

ModelParameters from_unconstrained(const Eigen::VectorXd& u, const FixedConstants& k) {
  ModelParameters p;
  p.theta.beta1 = std::exp(u[kBeta1]);
  p.theta.beta2 = std::exp(u[kBeta2]);
  p.theta.sigma1 = std::exp(u[kSigma1]);
  p.theta.sigma2 = std::exp(u[kSigma2]);
  p.theta.c0 = std::exp(u[kLogC0]);
  p.tau.sigma_obs = std::exp(u[kLogSigmaObs]);
  p.tau.r = sigmoid(u[kLogitR]);
  p.tau.c = std::exp(u[kLogC]);
  p.tau.v = std::exp(u[kLogV]);
  p.tau.nu = sigmoid(u[kLogitNu]);
  p.theta.x0 = k.omega * simplex_from_ratios(u);
  return p;
}

double log_abs_det_jacobian(const Eigen::VectorXd& u) {
  double lj = u[kBeta1] + u[kBeta2] + u[kSigma1] + u[kSigma2] + u[kLogC0] + u[kLogSigmaObs] + u[kLogC] + u[kLogV];
  for (int idx : {static_cast<int>(kLogitR), static_cast<int>(kLogitNu)}) {
    lj += log_sigmoid(u[idx]) + log_sigmoid(-u[idx]);
  }
  // d(p_1..p_7)/d(z) = diag(p) - p p^T restricted to the free block; its determinant is prod_{all 8} p_i.
  double zmax = 0.0;
  for (int j = 0; j < kNumCompartments - 1; ++j) zmax = std::max(zmax, u[kSimplexBegin + j]);
  double log_norm = std::exp(-zmax);
  for (int j = 0; j < kNumCompartments - 1; ++j) log_norm += std::exp(u[kSimplexBegin + j] - zmax);
  log_norm = zmax + std::log(log_norm);
  double sum_z = 0.0;
  for (int j = 0; j < kNumCompartments - 1; ++j) sum_z += u[kSimplexBegin + j];
  lj += sum_z - kNumCompartments * log_norm;
  return lj;
}

std::array<double, 18> parameter_values(const ModelParameters& p) {
  std::array<double, 18> v{p.theta.beta1, p.theta.beta2, p.theta.sigma1, p.theta.sigma2, p.theta.c0,
                           p.tau.sigma_obs, p.tau.r,       p.tau.c,         p.tau.nu,        p.tau.v};
  for (int i = 0; i < kNumCompartments; ++i) v[10 + i] = p.theta.x0[i];
  return v;
}

ModelParameters parameters_from_values(const std::array<double, 18>& v) {
  ModelParameters p;
  p.theta.beta1 = v[0];
  p.theta.beta2 = v[1];
  p.theta.sigma1 = v[2];
  p.theta.sigma2 = v[3];
  p.theta.c0 = v[4];
  p.tau.sigma_obs = v[5];
  p.tau.r = v[6];
  p.tau.c = v[7];
  p.tau.nu = v[8];
  p.tau.v = v[9];
  for (int i = 0; i < kNumCompartments; ++i) p.theta.x0[i] = v[10 + i];
  return p;
}

PosteriorEvaluation log_posterior(const ModelParameters& p, const Dataset& data, const PosteriorOptions& options,
                                  std::uint64_t seed) {
  PosteriorEvaluation e;
  e.log_prior = log_prior(p, options.priors, data.constants);
  if (!std::isfinite(e.log_prior)) {
    e.log_posterior = kNegInf;
    return e;
  }
  auto trace = std::make_shared<FilterTrace>(marginal_log_likelihood(data, p.theta, p.tau, options.integrator));
  e.trace = trace;
  e.log_marginal = trace->log_likelihood;
  if (trace->failed) {
    e.log_posterior = kNegInf;
    return e;
  }
  try {
    e.path = sample_smoothed_states(*trace, seed);
  } catch (const NumericalError&) {
    e.log_posterior = kNegInf;
    return e;
  }
  if (options.use_virological) {
    e.log_virological = virological_log_likelihood(data.n1, data.n2, data.n3, e.path, p.tau, data.constants);
  }
  e.log_posterior = e.log_prior + e.log_marginal + e.log_virological;
  if (std::isnan(e.log_posterior)) e.log_posterior = kNegInf;
  return e;
}

PosteriorTarget::PosteriorTarget(Dataset data, PosteriorOptions options)
    : data_(std::move(data)), options_(std::move(options)) {
  data_.validate();
}

PosteriorTarget::Evaluation PosteriorTarget::evaluate(const Eigen::VectorXd& u, std::uint64_t seed) const {
  Evaluation out;
  if (!u.allFinite()) {
    out.log_density = out.log_prior = kNegInf;
    return out;
  }
  const ModelParameters p = from_unconstrained(u, data_.constants);
  PosteriorEvaluation e = log_posterior(p, data_, options_, seed);
  const double lj = log_abs_det_jacobian(u);
  out.log_prior = e.log_prior + lj;
  out.log_marginal = e.log_marginal;
  out.log_virological = e.log_virological;
  out.log_density = std::isfinite(e.log_posterior) ? e.log_posterior + lj : kNegInf;
  out.trace = std::move(e.trace);
  out.path = std::make_shared<const SampledPath>(std::move(e.path));
  return out;
}

PosteriorTarget::Evaluation PosteriorTarget::reseed(const Evaluation& e, const Eigen::VectorXd& u,
                                                    std::uint64_t seed) const {
  if (!e.trace || e.trace->failed || !std::isfinite(e.log_density)) return evaluate(u, seed);
  Evaluation out = e;
  SampledPath path;
  try {
    path = sample_smoothed_states(*e.trace, seed);
  } catch (const NumericalError&) {
    out.log_density = kNegInf;
    return out;
  }
  if (options_.use_virological) {
    const ModelParameters p = from_unconstrained(u, data_.constants);
    out.log_virological = virological_log_likelihood(data_.n1, data_.n2, data_.n3, path, p.tau, data_.constants);
  }
  out.path = std::make_shared<const SampledPath>(std::move(path));
  out.log_density = out.log_prior + out.log_marginal + out.log_virological;
  if (std::isnan(out.log_density)) out.log_density = kNegInf;
  return out;
}

Eigen::VectorXd PosteriorTarget::initial_draw(Rng& rng) const {
  return to_unconstrained(sample_prior(options_.priors, data_.constants, rng));
}

PosteriorTarget::Record PosteriorTarget::record(const Evaluation& e, const Eigen::VectorXd& u) const {
  Record r;
  r.path = e.path;
  r.log_marginal = e.log_marginal;
  r.log_virological = e.log_virological;
  if (e.trace && !e.trace->failed) {
    const ModelParameters p = from_unconstrained(u, data_.constants);
    r.predictive = one_step_ahead_predictive(*e.trace, p.tau, data_.constants);
  }
  return r;
}

}  // namespace skmfit
