#pragma once

#include "skmfit/filter.hpp"
#include "skmfit/model.hpp"
#include "skmfit/observation.hpp"
#include "skmfit/random.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

namespace skmfit {

/// Gamma(shape, scale); mean shape * scale.
struct GammaPrior {
  double shape = 1.0;
  double scale = 1.0;

  double log_density(double x) const;
  double sample(Rng& rng) const;
  double mean() const { return shape * scale; }
};

struct PriorConfig {
  GammaPrior beta{20.0, 3.0};
  GammaPrior sigma{10.0, 0.1};
  GammaPrior v{10.0, 0.1};
  GammaPrior c0{1.0, 0.01};
  GammaPrior sigma_obs{1.0, 0.01};
  GammaPrior c{1.0, 0.01};
  double dirichlet_alpha = 1.0;  // symmetric Dirichlet on x0 / omega
};

struct ModelParameters {
  KineticParams theta;
  AuxParams tau;
};

/// Log prior density on the constrained scale; -inf outside the support.
/// r and nu are uniform on (0, 1).
double log_prior(const ModelParameters& p, const PriorConfig& priors, const FixedConstants& k);

double log_dirichlet_density(const StateVector& proportions, double alpha);

/// Symmetric Dirichlet draw; the last coordinate is 1 minus the rest so the sum is exactly 1.
StateVector sample_dirichlet(double alpha, Rng& rng);

ModelParameters sample_prior(const PriorConfig& priors, const FixedConstants& k, Rng& rng);

// Unconstrained coordinates: logs of the positive parameters, logits of r and nu, and the
// additive log-ratios log(x_j / x_SS) of the seven other compartments.
enum FreeIndex : int {
  kBeta1 = 0,
  kBeta2,
  kSigma1,
  kSigma2,
  kLogC0,
  kLogSigmaObs,
  kLogitR,
  kLogC,
  kLogV,
  kLogitNu,
  kSimplexBegin,
};
inline constexpr int kNumFree = kSimplexBegin + kNumCompartments - 1;

Eigen::VectorXd to_unconstrained(const ModelParameters& p);
ModelParameters from_unconstrained(const Eigen::VectorXd& u, const FixedConstants& k);

/// log |det d(constrained) / d(unconstrained)|, with the simplex measured on its first
/// seven free proportions (other than X_SS).
double log_abs_det_jacobian(const Eigen::VectorXd& u);

/// Names of the reported parameters, in archive and summary order.
inline constexpr std::array<std::string_view, 18> kParameterNames = {
    "beta1", "beta2", "sigma1", "sigma2", "C0",   "Sigma", "r",    "c",    "nu",
    "v",     "X_SS",  "X_IS",   "X_RS",   "X_SI", "X_RI",  "X_SR", "X_IR", "X_RR"};
std::array<double, 18> parameter_values(const ModelParameters& p);
ModelParameters parameters_from_values(const std::array<double, 18>& values);

struct PosteriorOptions {
  PriorConfig priors;
  IntegratorConfig integrator;
  bool use_virological = true;
};

struct PosteriorEvaluation {
  double log_prior = 0.0;
  double log_marginal = 0.0;     // approximate marginal likelihood of the reports
  double log_virological = 0.0;  // 0 when the virological term is disabled
  double log_posterior = 0.0;    // sum of the three
  std::shared_ptr<const FilterTrace> trace;
  SampledPath path;
};

/// Unnormalised log posterior on the constrained scale. The seed drives the state path
/// on which the virological term is evaluated.
PosteriorEvaluation log_posterior(const ModelParameters& p, const Dataset& data, const PosteriorOptions& options,
                                  std::uint64_t seed);

/// Posterior on the unconstrained scale, packaged for the tempered sampler.
class PosteriorTarget {
 public:
  struct Evaluation {
    double log_density = 0.0;  // log posterior + log Jacobian
    double log_prior = 0.0;    // log prior + log Jacobian
    double log_marginal = 0.0;
    double log_virological = 0.0;
    std::shared_ptr<const FilterTrace> trace;
    std::shared_ptr<const SampledPath> path;
  };

  /// What the archive keeps per draw.
  struct Record {
    std::shared_ptr<const SampledPath> path;
    std::vector<PredictiveMoments> predictive;
    double log_marginal = 0.0;
    double log_virological = 0.0;
  };

  PosteriorTarget(Dataset data, PosteriorOptions options);

  std::size_t dimension() const { return kNumFree; }
  bool uses_seed() const { return true; }
  Evaluation evaluate(const Eigen::VectorXd& u, std::uint64_t seed) const;
  /// Same parameters, new state-path seed; reuses the filter trace.
  Evaluation reseed(const Evaluation& e, const Eigen::VectorXd& u, std::uint64_t seed) const;
  Eigen::VectorXd initial_draw(Rng& rng) const;
  Record record(const Evaluation& e, const Eigen::VectorXd& u) const;

  const Dataset& data() const { return data_; }
  const PosteriorOptions& options() const { return options_; }

 private:
  Dataset data_;
  PosteriorOptions options_;
};

}  // namespace skmfit
