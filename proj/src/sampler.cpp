#include "skmfit/sampler.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <stdexcept>

namespace skmfit {

std::vector<double> geometric_ladder(int n, double t_max) {
  if (n < 1) throw std::invalid_argument("ladder needs at least one chain");
  std::vector<double> t(n, 1.0);
  if (n == 1) return t;
  const double rho = std::pow(t_max, 1.0 / (n - 1));
  for (int j = 1; j < n; ++j) t[j] = t[j - 1] * rho;
  t[n - 1] = t_max;
  return t;
}

std::vector<double> SamplerConfig::ladder() const {
  return temperatures.empty() ? geometric_ladder(n_chains, max_temperature) : temperatures;
}

void SamplerConfig::validate(std::size_t dimension) const {
  if (n_chains < 1) throw InputError("sampler needs at least one chain");
  if (n_iter < 1 || n_adapt < 0 || n_adapt > n_iter) throw InputError("sampler requires 0 <= adapt <= iterations");
  if (swap_interval < 1 || thin < 1) throw InputError("swap interval and thinning must be positive");
  if (!temperatures.empty() && static_cast<int>(temperatures.size()) != n_chains) {
    throw InputError("temperature ladder length must equal the number of chains");
  }
  const std::vector<double> t = ladder();
  if (std::abs(t.front() - 1.0) > 0.0) throw InputError("the first temperature must be 1");
  for (std::size_t j = 1; j < t.size(); ++j) {
    // Equal temperatures are allowed for diagnostics; decreasing ones are not.
    if (!(t[j] >= t[j - 1])) throw InputError("temperatures must be nondecreasing");
  }
  if (n_chains > 1 && temperatures.empty() && !(max_temperature > 1.0)) {
    throw InputError("max temperature must exceed 1");
  }
  if (blocks.empty()) throw InputError("sampler needs at least one block");
  std::set<int> seen;
  for (const auto& b : blocks) {
    if (b.indices.empty()) throw InputError("block '" + b.name + "' is empty");
    for (int i : b.indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= dimension) throw InputError("block index out of range");
      if (!seen.insert(i).second) throw InputError("blocks overlap at coordinate " + std::to_string(i));
    }
    if (!(b.initial_scale > 0.0)) throw InputError("initial proposal scale must be positive");
  }
  if (max_init_draws < 1) throw InputError("max_init_draws must be positive");
}

int resolve_threads(int requested, int n_chains) {
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("SKMFIT_THREADS")) n = std::atoi(env);
  }
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return std::clamp(n, 1, std::max(1, n_chains));
}

BlockAdapter::BlockAdapter(const BlockSpec& spec, double jitter, double target_acceptance, long adapt_start)
    : spec_(spec), jitter_(jitter), target_acceptance_(target_acceptance), adapt_start_(adapt_start) {
  const auto d = static_cast<Eigen::Index>(spec_.indices.size());
  mean_ = Eigen::VectorXd::Zero(d);
  scatter_ = Eigen::MatrixXd::Zero(d, d);
  refresh();
}

void BlockAdapter::observe(const Eigen::VectorXd& values, double acceptance_probability) {
  if (frozen_) return;
  ++count_;
  const Eigen::VectorXd delta = values - mean_;
  mean_ += delta / static_cast<double>(count_);
  scatter_ += delta * (values - mean_).transpose();
  if (spec_.mode == AdaptationMode::DiagonalVariance) {
    const double gain = 1.0 / std::pow(static_cast<double>(count_), 0.6);
    log_scale_ += gain * (acceptance_probability - target_acceptance_);
  }
  refresh();
}

Eigen::MatrixXd BlockAdapter::empirical_covariance() const {
  const auto d = mean_.size();
  Eigen::MatrixXd cov = count_ > 1 ? Eigen::MatrixXd(scatter_ / static_cast<double>(count_ - 1))
                                   : Eigen::MatrixXd::Zero(d, d);
  cov = 0.5 * (cov + cov.transpose());
  cov.diagonal().array() += jitter_;
  return cov;
}

void BlockAdapter::refresh() {
  const auto d = mean_.size();
  const double dd = static_cast<double>(d);
  const double s0 = spec_.initial_scale * spec_.initial_scale;
  const bool use_empirical = count_ >= adapt_start_ && count_ > 1;
  if (spec_.mode == AdaptationMode::FullCovariance) {
    proposal_cov_ = use_empirical ? Eigen::MatrixXd((2.38 * 2.38 / dd) * empirical_covariance())
                                  : Eigen::MatrixXd(s0 * Eigen::MatrixXd::Identity(d, d));
  } else {
    const double factor = std::exp(2.0 * log_scale_);
    Eigen::VectorXd var = use_empirical ? Eigen::VectorXd((2.38 * 2.38 / dd) * empirical_covariance().diagonal())
                                        : Eigen::VectorXd::Constant(d, s0);
    proposal_cov_ = (factor * var).asDiagonal();
  }
  Eigen::LLT<Eigen::MatrixXd> llt(proposal_cov_);
  if (llt.info() == Eigen::Success) {
    proposal_chol_ = llt.matrixL();
  } else {
    proposal_chol_ = proposal_cov_.diagonal().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
}

Eigen::VectorXd BlockAdapter::propose_step(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(mean_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return proposal_chol_ * z;
}

std::vector<bool> swap_sweep(std::span<const double> log_pi, std::span<const double> temperatures, int parity,
                             Rng& rng) {
  const std::size_t n = log_pi.size();
  std::vector<bool> swapped(n, false);
  for (std::size_t j = static_cast<std::size_t>(parity); j + 1 < n; j += 2) {
    const double lr = swap_log_ratio(log_pi[j], log_pi[j + 1], temperatures[j], temperatures[j + 1]);
    const double u = uniform_open(rng);
    if (std::isnan(lr)) continue;
    swapped[j] = std::log(u) < lr;
  }
  return swapped;
}

}  // namespace skmfit
