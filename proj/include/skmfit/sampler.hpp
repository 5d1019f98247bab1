#pragma once

#include "skmfit/errors.hpp"
#include "skmfit/random.hpp"

#include <Eigen/Core>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace skmfit {

enum class AdaptationMode {
  FullCovariance,    // running empirical covariance, scaled by 2.38^2 / d
  DiagonalVariance,  // running marginal variances with a Robbins-Monro global scale
};

struct BlockSpec {
  std::string name;
  std::vector<int> indices;
  AdaptationMode mode = AdaptationMode::FullCovariance;
  double initial_scale = 0.1;  // proposal sd per coordinate before adaptation has data
};

struct SamplerConfig {
  int n_chains = 8;
  long n_iter = 200000;
  long n_adapt = 100000;  // adaptation window; also the burn-in
  std::vector<double> temperatures;  // empty: geometric ladder from 1 to max_temperature
  double max_temperature = 50.0;
  long swap_interval = 10;
  long thin = 10;
  std::uint64_t seed = 1;
  std::vector<BlockSpec> blocks;
  bool temper_prior = true;  // false: only the likelihood part is tempered
  int threads = 0;           // 0: SKMFIT_THREADS or the hardware concurrency
  long adapt_start = 500;    // observations before the empirical covariance is used
  int max_init_draws = 1000;
  double jitter = 1e-10;
  double target_acceptance = 0.234;

  std::vector<double> ladder() const;
  void validate(std::size_t dimension) const;
};

/// T_j = rho^(j-1) with T_n = t_max.
std::vector<double> geometric_ladder(int n, double t_max);

/// Threads to use for `n_chains` chains under `requested` (0: environment/hardware).
int resolve_threads(int requested, int n_chains);

class InitializationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Adaptive random-walk proposal for one parameter block.
class BlockAdapter {
 public:
  BlockAdapter(const BlockSpec& spec, double jitter, double target_acceptance, long adapt_start);

  /// Feeds the block's current values and the acceptance probability of the last proposal.
  /// Ignored once frozen.
  void observe(const Eigen::VectorXd& values, double acceptance_probability);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  Eigen::VectorXd propose_step(Rng& rng) const;
  const Eigen::MatrixXd& proposal_covariance() const { return proposal_cov_; }
  /// Running covariance plus jitter * I.
  Eigen::MatrixXd empirical_covariance() const;
  const Eigen::VectorXd& running_mean() const { return mean_; }
  long observations() const { return count_; }
  double log_scale() const { return log_scale_; }
  const BlockSpec& spec() const { return spec_; }

 private:
  void refresh();

  BlockSpec spec_;
  double jitter_;
  double target_acceptance_;
  long adapt_start_;
  long count_ = 0;
  double log_scale_ = 0.0;
  bool frozen_ = false;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd scatter_;  // sum of outer products of deviations (Welford)
  Eigen::MatrixXd proposal_cov_;
  Eigen::MatrixXd proposal_chol_;
};

/// log acceptance ratio for exchanging the states of chains at temperatures t_lo and t_hi.
inline double swap_log_ratio(double log_pi_lo, double log_pi_hi, double t_lo, double t_hi) {
  return (1.0 / t_lo - 1.0 / t_hi) * (log_pi_hi - log_pi_lo);
}

/// One sweep of adjacent-pair swap proposals over pairs (j, j+1) with j % 2 == parity.
/// `log_pi` holds the tempered component of each chain's current state. Returns one flag per
/// chain index j marking an accepted swap of (j, j+1).
std::vector<bool> swap_sweep(std::span<const double> log_pi, std::span<const double> temperatures, int parity,
                             Rng& rng);

// Requirements on a sampler target. Evaluation must expose log_density and log_prior.
template <class T>
concept SamplerTarget = requires(const T& t, const Eigen::VectorXd& u, std::uint64_t s, Rng& rng,
                                 const typename T::Evaluation& e) {
  { t.dimension() } -> std::convertible_to<std::size_t>;
  { t.uses_seed() } -> std::convertible_to<bool>;
  { t.evaluate(u, s) } -> std::same_as<typename T::Evaluation>;
  { t.reseed(e, u, s) } -> std::same_as<typename T::Evaluation>;
  { t.initial_draw(rng) } -> std::convertible_to<Eigen::VectorXd>;
  { t.record(e, u) } -> std::same_as<typename T::Record>;
  { e.log_density } -> std::convertible_to<double>;
  { e.log_prior } -> std::convertible_to<double>;
};

template <class Record>
struct ArchivedDraw {
  long iteration = 0;
  Eigen::VectorXd u;
  double log_density = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> accepted;  // per block, on this iteration
  Record record;
};

struct ChainStats {
  double temperature = 1.0;
  std::vector<long> proposed;  // per block
  std::vector<long> accepted;
  long reseed_proposed = 0;
  long reseed_accepted = 0;
  // Post burn-in counts, comparable with the archive.
  std::vector<long> accepted_after_burn_in;
  long iterations_after_burn_in = 0;
  // Running per-coordinate moments of this temperature slot after burn-in.
  Eigen::VectorXd mean_after_burn_in;
  Eigen::VectorXd variance_after_burn_in;
};

template <class Record>
struct SamplerResult {
  std::vector<ArchivedDraw<Record>> draws;  // cold chain, post burn-in, thinned
  std::vector<double> temperatures;
  std::vector<ChainStats> chains;
  std::vector<long> swap_proposed;  // per adjacent pair
  std::vector<long> swap_accepted;
  std::vector<BlockAdapter> cold_adapters;  // final proposal state of the cold chain
};

namespace detail {

template <class Target>
struct Chain {
  Eigen::VectorXd u;
  std::uint64_t seed = 0;
  typename Target::Evaluation eval;
  std::vector<BlockAdapter> adapters;
  ChainStats stats;
  Rng rng;
};

inline double tempered(double log_density, double log_prior, double temperature, bool temper_prior) {
  if (!std::isfinite(log_density)) return -std::numeric_limits<double>::infinity();
  return temper_prior ? log_density / temperature : log_prior + (log_density - log_prior) / temperature;
}

}  // namespace detail

/// Parallel-tempering Metropolis-within-Gibbs over the configured blocks.
///
/// Per iteration each chain (i) refreshes its state-path seed through an independence
/// Metropolis step when the target uses one, then (ii) proposes a random-walk move for each
/// block in turn, all at its own temperature. Adjacent swaps run every swap_interval
/// iterations with alternating parity. Cold-chain draws after n_adapt are archived every
/// `thin` iterations. Results depend only on the configuration, not on the thread count.
template <SamplerTarget Target>
SamplerResult<typename Target::Record> run_sampler(const Target& target, const SamplerConfig& config) {
  using Evaluation = typename Target::Evaluation;
  using Record = typename Target::Record;
  const std::size_t dim = target.dimension();
  config.validate(dim);
  const std::vector<double> temps = config.ladder();
  const int n_chains = config.n_chains;
  const std::size_t n_blocks = config.blocks.size();

  std::vector<detail::Chain<Target>> chains(n_chains);
  for (int c = 0; c < n_chains; ++c) {
    auto& ch = chains[c];
    ch.rng = make_rng(config.seed, 1000 + static_cast<std::uint64_t>(c));
    for (const BlockSpec& b : config.blocks) {
      ch.adapters.emplace_back(b, config.jitter, config.target_acceptance, config.adapt_start);
    }
    ch.stats.temperature = temps[c];
    ch.stats.proposed.assign(n_blocks, 0);
    ch.stats.accepted.assign(n_blocks, 0);
    ch.stats.accepted_after_burn_in.assign(n_blocks, 0);
    bool ok = false;
    for (int attempt = 0; attempt < config.max_init_draws && !ok; ++attempt) {
      ch.u = target.initial_draw(ch.rng);
      ch.seed = ch.rng();
      ch.eval = target.evaluate(ch.u, ch.seed);
      ok = std::isfinite(ch.eval.log_density);
    }
    if (!ok) {
      throw InitializationError("chain " + std::to_string(c) + ": no finite posterior after " +
                                std::to_string(config.max_init_draws) + " prior draws");
    }
  }

  SamplerResult<Record> result;
  result.temperatures = temps;
  result.swap_proposed.assign(n_chains > 1 ? n_chains - 1 : 0, 0);
  result.swap_accepted.assign(result.swap_proposed.size(), 0);

  auto tempered_of = [&](const Evaluation& e, double temperature) {
    return detail::tempered(e.log_density, e.log_prior, temperature, config.temper_prior);
  };

  auto iterate = [&](detail::Chain<Target>& ch, int chain_index, long iteration) {
    const double temperature = temps[chain_index];
    const bool adapting = iteration < config.n_adapt;
    const bool post_burn_in = !adapting;
    if (iteration == config.n_adapt) {
      for (auto& a : ch.adapters) a.freeze();
    }
    if (target.uses_seed()) {
      const std::uint64_t proposal_seed = ch.rng();
      Evaluation e = target.reseed(ch.eval, ch.u, proposal_seed);
      const double log_alpha = tempered_of(e, temperature) - tempered_of(ch.eval, temperature);
      ++ch.stats.reseed_proposed;
      if (std::isfinite(log_alpha) && std::log(uniform_open(ch.rng)) < log_alpha) {
        ch.seed = proposal_seed;
        ch.eval = std::move(e);
        ++ch.stats.reseed_accepted;
      }
    }
    std::vector<std::uint8_t> accepted(n_blocks, 0);
    std::vector<double> alphas(n_blocks, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      const auto& idx = config.blocks[b].indices;
      const Eigen::VectorXd step = ch.adapters[b].propose_step(ch.rng);
      Eigen::VectorXd proposal = ch.u;
      for (std::size_t i = 0; i < idx.size(); ++i) proposal[idx[i]] += step[static_cast<Eigen::Index>(i)];
      Evaluation e = target.evaluate(proposal, ch.seed);
      const double log_alpha = tempered_of(e, temperature) - tempered_of(ch.eval, temperature);
      alphas[b] = std::isfinite(log_alpha) ? std::min(1.0, std::exp(log_alpha)) : 0.0;
      ++ch.stats.proposed[b];
      if (std::isfinite(log_alpha) && std::log(uniform_open(ch.rng)) < log_alpha) {
        ch.u = std::move(proposal);
        ch.eval = std::move(e);
        accepted[b] = 1;
        ++ch.stats.accepted[b];
        if (post_burn_in) ++ch.stats.accepted_after_burn_in[b];
      }
    }
    if (post_burn_in) {
      auto& st = ch.stats;
      const double n = static_cast<double>(++st.iterations_after_burn_in);
      if (n == 1.0) {
        st.mean_after_burn_in = Eigen::VectorXd::Zero(ch.u.size());
        st.variance_after_burn_in = Eigen::VectorXd::Zero(ch.u.size());
      }
      const Eigen::VectorXd delta = ch.u - st.mean_after_burn_in;
      st.mean_after_burn_in += delta / n;
      // Holds the sum of squared deviations until the run ends.
      st.variance_after_burn_in += delta.cwiseProduct(ch.u - st.mean_after_burn_in);
    }
    if (adapting) {
      for (std::size_t b = 0; b < n_blocks; ++b) {
        const auto& idx = config.blocks[b].indices;
        Eigen::VectorXd values(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) values[static_cast<Eigen::Index>(i)] = ch.u[idx[i]];
        ch.adapters[b].observe(values, alphas[b]);
      }
    }
    if (chain_index == 0 && post_burn_in && (iteration - config.n_adapt) % config.thin == 0) {
      ArchivedDraw<Record> d;
      d.iteration = iteration;
      d.u = ch.u;
      d.log_density = ch.eval.log_density;
      d.seed = ch.seed;
      d.accepted = std::move(accepted);
      d.record = target.record(ch.eval, ch.u);
      result.draws.push_back(std::move(d));
    }
  };

  const int n_threads = resolve_threads(config.threads, n_chains);
  Rng swap_rng = make_rng(config.seed, 1);
  long sweep = 0;
  for (long start = 0; start < config.n_iter; start += config.swap_interval) {
    const long stop = std::min(config.n_iter, start + config.swap_interval);
    auto run_range = [&](int first, int last) {
      for (int c = first; c < last; ++c) {
        for (long it = start; it < stop; ++it) iterate(chains[c], c, it);
      }
    };
    if (n_threads <= 1) {
      run_range(0, n_chains);
    } else {
      std::vector<std::exception_ptr> errors(n_threads);
      std::vector<std::thread> workers;
      for (int w = 0; w < n_threads; ++w) {
        const int first = w * n_chains / n_threads;
        const int last = (w + 1) * n_chains / n_threads;
        workers.emplace_back([&, w, first, last] {
          try {
            run_range(first, last);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : workers) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    if (n_chains > 1 && stop - start == config.swap_interval) {
      std::vector<double> log_pi(n_chains);
      for (int c = 0; c < n_chains; ++c) {
        const auto& e = chains[c].eval;
        log_pi[c] = config.temper_prior ? e.log_density : e.log_density - e.log_prior;
      }
      const int parity = static_cast<int>(sweep % 2);
      const std::vector<bool> swapped = swap_sweep(log_pi, temps, parity, swap_rng);
      for (int j = parity; j + 1 < n_chains; j += 2) {
        ++result.swap_proposed[j];
        if (swapped[j]) {
          ++result.swap_accepted[j];
          std::swap(chains[j].u, chains[j + 1].u);
          std::swap(chains[j].seed, chains[j + 1].seed);
          std::swap(chains[j].eval, chains[j + 1].eval);
        }
      }
      ++sweep;
    }
  }

  for (auto& ch : chains) {
    if (ch.stats.iterations_after_burn_in > 1) {
      ch.stats.variance_after_burn_in /= static_cast<double>(ch.stats.iterations_after_burn_in - 1);
    }
    result.chains.push_back(ch.stats);
  }
  result.cold_adapters = chains[0].adapters;
  return result;
}

}  // namespace skmfit
