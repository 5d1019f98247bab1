#include "skmfit/ssa.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace skmfit {

Trajectory simulate(const ReactionNetwork& network, const KineticParams& theta, const std::vector<double>& grid,
                    std::uint64_t seed, const EventObserver& observer) {
  if (grid.empty()) throw std::invalid_argument("simulation grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("simulation grid must be strictly increasing");
  }
  for (int i = 0; i < kNumCompartments; ++i) {
    const double v = theta.x0[i];
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw std::invalid_argument("SSA initial state must hold nonnegative whole numbers");
    }
  }

  const StoichiometryMatrix& S = network.stoichiometry();
  Rng rng = make_rng(seed);
  Trajectory out;
  out.times = grid;
  out.states.reserve(grid.size());

  StateVector x = theta.x0;
  double t = grid.front();
  out.states.push_back(x);
  std::size_t next = 1;

  while (next < grid.size()) {
    const PropensityVector a = network.propensities(x, theta);
    if ((a.array() < 0.0).any()) throw std::domain_error("negative propensity in SSA");
    const double total = a.sum();
    if (!(total > 0.0)) {
      // Absorbing state: nothing can fire any more.
      while (next < grid.size()) {
        out.states.push_back(x);
        ++next;
      }
      break;
    }
    const double wait = -std::log(uniform_open(rng)) / total;
    const double t_event = t + wait;
    while (next < grid.size() && grid[next] < t_event) {
      out.states.push_back(x);
      ++next;
    }
    if (next >= grid.size()) break;

    const double target = uniform_open(rng) * total;
    double cumulative = 0.0;
    int reaction = kNumReactions - 1;
    for (int j = 0; j < kNumReactions; ++j) {
      cumulative += a[j];
      if (target < cumulative) {
        reaction = j;
        break;
      }
    }
    // Guard against the fp tail picking a reaction with zero propensity.
    while (a[reaction] <= 0.0 && reaction > 0) --reaction;
    x += S.col(reaction).cast<double>();
    t = t_event;
    if (observer) observer(wait, total, reaction);
  }
  return out;
}

StateVector round_initial_state(const StateVector& x0, double omega) {
  StateVector x = x0.array().round().cwiseMax(0.0);
  x[SS] = 0.0;
  x[SS] = std::max(0.0, std::round(omega) - x.sum());
  return x;
}

SyntheticDataset generate_synthetic_dataset(const KineticParams& theta, const AuxParams& tau,
                                            const FixedConstants& k, std::size_t weeks, std::uint64_t seed) {
  if (weeks < 2) throw std::invalid_argument("synthetic datasets need at least two weeks");
  tau.validate();
  std::vector<double> grid(weeks);
  for (std::size_t i = 0; i < weeks; ++i) grid[i] = week_time(i + 1);

  KineticParams th = theta;
  th.x0 = round_initial_state(theta.x0, k.omega);
  const ReactionNetwork network(k);

  SyntheticDataset out;
  out.truth = simulate(network, th, grid, derive_seed(seed, 0));
  Rng background_rng = make_rng(seed, 1);
  out.background = simulate_background(weeks, tau, background_noise_scale(theta), k, background_rng);

  Rng obs_rng = make_rng(seed, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  const StateVector G = aggregate_observation_vector();
  const double obs_sd = k.omega * std::sqrt(tau.sigma_obs);

  Dataset& data = out.data;
  data.constants = k;
  data.times = grid;
  data.y.resize(weeks);
  data.n1.resize(weeks);
  data.n2.resize(weeks);
  data.n3.resize(weeks);
  out.report_means.resize(weeks);
  for (std::size_t i = 0; i < weeks; ++i) {
    const StateVector& x = out.truth.states[i];
    const double mean = tau.r * (G.dot(x) + out.background[i]);
    out.report_means[i] = mean;
    data.y[i] = std::max(0.0, std::round(mean + obs_sd * normal(obs_rng)));
    const auto m = virological_means(x, out.background[i], tau, k);
    data.n1[i] = static_cast<double>(negbin_sample(m[0], tau.v, obs_rng));
    data.n2[i] = static_cast<double>(negbin_sample(m[1], tau.v, obs_rng));
    data.n3[i] = static_cast<double>(negbin_sample(m[2], tau.v, obs_rng));
  }
  return out;
}

}  // namespace skmfit
