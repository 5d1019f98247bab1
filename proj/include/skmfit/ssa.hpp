#pragma once

#include "skmfit/model.hpp"
#include "skmfit/observation.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace skmfit {

/// States of the jump process sampled (right-continuously) at grid times.
struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
};

/// Called once per fired reaction with the waiting time, the total rate it was drawn
/// from and the 0-based reaction index. Used by tests; production callers pass nothing.
using EventObserver = std::function<void(double wait, double total_rate, int reaction)>;

/// Gillespie direct method from theta.x0 at grid.front(). Throws std::invalid_argument
/// for a bad grid or non-integer initial state, std::domain_error for negative propensities.
Trajectory simulate(const ReactionNetwork& network, const KineticParams& theta, const std::vector<double>& grid,
                    std::uint64_t seed, const EventObserver& observer = {});

struct SyntheticDataset {
  Dataset data;
  Trajectory truth;                // latent kinetic states at the observation weeks
  std::vector<double> background;  // latent D at the observation weeks
  std::vector<double> report_means;  // r (G^T X + D) before observation noise
};

/// Synthetic year: SSA states at weeks 1..weeks, stationary AR(1) background,
/// Gaussian aggregate reports (rounded, floored at zero), negative-binomial test counts.
SyntheticDataset generate_synthetic_dataset(const KineticParams& theta, const AuxParams& tau,
                                            const FixedConstants& k, std::size_t weeks, std::uint64_t seed);

/// Rounds x0 to whole individuals; X_SS absorbs the rounding so the total stays omega.
StateVector round_initial_state(const StateVector& x0, double omega);

}  // namespace skmfit
