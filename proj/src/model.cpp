#include "skmfit/model.hpp"

#include "skmfit/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace skmfit {
namespace {

StoichiometryMatrix make_stoichiometry() {
  // Columns are reactions 1..17; rows follow the Compartment enum.
  StoichiometryMatrix s = StoichiometryMatrix::Zero();
  auto set = [&s](int reaction, int from, int to) {
    if (from >= 0) s(from, reaction - 1) = -1;
    if (to >= 0) s(to, reaction - 1) = 1;
  };
  constexpr int none = -1;
  set(1, none, SS);  // birth
  set(2, SS, SI);
  set(3, SS, IS);
  set(4, SS, none);
  set(5, IS, none);
  set(6, IS, RS);
  set(7, RS, none);
  set(8, RS, RI);
  set(9, SI, SR);
  set(10, SI, none);
  set(11, RI, RR);
  set(12, RI, none);
  set(13, SR, none);
  set(14, SR, IR);
  set(15, IR, none);
  set(16, IR, RR);
  set(17, RR, none);
  return s;
}

// Shared body of the count- and concentration-scale propensities. With scale == 1
// the state is read as proportions and the birth term becomes mu.
PropensityVector fill_propensities(const StateVector& x, const KineticParams& th,
                                   const FixedConstants& k, double scale) {
  const double lambda1 = (x[IS] + x[IR]) / scale;
  const double lambda2 = (x[SI] + x[RI]) / scale;
  const double mu = k.mu;
  const double gamma = k.gamma;
  PropensityVector a;
  a[0] = mu * scale;
  a[1] = th.beta2 * lambda2 * x[SS];
  a[2] = th.beta1 * lambda1 * x[SS];
  a[3] = mu * x[SS];
  a[4] = mu * x[IS];
  a[5] = gamma * x[IS];
  a[6] = mu * x[RS];
  a[7] = th.sigma2 * th.beta2 * lambda2 * x[RS];
  a[8] = gamma * x[SI];
  a[9] = mu * x[SI];
  a[10] = gamma * x[RI];
  a[11] = mu * x[RI];
  a[12] = mu * x[SR];
  a[13] = th.sigma1 * th.beta1 * lambda1 * x[SR];
  a[14] = mu * x[IR];
  a[15] = gamma * x[IR];
  a[16] = mu * x[RR];
  return a;
}

}  // namespace

void FixedConstants::validate() const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw InputError("omega must be positive");
  if (!(omega_c > 0.0) || !(omega_c < omega)) throw InputError("omega_c must lie in (0, omega)");
  if (!(r_h > 0.0 && r_h < 1.0)) throw InputError("r_h must lie in (0, 1)");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be nonnegative");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InputError("mu must be nonnegative");
}

void KineticParams::validate(const FixedConstants& k) const {
  for (double p : {beta1, beta2, sigma1, sigma2, c0}) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw InputError("kinetic rates, cross-interference factors and c0 must be positive");
    }
  }
  if ((x0.array() < 0.0).any()) throw InputError("initial state has negative entries");
  const double total = x0.sum();
  if (std::abs(total - k.omega) > 1e-9 * k.omega) {
    throw InputError("initial state sums to " + std::to_string(total) + ", expected omega = " +
                     std::to_string(k.omega));
  }
}

ReactionNetwork::ReactionNetwork(const FixedConstants& k) : constants_(k), stoich_(stoichiometric_matrix()) {}

PropensityVector ReactionNetwork::propensities(const StateVector& x, const KineticParams& theta) const {
  return skmfit::propensities(x, theta, constants_);
}

ReactionNetwork build_network(const FixedConstants& k) { return ReactionNetwork(k); }

PropensityVector propensities(const StateVector& x, const KineticParams& theta, const FixedConstants& k) {
  if ((x.array() < 0.0).any()) {
    throw std::domain_error("negative compartment count passed to propensities");
  }
  return fill_propensities(x, theta, k, k.omega);
}

PropensityVector concentration_propensities(const StateVector& phi, const KineticParams& theta,
                                            const FixedConstants& k) {
  return fill_propensities(phi, theta, k, 1.0);
}

StateVector aggregate_observation_vector() {
  StateVector g;
  g << 0, 1, 0, 1, 1, 0, 1, 0;
  return g;
}

const StoichiometryMatrix& stoichiometric_matrix() {
  static const StoichiometryMatrix s = make_stoichiometry();
  return s;
}

}  // namespace skmfit
