#pragma once

#include <Eigen/Core>

#include <array>
#include <string_view>

namespace skmfit {

inline constexpr int kNumCompartments = 8;
inline constexpr int kNumReactions = 17;

using StateVector = Eigen::Matrix<double, kNumCompartments, 1>;
using StateMatrix = Eigen::Matrix<double, kNumCompartments, kNumCompartments>;
using PropensityVector = Eigen::Matrix<double, kNumReactions, 1>;
using StoichiometryMatrix = Eigen::Matrix<int, kNumCompartments, kNumReactions>;

// Immunological status (pathogen 1, pathogen 2). There is no II compartment.
enum Compartment : int { SS = 0, IS = 1, RS = 2, SI = 3, RI = 4, SR = 5, IR = 6, RR = 7 };

inline constexpr std::array<std::string_view, kNumCompartments> kCompartmentNames = {
    "X_SS", "X_IS", "X_RS", "X_SI", "X_RI", "X_SR", "X_IR", "X_RR"};

/// Epidemiological constants that are configured, never inferred. Rates per year.
struct FixedConstants {
  double omega = 2585518.0;   // total population
  double omega_c = 266761.0;  // children under five
  double r_h = 0.0005;        // share of reported child cases admitted to the sentinel hospital
  double gamma = 365.0 / 7.0;
  double mu = 1.0 / 70.0;

  void validate() const;
};

/// Parameters of the kinetic model. `x0` holds counts at the first observation time.
struct KineticParams {
  double beta1 = 60.0;
  double beta2 = 60.0;
  double sigma1 = 1.0;
  double sigma2 = 1.0;
  StateVector x0 = StateVector::Zero();
  double c0 = 0.01;

  void validate(const FixedConstants& k) const;
};

/// The 17-reaction two-pathogen SIR network with demographic turnover.
class ReactionNetwork {
 public:
  explicit ReactionNetwork(const FixedConstants& k);

  const StoichiometryMatrix& stoichiometry() const { return stoich_; }
  const FixedConstants& constants() const { return constants_; }

  /// Count-scale propensities. Throws std::domain_error for negative states.
  PropensityVector propensities(const StateVector& x, const KineticParams& theta) const;

 private:
  FixedConstants constants_;
  StoichiometryMatrix stoich_;
};

ReactionNetwork build_network(const FixedConstants& k);

/// Count-scale propensities a(x): lambda_1 = (x_IS + x_IR) / omega, birth at mu * omega.
PropensityVector propensities(const StateVector& x, const KineticParams& theta, const FixedConstants& k);

/// Concentration-scale propensities a(phi): proportions in place of counts, birth at mu.
/// No sign check; callers on the LNA path may pass slightly negative proportions.
PropensityVector concentration_propensities(const StateVector& phi, const KineticParams& theta,
                                            const FixedConstants& k);

/// G selects IS + SI + RI + IR, the infections that appear in aggregate reports.
StateVector aggregate_observation_vector();

const StoichiometryMatrix& stoichiometric_matrix();

inline double influenza_infected(const StateVector& x) { return x[IS] + x[IR]; }
inline double rsv_infected(const StateVector& x) { return x[SI] + x[RI]; }

}  // namespace skmfit
