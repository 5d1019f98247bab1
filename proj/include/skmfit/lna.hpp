#pragma once

#include "skmfit/model.hpp"
#include "skmfit/ode.hpp"

#include <Eigen/Core>

namespace skmfit {

using Concentration = StateVector;    // compartment proportions phi
using CovarianceState = StateMatrix;  // concentration-scale covariance C

/// Number of packed unknowns: 8 proportions plus the 36 upper-triangle covariance entries.
inline constexpr int kLnaPackedSize = kNumCompartments + kNumCompartments * (kNumCompartments + 1) / 2;
using LnaPacked = Eigen::Matrix<double, kLnaPackedSize, 1>;

struct LnaMoments {
  Concentration phi;
  CovarianceState C;
};

/// dphi/dt = S a(phi), written out in closed form.
StateVector macroscopic_rhs(const Concentration& phi, const KineticParams& theta, const FixedConstants& k);

/// Analytic Jacobian of macroscopic_rhs.
StateMatrix jacobian_A(const Concentration& phi, const KineticParams& theta, const FixedConstants& k);

/// B = S diag(a(phi)) S^T with concentration-scale propensities. Propensities are clamped
/// at zero so B stays positive semidefinite when a restart mean dips below zero.
StateMatrix diffusion_B(const Concentration& phi, const KineticParams& theta, const FixedConstants& k);

/// C A^T + A C + B.
StateMatrix covariance_rhs(const StateMatrix& C, const StateMatrix& A, const StateMatrix& B);

LnaPacked pack_lna(const Concentration& phi, const CovarianceState& C);
LnaMoments unpack_lna(const LnaPacked& y);

/// Joint integration of the macroscopic law and the covariance equation on [t0, t1].
/// Throws DivergenceError when the step budget is exhausted.
LnaMoments integrate_lna(const Concentration& phi0, const CovarianceState& C0, double t0, double t1,
                         const KineticParams& theta, const FixedConstants& k,
                         const IntegratorConfig& cfg = {}, IntegrationStats* stats = nullptr);

}  // namespace skmfit
