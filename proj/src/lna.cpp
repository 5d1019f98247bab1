#include "skmfit/lna.hpp"

#include <algorithm>
#include <stdexcept>

namespace skmfit {

StateVector macroscopic_rhs(const Concentration& p, const KineticParams& th, const FixedConstants& k) {
  const double l1 = p[IS] + p[IR];
  const double l2 = p[SI] + p[RI];
  const double mu = k.mu, g = k.gamma;
  const double inf1 = th.beta1 * l1, inf2 = th.beta2 * l2;
  StateVector d;
  d[SS] = mu - inf2 * p[SS] - inf1 * p[SS] - mu * p[SS];
  d[IS] = inf1 * p[SS] - g * p[IS] - mu * p[IS];
  d[RS] = g * p[IS] - th.sigma2 * inf2 * p[RS] - mu * p[RS];
  d[SI] = inf2 * p[SS] - g * p[SI] - mu * p[SI];
  d[RI] = th.sigma2 * inf2 * p[RS] - g * p[RI] - mu * p[RI];
  d[SR] = g * p[SI] - mu * p[SR] - th.sigma1 * inf1 * p[SR];
  d[IR] = -g * p[IR] + th.sigma1 * inf1 * p[SR] - mu * p[IR];
  d[RR] = g * p[IR] + g * p[RI] - mu * p[RR];
  return d;
}

StateMatrix jacobian_A(const Concentration& p, const KineticParams& th, const FixedConstants& k) {
  const double l1 = p[IS] + p[IR];
  const double l2 = p[SI] + p[RI];
  const double mu = k.mu, g = k.gamma;
  const double b1 = th.beta1, b2 = th.beta2, s1 = th.sigma1, s2 = th.sigma2;
  StateMatrix A = StateMatrix::Zero();

  A(SS, SS) = -(b2 * l2 + b1 * l1 + mu);
  A(SS, IS) = -b1 * p[SS];
  A(SS, IR) = -b1 * p[SS];
  A(SS, SI) = -b2 * p[SS];
  A(SS, RI) = -b2 * p[SS];

  A(IS, SS) = b1 * l1;
  A(IS, IS) = b1 * p[SS] - (g + mu);
  A(IS, IR) = b1 * p[SS];

  A(RS, IS) = g;
  A(RS, RS) = -(s2 * b2 * l2 + mu);
  A(RS, SI) = -s2 * b2 * p[RS];
  A(RS, RI) = -s2 * b2 * p[RS];

  A(SI, SS) = b2 * l2;
  A(SI, SI) = b2 * p[SS] - (g + mu);
  A(SI, RI) = b2 * p[SS];

  A(RI, RS) = s2 * b2 * l2;
  A(RI, SI) = s2 * b2 * p[RS];
  A(RI, RI) = s2 * b2 * p[RS] - (g + mu);

  A(SR, IS) = -s1 * b1 * p[SR];
  A(SR, SI) = g;
  A(SR, SR) = -(s1 * b1 * l1 + mu);
  A(SR, IR) = -s1 * b1 * p[SR];

  A(IR, IS) = s1 * b1 * p[SR];
  A(IR, SR) = s1 * b1 * l1;
  A(IR, IR) = s1 * b1 * p[SR] - (g + mu);

  A(RR, RI) = g;
  A(RR, IR) = g;
  A(RR, RR) = -mu;
  return A;
}

StateMatrix diffusion_B(const Concentration& phi, const KineticParams& theta, const FixedConstants& k) {
  const PropensityVector a = concentration_propensities(phi, theta, k).cwiseMax(0.0);
  const StoichiometryMatrix& S = stoichiometric_matrix();
  StateMatrix B = StateMatrix::Zero();
  // Every column of S has at most two nonzeros, so accumulate the rank-one terms directly.
  for (int j = 0; j < kNumReactions; ++j) {
    int idx[2];
    int val[2];
    int n = 0;
    for (int i = 0; i < kNumCompartments && n < 2; ++i) {
      if (S(i, j) != 0) {
        idx[n] = i;
        val[n] = S(i, j);
        ++n;
      }
    }
    for (int p = 0; p < n; ++p) {
      for (int q = 0; q < n; ++q) B(idx[p], idx[q]) += a[j] * val[p] * val[q];
    }
  }
  return B;
}

StateMatrix covariance_rhs(const StateMatrix& C, const StateMatrix& A, const StateMatrix& B) {
  const StateMatrix AC = A * C;
  return AC + AC.transpose() + B;
}

LnaPacked pack_lna(const Concentration& phi, const CovarianceState& C) {
  LnaPacked y;
  y.head<kNumCompartments>() = phi;
  int n = kNumCompartments;
  for (int i = 0; i < kNumCompartments; ++i) {
    for (int j = i; j < kNumCompartments; ++j) y[n++] = C(i, j);
  }
  return y;
}

LnaMoments unpack_lna(const LnaPacked& y) {
  LnaMoments m;
  m.phi = y.head<kNumCompartments>();
  int n = kNumCompartments;
  for (int i = 0; i < kNumCompartments; ++i) {
    for (int j = i; j < kNumCompartments; ++j) {
      m.C(i, j) = y[n];
      m.C(j, i) = y[n];
      ++n;
    }
  }
  return m;
}

LnaMoments integrate_lna(const Concentration& phi0, const CovarianceState& C0, double t0, double t1,
                         const KineticParams& theta, const FixedConstants& k, const IntegratorConfig& cfg,
                         IntegrationStats* stats) {
  if (t1 < t0) throw std::invalid_argument("integrate_lna requires t1 >= t0");
  if (t1 == t0) return {phi0, 0.5 * (C0 + C0.transpose())};

  auto rhs = [&](double, const LnaPacked& y) -> LnaPacked {
    const LnaMoments m = unpack_lna(y);
    const StateMatrix A = jacobian_A(m.phi, theta, k);
    const StateMatrix dC = covariance_rhs(m.C, A, diffusion_B(m.phi, theta, k));
    LnaPacked dy;
    dy.head<kNumCompartments>() = macroscopic_rhs(m.phi, theta, k);
    int n = kNumCompartments;
    for (int i = 0; i < kNumCompartments; ++i) {
      for (int j = i; j < kNumCompartments; ++j) dy[n++] = dC(i, j);
    }
    return dy;
  };
  const LnaPacked y = integrate_dopri5(rhs, pack_lna(phi0, 0.5 * (C0 + C0.transpose())), t0, t1, cfg, stats);
  return unpack_lna(y);
}

}  // namespace skmfit
