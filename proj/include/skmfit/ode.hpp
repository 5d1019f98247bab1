#pragma once

#include "skmfit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace skmfit {

struct IntegratorConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = std::numeric_limits<double>::infinity();  // years
  long max_steps = 100000;
};

/// Thrown when an adaptive integration exhausts its step budget.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct IntegrationStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
};

namespace dopri {

// Dormand & Prince (1980) RK5(4)7M tableau.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                        b6 = 11.0 / 84;
// Difference between the 5th and embedded 4th order weights.
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;

// One step from (t, y) with slope k1 = f(t, y). Fills y_new, k7 = f(t + h, y_new), and err.
template <class Vec, class Rhs>
void step(Rhs& f, double t, const Vec& y, const Vec& k1, double h, Vec& y_new, Vec& k7, Vec& err) {
  const Vec k2 = f(t + c2 * h, (y + h * (a21 * k1)).eval());
  const Vec k3 = f(t + c3 * h, (y + h * (a31 * k1 + a32 * k2)).eval());
  const Vec k4 = f(t + c4 * h, (y + h * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
  const Vec k5 = f(t + c5 * h, (y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
  const Vec k6 = f(t + h, (y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
  y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  k7 = f(t + h, y_new);
  err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
}

}  // namespace dopri

/// Adaptive Dormand-Prince 5(4) integration of y' = f(t, y) from t0 to t1 (t1 >= t0).
/// `Vec` is an Eigen column vector; `f(t, y)` returns a Vec.
template <class Vec, class Rhs>
Vec integrate_dopri5(Rhs&& f, Vec y, double t0, double t1, const IntegratorConfig& cfg,
                     IntegrationStats* stats = nullptr) {
  if (!(t1 >= t0)) throw std::invalid_argument("integrate_dopri5 requires t1 >= t0");
  if (t1 == t0) return y;
  if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0)) {
    throw std::invalid_argument("integrator tolerances must be positive");
  }
  IntegrationStats local;
  IntegrationStats& st = stats ? *stats : local;

  auto error_norm = [&](const Vec& err, const Vec& y0, const Vec& y1) {
    const auto scale = cfg.abs_tol + cfg.rel_tol * y0.cwiseAbs().cwiseMax(y1.cwiseAbs()).array();
    return std::sqrt((err.array() / scale).square().mean());
  };

  Vec k1 = f(t0, y);
  ++st.rhs_evaluations;
  const double span = t1 - t0;

  // Initial step size heuristic (Hairer, Norsett & Wanner, II.4).
  double h;
  {
    const auto scale = (cfg.abs_tol + cfg.rel_tol * y.cwiseAbs().array()).eval();
    const double d0 = std::sqrt((y.array() / scale).square().mean());
    const double d1 = std::sqrt((k1.array() / scale).square().mean());
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * span : 0.01 * d0 / d1;
    h0 = std::min({h0, span, cfg.max_step});
    const Vec y1 = y + h0 * k1;
    const Vec f1 = f(t0 + h0, y1);
    ++st.rhs_evaluations;
    const double d2 = std::sqrt(((f1 - k1).array() / scale).square().mean()) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6 * span, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
    h = std::min({100.0 * h0, h1, span, cfg.max_step});
  }

  double t = t0;
  Vec y_new = y, k7 = y, err = y;
  long steps = 0;
  while (t < t1) {
    if (++steps > cfg.max_steps) {
      throw DivergenceError("adaptive integration exceeded " + std::to_string(cfg.max_steps) + " steps");
    }
    bool last = false;
    if (t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    dopri::step(f, t, y, k1, h, y_new, k7, err);
    st.rhs_evaluations += 6;
    const double en = error_norm(err, y, y_new);
    if (!std::isfinite(en)) {
      ++st.rejected;
      h *= 0.2;
      if (h < 1e-14 * std::max(1.0, std::abs(t))) throw DivergenceError("step size underflow");
      continue;
    }
    if (en <= 1.0) {
      t = last ? t1 : t + h;
      y = y_new;
      k1 = k7;
      ++st.accepted;
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h = std::min(h * fac, cfg.max_step);
    } else {
      ++st.rejected;
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.2, 1.0);
      if (h < 1e-14 * std::max(1.0, std::abs(t))) throw DivergenceError("step size underflow");
    }
  }
  return y;
}

/// Dormand-Prince 5th-order solution with `n_steps` equal steps (no error control).
template <class Vec, class Rhs>
Vec integrate_dopri5_fixed(Rhs&& f, Vec y, double t0, double t1, long n_steps) {
  if (n_steps <= 0) throw std::invalid_argument("n_steps must be positive");
  const double h = (t1 - t0) / static_cast<double>(n_steps);
  Vec k1 = f(t0, y), y_new = y, k7 = y, err = y;
  for (long i = 0; i < n_steps; ++i) {
    const double t = t0 + static_cast<double>(i) * h;
    dopri::step(f, t, y, k1, h, y_new, k7, err);
    y = y_new;
    k1 = k7;
  }
  return y;
}

}  // namespace skmfit
