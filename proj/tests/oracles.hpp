#pragma once
// Independent reference computations shared by the unit and acceptance tests.

#include "skmfit/filter.hpp"
#include "skmfit/lna.hpp"
#include "skmfit/posterior.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

using namespace skmfit;

// 2004-05 season MAP; the published initial counts are scaled to the population.
inline ModelParameters operating_point(const FixedConstants& k = {}) {
  ModelParameters p;
  p.theta.beta1 = 64.3754;
  p.theta.beta2 = 68.3774;
  p.theta.sigma1 = 1.4021;
  p.theta.sigma2 = 1.5325;
  p.theta.c0 = 8.8445e-3;
  p.theta.x0 << 2281352, 397, 39800, 1880, 2125, 30237, 455, 143751;
  p.theta.x0 *= k.omega / p.theta.x0.sum();
  p.tau.c = 0.02456;
  p.tau.nu = 0.1994;
  p.tau.r = 0.1035;
  p.tau.sigma_obs = 2.3857e-7;
  p.tau.v = 0.0996;
  return p;
}

inline Concentration random_simplex(Rng& rng) {
  std::exponential_distribution<double> e(1.0);
  Concentration phi;
  for (int i = 0; i < kNumCompartments; ++i) phi[i] = e(rng);
  return phi / phi.sum();
}

// Diffusion matrix written entry by entry from the published table of A and B.
inline StateMatrix table_B(const Concentration& p, const KineticParams& th, const FixedConstants& k) {
  const double b1 = th.beta1, b2 = th.beta2, s1 = th.sigma1, s2 = th.sigma2, g = k.gamma, mu = k.mu;
  const double l1 = p[1] + p[6], l2 = p[3] + p[4];
  StateMatrix B = StateMatrix::Zero();
  B(0, 0) = b2 * l2 * p[0] + b1 * l1 * p[0] + p[0] * mu + mu;
  B(0, 1) = -b1 * p[0] * l1;
  B(0, 3) = -b2 * l2 * p[0];
  B(1, 0) = -b1 * l1 * p[0];
  B(1, 1) = b1 * l1 * p[0] + p[1] * (g + mu);
  B(1, 2) = -g * p[1];
  B(2, 1) = -g * p[1];
  B(2, 2) = g * p[1] + b2 * p[2] * l2 * s2 + mu * p[2];
  B(2, 4) = -b2 * p[2] * l2 * s2;
  B(3, 0) = -b2 * p[0] * l2;
  B(3, 3) = b2 * p[0] * l2 + p[3] * (g + mu);
  B(3, 5) = -g * p[3];
  B(4, 2) = -b2 * l2 * s2 * p[2];
  B(4, 4) = p[4] * (g + mu) + b2 * l2 * s2 * p[2];
  B(4, 7) = -g * p[4];
  B(5, 3) = -g * p[3];
  B(5, 5) = g * p[3] + mu * p[5] + b1 * l1 * s1 * p[5];
  B(5, 6) = -b1 * p[5] * l1 * s1;
  B(6, 5) = -b1 * s1 * l1 * p[5];
  B(6, 6) = b1 * l1 * s1 * p[5] + (g + mu) * p[6];
  B(6, 7) = -g * p[6];
  B(7, 4) = -g * p[4];
  B(7, 6) = -g * p[6];
  B(7, 7) = g * p[4] + g * p[6] + mu * p[7];
  return B;
}

// Constant-coefficient Lyapunov flow dC/dt = A C + C A' + B for a stable A:
// C(t) = C_inf + e^{At} (C0 - C_inf) e^{A't}, with A C_inf + C_inf A' + B = 0 solved in Kronecker form.
inline Eigen::MatrixXd lyapunov_flow(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C0,
                                     double t) {
  const Eigen::Index n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd K(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) K.block(i * n, j * n, n, n) = A(i, j) * I + (i == j ? A : Eigen::MatrixXd::Zero(n, n));
  const Eigen::VectorXd vec_b = Eigen::Map<const Eigen::VectorXd>(B.data(), n * n);
  const Eigen::VectorXd vec_c = K.fullPivLu().solve(-vec_b);
  Eigen::MatrixXd C_inf = Eigen::Map<const Eigen::MatrixXd>(vec_c.data(), n, n);
  C_inf = 0.5 * (C_inf + C_inf.transpose()).eval();
  const Eigen::MatrixXd eAt = (A * t).exp();
  return C_inf + eAt * (C0 - C_inf) * eAt.transpose();
}

inline double mvn_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::VectorXd z = llt.matrixL().solve(y - mean);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (z.squaredNorm() + log_det + static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
}

// Constant-coefficient linear-Gaussian model on the augmented state:
//   Z_1 ~ N(m0, V0),  Z_{i+1} = F Z_i + b + w_i,  w_i ~ N(0, Q),  y_i = h' Z_i + e_i,  e_i ~ N(0, R).
struct LinearSurrogate {
  AugmentedMatrix F;
  AugmentedVector b;
  AugmentedMatrix Q;
  AugmentedMoments prior;

  Forecaster forecaster() const {
    return [this](const AugmentedMoments& a, double, double) {
      AugmentedMoments f;
      f.mean = F * a.mean + b;
      f.cov = F * a.cov * F.transpose() + Q;
      return f;
    };
  }

  // Exact log density of y_1:M from the stacked joint Gaussian.
  double joint_log_density(const std::vector<double>& y, const AugmentedVector& h, double R) const {
    const std::size_t M = y.size();
    std::vector<AugmentedVector> means(M);
    std::vector<AugmentedMatrix> covs(M);
    means[0] = prior.mean;
    covs[0] = prior.cov;
    for (std::size_t i = 1; i < M; ++i) {
      means[i] = F * means[i - 1] + b;
      covs[i] = F * covs[i - 1] * F.transpose() + Q;
    }
    Eigen::VectorXd mu(M), yy(M);
    Eigen::MatrixXd S(M, M);
    for (std::size_t i = 0; i < M; ++i) {
      mu[i] = h.dot(means[i]);
      yy[i] = y[i];
      AugmentedMatrix cross = covs[i];  // Cov(Z_j, Z_i) for j >= i
      for (std::size_t j = i; j < M; ++j) {
        if (j > i) cross = F * cross;
        S(j, i) = S(i, j) = h.dot(cross * h);
      }
      S(i, i) += R;
    }
    return mvn_log_density(yy, mu, S);
  }
};

// Reproducible surrogate: stable random dynamics with a positive definite prior and noise.
inline LinearSurrogate make_surrogate(std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  LinearSurrogate s;
  AugmentedMatrix R;
  for (int i = 0; i < kAugmentedSize; ++i)
    for (int j = 0; j < kAugmentedSize; ++j) R(i, j) = n(rng);
  s.F = 0.9 * AugmentedMatrix::Identity() + 0.03 * R;
  for (int i = 0; i < kAugmentedSize; ++i) s.b[i] = scale * 0.01 * n(rng);
  AugmentedMatrix L;
  for (int i = 0; i < kAugmentedSize; ++i)
    for (int j = 0; j < kAugmentedSize; ++j) L(i, j) = n(rng);
  s.Q = scale * (L * L.transpose() / kAugmentedSize + 0.1 * AugmentedMatrix::Identity());
  for (int i = 0; i < kAugmentedSize; ++i) s.prior.mean[i] = scale * (1.0 + 0.1 * n(rng));
  for (int i = 0; i < kAugmentedSize; ++i)
    for (int j = 0; j < kAugmentedSize; ++j) L(i, j) = n(rng);
  s.prior.cov = scale * (L * L.transpose() / kAugmentedSize + 0.5 * AugmentedMatrix::Identity());
  return s;
}

// Negative-binomial pmf by the ratio recursion p(n) = p(n-1) (n - 1 + s)(1 - q) / n.
inline std::vector<double> negbin_pmf_table(double mean, double v, int n_max) {
  const double s = v * mean, q = v / (1.0 + v);
  std::vector<double> p(n_max + 1);
  p[0] = std::pow(q, s);
  for (int n = 1; n <= n_max; ++n) p[n] = p[n - 1] * (n - 1 + s) * (1.0 - q) / n;
  return p;
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double variance_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Standard error of the sample variance from the fourth central moment.
inline double variance_standard_error(const std::vector<double>& x) {
  const double m = mean_of(x), n = static_cast<double>(x.size());
  double m2 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = (v - m) * (v - m);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return std::sqrt((m4 - m2 * m2) / n);
}

// Closed-form log density wrapped for the tempered sampler; no auxiliary seed.
struct AnalyticTarget {
  struct Evaluation {
    double log_density = 0.0;
    double log_prior = 0.0;
  };
  struct Record {};

  std::size_t dim = 1;
  std::function<double(const Eigen::VectorXd&)> log_pdf;
  std::function<Eigen::VectorXd(Rng&)> init;

  std::size_t dimension() const { return dim; }
  bool uses_seed() const { return false; }
  Evaluation evaluate(const Eigen::VectorXd& u, std::uint64_t) const { return {log_pdf(u), 0.0}; }
  Evaluation reseed(const Evaluation& e, const Eigen::VectorXd&, std::uint64_t) const { return e; }
  Eigen::VectorXd initial_draw(Rng& rng) const { return init(rng); }
  Record record(const Evaluation&, const Eigen::VectorXd&) const { return {}; }
};

inline AnalyticTarget gaussian_target(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  AnalyticTarget t;
  t.dim = static_cast<std::size_t>(mean.size());
  const Eigen::MatrixXd precision = cov.inverse();
  t.log_pdf = [mean, precision](const Eigen::VectorXd& u) {
    const Eigen::VectorXd d = u - mean;
    return -0.5 * d.dot(precision * d);
  };
  t.init = [mean](Rng& rng) {
    std::normal_distribution<double> n(0.0, 3.0);
    Eigen::VectorXd u = mean;
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += n(rng);
    return u;
  };
  return t;
}

// Two well-separated unit-variance modes at -10 and +10 with weights 0.3 and 0.7.
inline double bimodal_log_pdf(double x) {
  const double a = std::log(0.3) - 0.5 * (x + 10) * (x + 10), b = std::log(0.7) - 0.5 * (x - 10) * (x - 10);
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline AnalyticTarget bimodal_target() {
  AnalyticTarget t;
  t.dim = 1;
  t.log_pdf = [](const Eigen::VectorXd& u) { return bimodal_log_pdf(u[0]); };
  t.init = [](Rng& rng) {
    std::uniform_real_distribution<double> un(-12.0, 12.0);
    return Eigen::VectorXd::Constant(1, un(rng));
  };
  return t;
}

// Probability mass of the positive mode by trapezoidal quadrature of the unnormalised density.
inline double bimodal_positive_mass() {
  double pos = 0.0, all = 0.0;
  const double h = 1e-4;
  for (double x = -40; x <= 40; x += h) {
    const double f = std::exp(bimodal_log_pdf(x)) * h;
    all += f;
    if (x > 0) pos += f;
  }
  return pos / all;
}

inline int argmax(const std::vector<double>& x) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(x.size()); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

}  // namespace oracle
