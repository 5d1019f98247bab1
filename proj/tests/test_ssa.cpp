#include "oracles.hpp"

#include "skmfit/lna.hpp"
#include "skmfit/ssa.hpp"

#include <doctest.h>

#include <algorithm>

using namespace skmfit;

namespace {

std::vector<double> weekly_grid(int weeks) {
  std::vector<double> g;
  for (int w = 0; w <= weeks; ++w) g.push_back(w / 52.0);
  return g;
}

}  // namespace

TEST_CASE("no active reactions leaves the state constant") {
  FixedConstants k;
  k.omega = 1000;
  k.omega_c = 100;
  k.mu = 0;
  KineticParams th;
  th.beta1 = th.beta2 = 0;
  th.x0 = StateVector::Zero();
  th.x0[SS] = 1000;
  const Trajectory t = simulate(ReactionNetwork(k), th, weekly_grid(10), 1);
  for (const auto& x : t.states) CHECK(x == th.x0);
}

TEST_CASE("same seed, same trajectory") {
  const FixedConstants k;
  auto p = oracle::operating_point(k);
  p.theta.x0 = round_initial_state(p.theta.x0, k.omega);
  const ReactionNetwork net(k);
  const Trajectory a = simulate(net, p.theta, weekly_grid(8), 42);
  const Trajectory b = simulate(net, p.theta, weekly_grid(8), 42);
  const Trajectory c = simulate(net, p.theta, weekly_grid(8), 43);
  CHECK(a.states == b.states);
  CHECK_FALSE(a.states == c.states);
}

TEST_CASE("small epidemic: curve rises then falls") {
  FixedConstants k;
  k.omega = 500;
  k.omega_c = 50;
  KineticParams th;
  th.beta1 = 90;
  th.beta2 = 0;
  th.x0 = StateVector::Zero();
  th.x0[SS] = 490;
  th.x0[IS] = 10;
  const auto grid = weekly_grid(52);
  const ReactionNetwork net(k);
  const int runs = 1000;
  // Recovered from influenza at the end of the year, per run.
  std::vector<double> recovered(runs);
  std::vector<std::vector<double>> infected(grid.size(), std::vector<double>(runs));
  for (int r = 0; r < runs; ++r) {
    const Trajectory t = simulate(net, th, grid, 1000 + r);
    for (std::size_t w = 0; w < grid.size(); ++w) infected[w][r] = t.states[w][IS];
    recovered[r] = t.states.back()[RS];
  }
  std::vector<double> mean_infected(grid.size());
  for (std::size_t w = 0; w < grid.size(); ++w) mean_infected[w] = oracle::mean_of(infected[w]);
  const int peak = oracle::argmax(mean_infected);
  CHECK(peak > 0);
  CHECK(peak < static_cast<int>(grid.size()) - 1);
  CHECK(mean_infected[peak] > th.x0[IS]);
  CHECK(oracle::mean_of(recovered) > 0);

  const double ode_recovered = k.omega * integrate_lna(th.x0 / k.omega, StateMatrix::Zero(), 0.0, 1.0, th, k).phi[RS];
  MESSAGE("final recovered: SSA " << oracle::mean_of(recovered) << ", ODE " << ode_recovered);
}

TEST_CASE("ensemble mean converges to the macroscopic law") {
  // Mass action bias in the ensemble mean shrinks like 1/Omega; at Omega = 5e4 it is far below the
  // Monte-Carlo error of 1000 runs, so every week must agree within 3 SE.
  FixedConstants k;
  k.omega = 5e4;
  k.omega_c = 5e3;
  KineticParams th;
  th.beta1 = 90;
  th.beta2 = 0;
  th.x0 = StateVector::Zero();
  th.x0[SS] = 0.98 * k.omega;
  th.x0[IS] = 0.02 * k.omega;
  const auto grid = weekly_grid(8);
  const ReactionNetwork net(k);
  const int runs = 1000;
  std::vector<std::vector<double>> infected(grid.size(), std::vector<double>(runs));
  for (int r = 0; r < runs; ++r) {
    const Trajectory t = simulate(net, th, grid, 5000 + r);
    for (std::size_t w = 0; w < grid.size(); ++w) infected[w][r] = t.states[w][IS];
  }
  LnaMoments m{th.x0 / k.omega, StateMatrix::Zero()};
  for (std::size_t w = 1; w < grid.size(); ++w) {
    m = integrate_lna(m.phi, m.C, grid[w - 1], grid[w], th, k);
    const double mean = oracle::mean_of(infected[w]), se = std::sqrt(oracle::variance_of(infected[w]) / runs);
    INFO("week " << w << ": SSA " << mean << " +- " << se << ", ODE " << k.omega * m.phi[IS]);
    CHECK(std::abs(mean - k.omega * m.phi[IS]) < 3 * se);
  }
}

TEST_CASE("waiting times are exponential with the total rate") {
  FixedConstants k;
  k.omega = 20000;
  k.omega_c = 2000;
  KineticParams th;
  th.beta1 = 80;
  th.beta2 = 70;
  th.sigma1 = th.sigma2 = 1.2;
  th.x0 << 19000, 200, 100, 200, 100, 100, 100, 200;
  std::vector<double> u;
  std::vector<int> fired(kNumReactions, 0);
  simulate(ReactionNetwork(k), th, {0.0, 1.0}, 9, [&](double wait, double rate, int j) {
    u.push_back(1.0 - std::exp(-wait * rate));
    ++fired[j];
  });
  REQUIRE(u.size() > 5000);
  std::sort(u.begin(), u.end());
  double d = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    d = std::max({d, std::abs((i + 1) / n - u[i]), std::abs(u[i] - i / n)});
  }
  // 1% critical value of the Kolmogorov distribution.
  CHECK(d * std::sqrt(n) < 1.63);
  CHECK(fired[2] > 0);
  CHECK(fired[1] > 0);
}

TEST_CASE("synthetic data: reporting proportion zero") {
  const FixedConstants k;
  auto p = oracle::operating_point(k);
  p.tau.r = 0;
  const SyntheticDataset s = generate_synthetic_dataset(p.theta, p.tau, k, 10, 5);
  for (double m : s.report_means) CHECK(m == 0.0);
  CHECK(s.data.size() == 10);
}

TEST_CASE("synthetic data: iid background when nu = 0") {
  const FixedConstants k;
  auto p = oracle::operating_point(k);
  p.tau.nu = 0;
  Rng rng(8);
  const std::size_t n = 20000;
  const auto d = simulate_background(n, p.tau, p.theta.c0, k, rng);
  const double mean = k.omega * p.tau.c, var = std::pow(k.omega, 1.5) * p.theta.c0;
  CHECK(std::abs(oracle::mean_of(d) - mean) < 3 * std::sqrt(var / n));
  CHECK(std::abs(oracle::variance_of(d) - var) < 3 * oracle::variance_standard_error(d));
  double lag = 0.0;
  for (std::size_t i = 1; i < n; ++i) lag += (d[i] - mean) * (d[i - 1] - mean);
  CHECK(std::abs(lag / (n - 1) / var) < 3 / std::sqrt(double(n)));
}

TEST_CASE("virological counts match their means") {
  const FixedConstants k;
  auto p = oracle::operating_point(k);
  p.tau.v = 2.0;
  StateVector x = p.theta.x0;
  x[IS] = 60000;
  x[IR] = 20000;
  const auto m = virological_means(x, 1e5, p.tau, k);
  CHECK(m[0] == doctest::Approx(k.r_h * p.tau.r * k.omega_c / k.omega * 80000));
  Rng rng(11);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = static_cast<double>(negbin_sample(m[0], p.tau.v, rng));
  const double se = std::sqrt(m[0] * (1 + 1 / p.tau.v) / draws.size());
  CHECK(std::abs(oracle::mean_of(draws) - m[0]) < 3 * se);
}

TEST_CASE("rounding the initial state keeps the total") {
  const FixedConstants k;
  const StateVector x = round_initial_state(oracle::operating_point(k).theta.x0, k.omega);
  CHECK(x.sum() == k.omega);
  for (int i = 0; i < kNumCompartments; ++i) CHECK(x[i] == std::round(x[i]));
}
