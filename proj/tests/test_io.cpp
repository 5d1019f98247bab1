#include "oracles.hpp"

#include "skmfit/cli.hpp"
#include "skmfit/io.hpp"
#include "skmfit/ssa.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace skmfit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("skmfit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "skmfit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("configuration defaults") {
  const RunConfig cfg = run_config_from_ini(parse_ini("", "empty"));
  CHECK(cfg.constants.omega == 2585518);
  CHECK(cfg.constants.omega_c == 266761);
  CHECK(cfg.constants.r_h == 0.0005);
  CHECK(cfg.constants.gamma == doctest::Approx(365.0 / 7));
  CHECK(cfg.constants.mu == doctest::Approx(1.0 / 70));
  CHECK(cfg.sampler.n_chains == 8);
  CHECK(cfg.sampler.n_iter == 200000);
  CHECK(cfg.sampler.n_adapt == 100000);
  CHECK(cfg.sampler.thin == 10);
  CHECK(cfg.priors.beta.shape == 20);
  CHECK(cfg.priors.beta.scale == 3);
  CHECK(cfg.priors.sigma.shape == 10);
  CHECK(cfg.priors.sigma.scale == 0.1);
  CHECK(cfg.use_virological);
  CHECK(cfg.sampler.blocks.size() == 3);
  CHECK(cfg.sampler.blocks[2].mode == AdaptationMode::DiagonalVariance);
  // Formatting and parsing again is the identity.
  const RunConfig again = run_config_from_ini(parse_ini(format_run_config(cfg), "round"));
  CHECK(format_run_config(again) == format_run_config(cfg));
}

TEST_CASE("configuration overrides and errors") {
  const RunConfig cfg = run_config_from_ini(parse_ini(
      "# comment\n[sampler]\nchains = 4\niterations = 100\nadapt = 50\nladder = 1, 2, 3, 4\n"
      "temper = likelihood\n[likelihood]\nvirological = false\n[integrator]\nrel_tol = 1e-6\n",
      "cfg"));
  CHECK(cfg.sampler.n_chains == 4);
  CHECK(cfg.sampler.temperatures == std::vector<double>{1, 2, 3, 4});
  CHECK_FALSE(cfg.sampler.temper_prior);
  CHECK_FALSE(cfg.use_virological);
  CHECK(cfg.integrator.rel_tol == 1e-6);

  CHECK(error_of([] { run_config_from_ini(parse_ini("[sampler]\n\nchainz = 3\n", "c.ini")); }).find("c.ini:3") !=
        std::string::npos);
  CHECK(error_of([] { run_config_from_ini(parse_ini("[samplr]\nchains = 3\n", "c.ini")); }).find("unknown section") !=
        std::string::npos);
  CHECK(error_of([] { run_config_from_ini(parse_ini("[sampler]\nchains = x\n", "c.ini")); }).find("c.ini:2") !=
        std::string::npos);
  CHECK_THROWS_AS(parse_ini("chains = 3\n", "c"), InputError);
  CHECK_THROWS_AS(parse_ini("[a]\nx = 1\nx = 2\n", "c"), InputError);
  CHECK_THROWS_AS(run_config_from_ini(parse_ini("[sampler]\nladder = 1, 3, 2, 4, 5, 6, 7, 8\n", "c")), InputError);
}

TEST_CASE("parameter files") {
  const FixedConstants k;
  const auto p = oracle::operating_point(k);
  const ModelParameters q = parameters_from_ini(parse_ini(format_parameters(p), "p"), k);
  CHECK(q.theta.x0 == p.theta.x0);
  CHECK(q.tau.sigma_obs == p.tau.sigma_obs);
  CHECK(q.theta.beta2 == p.theta.beta2);

  std::string text = format_parameters(p);
  text.replace(text.find("[initial_state]"), 15, "[initial_state]\nrescale = true");
  const auto pos = text.find("X_SS = ");
  text.replace(pos, text.find('\n', pos) - pos, "X_SS = 1");
  const ModelParameters r = parameters_from_ini(parse_ini(text, "p"), k);
  CHECK(r.theta.x0.sum() == doctest::Approx(k.omega));
  text.replace(text.find("rescale = true"), 14, "rescale = false");
  CHECK_THROWS_AS(parameters_from_ini(parse_ini(text, "p"), k), InputError);
}

TEST_CASE("data files") {
  const FixedConstants k;
  const Dataset d = parse_dataset("week,y,n1,n2,n3\n1,100,1,2,3\n2,120,,,\n3,90,0,0,5\n", "d.csv", k);
  CHECK(d.size() == 3);
  CHECK(d.has_virological(0));
  CHECK_FALSE(d.has_virological(1));
  CHECK(d.times[2] == doctest::Approx(3.0 / 52));
  CHECK(format_dataset(d) == "week,y,n1,n2,n3\n1,100,1,2,3\n2,120,,,\n3,90,0,0,5\n");

  auto err = [&](const std::string& text) { return error_of([&] { parse_dataset(text, "d.csv", k); }); };
  CHECK(err("week,y,n1\n1,2,3\n").find("header") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,2,3\n3,100,1,2,3\n").find("d.csv:3:1") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,2,3\n2,-5,1,2,3\n").find("d.csv:3:2") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,2,3\n2,5.5,1,2,3\n").find("d.csv:3:2") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,,3\n2,5,1,2,3\n").find("d.csv:2") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,2\n").find("5 fields") != std::string::npos);
  CHECK(err("week,y,n1,n2,n3\n1,100,1,2,3\n").find("two weeks") != std::string::npos);
}

TEST_CASE("percentiles and summaries") {
  CHECK(percentile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(percentile({5}, 0.975) == 5);
  CHECK(percentile({0, 10}, 0.025) == doctest::Approx(0.25));

  SampleArchive one;
  one.parameters = {"a", "b"};
  one.iteration = {7};
  one.values = {{1.5, -2}};
  one.log_posterior = {-3};
  for (const auto& r : summarize_archive(one)) {
    CHECK(r.ci_low == r.map);
    CHECK(r.ci_high == r.map);
  }

  SampleArchive normal;
  normal.parameters = {"z"};
  Rng rng(4);
  std::normal_distribution<double> n;
  for (int i = 0; i < 10000; ++i) {
    normal.iteration.push_back(i);
    normal.values.push_back({n(rng)});
    normal.log_posterior.push_back(-0.5 * normal.values.back()[0] * normal.values.back()[0]);
  }
  const auto rows = summarize_archive(normal);
  CHECK(std::abs(rows[0].ci_low + 1.96) < 0.05);
  CHECK(std::abs(rows[0].ci_high - 1.96) < 0.05);
  CHECK(std::abs(rows[0].map) < 0.05);

  const SampleArchive back = parse_archive(format_archive(normal), "a.csv");
  CHECK(back.values == normal.values);
  CHECK(back.log_posterior == normal.log_posterior);
  CHECK_THROWS_AS(parse_archive("iteration,z,log_posterior\n1,2\n", "a.csv"), InputError);
}

TEST_CASE("simulate command") {
  const fs::path dir = scratch("simulate");
  write(dir / "theta.ini", format_parameters(oracle::operating_point()));
  REQUIRE(cli({"simulate", "--theta", (dir / "theta.ini").string(), "--seed", "3", "--out", (dir / "a").string()}) == 0);
  REQUIRE(cli({"simulate", "--theta", (dir / "theta.ini").string(), "--seed", "3", "--out", (dir / "b").string()}) == 0);
  for (const char* f : {"data.csv", "truth.csv", "truth_params.ini"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
  const std::string data = read_file(dir / "a" / "data.csv");
  CHECK(std::count(data.begin(), data.end(), '\n') == 53);
  const Dataset d = read_dataset(dir / "a" / "data.csv", FixedConstants{});
  CHECK(d.size() == 52);
  const ModelParameters truth = read_parameters(dir / "a" / "truth_params.ini", FixedConstants{});
  CHECK(truth.theta.beta1 == oracle::operating_point().theta.beta1);
}

TEST_CASE("simulated reports have the expected mean") {
  const FixedConstants k;
  const auto p = oracle::operating_point(k);
  const StateVector g = aggregate_observation_vector();
  std::vector<double> z;
  for (std::uint64_t s = 0; s < 40; ++s) {
    const SyntheticDataset syn = generate_synthetic_dataset(p.theta, p.tau, k, 52, 900 + s);
    double y = 0, latent = 0;
    for (std::size_t w = 0; w < 52; ++w) {
      y += syn.data.y[w] / 52;
      latent += g.dot(syn.truth.states[w]) / 52;
    }
    z.push_back(y - p.tau.r * (latent + k.omega * p.tau.c / (1 - p.tau.nu)));
  }
  CHECK(std::abs(oracle::mean_of(z)) < 3 * std::sqrt(oracle::variance_of(z) / z.size()));
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  CHECK(cli({"fit", "--data", (dir / "missing.csv").string(), "--out", (dir / "o").string()}) == 2);
  CHECK(cli({"bogus"}) == 2);
  write(dir / "bad.ini", "[sampler]\nchains = 0\n");
  write(dir / "data.csv", "week,y,n1,n2,n3\n1,1,,,\n2,1,,,\n");
  CHECK(cli({"fit", "--config", (dir / "bad.ini").string(), "--data", (dir / "data.csv").string(), "--out",
             (dir / "o").string()}) == 2);
  write(dir / "a.csv", "iteration,z,log_posterior\n1,x,2\n");
  CHECK(cli({"summarize", "--archive", (dir / "a.csv").string(), "--out", (dir / "o").string()}) == 2);
  CHECK_FALSE(fs::exists(dir / "o" / "summary.csv"));
  // No prior draw survives when the integrator may take only one step.
  write(dir / "tiny.ini", "[sampler]\nchains = 1\niterations = 10\nadapt = 5\nmax_init_draws = 2\n"
                          "[integrator]\nmax_steps = 1\n");
  CHECK(cli({"fit", "--config", (dir / "tiny.ini").string(), "--data", (dir / "data.csv").string(), "--out",
             (dir / "o").string()}) == 3);
}

TEST_CASE("fit and summarize round trip") {
  const fs::path dir = scratch("fit");
  write(dir / "theta.ini", format_parameters(oracle::operating_point()));
  write(dir / "cfg.ini", "[sampler]\nchains = 2\niterations = 200\nadapt = 100\nthin = 5\n");
  REQUIRE(cli({"simulate", "--theta", (dir / "theta.ini").string(), "--seed", "1", "--weeks", "20", "--out",
               (dir / "sim").string()}) == 0);
  REQUIRE(cli({"fit", "--config", (dir / "cfg.ini").string(), "--data", (dir / "sim" / "data.csv").string(),
               "--seed", "2", "--out", (dir / "fit").string()}) == 0);
  REQUIRE(cli({"summarize", "--archive", (dir / "fit").string(), "--out", (dir / "sum").string()}) == 0);
  CHECK(read_file(dir / "fit" / "summary.csv") == read_file(dir / "sum" / "summary.csv"));

  const SampleArchive a = read_archive(dir / "fit" / "samples.csv");
  CHECK(a.size() == 20);
  std::vector<std::string> expected(kParameterNames.begin(), kParameterNames.end());
  CHECK(a.parameters == expected);
  const std::string summary = read_file(dir / "fit" / "summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 19);
  const std::string bands = read_file(dir / "fit" / "trajectory_bands.csv");
  CHECK(std::count(bands.begin(), bands.end(), '\n') == 21);
  const std::string info = read_file(dir / "fit" / "run_info.ini");
  CHECK(info.find("weeks = 20") != std::string::npos);
}
