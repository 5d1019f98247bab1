#include "skmfit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>

namespace skmfit {
namespace {

std::vector<std::vector<double>> path_series(const FitResult& fit, double (*f)(const StateVector&)) {
  std::vector<std::vector<double>> out;
  for (const auto& d : fit.sampler.draws) {
    std::vector<double> s;
    for (const auto& x : d.record.path->x) s.push_back(f(x));
    out.push_back(std::move(s));
  }
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw InputError("cannot create directory '" + dir.string() + "'");
}

}  // namespace

FitResult run_fit(const Dataset& data, const RunConfig& config) {
  FitResult fit;
  fit.config = config;
  fit.data = data;
  fit.data.constants = config.constants;
  fit.data.validate();
  const PosteriorTarget target(fit.data, config.posterior_options());
  fit.sampler = run_sampler(target, config.sampler);

  fit.archive.parameters.assign(kParameterNames.begin(), kParameterNames.end());
  for (const auto& d : fit.sampler.draws) {
    const ModelParameters p = from_unconstrained(d.u, fit.data.constants);
    const auto values = parameter_values(p);
    fit.parameters.push_back(p);
    fit.archive.iteration.push_back(d.iteration);
    fit.archive.values.emplace_back(values.begin(), values.end());
    // Constrained-scale log posterior: the sampler's density carries the transform Jacobian.
    fit.archive.log_posterior.push_back(d.log_density - log_abs_det_jacobian(d.u));
  }
  return fit;
}

Band band_of(const std::vector<std::vector<double>>& series) {
  Band b;
  if (series.empty()) return b;
  const std::size_t weeks = series.front().size();
  std::vector<double> column(series.size());
  for (std::size_t w = 0; w < weeks; ++w) {
    for (std::size_t i = 0; i < series.size(); ++i) column[i] = series[i][w];
    std::sort(column.begin(), column.end());
    b.low.push_back(percentile_sorted(column, 0.025));
    b.median.push_back(percentile_sorted(column, 0.5));
    b.high.push_back(percentile_sorted(column, 0.975));
  }
  return b;
}

std::vector<std::vector<double>> influenza_series(const FitResult& fit) { return path_series(fit, influenza_infected); }
std::vector<std::vector<double>> rsv_series(const FitResult& fit) { return path_series(fit, rsv_infected); }

TrajectoryBands trajectory_bands(const FitResult& fit) {
  const StateVector g = aggregate_observation_vector();
  std::vector<std::vector<double>> background, aggregate, reported;
  for (std::size_t i = 0; i < fit.sampler.draws.size(); ++i) {
    const SampledPath& path = *fit.sampler.draws[i].record.path;
    std::vector<double> d, a, r;
    for (std::size_t w = 0; w < path.x.size(); ++w) {
      const double total = g.dot(path.x[w]) + path.d[w];
      d.push_back(path.d[w]);
      a.push_back(total);
      r.push_back(fit.parameters[i].tau.r * total);
    }
    background.push_back(std::move(d));
    aggregate.push_back(std::move(a));
    reported.push_back(std::move(r));
  }
  TrajectoryBands t;
  t.influenza = band_of(influenza_series(fit));
  t.rsv = band_of(rsv_series(fit));
  t.background = band_of(background);
  t.aggregate = band_of(aggregate);
  t.reported = band_of(reported);
  return t;
}

PredictiveBands predictive_bands(const FitResult& fit) {
  PredictiveBands out;
  const std::size_t weeks = fit.data.size();
  std::vector<const std::vector<PredictiveMoments>*> pred;
  for (const auto& d : fit.sampler.draws) {
    if (d.record.predictive.size() == weeks) pred.push_back(&d.record.predictive);
  }
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  for (std::size_t w = 0; w < weeks; ++w) {
    double mean = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* p : pred) {
      const auto& m = (*p)[w];
      const double sd = std::sqrt(m.variance);
      mean += m.mean / n;
      lo = std::min(lo, m.mean - 10.0 * sd);
      hi = std::max(hi, m.mean + 10.0 * sd);
    }
    auto cdf = [&](double y) {
      double s = 0.0;
      for (const auto* p : pred) s += normal_cdf((y - (*p)[w].mean) / std::sqrt((*p)[w].variance));
      return s / n;
    };
    auto quantile = [&](double q) {
      double a = lo, b = hi;
      for (int it = 0; it < 200 && b - a > 1e-9 * std::max(1.0, std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        (cdf(mid) < q ? a : b) = mid;
      }
      return 0.5 * (a + b);
    };
    out.mean.push_back(mean);
    out.band.low.push_back(quantile(0.025));
    out.band.median.push_back(quantile(0.5));
    out.band.high.push_back(quantile(0.975));
  }
  return out;
}

void write_fit_outputs(const std::filesystem::path& dir, const FitResult& fit) {
  ensure_directory(dir);
  const std::size_t weeks = fit.data.size();

  std::ostringstream states;
  states << "draw,week";
  for (auto name : kCompartmentNames) states << "," << name;
  states << ",D\n";
  for (std::size_t i = 0; i < fit.sampler.draws.size(); ++i) {
    const SampledPath& path = *fit.sampler.draws[i].record.path;
    for (std::size_t w = 0; w < path.x.size(); ++w) {
      states << i << "," << (w + 1);
      for (int c = 0; c < kNumCompartments; ++c) states << "," << format_full(path.x[w][c]);
      states << "," << format_full(path.d[w]) << "\n";
    }
  }

  const TrajectoryBands t = trajectory_bands(fit);
  std::ostringstream bands;
  bands << "week";
  for (const char* q : {"influenza", "rsv", "background", "aggregate", "reported"}) {
    bands << "," << q << "_low," << q << "_median," << q << "_high";
  }
  bands << "\n";
  for (std::size_t w = 0; w < weeks && !t.influenza.median.empty(); ++w) {
    bands << (w + 1);
    for (const Band* b : {&t.influenza, &t.rsv, &t.background, &t.aggregate, &t.reported}) {
      bands << "," << format_short(b->low[w]) << "," << format_short(b->median[w]) << "," << format_short(b->high[w]);
    }
    bands << "\n";
  }

  const PredictiveBands p = predictive_bands(fit);
  std::ostringstream pred;
  pred << "week,y,mean,low,median,high\n";
  for (std::size_t w = 0; w < p.mean.size(); ++w) {
    pred << (w + 1) << "," << format_full(fit.data.y[w]) << "," << format_short(p.mean[w]) << ","
         << format_short(p.band.low[w]) << "," << format_short(p.band.median[w]) << ","
         << format_short(p.band.high[w]) << "\n";
  }

  const auto& s = fit.sampler;
  std::ostringstream info;
  info << "[run]\n"
       << "weeks = " << weeks << "\n"
       << "draws = " << s.draws.size() << "\n"
       << "virological_weeks = "
       << std::count_if(fit.data.n1.begin(), fit.data.n1.end(), [](double v) { return !std::isnan(v); }) << "\n\n";
  info << "[acceptance]\n";
  const auto& cold = s.chains.front();
  for (std::size_t b = 0; b < fit.config.sampler.blocks.size(); ++b) {
    const double rate = cold.iterations_after_burn_in > 0
                            ? static_cast<double>(cold.accepted_after_burn_in[b]) / cold.iterations_after_burn_in
                            : 0.0;
    info << fit.config.sampler.blocks[b].name << " = " << format_short(rate) << "\n";
  }
  info << "state_seed = "
       << format_short(cold.reseed_proposed ? static_cast<double>(cold.reseed_accepted) / cold.reseed_proposed : 0.0)
       << "\n\n[swaps]\n";
  for (std::size_t j = 0; j < s.swap_proposed.size(); ++j) {
    const double rate = s.swap_proposed[j] ? static_cast<double>(s.swap_accepted[j]) / s.swap_proposed[j] : 0.0;
    info << "pair_" << j << "_" << (j + 1) << " = " << format_short(rate) << "\n";
  }

  // Render everything first so a failure leaves no partial set of files.
  const std::string samples = format_archive(fit.archive);
  const std::string summary = format_summary(summarize_archive(fit.archive));
  write_file_atomic(dir / "samples.csv", samples);
  write_file_atomic(dir / "states.csv", states.str());
  write_file_atomic(dir / "summary.csv", summary);
  write_file_atomic(dir / "trajectory_bands.csv", bands.str());
  write_file_atomic(dir / "predictive_bands.csv", pred.str());
  write_file_atomic(dir / "config.ini", format_run_config(fit.config));
  write_file_atomic(dir / "run_info.ini", info.str());
}

void write_simulation_outputs(const std::filesystem::path& dir, const SyntheticDataset& syn,
                              const ModelParameters& truth) {
  ensure_directory(dir);
  std::ostringstream t;
  t << "week";
  for (auto name : kCompartmentNames) t << "," << name;
  t << ",D,influenza,rsv\n";
  for (std::size_t w = 0; w < syn.truth.states.size(); ++w) {
    const StateVector& x = syn.truth.states[w];
    t << (w + 1);
    for (int c = 0; c < kNumCompartments; ++c) t << "," << format_full(x[c]);
    t << "," << format_full(syn.background[w]) << "," << format_full(influenza_infected(x)) << ","
      << format_full(rsv_infected(x)) << "\n";
  }
  const std::string data = format_dataset(syn.data);
  write_file_atomic(dir / "data.csv", data);
  write_file_atomic(dir / "truth.csv", t.str());
  write_file_atomic(dir / "truth_params.ini", format_parameters(truth));
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bayesian inference for a two-pathogen stochastic epidemic model"};
  app.require_subcommand(1);

  std::string config_path, theta_path, data_path, archive_path, out_dir;
  std::uint64_t seed = 0;
  std::size_t weeks = 52;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset by exact stochastic simulation");
  sim->add_option("--config", config_path, "Configuration file");
  sim->add_option("--theta", theta_path, "Parameter file")->required();
  sim->add_option("--weeks", weeks, "Number of weekly observations")->check(CLI::Range(2, 100000));
  sim->add_option("--seed", seed, "Master seed")->required();
  sim->add_option("--out", out_dir, "Output directory")->required();

  auto* fit = app.add_subcommand("fit", "Sample the posterior for a dataset");
  fit->add_option("--config", config_path, "Configuration file");
  fit->add_option("--data", data_path, "Data file (week,y,n1,n2,n3)")->required();
  auto* fit_seed = fit->add_option("--seed", seed, "Master seed (overrides the configuration)");
  fit->add_option("--out", out_dir, "Output directory")->required();

  auto* sum = app.add_subcommand("summarize", "Recompute the summary table from a sample archive");
  sum->add_option("--archive", archive_path, "samples.csv or a fit output directory")->required();
  sum->add_option("--config", config_path, "Accepted for symmetry; unused");
  sum->add_option("--seed", seed, "Accepted for symmetry; unused");
  sum->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? default_run_config() : read_run_config(config_path);
    if (*sim) {
      const ModelParameters p = read_parameters(theta_path, cfg.constants);
      const SyntheticDataset syn = generate_synthetic_dataset(p.theta, p.tau, cfg.constants, weeks, seed);
      write_simulation_outputs(out_dir, syn, p);
    } else if (*fit) {
      if (*fit_seed) cfg.sampler.seed = seed;
      const Dataset data = read_dataset(data_path, cfg.constants);
      write_fit_outputs(out_dir, run_fit(data, cfg));
    } else {
      std::filesystem::path path = archive_path;
      if (std::filesystem::is_directory(path)) path /= "samples.csv";
      const SampleArchive a = read_archive(path);
      ensure_directory(out_dir);
      write_file_atomic(std::filesystem::path(out_dir) / "summary.csv", format_summary(summarize_archive(a)));
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace skmfit
