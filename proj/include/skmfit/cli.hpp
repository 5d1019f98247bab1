#pragma once

#include "skmfit/io.hpp"
#include "skmfit/posterior.hpp"
#include "skmfit/sampler.hpp"
#include "skmfit/ssa.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace skmfit {

struct FitResult {
  RunConfig config;
  Dataset data;
  SamplerResult<PosteriorTarget::Record> sampler;
  std::vector<ModelParameters> parameters;  // per archived draw
  SampleArchive archive;
};

/// Runs the tempered sampler on `data` and collects the cold-chain archive.
FitResult run_fit(const Dataset& data, const RunConfig& config);

/// Per-week 2.5 / 50 / 97.5 percentiles.
struct Band {
  std::vector<double> low, median, high;
};

Band band_of(const std::vector<std::vector<double>>& series);  // [draw][week]

struct TrajectoryBands {
  Band influenza;   // X_IS + X_IR
  Band rsv;         // X_SI + X_RI
  Band background;  // D
  Band aggregate;   // G'X + D
  Band reported;    // r (G'X + D)
};

/// Weekly influenza and RSV infections of each archived draw's sampled path.
std::vector<std::vector<double>> influenza_series(const FitResult& fit);
std::vector<std::vector<double>> rsv_series(const FitResult& fit);

TrajectoryBands trajectory_bands(const FitResult& fit);

/// Quantiles of the posterior mixture of the one-step-ahead Gaussian predictives.
struct PredictiveBands {
  std::vector<double> mean;
  Band band;
};
PredictiveBands predictive_bands(const FitResult& fit);

/// Writes samples.csv, states.csv, summary.csv, trajectory_bands.csv, predictive_bands.csv,
/// config.ini and run_info.ini into `dir`.
void write_fit_outputs(const std::filesystem::path& dir, const FitResult& fit);

/// Writes data.csv, truth.csv (weekly latent states) and truth_params.ini into `dir`.
void write_simulation_outputs(const std::filesystem::path& dir, const SyntheticDataset& syn,
                              const ModelParameters& truth);

/// Entry point of the `skmfit` executable. Returns 0, 2 (input error) or 3 (numerical failure).
int run_cli(int argc, const char* const* argv);

}  // namespace skmfit
