#pragma once

#include "skmfit/errors.hpp"
#include "skmfit/ode.hpp"
#include "skmfit/observation.hpp"
#include "skmfit/posterior.hpp"
#include "skmfit/sampler.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace skmfit {

/// Parsed `key = value` document. Sections and keys keep their line numbers for diagnostics.
struct IniDocument {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string source;
  std::map<std::string, std::map<std::string, Entry>> sections;
};

IniDocument parse_ini(const std::string& text, const std::string& source);
IniDocument read_ini(const std::filesystem::path& path);

/// Everything a `fit` or `simulate` run is configured with.
struct RunConfig {
  FixedConstants constants;
  SamplerConfig sampler;
  PriorConfig priors;
  IntegratorConfig integrator;
  bool use_virological = true;

  PosteriorOptions posterior_options() const;
};

/// The three posterior blocks: kinetic rates, nuisance parameters, initial-state simplex.
std::vector<BlockSpec> default_posterior_blocks();

RunConfig default_run_config();
/// Defaults overridden by the file's entries; unknown sections or keys are rejected.
RunConfig run_config_from_ini(const IniDocument& doc);
RunConfig read_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

/// Parameter file for `simulate`: [kinetic], [initial_state], [auxiliary].
/// With `rescale = true` under [initial_state] the counts are scaled to sum to omega.
ModelParameters parameters_from_ini(const IniDocument& doc, const FixedConstants& k);
ModelParameters read_parameters(const std::filesystem::path& path, const FixedConstants& k);
std::string format_parameters(const ModelParameters& p);

/// Weekly data CSV, header "week,y,n1,n2,n3". Empty n fields mark weeks without tests.
Dataset parse_dataset(const std::string& text, const std::string& source, const FixedConstants& k);
Dataset read_dataset(const std::filesystem::path& path, const FixedConstants& k);
std::string format_dataset(const Dataset& data);

/// Shortest round-trip representation.
std::string format_full(double x);
/// Six significant digits.
std::string format_short(double x);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Posterior sample archive: iteration, the 18 reported parameters, log_posterior.
struct SampleArchive {
  std::vector<std::string> parameters;
  std::vector<long> iteration;
  std::vector<std::vector<double>> values;  // [draw][parameter]
  std::vector<double> log_posterior;

  std::size_t size() const { return values.size(); }
};

std::string format_archive(const SampleArchive& a);
SampleArchive parse_archive(const std::string& text, const std::string& source);
SampleArchive read_archive(const std::filesystem::path& path);

struct SummaryRow {
  std::string parameter;
  double map = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Percentile of sorted data with linear interpolation between order statistics (type 7).
double percentile_sorted(const std::vector<double>& sorted, double p);
double percentile(std::vector<double> values, double p);

/// MAP is the draw with the highest log-posterior (first on ties); CI from 2.5 / 97.5 percentiles.
std::vector<SummaryRow> summarize_archive(const SampleArchive& a);
std::string format_summary(const std::vector<SummaryRow>& rows);

}  // namespace skmfit
