#include "skmfit/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

namespace skmfit {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(std::move(line));
  }
  return out;
}

std::string where(const std::string& source, int line, int column = 0) {
  std::string s = source + ":" + std::to_string(line);
  if (column > 0) s += ":" + std::to_string(column);
  return s;
}

double parse_double(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw InputError(context + ": expected a finite number, got '" + t + "'");
  }
  return v;
}

long long parse_integer(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw InputError(context + ": expected an integer, got '" + t + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  if (t == "true" || t == "yes" || t == "1") return true;
  if (t == "false" || t == "no" || t == "0") return false;
  throw InputError(context + ": expected true or false, got '" + t + "'");
}

// Reads the keys of one section through typed setters; anything left over is an error.
class SectionReader {
 public:
  SectionReader(const IniDocument& doc, const std::string& section) : doc_(doc), section_(section) {
    if (auto it = doc.sections.find(section); it != doc.sections.end()) entries_ = &it->second;
  }

  template <class F>
  void with(const std::string& key, F&& f) {
    if (!entries_) return;
    auto it = entries_->find(key);
    if (it == entries_->end()) return;
    used_.insert(key);
    f(it->second.value, where(doc_.source, it->second.line) + ": [" + section_ + "] " + key);
  }
  void real(const std::string& key, double& out) {
    with(key, [&](const std::string& v, const std::string& ctx) { out = parse_double(v, ctx); });
  }
  // Like real(), but "inf" means no bound.
  void bound(const std::string& key, double& out) {
    with(key, [&](const std::string& v, const std::string& ctx) {
      out = trim(v) == "inf" ? std::numeric_limits<double>::infinity() : parse_double(v, ctx);
    });
  }
  template <class I>
  void integer(const std::string& key, I& out) {
    with(key, [&](const std::string& v, const std::string& ctx) {
      const long long x = parse_integer(v, ctx);
      if (x < 0) throw InputError(ctx + ": must be nonnegative");
      out = static_cast<I>(x);
    });
  }
  void boolean(const std::string& key, bool& out) {
    with(key, [&](const std::string& v, const std::string& ctx) { out = parse_bool(v, ctx); });
  }
  void finish() const {
    if (!entries_) return;
    for (const auto& [key, e] : *entries_) {
      if (!used_.count(key)) {
        throw InputError(where(doc_.source, e.line) + ": unknown key '" + key + "' in [" + section_ + "]");
      }
    }
  }

 private:
  const IniDocument& doc_;
  std::string section_;
  const std::map<std::string, IniDocument::Entry>* entries_ = nullptr;
  std::set<std::string> used_;
};

void reject_unknown_sections(const IniDocument& doc, std::initializer_list<const char*> known) {
  for (const auto& [name, entries] : doc.sections) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return name == k; })) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw InputError(where(doc.source, line) + ": unknown section [" + name + "]");
    }
  }
}

void gamma_keys(SectionReader& r, const std::string& name, GammaPrior& g) {
  r.real(name + "_shape", g.shape);
  r.real(name + "_scale", g.scale);
  if (!(g.shape > 0.0) || !(g.scale > 0.0)) throw InputError("prior " + name + ": shape and scale must be positive");
}

}  // namespace

IniDocument parse_ini(const std::string& text, const std::string& source) {
  IniDocument doc;
  doc.source = source;
  std::string section;
  int n = 0;
  for (const std::string& raw : lines_of(text)) {
    ++n;
    std::string line = raw;
    if (const auto pos = line.find_first_of("#;"); pos != std::string::npos) line.erase(pos);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw InputError(where(source, n) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError(where(source, n) + ": expected 'key = value'");
    if (section.empty()) throw InputError(where(source, n) + ": key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InputError(where(source, n) + ": empty key");
    auto& entries = doc.sections[section];
    if (entries.count(key)) throw InputError(where(source, n) + ": duplicate key '" + key + "'");
    entries[key] = {trim(line.substr(eq + 1)), n};
  }
  return doc;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

IniDocument read_ini(const std::filesystem::path& path) { return parse_ini(read_file(path), path.string()); }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw InputError("cannot rename onto '" + path.string() + "'");
  }
}

std::string format_full(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string format_short(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::vector<BlockSpec> default_posterior_blocks() {
  std::vector<BlockSpec> b(3);
  b[0] = {"kinetic", {kBeta1, kBeta2, kSigma1, kSigma2}, AdaptationMode::FullCovariance, 0.02};
  b[1] = {"nuisance", {kLogC0, kLogSigmaObs, kLogitR, kLogC, kLogV, kLogitNu}, AdaptationMode::FullCovariance, 0.05};
  b[2].name = "initial_state";
  b[2].mode = AdaptationMode::DiagonalVariance;
  b[2].initial_scale = 0.1;
  for (int i = kSimplexBegin; i < kNumFree; ++i) b[2].indices.push_back(i);
  return b;
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.sampler.blocks = default_posterior_blocks();
  return cfg;
}

PosteriorOptions RunConfig::posterior_options() const {
  PosteriorOptions o;
  o.priors = priors;
  o.integrator = integrator;
  o.use_virological = use_virological;
  return o;
}

RunConfig run_config_from_ini(const IniDocument& doc) {
  reject_unknown_sections(doc, {"constants", "sampler", "priors", "integrator", "likelihood"});
  RunConfig cfg = default_run_config();

  SectionReader k(doc, "constants");
  k.real("omega", cfg.constants.omega);
  k.real("omega_c", cfg.constants.omega_c);
  k.real("r_h", cfg.constants.r_h);
  k.real("gamma_per_year", cfg.constants.gamma);
  k.real("mu_per_year", cfg.constants.mu);
  k.finish();
  try {
    cfg.constants.validate();
  } catch (const std::exception& e) {
    throw InputError(doc.source + ": [constants] " + e.what());
  }

  SectionReader s(doc, "sampler");
  auto& sc = cfg.sampler;
  s.integer("chains", sc.n_chains);
  s.integer("iterations", sc.n_iter);
  s.integer("adapt", sc.n_adapt);
  s.integer("seed", sc.seed);
  s.integer("thin", sc.thin);
  s.integer("swap_interval", sc.swap_interval);
  s.integer("threads", sc.threads);
  s.integer("adapt_start", sc.adapt_start);
  s.integer("max_init_draws", sc.max_init_draws);
  s.real("max_temperature", sc.max_temperature);
  s.real("jitter", sc.jitter);
  s.real("target_acceptance", sc.target_acceptance);
  s.with("ladder", [&](const std::string& v, const std::string& ctx) {
    sc.temperatures.clear();
    if (trim(v) == "geometric") return;
    for (const std::string& t : split(v, ',')) sc.temperatures.push_back(parse_double(t, ctx));
  });
  s.with("temper", [&](const std::string& v, const std::string& ctx) {
    const std::string t = trim(v);
    if (t == "posterior") sc.temper_prior = true;
    else if (t == "likelihood") sc.temper_prior = false;
    else throw InputError(ctx + ": expected 'posterior' or 'likelihood'");
  });
  s.finish();
  sc.validate(kNumFree);

  SectionReader p(doc, "priors");
  gamma_keys(p, "beta", cfg.priors.beta);
  gamma_keys(p, "sigma", cfg.priors.sigma);
  gamma_keys(p, "v", cfg.priors.v);
  gamma_keys(p, "c0", cfg.priors.c0);
  gamma_keys(p, "Sigma", cfg.priors.sigma_obs);
  gamma_keys(p, "c", cfg.priors.c);
  p.real("dirichlet_alpha", cfg.priors.dirichlet_alpha);
  p.finish();
  if (!(cfg.priors.dirichlet_alpha > 0.0)) throw InputError(doc.source + ": dirichlet_alpha must be positive");

  SectionReader g(doc, "integrator");
  g.real("rel_tol", cfg.integrator.rel_tol);
  g.real("abs_tol", cfg.integrator.abs_tol);
  g.bound("max_step", cfg.integrator.max_step);
  g.integer("max_steps", cfg.integrator.max_steps);
  g.finish();
  if (!(cfg.integrator.rel_tol > 0.0) || !(cfg.integrator.abs_tol > 0.0) || !(cfg.integrator.max_step > 0.0)) {
    throw InputError(doc.source + ": integrator tolerances must be positive");
  }

  SectionReader l(doc, "likelihood");
  l.boolean("virological", cfg.use_virological);
  l.finish();
  return cfg;
}

RunConfig read_run_config(const std::filesystem::path& path) { return run_config_from_ini(read_ini(path)); }

std::string format_run_config(const RunConfig& cfg) {
  std::ostringstream o;
  const auto& k = cfg.constants;
  o << "[constants]\n"
    << "omega = " << format_full(k.omega) << "\n"
    << "omega_c = " << format_full(k.omega_c) << "\n"
    << "r_h = " << format_full(k.r_h) << "\n"
    << "gamma_per_year = " << format_full(k.gamma) << "\n"
    << "mu_per_year = " << format_full(k.mu) << "\n\n";
  const auto& s = cfg.sampler;
  o << "[sampler]\n"
    << "chains = " << s.n_chains << "\n"
    << "iterations = " << s.n_iter << "\n"
    << "adapt = " << s.n_adapt << "\n"
    << "seed = " << s.seed << "\n"
    << "thin = " << s.thin << "\n"
    << "swap_interval = " << s.swap_interval << "\n"
    << "ladder = ";
  const auto ladder = s.ladder();
  for (std::size_t i = 0; i < ladder.size(); ++i) o << (i ? ", " : "") << format_full(ladder[i]);
  o << "\n"
    << "temper = " << (s.temper_prior ? "posterior" : "likelihood") << "\n"
    << "adapt_start = " << s.adapt_start << "\n"
    << "max_init_draws = " << s.max_init_draws << "\n"
    << "jitter = " << format_full(s.jitter) << "\n"
    << "target_acceptance = " << format_full(s.target_acceptance) << "\n\n";
  const auto& p = cfg.priors;
  auto gamma = [&](const char* name, const GammaPrior& g) {
    o << name << "_shape = " << format_full(g.shape) << "\n" << name << "_scale = " << format_full(g.scale) << "\n";
  };
  o << "[priors]\n";
  gamma("beta", p.beta);
  gamma("sigma", p.sigma);
  gamma("v", p.v);
  gamma("c0", p.c0);
  gamma("Sigma", p.sigma_obs);
  gamma("c", p.c);
  o << "dirichlet_alpha = " << format_full(p.dirichlet_alpha) << "\n\n";
  o << "[integrator]\n"
    << "rel_tol = " << format_full(cfg.integrator.rel_tol) << "\n"
    << "abs_tol = " << format_full(cfg.integrator.abs_tol) << "\n"
    << "max_step = " << format_full(cfg.integrator.max_step) << "\n"
    << "max_steps = " << cfg.integrator.max_steps << "\n\n";
  o << "[likelihood]\n"
    << "virological = " << (cfg.use_virological ? "true" : "false") << "\n";
  return o.str();
}

ModelParameters parameters_from_ini(const IniDocument& doc, const FixedConstants& k) {
  reject_unknown_sections(doc, {"kinetic", "initial_state", "auxiliary"});
  for (const char* required : {"kinetic", "initial_state", "auxiliary"}) {
    if (!doc.sections.count(required)) throw InputError(doc.source + ": missing section [" + required + "]");
  }
  ModelParameters p;
  auto need = [&](SectionReader& r, const std::string& section, const std::string& key, double& out) {
    bool seen = false;
    r.with(key, [&](const std::string& v, const std::string& ctx) {
      out = parse_double(v, ctx);
      seen = true;
    });
    if (!seen) throw InputError(doc.source + ": [" + section + "] missing " + key);
  };

  SectionReader kin(doc, "kinetic");
  need(kin, "kinetic", "beta1", p.theta.beta1);
  need(kin, "kinetic", "beta2", p.theta.beta2);
  need(kin, "kinetic", "sigma1", p.theta.sigma1);
  need(kin, "kinetic", "sigma2", p.theta.sigma2);
  need(kin, "kinetic", "C0", p.theta.c0);
  kin.finish();

  SectionReader init(doc, "initial_state");
  for (int i = 0; i < kNumCompartments; ++i) {
    need(init, "initial_state", std::string(kCompartmentNames[i]), p.theta.x0[i]);
  }
  bool rescale = false;
  init.boolean("rescale", rescale);
  init.finish();
  if ((p.theta.x0.array() < 0.0).any()) throw InputError(doc.source + ": initial state must be nonnegative");
  if (rescale) {
    const double total = p.theta.x0.sum();
    if (!(total > 0.0)) throw InputError(doc.source + ": initial state sums to zero");
    p.theta.x0 *= k.omega / total;
  }

  SectionReader aux(doc, "auxiliary");
  need(aux, "auxiliary", "c", p.tau.c);
  need(aux, "auxiliary", "nu", p.tau.nu);
  need(aux, "auxiliary", "r", p.tau.r);
  need(aux, "auxiliary", "Sigma", p.tau.sigma_obs);
  need(aux, "auxiliary", "v", p.tau.v);
  aux.finish();

  try {
    p.theta.validate(k);
    p.tau.validate();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    throw InputError(doc.source + ": " + e.what());
  }
  return p;
}

ModelParameters read_parameters(const std::filesystem::path& path, const FixedConstants& k) {
  return parameters_from_ini(read_ini(path), k);
}

std::string format_parameters(const ModelParameters& p) {
  std::ostringstream o;
  o << "[kinetic]\n"
    << "beta1 = " << format_full(p.theta.beta1) << "\n"
    << "beta2 = " << format_full(p.theta.beta2) << "\n"
    << "sigma1 = " << format_full(p.theta.sigma1) << "\n"
    << "sigma2 = " << format_full(p.theta.sigma2) << "\n"
    << "C0 = " << format_full(p.theta.c0) << "\n\n"
    << "[initial_state]\n";
  for (int i = 0; i < kNumCompartments; ++i) o << kCompartmentNames[i] << " = " << format_full(p.theta.x0[i]) << "\n";
  o << "\n[auxiliary]\n"
    << "c = " << format_full(p.tau.c) << "\n"
    << "nu = " << format_full(p.tau.nu) << "\n"
    << "r = " << format_full(p.tau.r) << "\n"
    << "Sigma = " << format_full(p.tau.sigma_obs) << "\n"
    << "v = " << format_full(p.tau.v) << "\n";
  return o.str();
}

Dataset parse_dataset(const std::string& text, const std::string& source, const FixedConstants& k) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines[0]) != "week,y,n1,n2,n3") {
    throw InputError(where(source, 1) + ": header must be 'week,y,n1,n2,n3'");
  }
  Dataset d;
  d.constants = k;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i + 1);
    if (trim(lines[i]).empty()) continue;
    const auto fields = split(lines[i], ',');
    if (fields.size() != 5) {
      throw InputError(where(source, ln) + ": expected 5 fields, found " + std::to_string(fields.size()));
    }
    auto count = [&](int col, bool allow_empty) {
      const std::string f = trim(fields[col]);
      if (f.empty() && allow_empty) return nan;
      const long long v = parse_integer(f, where(source, ln, col + 1));
      if (v < 0) throw InputError(where(source, ln, col + 1) + ": counts must be nonnegative");
      return static_cast<double>(v);
    };
    const long long week = parse_integer(fields[0], where(source, ln, 1));
    const long long expected = static_cast<long long>(d.y.size()) + 1;
    if (week != expected) {
      throw InputError(where(source, ln, 1) + ": expected week " + std::to_string(expected) + ", found " +
                       std::to_string(week));
    }
    d.times.push_back(week_time(static_cast<std::size_t>(week)));
    d.y.push_back(count(1, false));
    const double n1 = count(2, true), n2 = count(3, true), n3 = count(4, true);
    const int missing = std::isnan(n1) + std::isnan(n2) + std::isnan(n3);
    if (missing != 0 && missing != 3) {
      throw InputError(where(source, ln) + ": virological counts must be all present or all empty");
    }
    d.n1.push_back(n1);
    d.n2.push_back(n2);
    d.n3.push_back(n3);
  }
  if (d.size() < 2) throw InputError(source + ": at least two weeks of data are required");
  return d;
}

Dataset read_dataset(const std::filesystem::path& path, const FixedConstants& k) {
  return parse_dataset(read_file(path), path.string(), k);
}

std::string format_dataset(const Dataset& data) {
  std::ostringstream o;
  o << "week,y,n1,n2,n3\n";
  auto count = [](double v) { return std::isnan(v) ? std::string() : format_full(v); };
  for (std::size_t i = 0; i < data.size(); ++i) {
    o << (i + 1) << "," << format_full(data.y[i]) << "," << count(data.n1[i]) << "," << count(data.n2[i]) << ","
      << count(data.n3[i]) << "\n";
  }
  return o.str();
}

std::string format_archive(const SampleArchive& a) {
  std::ostringstream o;
  o << "iteration";
  for (const auto& p : a.parameters) o << "," << p;
  o << ",log_posterior\n";
  for (std::size_t i = 0; i < a.size(); ++i) {
    o << a.iteration[i];
    for (double v : a.values[i]) o << "," << format_full(v);
    o << "," << format_full(a.log_posterior[i]) << "\n";
  }
  return o.str();
}

SampleArchive parse_archive(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw InputError(source + ": empty archive");
  const auto header = split(lines[0], ',');
  if (header.size() < 3 || header.front() != "iteration" || header.back() != "log_posterior") {
    throw InputError(where(source, 1) + ": header must be 'iteration,<parameters>,log_posterior'");
  }
  SampleArchive a;
  a.parameters.assign(header.begin() + 1, header.end() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const int ln = static_cast<int>(i + 1);
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != header.size()) {
      throw InputError(where(source, ln) + ": expected " + std::to_string(header.size()) + " fields, found " +
                       std::to_string(f.size()));
    }
    a.iteration.push_back(static_cast<long>(parse_integer(f[0], where(source, ln, 1))));
    std::vector<double> row;
    for (std::size_t j = 1; j + 1 < f.size(); ++j) {
      row.push_back(parse_double(f[j], where(source, ln, static_cast<int>(j + 1))));
    }
    a.values.push_back(std::move(row));
    a.log_posterior.push_back(parse_double(f.back(), where(source, ln, static_cast<int>(f.size()))));
  }
  if (a.size() == 0) throw InputError(source + ": archive has no draws");
  return a;
}

SampleArchive read_archive(const std::filesystem::path& path) { return parse_archive(read_file(path), path.string()); }

double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double percentile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, p);
}

std::vector<SummaryRow> summarize_archive(const SampleArchive& a) {
  if (a.size() == 0) throw InputError("archive has no draws");
  const auto best = static_cast<std::size_t>(
      std::max_element(a.log_posterior.begin(), a.log_posterior.end()) - a.log_posterior.begin());
  std::vector<SummaryRow> rows;
  for (std::size_t j = 0; j < a.parameters.size(); ++j) {
    std::vector<double> column(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) column[i] = a.values[i][j];
    std::sort(column.begin(), column.end());
    rows.push_back({a.parameters[j], a.values[best][j], percentile_sorted(column, 0.025),
                    percentile_sorted(column, 0.975)});
  }
  return rows;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream o;
  o << "parameter,MAP,CI_low,CI_high\n";
  for (const auto& r : rows) {
    o << r.parameter << "," << format_short(r.map) << "," << format_short(r.ci_low) << "," << format_short(r.ci_high)
      << "\n";
  }
  return o.str();
}

}  // namespace skmfit
