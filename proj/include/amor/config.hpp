#pragma once

#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "amor/common.hpp"
#include "amor/samplers.hpp"
#include "amor/targets.hpp"

namespace amor {

/// Flat "key = value inside [section]" config text. '#' starts a comment,
/// blank lines are skipped, keys must be unique per section. Every entry
/// remembers its line for error messages.
class ParsedConfig {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static ParsedConfig parse(std::istream& in) {
    ParsedConfig cfg;
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']' || trimmed.size() < 3)
          throw ConfigError(line_no, "malformed section header '" + trimmed + "'");
        section = trim(trimmed.substr(1, trimmed.size() - 2));
        cfg.section_lines_.emplace(section, line_no);
        cfg.sections_[section];
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(line_no, "expected 'key = value', got '" + trimmed + "'");
      if (section.empty())
        throw ConfigError(line_no, "key outside of any [section]");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError(line_no, "empty key");
      auto& sec = cfg.sections_[section];
      if (!sec.emplace(key, Entry{value, line_no}).second)
        throw ConfigError(line_no, "duplicate key '" + key + "' in [" + section + "]");
    }
    cfg.total_lines_ = line_no;
    return cfg;
  }

  bool has_section(const std::string& section) const {
    return sections_.count(section) > 0;
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
  }

  void require_section(const std::string& section) const {
    if (!has_section(section))
      throw ConfigError(total_lines_, "missing required section [" + section + "]");
  }

  const Entry& entry(const std::string& section, const std::string& key) const {
    require_section(section);
    const auto& sec = sections_.at(section);
    const auto it = sec.find(key);
    if (it == sec.end())
      throw ConfigError(section_lines_.at(section),
                        "missing key '" + key + "' in [" + section + "]");
    return it->second;
  }

  std::string get_string(const std::string& section, const std::string& key) const {
    return entry(section, key).value;
  }

  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
    return has(section, key) ? entry(section, key).value : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    const Entry& e = entry(section, key);
    double v = 0.0;
    if (!parse_double(e.value, v))
      throw ConfigError(e.line, "key '" + key + "' is not a number: '" + e.value + "'");
    return v;
  }

  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }

  long get_long(const std::string& section, const std::string& key) const {
    const Entry& e = entry(section, key);
    long v = 0;
    if (!parse_long(e.value, v))
      throw ConfigError(e.line, "key '" + key + "' is not an integer: '" + e.value + "'");
    return v;
  }

  long get_long_or(const std::string& section, const std::string& key,
                   long fallback) const {
    return has(section, key) ? get_long(section, key) : fallback;
  }

  std::uint64_t get_uint64_or(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const Entry& e = entry(section, key);
    std::uint64_t v = 0;
    if (!parse_uint64(e.value, v))
      throw ConfigError(e.line, "key '" + key + "' is not an unsigned integer");
    return v;
  }

  std::vector<std::string> tokens(const std::string& section, const std::string& key) const {
    const Entry& e = entry(section, key);
    std::istringstream stream(e.value);
    std::vector<std::string> out;
    std::string token;
    while (stream >> token) out.push_back(token);
    return out;
  }

  Vector get_vector(const std::string& section, const std::string& key,
                    Eigen::Index expected = -1) const {
    const Entry& e = entry(section, key);
    const auto toks = tokens(section, key);
    Vector v(static_cast<Eigen::Index>(toks.size()));
    for (std::size_t i = 0; i < toks.size(); ++i) {
      double value = 0.0;
      if (!parse_double(toks[i], value))
        throw ConfigError(e.line, "key '" + key + "' has a non-numeric entry '" + toks[i] + "'");
      v[static_cast<Eigen::Index>(i)] = value;
    }
    if (expected >= 0 && v.size() != expected)
      throw ConfigError(e.line, "key '" + key + "' expects " + std::to_string(expected) +
                                    " entries, got " + std::to_string(v.size()));
    return v;
  }

  /// Row-major d x d matrix from a flat list of d*d numbers.
  Matrix get_matrix(const std::string& section, const std::string& key, int d) const {
    const Vector flat = get_vector(section, key, static_cast<Eigen::Index>(d) * d);
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = flat[i * d + j];
    return m;
  }

  int line_of(const std::string& section, const std::string& key) const {
    return entry(section, key).line;
  }

  int total_lines() const { return total_lines_; }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  }

  std::map<std::string, std::map<std::string, Entry>> sections_;
  std::map<std::string, int> section_lines_;
  int total_lines_ = 0;
};

inline const std::set<std::string>& known_samplers() {
  static const std::set<std::string> names{"amor", "am", "am_ordered", "celeux",
                                           "reference_rwm"};
  return names;
}

inline const std::set<std::string>& known_emits() {
  static const std::set<std::string> names{"trace", "summary", "histograms", "acf"};
  return names;
}

/// Everything a run command needs: the built target and group, the sampler
/// name, the resolved-to-be-resolved sampler parameters, and output options.
struct ExperimentConfig {
  SymmetrizedTarget target;
  std::string sampler = "amor";
  SamplerConfig run;
  std::string output_dir = "out";
  std::set<std::string> emit{"trace", "summary"};
  int bins = 60;
  int max_lag = 100;
  std::string reference = "none";  // none | seed
};

namespace detail {

inline PermutationGroup group_from_config(const ParsedConfig& cfg, int dim) {
  cfg.require_section("group");
  const std::string kind = cfg.get_string("group", "kind");
  if (kind == "full_symmetric") {
    if (dim > 7)
      throw ConfigError(cfg.line_of("group", "kind"),
                        "full_symmetric group needs dim <= 7");
    return full_symmetric_group(dim);
  }
  if (kind == "generators") {
    std::vector<Permutation> gens;
    for (int k = 1; cfg.has("group", "gen_" + std::to_string(k)); ++k) {
      const std::string key = "gen_" + std::to_string(k);
      const Vector raw = cfg.get_vector("group", key, dim);
      std::vector<int> image(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) {
        const double v = raw[i];
        if (v != static_cast<double>(static_cast<int>(v)))
          throw ConfigError(cfg.line_of("group", key), "generator entries must be integers");
        image[static_cast<std::size_t>(i)] = static_cast<int>(v);
      }
      try {
        gens.push_back(Permutation::from_image(std::move(image)));
      } catch (const Error& e) {
        throw ConfigError(cfg.line_of("group", key), e.what());
      }
    }
    try {
      return group_from_generators(gens, dim);
    } catch (const Error& e) {
      throw ConfigError(cfg.line_of("group", "kind"), e.what());
    }
  }
  throw ConfigError(cfg.line_of("group", "kind"),
                    "group kind must be 'full_symmetric' or 'generators'");
}

inline SeedDensity seed_from_config(const ParsedConfig& cfg, int dim) {
  const std::string kind = cfg.get_string("target", "kind");
  try {
    if (kind == "gaussian") {
      return SeedDensity::gaussian(GaussianSeed(cfg.get_vector("target", "mean", dim),
                                                cfg.get_matrix("target", "cov", dim)));
    }
    if (kind == "twisted") {
      return SeedDensity::twisted(GaussianSeed(cfg.get_vector("target", "mean", dim),
                                               cfg.get_matrix("target", "cov", dim)),
                                  cfg.get_double("target", "bend"));
    }
    if (kind == "mixture") {
      const long count = cfg.get_long("target", "components");
      std::vector<std::pair<double, GaussianSeed>> comps;
      for (long k = 1; k <= count; ++k) {
        const std::string suffix = "_" + std::to_string(k);
        comps.emplace_back(cfg.get_double("target", "weight" + suffix),
                           GaussianSeed(cfg.get_vector("target", "mean" + suffix, dim),
                                        cfg.get_matrix("target", "cov" + suffix, dim)));
      }
      return SeedDensity::mixture(std::move(comps));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(cfg.line_of("target", "kind"), e.what());
  }
  throw ConfigError(cfg.line_of("target", "kind"),
                    "target kind must be 'gaussian', 'twisted' or 'mixture'");
}

}  // namespace detail

inline ExperimentConfig load_experiment_config(std::istream& in) {
  const ParsedConfig cfg = ParsedConfig::parse(in);
  cfg.require_section("target");
  cfg.require_section("sampler");

  const long dim_raw = cfg.get_long("target", "dim");
  if (dim_raw < 1 || dim_raw > 64)
    throw ConfigError(cfg.line_of("target", "dim"), "dim must lie in [1, 64]");
  const int dim = static_cast<int>(dim_raw);

  ExperimentConfig out{
      SymmetrizedTarget{detail::seed_from_config(cfg, dim),
                        detail::group_from_config(cfg, dim),
                        cfg.get_double_or("target", "support_radius", 0.0)}};
  if (out.target.support_radius < 0.0)
    throw ConfigError(cfg.line_of("target", "support_radius"),
                      "support_radius must be >= 0");

  out.sampler = cfg.get_string("sampler", "algorithm");
  if (!known_samplers().count(out.sampler))
    throw ConfigError(cfg.line_of("sampler", "algorithm"),
                      "unknown sampler '" + out.sampler + "'");
  if (out.sampler == "reference_rwm" && !out.target.seed.is_gaussian())
    throw ConfigError(cfg.line_of("sampler", "algorithm"),
                      "reference_rwm needs a gaussian target seed");

  SamplerConfig& run = out.run;
  run.c = cfg.get_double_or("sampler", "c", 0.0);
  run.alpha = cfg.get_double_or("sampler", "alpha", 1.0);
  run.gamma_star = cfg.get_double_or("sampler", "gamma_star", 1.0);
  run.beta = cfg.get_double_or("sampler", "beta", 0.7);
  run.delta0 = cfg.get_double_or("sampler", "delta0", 1e-2);
  run.delta_halving = cfg.get_long_or("sampler", "delta_halving", 1) != 0;
  run.T = cfg.get_long_or("sampler", "T", 20000);
  run.burn_in = cfg.get_long_or("sampler", "burn_in", 4000);
  run.seed = cfg.get_uint64_or("sampler", "seed", 0);
  run.pd_floor = cfg.get_double_or("sampler", "pd_floor", 1e-10);
  run.tie_tol = cfg.get_double_or("sampler", "tie_tol", 0.0);
  run.x0 = cfg.get_vector("sampler", "x0", dim);
  if (cfg.has("sampler", "mu0") || cfg.has("sampler", "sigma0")) {
    const Vector mu0 = cfg.has("sampler", "mu0") ? cfg.get_vector("sampler", "mu0", dim)
                                                 : run.x0;
    const Matrix sigma0 = cfg.has("sampler", "sigma0")
                              ? cfg.get_matrix("sampler", "sigma0", dim)
                              : Matrix(Matrix::Identity(dim, dim));
    try {
      run.theta0 = AdaptiveState(mu0, sigma0);
    } catch (const Error& e) {
      throw ConfigError(cfg.line_of("sampler", cfg.has("sampler", "sigma0") ? "sigma0" : "mu0"),
                        e.what());
    }
  }
  if (cfg.has("sampler", "prop_var"))
    run.prop_var = cfg.get_vector("sampler", "prop_var", dim);

  if (cfg.has_section("output")) {
    out.output_dir = cfg.get_string_or("output", "dir", "out");
    out.bins = static_cast<int>(cfg.get_long_or("output", "bins", 60));
    out.max_lag = static_cast<int>(cfg.get_long_or("output", "max_lag", 100));
    out.reference = cfg.get_string_or("output", "reference", "none");
    if (out.reference != "none" && out.reference != "seed")
      throw ConfigError(cfg.line_of("output", "reference"),
                        "reference must be 'none' or 'seed'");
    if (cfg.has("output", "emit")) {
      out.emit.clear();
      for (const std::string& token : cfg.tokens("output", "emit")) {
        if (!known_emits().count(token))
          throw ConfigError(cfg.line_of("output", "emit"), "unknown emit '" + token + "'");
        out.emit.insert(token);
      }
    }
  }
  if (out.bins < 1) throw ConfigError(cfg.line_of("output", "bins"), "bins must be >= 1");
  if (out.max_lag < 1)
    throw ConfigError(cfg.line_of("output", "max_lag"), "max_lag must be >= 1");
  if (out.reference == "seed" && !out.target.seed.is_gaussian())
    throw ConfigError(cfg.line_of("output", "reference"),
                      "reference = seed needs a gaussian target seed");
  return out;
}

/// Serialized echo of a (resolved) experiment config, one section.key = value
/// pair per entry; parsing these lines back reproduces the run exactly.
inline std::vector<std::pair<std::string, std::string>> echo_config(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> kv;
  const int d = cfg.target.dim();
  auto put = [&kv](const std::string& key, const std::string& value) {
    kv.emplace_back(key, value);
  };
  auto vec_string = [](const Vector& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i) s += ' ';
      s += format_double(v[i]);
    }
    return s;
  };
  auto mat_string = [&](const Matrix& m) {
    std::string s;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (i || j) s += ' ';
        s += format_double(m(i, j));
      }
    return s;
  };

  put("target.dim", std::to_string(d));
  switch (cfg.target.seed.kind()) {
    case SeedDensity::Kind::kGaussian:
      put("target.kind", "gaussian");
      put("target.mean", vec_string(cfg.target.seed.as_gaussian().mean()));
      put("target.cov", mat_string(cfg.target.seed.as_gaussian().cov()));
      break;
    case SeedDensity::Kind::kTwisted:
      put("target.kind", "twisted");
      put("target.mean", vec_string(cfg.target.seed.base_gaussian().mean()));
      put("target.cov", mat_string(cfg.target.seed.base_gaussian().cov()));
      put("target.bend", format_double(cfg.target.seed.bend()));
      break;
    case SeedDensity::Kind::kMixture: {
      put("target.kind", "mixture");
      const auto& comps = cfg.target.seed.components();
      put("target.components", std::to_string(comps.size()));
      for (std::size_t k = 0; k < comps.size(); ++k) {
        const std::string suffix = "_" + std::to_string(k + 1);
        put("target.weight" + suffix, format_double(comps[k].first));
        put("target.mean" + suffix, vec_string(comps[k].second.mean()));
        put("target.cov" + suffix, mat_string(comps[k].second.cov()));
      }
      break;
    }
  }
  put("target.support_radius", format_double(cfg.target.support_radius));

  // the element list itself is a valid generator list, so this echo rebuilds
  // the exact group
  put("group.kind", "generators");
  {
    int gen_index = 0;
    for (std::size_t k = 0; k < cfg.target.group.size(); ++k) {
      if (cfg.target.group[k].is_identity()) continue;
      std::string s;
      for (int v : cfg.target.group[k].image) {
        if (!s.empty()) s += ' ';
        s += std::to_string(v);
      }
      put("group.gen_" + std::to_string(++gen_index), s);
    }
  }

  put("sampler.algorithm", cfg.sampler);
  put("sampler.c", format_double(cfg.run.c));
  put("sampler.alpha", format_double(cfg.run.alpha));
  put("sampler.gamma_star", format_double(cfg.run.gamma_star));
  put("sampler.beta", format_double(cfg.run.beta));
  put("sampler.delta0", format_double(cfg.run.delta0));
  put("sampler.delta_halving", cfg.run.delta_halving ? "1" : "0");
  put("sampler.T", std::to_string(cfg.run.T));
  put("sampler.burn_in", std::to_string(cfg.run.burn_in));
  put("sampler.seed", std::to_string(cfg.run.seed));
  put("sampler.pd_floor", format_double(cfg.run.pd_floor));
  put("sampler.tie_tol", format_double(cfg.run.tie_tol));
  put("sampler.x0", vec_string(cfg.run.x0));
  if (cfg.run.theta0) {
    put("sampler.mu0", vec_string(cfg.run.theta0->mu()));
    put("sampler.sigma0", mat_string(cfg.run.theta0->sigma()));
  }
  if (cfg.run.prop_var.size() > 0) put("sampler.prop_var", vec_string(cfg.run.prop_var));

  put("output.dir", cfg.output_dir);
  std::string emits;
  for (const std::string& e : cfg.emit) {
    if (!emits.empty()) emits += ' ';
    emits += e;
  }
  put("output.emit", emits);
  put("output.bins", std::to_string(cfg.bins));
  put("output.max_lag", std::to_string(cfg.max_lag));
  put("output.reference", cfg.reference);
  return kv;
}

}  // namespace amor
