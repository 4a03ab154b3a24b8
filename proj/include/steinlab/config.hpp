#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace steinlab {

/// Configuration problems exit with code 2; anything else is a bug.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct SelftestConfig {
  int n_functionals = 50;
  int m = 6;
  int p = 4;
  int max_order = 4;
  int n_mc_identity = 100000;
  int n_mc_mehler = 100000;
  std::vector<double> mehler_t = {0.1, 1.0};
};

struct BoundsConfig {
  int n_functionals = 50;
  int m = 6;
  int p = 4;
  int max_order = 3;
  int n_mc = 10000;
  int dict_size = 128;
  int n_snapshots = 3;
};

struct BreuerMajorConfig {
  std::vector<double> T_grid = {8.0, 16.0, 32.0, 64.0};
  std::string kernel = "boxcar";
  std::string f = "hermite2";
  int hermite_q = 12;
  int r_nodes = 16;
  double delta = 1.0 / 64.0;
  int n_mc = 10000;
  int dict_size = 128;
};

struct NeuralNetConfig {
  std::vector<double> n_grid = {4, 16, 64, 256};
  std::vector<double> width_check = {1, 16, 256};
  std::string activation = "tanh";
  std::string nu = "uniform";
  int nu_nodes = 16;
  int n_mc = 10000;
  int dict_size = 128;
};

struct SpdeConfig {
  std::vector<double> R_grid = {2.0, 4.0, 8.0, 16.0};
  double T = 1.0;
  int N_trunc = 3;
  int t_nodes = 16;
  int t_nodes_order3 = 8;
  int cov_grid = 8;
  double const_a = 1.0;
  double const_b = 1.0;
  double trunc_threshold = 0.3;
  bool doubling_check = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;  // 0 = auto
  std::string output_dir = "out";

  SelftestConfig selftest;
  BoundsConfig bounds;
  BreuerMajorConfig breuer_major;
  NeuralNetConfig neural_net;
  SpdeConfig spde;

  /// Canonical serialization used for hashing and reproducibility reports.
  std::string canonical() const;
};

namespace detail_cfg {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw ConfigError("");
    return v;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw ConfigError("");
    return v;
  } catch (...) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

inline std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::istringstream ss(value);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  std::string leftover;
  if (ss.fail() && !ss.eof()) throw ConfigError("config: key '" + key + "' expects a numeric list");
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects a nonempty numeric list");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + value + "'");
}

/// One section's key dispatch table; unknown keys are rejected.
class KeyTable {
 public:
  using Setter = std::function<void(const std::string& key, const std::string& value)>;

  void add(const std::string& key, Setter setter) { table_[key] = std::move(setter); }

  void apply(const std::string& section, const std::string& key, const std::string& value) const {
    const auto it = table_.find(key);
    if (it == table_.end())
      throw ConfigError("config: unknown key '" + key + "' in section [" + section + "]");
    it->second(key, value);
  }

 private:
  std::map<std::string, Setter> table_;
};

}  // namespace detail_cfg

/// Parses the declarative experiment file: `key = value` lines grouped under
/// [section] headers, '#' comments, strict key set.  Numeric preconditions
/// are validated before any computation starts.
inline ExperimentConfig parse_config_text(const std::string& text) {
  using namespace detail_cfg;
  ExperimentConfig cfg;

  std::map<std::string, KeyTable> tables;
  KeyTable& top = tables[""];
  top.add("seed", [&cfg](const std::string& k, const std::string& v) {
    cfg.seed = static_cast<std::uint64_t>(parse_int(k, v));
    cfg.seed_set = true;
  });
  top.add("threads", [&cfg](const std::string& k, const std::string& v) {
    if (v == "auto") {
      cfg.threads = 0;
      return;
    }
    const long long t = parse_int(k, v);
    if (t < 1) throw ConfigError("config: threads must be >= 1 or auto");
    cfg.threads = static_cast<int>(t);
  });
  top.add("output_dir", [&cfg](const std::string&, const std::string& v) { cfg.output_dir = v; });

  KeyTable& st = tables["selftest"];
  st.add("n_functionals", [&cfg](const std::string& k, const std::string& v) {
    cfg.selftest.n_functionals = static_cast<int>(parse_int(k, v));
  });
  st.add("m", [&cfg](const std::string& k, const std::string& v) { cfg.selftest.m = static_cast<int>(parse_int(k, v)); });
  st.add("p", [&cfg](const std::string& k, const std::string& v) { cfg.selftest.p = static_cast<int>(parse_int(k, v)); });
  st.add("max_order",
         [&cfg](const std::string& k, const std::string& v) { cfg.selftest.max_order = static_cast<int>(parse_int(k, v)); });
  st.add("n_mc_identity", [&cfg](const std::string& k, const std::string& v) {
    cfg.selftest.n_mc_identity = static_cast<int>(parse_int(k, v));
  });
  st.add("n_mc_mehler", [&cfg](const std::string& k, const std::string& v) {
    cfg.selftest.n_mc_mehler = static_cast<int>(parse_int(k, v));
  });
  st.add("mehler_t",
         [&cfg](const std::string& k, const std::string& v) { cfg.selftest.mehler_t = parse_list(k, v); });

  KeyTable& bd = tables["bounds"];
  bd.add("n_functionals", [&cfg](const std::string& k, const std::string& v) {
    cfg.bounds.n_functionals = static_cast<int>(parse_int(k, v));
  });
  bd.add("m", [&cfg](const std::string& k, const std::string& v) { cfg.bounds.m = static_cast<int>(parse_int(k, v)); });
  bd.add("p", [&cfg](const std::string& k, const std::string& v) { cfg.bounds.p = static_cast<int>(parse_int(k, v)); });
  bd.add("max_order",
         [&cfg](const std::string& k, const std::string& v) { cfg.bounds.max_order = static_cast<int>(parse_int(k, v)); });
  bd.add("n_mc", [&cfg](const std::string& k, const std::string& v) { cfg.bounds.n_mc = static_cast<int>(parse_int(k, v)); });
  bd.add("dict_size",
         [&cfg](const std::string& k, const std::string& v) { cfg.bounds.dict_size = static_cast<int>(parse_int(k, v)); });
  bd.add("n_snapshots",
         [&cfg](const std::string& k, const std::string& v) { cfg.bounds.n_snapshots = static_cast<int>(parse_int(k, v)); });

  KeyTable& bm = tables["breuer_major"];
  bm.add("T_grid", [&cfg](const std::string& k, const std::string& v) { cfg.breuer_major.T_grid = parse_list(k, v); });
  bm.add("kernel", [&cfg](const std::string&, const std::string& v) { cfg.breuer_major.kernel = v; });
  bm.add("f", [&cfg](const std::string&, const std::string& v) { cfg.breuer_major.f = v; });
  bm.add("hermite_Q", [&cfg](const std::string& k, const std::string& v) {
    cfg.breuer_major.hermite_q = static_cast<int>(parse_int(k, v));
  });
  bm.add("r_nodes", [&cfg](const std::string& k, const std::string& v) {
    cfg.breuer_major.r_nodes = static_cast<int>(parse_int(k, v));
  });
  bm.add("delta",
         [&cfg](const std::string& k, const std::string& v) { cfg.breuer_major.delta = parse_double(k, v); });
  bm.add("n_mc",
         [&cfg](const std::string& k, const std::string& v) { cfg.breuer_major.n_mc = static_cast<int>(parse_int(k, v)); });
  bm.add("dict_size", [&cfg](const std::string& k, const std::string& v) {
    cfg.breuer_major.dict_size = static_cast<int>(parse_int(k, v));
  });

  KeyTable& nn = tables["neural_net"];
  nn.add("n_grid", [&cfg](const std::string& k, const std::string& v) { cfg.neural_net.n_grid = parse_list(k, v); });
  nn.add("width_check",
         [&cfg](const std::string& k, const std::string& v) { cfg.neural_net.width_check = parse_list(k, v); });
  nn.add("activation", [&cfg](const std::string&, const std::string& v) { cfg.neural_net.activation = v; });
  nn.add("nu", [&cfg](const std::string&, const std::string& v) { cfg.neural_net.nu = v; });
  nn.add("nu_nodes", [&cfg](const std::string& k, const std::string& v) {
    cfg.neural_net.nu_nodes = static_cast<int>(parse_int(k, v));
  });
  nn.add("n_mc",
         [&cfg](const std::string& k, const std::string& v) { cfg.neural_net.n_mc = static_cast<int>(parse_int(k, v)); });
  nn.add("dict_size", [&cfg](const std::string& k, const std::string& v) {
    cfg.neural_net.dict_size = static_cast<int>(parse_int(k, v));
  });

  KeyTable& sp = tables["spde"];
  sp.add("R_grid", [&cfg](const std::string& k, const std::string& v) { cfg.spde.R_grid = parse_list(k, v); });
  sp.add("T", [&cfg](const std::string& k, const std::string& v) { cfg.spde.T = parse_double(k, v); });
  sp.add("N_trunc",
         [&cfg](const std::string& k, const std::string& v) { cfg.spde.N_trunc = static_cast<int>(parse_int(k, v)); });
  sp.add("t_nodes",
         [&cfg](const std::string& k, const std::string& v) { cfg.spde.t_nodes = static_cast<int>(parse_int(k, v)); });
  sp.add("t_nodes_order3", [&cfg](const std::string& k, const std::string& v) {
    cfg.spde.t_nodes_order3 = static_cast<int>(parse_int(k, v));
  });
  sp.add("cov_grid",
         [&cfg](const std::string& k, const std::string& v) { cfg.spde.cov_grid = static_cast<int>(parse_int(k, v)); });
  sp.add("const_a", [&cfg](const std::string& k, const std::string& v) { cfg.spde.const_a = parse_double(k, v); });
  sp.add("const_b", [&cfg](const std::string& k, const std::string& v) { cfg.spde.const_b = parse_double(k, v); });
  sp.add("trunc_threshold",
         [&cfg](const std::string& k, const std::string& v) { cfg.spde.trunc_threshold = parse_double(k, v); });
  sp.add("doubling_check",
         [&cfg](const std::string& k, const std::string& v) { cfg.spde.doubling_check = parse_bool(k, v); });

  const std::set<std::string> known_sections = {"", "selftest", "bounds", "breuer_major", "neural_net", "spde"};
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail_cfg::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: malformed section header at line " + std::to_string(line_no));
      section = detail_cfg::trim(line.substr(1, line.size() - 2));
      if (!known_sections.count(section))
        throw ConfigError("config: unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected 'key = value' at line " + std::to_string(line_no));
    const std::string key = detail_cfg::trim(line.substr(0, eq));
    const std::string value = detail_cfg::trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("config: empty key or value at line " + std::to_string(line_no));
    tables[section].apply(section, key, value);
  }
  return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

/// Range validation for every numeric key; runs before any computation.
inline void validate_config(const ExperimentConfig& cfg) {
  if (!cfg.seed_set) throw ConfigError("config: required key 'seed' is missing");
  auto positive = [](long long v, const std::string& name) {
    if (v < 1) throw ConfigError("config: '" + name + "' must be >= 1");
  };
  positive(cfg.selftest.n_functionals, "selftest.n_functionals");
  positive(cfg.selftest.m, "selftest.m");
  positive(cfg.selftest.p, "selftest.p");
  positive(cfg.selftest.max_order, "selftest.max_order");
  if (cfg.selftest.n_mc_identity < 2) throw ConfigError("config: selftest.n_mc_identity must be >= 2");
  if (cfg.selftest.n_mc_mehler < 2) throw ConfigError("config: selftest.n_mc_mehler must be >= 2");
  for (const double t : cfg.selftest.mehler_t)
    if (t < 0.0) throw ConfigError("config: selftest.mehler_t entries must be >= 0");

  positive(cfg.bounds.n_functionals, "bounds.n_functionals");
  positive(cfg.bounds.m, "bounds.m");
  positive(cfg.bounds.p, "bounds.p");
  positive(cfg.bounds.max_order, "bounds.max_order");
  if (cfg.bounds.n_mc < 2) throw ConfigError("config: bounds.n_mc must be >= 2");
  positive(cfg.bounds.dict_size, "bounds.dict_size");
  if (cfg.bounds.n_snapshots < 0) throw ConfigError("config: bounds.n_snapshots must be >= 0");

  for (const double T : cfg.breuer_major.T_grid)
    if (T <= 0.0) throw ConfigError("config: breuer_major.T_grid entries must be positive");
  positive(cfg.breuer_major.hermite_q, "breuer_major.hermite_Q");
  positive(cfg.breuer_major.r_nodes, "breuer_major.r_nodes");
  if (cfg.breuer_major.delta <= 0.0 || cfg.breuer_major.delta > 1.0 / 16.0)
    throw ConfigError("config: breuer_major.delta must lie in (0, 1/16]");
  if (cfg.breuer_major.n_mc < 2) throw ConfigError("config: breuer_major.n_mc must be >= 2");
  positive(cfg.breuer_major.dict_size, "breuer_major.dict_size");

  for (const double n : cfg.neural_net.n_grid)
    if (n < 1.0 || n != std::floor(n)) throw ConfigError("config: neural_net.n_grid entries must be integers >= 1");
  for (const double n : cfg.neural_net.width_check)
    if (n < 1.0 || n != std::floor(n))
      throw ConfigError("config: neural_net.width_check entries must be integers >= 1");
  positive(cfg.neural_net.nu_nodes, "neural_net.nu_nodes");
  if (cfg.neural_net.n_mc < 2) throw ConfigError("config: neural_net.n_mc must be >= 2");
  positive(cfg.neural_net.dict_size, "neural_net.dict_size");

  for (const double R : cfg.spde.R_grid)
    if (R <= 0.0) throw ConfigError("config: spde.R_grid entries must be positive");
  if (cfg.spde.T <= 0.0) throw ConfigError("config: spde.T must be positive");
  if (cfg.spde.N_trunc < 1 || cfg.spde.N_trunc > 4)
    throw ConfigError("config: spde.N_trunc must lie in [1, 4]");
  positive(cfg.spde.t_nodes, "spde.t_nodes");
  positive(cfg.spde.t_nodes_order3, "spde.t_nodes_order3");
  positive(cfg.spde.cov_grid, "spde.cov_grid");
  if (cfg.spde.const_a < 0.0) throw ConfigError("config: spde.const_a must be >= 0");
  if (cfg.spde.trunc_threshold <= 0.0) throw ConfigError("config: spde.trunc_threshold must be positive");
}

inline std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << "seed=" << seed << "\nthreads=" << threads << "\noutput_dir=" << output_dir << "\n";
  os << "[selftest]\n"
     << "n_functionals=" << selftest.n_functionals << "\nm=" << selftest.m << "\np=" << selftest.p
     << "\nmax_order=" << selftest.max_order << "\nn_mc_identity=" << selftest.n_mc_identity
     << "\nn_mc_mehler=" << selftest.n_mc_mehler << "\nmehler_t=";
  for (const double t : selftest.mehler_t) os << t << ' ';
  os << "\n[bounds]\n"
     << "n_functionals=" << bounds.n_functionals << "\nm=" << bounds.m << "\np=" << bounds.p
     << "\nmax_order=" << bounds.max_order << "\nn_mc=" << bounds.n_mc << "\ndict_size=" << bounds.dict_size
     << "\nn_snapshots=" << bounds.n_snapshots;
  os << "\n[breuer_major]\nT_grid=";
  for (const double t : breuer_major.T_grid) os << t << ' ';
  os << "\nkernel=" << breuer_major.kernel << "\nf=" << breuer_major.f << "\nhermite_Q=" << breuer_major.hermite_q
     << "\nr_nodes=" << breuer_major.r_nodes << "\ndelta=" << breuer_major.delta
     << "\nn_mc=" << breuer_major.n_mc << "\ndict_size=" << breuer_major.dict_size;
  os << "\n[neural_net]\nn_grid=";
  for (const double n : neural_net.n_grid) os << n << ' ';
  os << "\nwidth_check=";
  for (const double n : neural_net.width_check) os << n << ' ';
  os << "\nactivation=" << neural_net.activation << "\nnu=" << neural_net.nu
     << "\nnu_nodes=" << neural_net.nu_nodes << "\nn_mc=" << neural_net.n_mc
     << "\ndict_size=" << neural_net.dict_size;
  os << "\n[spde]\nR_grid=";
  for (const double r : spde.R_grid) os << r << ' ';
  os << "\nT=" << spde.T << "\nN_trunc=" << spde.N_trunc << "\nt_nodes=" << spde.t_nodes
     << "\nt_nodes_order3=" << spde.t_nodes_order3 << "\ncov_grid=" << spde.cov_grid
     << "\nconst_a=" << spde.const_a << "\nconst_b=" << spde.const_b
     << "\ntrunc_threshold=" << spde.trunc_threshold << "\ndoubling_check=" << spde.doubling_check << "\n";
  return os.str();
}

}  // namespace steinlab
