#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tnqg/exact.hpp"
#include "tnqg/galerkin.hpp"
#include "tnqg/lattice.hpp"
#include "tnqg/loss.hpp"
#include "tnqg/optimizer.hpp"
#include "tnqg/pipeline.hpp"

namespace tnqg::cli {

// Raised for anything wrong with a config file; maps to exit code 2.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct RunConfig {
  // [lattice]
  LatticeKind lattice_kind = LatticeKind::chain;
  std::vector<std::size_t> dims{10};
  bool pbc = true;
  // [model]  The initial state is |+>^N, the h -> infinity ground state.
  double J = 1.0;
  double h = 2.0;
  // [ansatz]
  AnsatzInit ansatz;
  bool auto_spectrum = true;  // e_min/e_max from the Hamiltonian
  bool train_gamma = true;
  bool train_omega = true;
  // [schedule]
  WindowSchedule schedule;
  // [estimator]
  EstimatorOptions estimator;
  // [run]
  std::uint64_t seed = 1;
  std::vector<std::string> observables{"mx"};
  std::size_t threads = 1;
  double regularization = kDefaultRegularization;
  std::string output = "run";
  // [benchmark]
  double eval_time = 0.0;  // 0: the trained horizon
  ExtrapolationMode extrapolation = ExtrapolationMode::pencil;
  Propagator propagator = Propagator::dense;
  // [cg]
  std::vector<std::size_t> cg_m{4, 8, 16, 32};
  std::vector<double> cg_times{0.0, 0.25, 0.5, 1.0};

  std::string source;  // config text as read, for hashing and the run snapshot

  Lattice lattice() const { return build_lattice(lattice_kind, dims, pbc); }
  std::size_t n_sites() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
  SparsePauliOperator hamiltonian() const { return tfi_hamiltonian(lattice(), J, h); }
  ObservableMap observable_map() const {
    ObservableMap out;
    for (const auto& name : observables) out.insert_or_assign(name, named_observable(name, n_sites()));
    return out;
  }
  double evaluation_time() const { return eval_time > 0 ? eval_time : schedule.total_time(); }
};

namespace detail {

using Tree = boost::property_tree::ptree;

inline const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"lattice", {"kind", "dims", "pbc"}},
      {"model", {"J", "h", "initial"}},
      {"ansatz",
       {"basis_states", "alpha", "modes", "rbm_std", "visible_std", "gamma_std", "e_min", "e_max", "train_gamma",
        "train_omega"}},
      {"schedule",
       {"window_length", "windows", "grid_points", "iterations", "learning_rate", "beta1", "beta2", "adam_eps",
        "warm_start", "divergence_factor"}},
      {"estimator", {"mode", "samples", "chains", "burn_in", "thin", "enumeration_cap"}},
      {"run", {"seed", "observables", "threads", "regularization", "output"}},
      {"benchmark", {"eval_time", "extrapolation", "propagator"}},
      {"cg", {"m_values", "times"}},
  };
  return keys;
}

template <class T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  const std::string v = boost::trim_copy(text);
  if constexpr (std::is_same_v<T, bool>) {
    const std::string l = boost::to_lower_copy(v);
    if (l == "true" || l == "yes" || l == "1") return true;
    if (l == "false" || l == "no" || l == "0") return false;
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else {
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.empty() && v[0] == '-') throw ConfigError(section + "." + key + ": expected a nonnegative integer");
    }
    try {
      return boost::lexical_cast<T>(v);
    } catch (const boost::bad_lexical_cast&) {
    }
  }
  throw ConfigError(section + "." + key + ": cannot parse '" + v + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& section, const std::string& key, const std::string& text,
                          const char* separators = ",") {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(separators));
  std::vector<T> out;
  for (const auto& p : parts) {
    if (!boost::trim_copy(p).empty()) out.push_back(parse_value<T>(section, key, p));
  }
  if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
  return out;
}

class Reader {
 public:
  explicit Reader(const Tree& tree) : tree_(tree) {}

  template <class T>
  void get(const std::string& section, const std::string& key, T& target) const {
    if (auto v = raw(section, key)) target = parse_value<T>(section, key, *v);
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const {
    const auto s = tree_.get_child_optional(section);
    if (!s) return std::nullopt;
    const auto v = s->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return *v;
  }

 private:
  const Tree& tree_;
};

}  // namespace detail

inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!c.dims.empty() && c.dims.size() <= 2, "lattice.dims needs one (chain) or two (square) sizes");
  require(c.lattice_kind == LatticeKind::square || c.dims.size() == 1, "a chain takes one size in lattice.dims");
  require(c.lattice_kind == LatticeKind::chain || c.dims.size() == 2, "a square lattice takes LxW in lattice.dims");
  require(c.n_sites() >= 2 && c.n_sites() <= 64, "lattice must have between 2 and 64 sites");
  require(std::isfinite(c.J) && std::isfinite(c.h), "model.J and model.h must be finite");
  require(c.ansatz.alpha >= 1, "ansatz.alpha must be >= 1");
  require(c.ansatz.n_modes >= 1, "ansatz.modes must be >= 1");
  require(c.ansatz.rbm_std >= 0 && c.ansatz.visible_std >= 0 && c.ansatz.gamma_std >= 0,
          "ansatz standard deviations must be nonnegative");
  require(c.auto_spectrum || c.ansatz.e_min < c.ansatz.e_max, "ansatz.e_min must be below ansatz.e_max");
  require(c.schedule.optimize.adam.lr > 0, "schedule.learning_rate must be positive");
  require(c.schedule.optimize.divergence_factor > 1, "schedule.divergence_factor must exceed 1");
  require(c.threads >= 1, "run.threads must be >= 1");
  require(c.regularization > 0 && c.regularization < 1, "run.regularization must lie in (0, 1)");
  require(c.eval_time >= 0, "benchmark.eval_time must be nonnegative");
  require(!c.observables.empty(), "run.observables is empty");
  for (auto t : c.cg_times) require(t >= 0, "cg.times must be nonnegative");
  for (auto m : c.cg_m) require(m >= 1, "cg.m_values must be positive");
  try {
    c.schedule.validate();
    if (c.estimator.mode == EstimatorMode::monte_carlo) c.estimator.chains.validate();
    for (const auto& name : c.observables) named_observable(name, c.n_sites());
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

// Parses INI text; unknown sections or keys are errors.
inline RunConfig parse_config(const std::string& text) {
  detail::Tree tree;
  try {
    std::istringstream in(text);
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  const auto& known = detail::known_keys();
  for (const auto& [section, body] : tree) {
    const auto it = known.find(section);
    if (it == known.end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty() && body.empty()) throw ConfigError("key '" + section + "' outside any section");
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown config key " + section + "." + key);
    }
  }

  RunConfig c;
  c.source = text;
  const detail::Reader r(tree);
  try {
    if (auto v = r.raw("lattice", "kind")) c.lattice_kind = parse_lattice_kind(boost::trim_copy(*v));
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (auto v = r.raw("lattice", "dims")) c.dims = detail::parse_list<std::size_t>("lattice", "dims", *v, "x,");
  r.get("lattice", "pbc", c.pbc);

  r.get("model", "J", c.J);
  r.get("model", "h", c.h);
  if (auto v = r.raw("model", "initial"); v && boost::trim_copy(*v) != "plus") {
    throw ConfigError("model.initial: only 'plus' (the h = infinity ground state) is supported");
  }

  c.ansatz.n_modes = c.lattice_kind == LatticeKind::square ? kDefaultModes2d : kDefaultModes1d;
  r.get("ansatz", "basis_states", c.ansatz.n_basis);
  r.get("ansatz", "alpha", c.ansatz.alpha);
  r.get("ansatz", "modes", c.ansatz.n_modes);
  r.get("ansatz", "rbm_std", c.ansatz.rbm_std);
  r.get("ansatz", "visible_std", c.ansatz.visible_std);
  r.get("ansatz", "gamma_std", c.ansatz.gamma_std);
  const auto e_min = r.raw("ansatz", "e_min"), e_max = r.raw("ansatz", "e_max");
  if (e_min.has_value() != e_max.has_value()) throw ConfigError("ansatz.e_min and ansatz.e_max come as a pair");
  if (e_min) {
    c.auto_spectrum = false;
    r.get("ansatz", "e_min", c.ansatz.e_min);
    r.get("ansatz", "e_max", c.ansatz.e_max);
  }
  r.get("ansatz", "train_gamma", c.train_gamma);
  r.get("ansatz", "train_omega", c.train_omega);

  r.get("schedule", "window_length", c.schedule.window_length);
  r.get("schedule", "windows", c.schedule.windows);
  r.get("schedule", "grid_points", c.schedule.grid_points);
  r.get("schedule", "iterations", c.schedule.optimize.iterations);
  r.get("schedule", "learning_rate", c.schedule.optimize.adam.lr);
  r.get("schedule", "beta1", c.schedule.optimize.adam.beta1);
  r.get("schedule", "beta2", c.schedule.optimize.adam.beta2);
  r.get("schedule", "adam_eps", c.schedule.optimize.adam.eps);
  r.get("schedule", "warm_start", c.schedule.warm_start);
  r.get("schedule", "divergence_factor", c.schedule.optimize.divergence_factor);

  try {
    if (auto v = r.raw("estimator", "mode")) c.estimator.mode = parse_estimator_mode(boost::trim_copy(*v));
    if (auto v = r.raw("benchmark", "extrapolation")) {
      c.extrapolation = parse_extrapolation_mode(boost::trim_copy(*v));
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  r.get("estimator", "samples", c.estimator.chains.n_samples);
  r.get("estimator", "chains", c.estimator.chains.n_chains);
  r.get("estimator", "burn_in", c.estimator.chains.burn_in);
  r.get("estimator", "thin", c.estimator.chains.thin);
  r.get("estimator", "enumeration_cap", c.estimator.enumeration_cap);

  r.get("run", "seed", c.seed);
  if (auto v = r.raw("run", "observables")) c.observables = detail::parse_list<std::string>("run", "observables", *v);
  r.get("run", "threads", c.threads);
  r.get("run", "regularization", c.regularization);
  r.get("run", "output", c.output);

  r.get("benchmark", "eval_time", c.eval_time);
  if (auto v = r.raw("benchmark", "propagator")) {
    const auto p = boost::trim_copy(*v);
    if (p == "dense") {
      c.propagator = Propagator::dense;
    } else if (p == "krylov") {
      c.propagator = Propagator::krylov;
    } else {
      throw ConfigError("benchmark.propagator: expected dense or krylov, got '" + p + "'");
    }
  }

  if (auto v = r.raw("cg", "m_values")) c.cg_m = detail::parse_list<std::size_t>("cg", "m_values", *v);
  if (auto v = r.raw("cg", "times")) c.cg_times = detail::parse_list<double>("cg", "times", *v);

  c.estimator.chains.seed = c.seed;
  validate(c);
  return c;
}

// Effective configuration as INI text; parse_config(to_ini(c)) reproduces c.
inline std::string to_ini(const RunConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17);
  auto join = [](const auto& xs, const char* sep) {
    std::ostringstream o;
    o << std::setprecision(17);
    for (std::size_t k = 0; k < xs.size(); ++k) o << (k ? sep : "") << xs[k];
    return o.str();
  };
  const auto& a = c.ansatz;
  const auto& s = c.schedule;
  const auto& ch = c.estimator.chains;
  os << "[lattice]\nkind = " << to_string(c.lattice_kind) << "\ndims = " << join(c.dims, "x")
     << "\npbc = " << (c.pbc ? "true" : "false") << "\n\n";
  os << "[model]\nJ = " << c.J << "\nh = " << c.h << "\ninitial = plus\n\n";
  os << "[ansatz]\nbasis_states = " << a.n_basis << "\nalpha = " << a.alpha << "\nmodes = " << a.n_modes
     << "\nrbm_std = " << a.rbm_std << "\nvisible_std = " << a.visible_std << "\ngamma_std = " << a.gamma_std << "\n";
  if (!c.auto_spectrum) os << "e_min = " << a.e_min << "\ne_max = " << a.e_max << "\n";
  os << "train_gamma = " << (c.train_gamma ? "true" : "false") << "\ntrain_omega = " << (c.train_omega ? "true" : "false")
     << "\n\n";
  os << "[schedule]\nwindow_length = " << s.window_length << "\nwindows = " << s.windows
     << "\ngrid_points = " << s.grid_points << "\niterations = " << s.optimize.iterations
     << "\nlearning_rate = " << s.optimize.adam.lr << "\nbeta1 = " << s.optimize.adam.beta1
     << "\nbeta2 = " << s.optimize.adam.beta2 << "\nadam_eps = " << s.optimize.adam.eps
     << "\nwarm_start = " << (s.warm_start ? "true" : "false") << "\ndivergence_factor = " << s.optimize.divergence_factor
     << "\n\n";
  os << "[estimator]\nmode = " << to_string(c.estimator.mode) << "\nsamples = " << ch.n_samples
     << "\nchains = " << ch.n_chains << "\nburn_in = " << ch.burn_in << "\nthin = " << ch.thin
     << "\nenumeration_cap = " << c.estimator.enumeration_cap << "\n\n";
  os << "[run]\nseed = " << c.seed << "\nobservables = " << join(c.observables, ",") << "\nthreads = " << c.threads
     << "\nregularization = " << c.regularization << "\noutput = " << c.output << "\n\n";
  os << "[benchmark]\neval_time = " << c.eval_time << "\nextrapolation = " << to_string(c.extrapolation)
     << "\npropagator = " << (c.propagator == Propagator::dense ? "dense" : "krylov") << "\n\n";
  os << "[cg]\nm_values = " << join(c.cg_m, ",") << "\ntimes = " << join(c.cg_times, ",") << "\n";
  return os.str();
}

// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<EstimatorMode> estimator;
  std::optional<std::string> output;
};

inline void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.estimator) c.estimator.mode = *o.estimator;
  if (o.output) c.output = *o.output;
  c.estimator.chains.seed = c.seed;
  validate(c);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str());
}

}  // namespace tnqg::cli
