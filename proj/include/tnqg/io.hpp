#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "tnqg/common.hpp"
#include "tnqg/galerkin.hpp"
#include "tnqg/loss.hpp"
#include "tnqg/optimizer.hpp"
#include "tnqg/subspace.hpp"

namespace tnqg {

using Json = nlohmann::json;

inline constexpr const char* kCheckpointFormat = "tnqg-window-checkpoint";

// 64-bit FNV-1a, used for config fingerprints (stable across platforms).
inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Complex arrays as [re, im] pairs.

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("complex value must be a [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Json to_json(const Eigen::VectorXcd& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(to_json(v(k)));
  return out;
}

inline Json to_json(const Eigen::MatrixXcd& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Eigen::VectorXcd(m.row(r).transpose())));
  return out;
}

inline Eigen::VectorXcd complex_vector_from_json(const Json& j) {
  Eigen::VectorXcd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v(static_cast<Eigen::Index>(k)) = complex_from_json(j[k]);
  return v;
}

inline Eigen::MatrixXcd complex_matrix_from_json(const Json& j, Eigen::Index cols) {
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != cols) throw InvalidArgument("ragged matrix in checkpoint");
    m.row(static_cast<Eigen::Index>(r)) = complex_vector_from_json(j[r]).transpose();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Window checkpoints. phi_0 is stored by reference: "plus" or the previous
// window evaluated at t_star, so a checkpoint set is loaded in window order.

inline Json window_checkpoint(const WindowRecord& w, double window_length) {
  const auto& s = *w.state;
  Json basis = Json::array();
  for (const auto& b : s.basis) {
    basis.push_back({{"alpha", b.alpha}, {"a", to_json(b.a)}, {"b", to_json(b.b)}, {"W", to_json(b.W)}});
  }
  Json phi0;
  if (s.phi0.is_plus_state()) {
    phi0 = {{"kind", "plus"}};
  } else {
    phi0 = {{"kind", "frozen"}, {"parent_window", w.index - 1}, {"t_star", s.phi0.t_star()}};
  }
  std::vector<double> omega(s.coeffs.omega.data(), s.coeffs.omega.data() + s.coeffs.omega.size());
  std::vector<bool> frozen(s.frozen_basis.begin(), s.frozen_basis.end());
  return {{"format", kCheckpointFormat},
          {"version", kVersion},
          {"flattening", kRbmFlatteningTag},
          {"window_index", w.index},
          {"t_start", w.t_start},
          {"window_length", window_length},
          {"n_sites", s.n_sites},
          {"phi0", phi0},
          {"basis", basis},
          {"frozen_basis", frozen},
          {"train_gamma", s.train_gamma},
          {"train_omega", s.train_omega},
          {"gamma", to_json(s.coeffs.gamma)},
          {"omega", omega},
          {"best_loss", w.best_loss},
          {"grid_times", w.report.times},
          {"grid_loss", w.report.point_loss}};
}

// Rebuilds one window; `previous` is the loaded state of the preceding window (null for window 0).
inline WindowRecord window_from_checkpoint(const Json& j, std::shared_ptr<const GalerkinState> previous) {
  if (j.value("format", "") != kCheckpointFormat) throw InvalidArgument("not a window checkpoint");
  if (j.value("flattening", "") != kRbmFlatteningTag) throw InvalidArgument("unsupported RBM flattening order");
  GalerkinState s;
  s.n_sites = j.at("n_sites").get<std::size_t>();
  const auto& phi0 = j.at("phi0");
  if (phi0.at("kind") == "plus") {
    s.phi0 = FrozenState::plus_state();
  } else {
    if (!previous) throw InvalidArgument("frozen phi0 without a preceding window");
    s.phi0 = FrozenState::frozen(previous, phi0.at("t_star").get<double>());
  }
  for (const auto& b : j.at("basis")) {
    RbmParameters p;
    p.alpha = b.at("alpha").get<std::size_t>();
    p.a = complex_vector_from_json(b.at("a"));
    p.b = complex_vector_from_json(b.at("b"));
    p.W = complex_matrix_from_json(b.at("W"), p.a.size());
    if (p.b.size() != p.W.rows() || static_cast<std::size_t>(p.b.size()) != p.alpha * p.n_visible()) {
      throw InvalidArgument("inconsistent RBM shapes in checkpoint");
    }
    s.basis.push_back(std::move(p));
  }
  s.frozen_basis = j.at("frozen_basis").get<std::vector<bool>>();
  s.train_gamma = j.at("train_gamma").get<bool>();
  s.train_omega = j.at("train_omega").get<bool>();
  const auto omega = j.at("omega").get<std::vector<double>>();
  s.coeffs.omega = Eigen::Map<const Eigen::VectorXd>(omega.data(), static_cast<Eigen::Index>(omega.size()));
  s.coeffs.gamma = s.basis.empty() ? Eigen::MatrixXcd(0, s.coeffs.omega.size())
                                   : complex_matrix_from_json(j.at("gamma"), s.coeffs.omega.size());
  s.validate();
  WindowRecord w;
  w.index = j.at("window_index").get<std::size_t>();
  w.t_start = j.at("t_start").get<double>();
  w.best_loss = j.at("best_loss").get<double>();
  w.report.times = j.at("grid_times").get<std::vector<double>>();
  w.report.point_loss = j.at("grid_loss").get<std::vector<double>>();
  w.state = std::make_shared<const GalerkinState>(std::move(s));
  return w;
}

inline std::string checkpoint_name(std::size_t window) {
  std::ostringstream os;
  os << "window_" << std::setw(3) << std::setfill('0') << window << ".json";
  return os.str();
}

inline void save_trajectory(const Trajectory& traj, const std::filesystem::path& dir) {
  for (const auto& w : traj.windows()) {
    write_text(dir / checkpoint_name(w.index), window_checkpoint(w, traj.window_length()).dump(1));
  }
}

inline Trajectory load_trajectory(const std::filesystem::path& dir) {
  std::vector<WindowRecord> windows;
  std::shared_ptr<const GalerkinState> prev;
  double length = 0.0;
  for (std::size_t k = 0;; ++k) {
    const auto path = dir / checkpoint_name(k);
    if (!std::filesystem::exists(path)) break;
    const Json j = Json::parse(read_text(path));
    auto w = window_from_checkpoint(j, prev);
    if (w.index != k) throw InvalidArgument("checkpoint " + path.string() + " has the wrong window index");
    length = j.at("window_length").get<double>();
    prev = w.state;
    windows.push_back(std::move(w));
  }
  if (windows.empty()) throw InvalidArgument("no checkpoints in " + dir.string());
  return Trajectory(length, std::move(windows));
}

// ---------------------------------------------------------------------------

inline Json matrices_export(const SubspaceMatrices& m) {
  Json obs = Json::object();
  for (const auto& [name, o] : m.observables) obs[name] = to_json(o);
  return {{"scale_note",
           "all matrices share one unknown positive factor 1/k (k = sum over configurations of sum_i |phi_i|^2); "
           "only ratios and generalized eigenvalues are meaningful"},
          {"estimator", to_string(m.mode)},
          {"samples", m.samples},
          {"dim", m.dim()},
          {"S", to_json(m.S)},
          {"H", to_json(m.H)},
          {"H2", to_json(m.H2)},
          {"observables", obs}};
}

inline SubspaceMatrices matrices_from_json(const Json& j) {
  SubspaceMatrices m;
  const auto dim = j.at("dim").get<Eigen::Index>();
  m.S = complex_matrix_from_json(j.at("S"), dim);
  m.H = complex_matrix_from_json(j.at("H"), dim);
  m.H2 = complex_matrix_from_json(j.at("H2"), dim);
  if (m.S.rows() != dim || m.H.rows() != dim || m.H2.rows() != dim) throw InvalidArgument("matrix export has the wrong size");
  for (const auto& [name, o] : j.at("observables").items()) m.observables[name] = complex_matrix_from_json(o, dim);
  m.mode = parse_estimator_mode(j.at("estimator").get<std::string>());
  m.samples = j.at("samples").get<std::size_t>();
  return m;
}

// Minimal CSV writer: header on construction, full precision numbers.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw Error("cannot write " + path.string());
    out_ << std::setprecision(std::numeric_limits<double>::max_digits10);
    columns_ = header.size();
    row(header);
  }

  template <class... Ts>
  void write(const Ts&... values) {
    static_assert(sizeof...(Ts) > 0);
    if (sizeof...(Ts) != columns_) throw InvalidArgument("CSV row has the wrong column count");
    bool first = true;
    ((out_ << (first ? "" : ","), put(values), first = false), ...);
    out_ << '\n';
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
    out_ << '\n';
  }
  void put(const std::string& s) { out_ << s; }
  void put(const char* s) { out_ << s; }
  template <class T>
  void put(const T& v) {
    if constexpr (std::is_floating_point_v<T>) {
      if (std::isnan(v)) return;  // NaN marks a missing value
    }
    out_ << v;
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

// Sidecar next to an output file: <file>.meta.json.
inline void write_metadata(const std::filesystem::path& file, const std::string& config_text, std::uint64_t seed,
                           const std::string& command, Json extra = Json::object()) {
  extra["config_hash"] = hex64(fnv1a(config_text));
  extra["version"] = kVersion;
  extra["seed"] = seed;
  extra["command"] = command;
  extra["file"] = file.filename().string();
  write_text(file.string() + ".meta.json", extra.dump(2) + "\n");
}

}  // namespace tnqg
