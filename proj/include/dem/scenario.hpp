#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dem/bath.hpp"
#include "dem/dynamics.hpp"
#include "dem/model.hpp"
#include "dem/ode.hpp"
#include "dem/spectral.hpp"
#include "dem/types.hpp"

namespace dem {

// Scenario-file violations (unknown keys, wrong types, bad values) — the
// CLI maps these to exit code 1.
struct SchemaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Filesystem trouble — exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutputOptions {
  bool occupations = true;
  bool coherences = false;
  bool bath_occupations = false;
  bool kernel = false;
};

struct Scenario {
  SpectralFunction spectral;
  BathSpec bath;

  std::string preset;                       // two_level | three_level | custom
  double Omega = 1.0;                       // presets only
  std::vector<Level> levels;                // custom only
  std::vector<double> initial_occupations;  // optional; length = level count
  std::optional<bool> counterterm_override;

  TimeGrid grid;
  OutputOptions outputs;

  std::string stem;       // output-file stem, from the scenario filename
  nlohmann::json raw;     // parsed input, echoed into the manifest
};

namespace detail {

using json = nlohmann::json;

inline const json& require_key(const json& obj, const std::string& where,
                               const char* key) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw SchemaError("scenario: missing required key '" + std::string(key) +
                      "' in " + where);
  return *it;
}

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw SchemaError("scenario: " + where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* a : allowed)
      if (it.key() == a) { known = true; break; }
    if (!known)
      throw SchemaError("scenario: unknown key '" + it.key() + "' in " + where);
  }
}

inline double as_number(const json& v, const std::string& where,
                        const char* key) {
  if (!v.is_number())
    throw SchemaError("scenario: '" + std::string(key) + "' in " + where +
                      " must be a number");
  return v.get<double>();
}

inline int as_integer(const json& v, const std::string& where,
                      const char* key) {
  if (!v.is_number_integer())
    throw SchemaError("scenario: '" + std::string(key) + "' in " + where +
                      " must be an integer");
  return v.get<int>();
}

inline bool as_bool(const json& v, const std::string& where, const char* key) {
  if (!v.is_boolean())
    throw SchemaError("scenario: '" + std::string(key) + "' in " + where +
                      " must be a boolean");
  return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& where,
                             const char* key) {
  if (!v.is_string())
    throw SchemaError("scenario: '" + std::string(key) + "' in " + where +
                      " must be a string");
  return v.get<std::string>();
}

}  // namespace detail

// Parse an already-loaded JSON document against the strict schema.
inline Scenario parse_scenario(const nlohmann::json& j,
                               const std::string& stem) {
  using detail::as_bool;
  using detail::as_integer;
  using detail::as_number;
  using detail::as_string;
  using detail::reject_unknown;
  using detail::require_key;

  Scenario sc;
  sc.stem = stem;
  sc.raw = j;

  reject_unknown(j, "the top level",
                 {"spectral", "bath", "system", "grid", "outputs"});

  {
    const auto& sp = require_key(j, "the top level", "spectral");
    reject_unknown(sp, "'spectral'", {"kind", "g0", "gamma"});
    const std::string kind =
        as_string(require_key(sp, "'spectral'", "kind"), "'spectral'", "kind");
    if (kind != "lorentz_drude")
      throw SchemaError("scenario: unsupported spectral kind '" + kind +
                        "' (expected 'lorentz_drude')");
    sc.spectral.kind = SpectralFunction::Kind::LorentzDrude;
    sc.spectral.g0 = as_number(require_key(sp, "'spectral'", "g0"),
                               "'spectral'", "g0");
    sc.spectral.gamma = as_number(require_key(sp, "'spectral'", "gamma"),
                                  "'spectral'", "gamma");
    try {
      sc.spectral.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("scenario: ") + e.what());
    }
  }

  {
    const auto& b = require_key(j, "the top level", "bath");
    reject_unknown(b, "'bath'",
                   {"omega_max", "n_max", "temperature", "statistics"});
    sc.bath.omega_max = as_number(require_key(b, "'bath'", "omega_max"),
                                  "'bath'", "omega_max");
    sc.bath.n_max = as_integer(require_key(b, "'bath'", "n_max"), "'bath'",
                               "n_max");
    sc.bath.temperature = as_number(require_key(b, "'bath'", "temperature"),
                                    "'bath'", "temperature");
    const std::string stat = as_string(
        require_key(b, "'bath'", "statistics"), "'bath'", "statistics");
    if (stat == "boson")
      sc.bath.statistics = Statistics::Boson;
    else if (stat == "fermion")
      sc.bath.statistics = Statistics::Fermion;
    else
      throw SchemaError("scenario: 'statistics' must be 'boson' or 'fermion', got '" +
                        stat + "'");
    try {
      sc.bath.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("scenario: ") + e.what());
    }
  }

  {
    const auto& s = require_key(j, "the top level", "system");
    reject_unknown(s, "'system'",
                   {"preset", "Omega", "levels", "initial_occupations",
                    "counterterm"});
    sc.preset = as_string(require_key(s, "'system'", "preset"), "'system'",
                          "preset");
    if (sc.preset != "two_level" && sc.preset != "three_level" &&
        sc.preset != "custom")
      throw SchemaError(
          "scenario: 'preset' must be 'two_level', 'three_level' or 'custom', got '" +
          sc.preset + "'");

    if (sc.preset == "custom") {
      if (s.contains("Omega"))
        throw SchemaError(
            "scenario: 'Omega' is not used by the custom preset; give per-level frequencies instead");
      const auto& lv = require_key(s, "'system'", "levels");
      if (!lv.is_array() || lv.empty())
        throw SchemaError("scenario: 'levels' must be a nonempty array");
      for (const auto& l : lv) {
        reject_unknown(l, "'levels[]'", {"frequency", "initial_occupation"});
        Level level;
        level.frequency = as_number(require_key(l, "'levels[]'", "frequency"),
                                    "'levels[]'", "frequency");
        level.initial_occupation =
            l.contains("initial_occupation")
                ? as_number(l.at("initial_occupation"), "'levels[]'",
                            "initial_occupation")
                : 0.0;
        sc.levels.push_back(level);
      }
    } else {
      if (s.contains("levels"))
        throw SchemaError("scenario: 'levels' is only valid with the custom preset");
      sc.Omega = as_number(require_key(s, "'system'", "Omega"), "'system'",
                           "Omega");
      if (!(sc.Omega > 0))
        throw SchemaError("scenario: 'Omega' must be > 0");
    }

    if (s.contains("initial_occupations")) {
      const auto& occ = s.at("initial_occupations");
      if (!occ.is_array())
        throw SchemaError("scenario: 'initial_occupations' must be an array");
      for (const auto& v : occ)
        sc.initial_occupations.push_back(
            as_number(v, "'initial_occupations'", "initial_occupations"));
      const size_t expect = sc.preset == "two_level"    ? 1
                            : sc.preset == "three_level" ? 2
                                                         : sc.levels.size();
      if (sc.initial_occupations.size() != expect)
        throw SchemaError("scenario: 'initial_occupations' must list " +
                          std::to_string(expect) + " value(s) for this preset, got " +
                          std::to_string(sc.initial_occupations.size()));
    }

    if (s.contains("counterterm"))
      sc.counterterm_override =
          as_bool(s.at("counterterm"), "'system'", "counterterm");
  }

  {
    const auto& g = require_key(j, "the top level", "grid");
    reject_unknown(g, "'grid'", {"t_start", "t_end", "n_points"});
    sc.grid.t_start = as_number(require_key(g, "'grid'", "t_start"), "'grid'",
                                "t_start");
    sc.grid.t_end =
        as_number(require_key(g, "'grid'", "t_end"), "'grid'", "t_end");
    sc.grid.n_points = as_integer(require_key(g, "'grid'", "n_points"),
                                  "'grid'", "n_points");
    if (sc.grid.t_start < 0)
      throw SchemaError("scenario: 't_start' must be >= 0");
    if (!(sc.grid.t_end > sc.grid.t_start))
      throw SchemaError("scenario: 't_end' must exceed 't_start'");
    if (sc.grid.n_points < 2)
      throw SchemaError("scenario: 'n_points' must be >= 2");
  }

  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    reject_unknown(o, "'outputs'",
                   {"occupations", "coherences", "bath_occupations", "kernel"});
    if (o.contains("occupations"))
      sc.outputs.occupations =
          as_bool(o.at("occupations"), "'outputs'", "occupations");
    if (o.contains("coherences"))
      sc.outputs.coherences =
          as_bool(o.at("coherences"), "'outputs'", "coherences");
    if (o.contains("bath_occupations"))
      sc.outputs.bath_occupations =
          as_bool(o.at("bath_occupations"), "'outputs'", "bath_occupations");
    if (o.contains("kernel"))
      sc.outputs.kernel = as_bool(o.at("kernel"), "'outputs'", "kernel");
  }

  return sc;
}

// Load and parse a scenario file.  JSON syntax errors surface with nlohmann's
// byte-position diagnostic; schema errors name the offending field.
inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("scenario: " + std::string(e.what()));
  }
  return parse_scenario(j, path.stem().string());
}

// Assemble the system description a scenario asks for.
inline SystemSpec make_system(const Scenario& sc) {
  SystemSpec sys;
  if (sc.preset == "two_level") {
    const double n0 =
        sc.initial_occupations.empty() ? 0.0 : sc.initial_occupations[0];
    sys = two_level_preset(sc.Omega, n0);
  } else if (sc.preset == "three_level") {
    // default: start fully in the upper level
    const double nu = sc.initial_occupations.empty() ? 1.0 : sc.initial_occupations[0];
    const double nl = sc.initial_occupations.empty() ? 0.0 : sc.initial_occupations[1];
    sys = three_level_preset(sc.Omega, nu, nl);
  } else {
    sys.levels = sc.levels;
    sys.label = "custom";
    if (!sc.initial_occupations.empty())
      for (size_t i = 0; i < sc.levels.size(); ++i)
        sys.levels[i].initial_occupation = sc.initial_occupations[i];
  }
  if (sc.counterterm_override) sys.apply_counterterm = *sc.counterterm_override;
  try {
    sys.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("scenario: ") + e.what());
  }
  return sys;
}

namespace detail {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << body;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::ordered_json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() +
                        ": " + ec.message());
}

// axis value -> filesystem-safe token (0.1 -> 0p1, -2 -> m2)
inline std::string value_token(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  std::string s(buf);
  for (char& c : s) {
    if (c == '.') c = 'p';
    else if (c == '-') c = 'm';
    else if (c == '+') c = '_';
  }
  return s;
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// evenly spaced index subset of size <= max_n, endpoints included
template <typename S>
std::vector<S> subsample(const std::vector<S>& ts, int max_n) {
  const int n = static_cast<int>(ts.size());
  if (n <= max_n) return ts;
  std::vector<S> out;
  out.reserve(max_n);
  for (int k = 0; k < max_n; ++k)
    out.push_back(ts[static_cast<size_t>(
        std::llround(double(k) * double(n - 1) / double(max_n - 1)))]);
  return out;
}

}  // namespace detail

// Worst-case departure of M(t) from unitarity over the given times.
template <typename S>
S measure_unitarity(const PropagatorT<S>& prop, const std::vector<S>& times) {
  S worst = 0;
  for (S t : times) {
    const MatrixXc<S> m = m_matrix(prop, t);
    MatrixXc<S> gram = m * m.adjoint();
    gram.diagonal().array() -= std::complex<S>(1);
    worst = std::max(worst, gram.cwiseAbs().maxCoeff());
  }
  return worst;
}

// Relative drift of the total excitation number along a trajectory.
template <typename S>
S measure_conservation(const TrajectoryT<S>& traj) {
  if (traj.total_excitation.empty()) return S(0);
  const S n0 = traj.total_excitation.front();
  const S denom = std::max(S(1), std::abs(n0));
  S worst = 0;
  for (S n : traj.total_excitation)
    worst = std::max(worst, std::abs(n - n0) / denom);
  return worst;
}

// Four-column kernel comparison over [0, t_max]: discrete sum vs the
// closed-form/quadrature evaluation, both at the same times.
inline std::string kernel_csv(const SpectralFunction& sf,
                              const DiscretizedBath& bath, double t_max,
                              int n_points) {
  std::string body = "t,K_re_discrete,K_im_discrete,K_re_analytic,K_im_analytic\n";
  const QuadratureSpec quad;
  for (int k = 0; k < n_points; ++k) {
    const double t = t_max * double(k) / double(n_points - 1);
    const auto kd = discrete_kernel(bath, t);
    const auto ka = analytic_kernel(sf, t, quad);
    body += detail::format_g17(t);
    body += ',';
    body += detail::format_g17(kd.value.real());
    body += ',';
    body += detail::format_g17(kd.value.imag());
    body += ',';
    body += detail::format_g17(ka.value.real());
    body += ',';
    body += detail::format_g17(ka.value.imag());
    body += '\n';
  }
  return body;
}

struct RunArtifacts {
  std::filesystem::path trajectory_csv;
  std::filesystem::path manifest_path;
  nlohmann::ordered_json manifest;
  Trajectory trajectory;
};

// Core of the `run` command, reusable by `sweep`.
inline RunArtifacts run_scenario(const Scenario& sc,
                                 const std::filesystem::path& out_dir,
                                 bool quiet = true) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::ensure_dir(out_dir);

  const DiscretizedBath bath = discretize(sc.spectral, sc.bath);
  const SystemSpec sys = make_system(sc);
  const Propagator prop = make_propagator(sys, bath);
  const auto res = resolution_report(bath);
  const double ct = sys.apply_counterterm ? counterterm(bath) : 0.0;

  RunOptions opt;
  opt.coherences = sc.outputs.coherences;
  opt.bath_occupations = sc.outputs.bath_occupations;
  RunArtifacts art;
  art.trajectory = run(prop, sc.grid, opt);

  art.trajectory_csv = out_dir / (sc.stem + ".csv");
  {
    std::ofstream out(art.trajectory_csv, std::ios::binary);
    if (!out)
      throw IoError("cannot open for writing: " + art.trajectory_csv.string());
    write_trajectory_csv(art.trajectory, out);
    out.flush();
    if (!out) throw IoError("write failed: " + art.trajectory_csv.string());
  }

  nlohmann::ordered_json files;
  files["trajectory_csv"] = art.trajectory_csv.filename().string();

  if (sc.outputs.bath_occupations) {
    const auto path = out_dir / (sc.stem + "_bath.csv");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    write_bath_csv(bath, out);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
    files["bath_csv"] = path.filename().string();
  }

  if (sc.outputs.kernel) {
    const auto path = out_dir / (sc.stem + "_kernel.csv");
    detail::write_text_file(
        path, kernel_csv(sc.spectral, bath, res.tau_max / 2, sc.grid.n_points));
    files["kernel_csv"] = path.filename().string();
  }

  const double conservation = measure_conservation(art.trajectory);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  art.manifest["scenario"] = sc.raw;
  art.manifest["delta_tau"] = res.delta_tau;
  art.manifest["tau_max"] = res.tau_max;
  art.manifest["counterterm"] = ct;
  art.manifest["conservation_residual"] = conservation;
  art.manifest["wall_time_seconds"] = wall;
  art.manifest["warnings"] = art.trajectory.warnings;
  art.manifest["files"] = files;

  art.manifest_path = out_dir / (sc.stem + "_manifest.json");
  detail::write_json_file(art.manifest_path, art.manifest);

  if (!quiet) {
    std::cout << sc.stem << ": " << art.trajectory.times.size()
              << " points, conservation residual " << conservation << ", "
              << wall << " s\n";
    for (const auto& w : art.trajectory.warnings)
      std::cout << "  warning: " << w << "\n";
  }
  return art;
}

inline RunArtifacts run_scenario(const std::filesystem::path& path,
                                 const std::filesystem::path& out_dir,
                                 bool quiet = true) {
  return run_scenario(load_scenario(path), out_dir, quiet);
}

enum class ConvergeAxis { NMax, OmegaMax };

// Re-run one scenario over a family of bath grids and difference the system
// occupations of successive settings on the common resolvable window.
inline nlohmann::ordered_json converge(const Scenario& base, ConvergeAxis axis,
                                       const std::vector<double>& values,
                                       const std::filesystem::path& out_dir,
                                       bool quiet = true) {
  if (values.size() < 2)
    throw SchemaError("converge: need at least 2 grid settings");
  for (double v : values)
    if (!std::isfinite(v)) throw SchemaError("converge: grid values must be finite");
  detail::ensure_dir(out_dir);

  struct Setting {
    double value;
    double tau_max;
    double runtime;
    MatrixX<double> occ;  // times x levels, on common_times
  };

  // the common window is capped by the coarsest grid's recurrence time
  std::vector<Scenario> variants;
  double tau_common = std::numeric_limits<double>::infinity();
  for (double v : values) {
    Scenario sc = base;
    if (axis == ConvergeAxis::NMax) {
      const int n = static_cast<int>(std::llround(v));
      if (n < 0 || double(n) != v)
        throw SchemaError("converge: --nmax-list entries must be nonnegative integers");
      sc.bath.n_max = n;
    } else {
      sc.bath.omega_max = v;
    }
    try {
      sc.bath.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("converge: ") + e.what());
    }
    const DiscretizedBath b = discretize(sc.spectral, sc.bath);
    tau_common = std::min(tau_common, resolution_report(b).tau_max);
    variants.push_back(std::move(sc));
  }

  std::vector<double> common_times;
  for (double t : base.grid.times())
    if (t <= std::min(tau_common, base.grid.t_end)) common_times.push_back(t);
  if (common_times.size() < 2)
    throw SchemaError(
        "converge: the common valid window holds fewer than 2 grid points");

  std::vector<Setting> settings;
  for (const Scenario& sc : variants) {
    const auto t0 = std::chrono::steady_clock::now();
    const DiscretizedBath bath = discretize(sc.spectral, sc.bath);
    const Propagator prop = make_propagator(make_system(sc), bath);
    Setting s;
    s.value = axis == ConvergeAxis::NMax ? double(sc.bath.n_max)
                                         : sc.bath.omega_max;
    s.tau_max = resolution_report(bath).tau_max;
    s.occ.resize(static_cast<int>(common_times.size()), prop.n_system);
    for (size_t k = 0; k < common_times.size(); ++k)
      s.occ.row(static_cast<int>(k)) =
          occupations(prop, common_times[k]).head(prop.n_system).transpose();
    s.runtime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    settings.push_back(std::move(s));
    if (!quiet)
      std::cout << "converge: "
                << (axis == ConvergeAxis::NMax ? "n_max" : "omega_max") << " = "
                << settings.back().value << " done ("
                << settings.back().runtime << " s)\n";
  }

  nlohmann::ordered_json report;
  report["axis"] = axis == ConvergeAxis::NMax ? "n_max" : "omega_max";
  report["scenario"] = base.stem;
  {
    nlohmann::ordered_json vals = nlohmann::ordered_json::array();
    nlohmann::ordered_json taus = nlohmann::ordered_json::array();
    nlohmann::ordered_json runtimes = nlohmann::ordered_json::array();
    for (const auto& s : settings) {
      vals.push_back(s.value);
      taus.push_back(s.tau_max);
      runtimes.push_back(s.runtime);
    }
    report["values"] = vals;
    report["tau_max"] = taus;
    report["runtimes_seconds"] = runtimes;
  }
  report["common_window"] = {{"t_start", common_times.front()},
                             {"t_end", common_times.back()},
                             {"n_points", common_times.size()}};
  nlohmann::ordered_json diffs = nlohmann::ordered_json::array();
  for (size_t k = 0; k + 1 < settings.size(); ++k) {
    const double d =
        (settings[k].occ - settings[k + 1].occ).cwiseAbs().maxCoeff();
    diffs.push_back({{"from", settings[k].value},
                     {"to", settings[k + 1].value},
                     {"max_abs_diff", d}});
  }
  report["successive_diffs"] = diffs;

  detail::write_json_file(out_dir / (base.stem + "_converge.json"), report);
  return report;
}

struct VerifyReport {
  nlohmann::ordered_json report;
  bool pass = false;
};

// Cross-check one scenario three ways: propagator unitarity, total-number
// conservation, and agreement with the direct ODE route.  Thresholds are
// fixed here, not configurable.
inline VerifyReport verify(const Scenario& sc,
                           const std::filesystem::path& out_dir,
                           bool quiet = true) {
  constexpr double kUnitarityTol = 1e-9;
  constexpr double kConservationTol = 1e-9;
  constexpr double kOracleTol = 1e-6;

  detail::ensure_dir(out_dir);
  const DiscretizedBath bath = discretize(sc.spectral, sc.bath);
  const SystemSpec sys = make_system(sc);
  const Propagator prop = make_propagator(sys, bath);

  const std::vector<double> all_times = sc.grid.times();
  const double unitarity =
      measure_unitarity(prop, detail::subsample(all_times, 33));

  const Trajectory traj = run(prop, sc.grid, RunOptions{});
  const double conservation = measure_conservation(traj);

  VerifyReport out;
  nlohmann::ordered_json checks;
  checks["unitarity"] = {{"max_drift", unitarity},
                         {"threshold", kUnitarityTol},
                         {"pass", unitarity <= kUnitarityTol}};
  checks["conservation"] = {{"residual", conservation},
                            {"threshold", kConservationTol},
                            {"pass", conservation <= kConservationTol}};

  // Independent route: integrate dM/dt = i M H_R directly and compare the
  // propagator entries at matching times.  Horizon capped so the default
  // fixed step stays affordable on any scenario grid.
  const double t_oracle = std::min(sc.grid.t_end, 20.0);
  OdeSpec ospec;
  ospec.t_end = t_oracle;
  std::vector<double> probe;
  for (int k = 1; k <= 20; ++k) probe.push_back(t_oracle * k / 20.0);
  bool oracle_pass = false;
  try {
    const ReducedHamiltonian h = build_hamiltonian(sys, bath);
    const OdeResult ode = propagate_ode(h, ospec, probe);
    double dev = 0;
    for (size_t k = 0; k < ode.samples.size(); ++k) {
      const MatrixXc<double> m = m_matrix(prop, ode.sample_times[k]);
      dev = std::max(dev, (m - ode.samples[k]).cwiseAbs().maxCoeff());
    }
    oracle_pass = dev <= kOracleTol;
    checks["oracle"] = {{"status", oracle_pass ? "ok" : "threshold_exceeded"},
                        {"max_deviation", dev},
                        {"threshold", kOracleTol},
                        {"t_end", t_oracle},
                        {"step", ode.step_used},
                        {"halvings", ode.halvings},
                        {"pass", oracle_pass}};
  } catch (const OdeError& e) {
    // step control gave up: distinct from a plain threshold failure
    checks["oracle"] = {{"status", "step_control_failure"},
                        {"message", e.what()},
                        {"threshold", kOracleTol},
                        {"pass", false}};
  }

  out.pass = checks["unitarity"]["pass"].get<bool>() &&
             checks["conservation"]["pass"].get<bool>() &&
             checks["oracle"]["pass"].get<bool>();
  out.report["scenario"] = sc.stem;
  out.report["checks"] = checks;
  out.report["pass"] = out.pass;

  detail::write_json_file(out_dir / (sc.stem + "_verify.json"), out.report);
  if (!quiet)
    std::cout << sc.stem << ": verify " << (out.pass ? "PASS" : "FAIL") << "\n";
  return out;
}

// The `kernel` command: comparison CSV over [0, tau_max/2].
inline std::filesystem::path kernel_command(const Scenario& sc,
                                            const std::filesystem::path& out_dir) {
  detail::ensure_dir(out_dir);
  const DiscretizedBath bath = discretize(sc.spectral, sc.bath);
  const double tau_max = resolution_report(bath).tau_max;
  const auto path = out_dir / (sc.stem + "_kernel.csv");
  detail::write_text_file(
      path, kernel_csv(sc.spectral, bath, tau_max / 2, sc.grid.n_points));
  return path;
}

enum class SweepAxis { G0, Gamma, Temperature };

inline const char* to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::G0: return "g0";
    case SweepAxis::Gamma: return "gamma";
    case SweepAxis::Temperature: return "temperature";
  }
  return "?";
}

// Run the base scenario once per axis value.  Points are independent and run
// concurrently when asked; per-point files are named by the axis value, and
// the summary is assembled in ascending value order regardless of completion
// order.
inline nlohmann::ordered_json sweep(const Scenario& base, SweepAxis axis,
                                    std::vector<double> values,
                                    const std::filesystem::path& out_dir,
                                    int threads = 1, bool quiet = true) {
  if (values.empty()) throw SchemaError("sweep: --values must be nonempty");
  for (double v : values)
    if (!std::isfinite(v)) throw SchemaError("sweep: values must be finite");
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  detail::ensure_dir(out_dir);

  std::vector<Scenario> points;
  for (double v : values) {
    Scenario sc = base;
    switch (axis) {
      case SweepAxis::G0:
        sc.spectral.g0 = v;
        sc.raw["spectral"]["g0"] = v;
        break;
      case SweepAxis::Gamma:
        sc.spectral.gamma = v;
        sc.raw["spectral"]["gamma"] = v;
        break;
      case SweepAxis::Temperature:
        sc.bath.temperature = v;
        sc.raw["bath"]["temperature"] = v;
        break;
    }
    sc.stem = base.stem + "_" + to_string(axis) + "_" + detail::value_token(v);
    try {
      sc.spectral.validate();
      sc.bath.validate();
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("sweep: ") + e.what());
    }
    points.push_back(std::move(sc));
  }

  std::vector<RunArtifacts> arts(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      try {
        arts[i] = run_scenario(points[i], out_dir, /*quiet=*/true);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers =
      std::clamp(threads, 1, static_cast<int>(points.size()));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  nlohmann::ordered_json summary;
  summary["axis"] = to_string(axis);
  summary["scenario"] = base.stem;
  summary["values"] = values;
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (size_t i = 0; i < points.size(); ++i) {
    const auto& traj = arts[i].trajectory;
    std::vector<double> final_occ;
    const int last = static_cast<int>(traj.times.size()) - 1;
    for (int l = 0; l < traj.system_occupations.cols(); ++l)
      final_occ.push_back(traj.system_occupations(last, l));
    runs.push_back({{"value", values[i]},
                    {"trajectory_csv", arts[i].trajectory_csv.filename().string()},
                    {"manifest", arts[i].manifest_path.filename().string()},
                    {"final_occupations", final_occ}});
    if (!quiet)
      std::cout << "sweep: " << to_string(axis) << " = " << values[i]
                << " -> " << arts[i].trajectory_csv.filename().string() << "\n";
  }
  summary["runs"] = runs;

  detail::write_json_file(out_dir / (base.stem + "_sweep.json"), summary);
  return summary;
}

}  // namespace dem
