// Reproducible experiment runner: JSON run configs, experiment dispatch,
// CSV tables (RFC 4180, 12 significant digits) and JSON sidecars.
#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kerrw/asymptotic.hpp"
#include "kerrw/dynamics.hpp"
#include "kerrw/gaussian.hpp"
#include "kerrw/wigner.hpp"

namespace kerrw::harness {

using nlohmann::json;

struct RunConfig {
  std::string experiment;

  ModelParams model;

  std::string state_kind = "squeezed_vacuum";
  GaussianSpec spec;
  int number_level = 0;

  int n_max = 0;  // 0 = automatic
  double tail_threshold = 1e-8;

  std::vector<double> scaled_times;
  std::string axis = "gts4";  // gts4 | gt | gts4_per_sigma2
  std::vector<double> decay_times;

  bool auto_grid = true;
  int n_x = 301, n_y = 301;
  double x_ext = 4.0, y_ext = 4.0;
  double dx_scaled = 0.1, dy_scaled = 0.025;

  Tolerances tol;

  std::vector<double> r0_list, alpha0_list, tau0_list, damping_list, dephasing_list;
  double nbar_env = 1000.0;
  double gts4_max = 1.5;
  std::string table;
  std::string decoherence = "damping";

  std::string out_prefix = "run";
  json raw;
};

// ---------------------------------------------------------------------------
// Config parsing

namespace cfgdetail {

inline double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("config: ") + key + " must be a number");
  return j[key].get<double>();
}

inline std::vector<double> num_list(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw ConfigError(std::string("config: ") + key + " must be an array");
  for (const auto& v : j[key]) {
    if (!v.is_number()) throw ConfigError(std::string("config: ") + key + " holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace cfgdetail

inline RunConfig parse_config(const json& j) {
  using namespace cfgdetail;
  RunConfig c;
  c.raw = j;
  if (!j.contains("experiment") || !j["experiment"].is_string())
    throw ConfigError("config: missing experiment kind");
  c.experiment = j["experiment"].get<std::string>();

  const json model = j.value("model", json::object());
  c.model.kerr_rate = num(model, "g", 1.0);
  c.model.damping_rate = num(model, "gamma", 0.0);
  c.model.bath_occupancy = num(model, "nbar", 0.0);
  c.model.dephasing_rate = num(model, "gamma_phi", 0.0);
  c.model.harmonic_rate = num(model, "omega", 0.0);
  c.model.parametric_drive = Complex(num(model, "eta_re", 0.0), num(model, "eta_im", 0.0));
  try {
    check_model(c.model);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  const json state = j.value("state", json::object());
  c.state_kind = state.value("kind", std::string("squeezed_vacuum"));
  c.spec.r0 = num(state, "r0", 0.0);
  c.spec.theta0 = num(state, "theta0", 0.0);
  c.spec.nbar0 = num(state, "nbar0", 0.0);
  c.spec.alpha0 = Complex(num(state, "alpha_re", 0.0), num(state, "alpha_im", 0.0));
  c.number_level = static_cast<int>(num(state, "number", 0.0));
  if (c.spec.r0 < 0.0 || c.spec.nbar0 < 0.0 || c.number_level < 0)
    throw ConfigError("config: invalid state parameters");

  const json basis = j.value("basis", json::object());
  c.n_max = static_cast<int>(num(basis, "n_max", 0.0));
  c.tail_threshold = num(basis, "tail_threshold", 1e-8);
  if (c.n_max < 0 || c.tail_threshold <= 0.0)
    throw ConfigError("config: invalid basis block");

  const json times = j.value("times", json::object());
  c.scaled_times = num_list(times, "scaled");
  c.decay_times = num_list(times, "decay");
  c.axis = times.value("axis", std::string("gts4"));
  if (c.axis != "gts4" && c.axis != "gt" && c.axis != "gts4_per_sigma2")
    throw ConfigError("config: unknown time axis");
  for (size_t i = 1; i < c.scaled_times.size(); ++i)
    if (c.scaled_times[i] <= c.scaled_times[i - 1])
      throw ConfigError("config: scaled times must be strictly increasing");

  const json grid = j.value("grid", json::object());
  c.auto_grid = grid.value("auto", true);
  c.n_x = static_cast<int>(num(grid, "n_x", 301.0));
  c.n_y = static_cast<int>(num(grid, "n_y", 301.0));
  c.x_ext = num(grid, "x_ext", 4.0);
  c.y_ext = num(grid, "y_ext", 4.0);
  c.dx_scaled = num(grid, "dx_scaled", 0.1);
  c.dy_scaled = num(grid, "dy_scaled", 0.025);
  if (c.n_x < 2 || c.n_y < 2 || c.dx_scaled <= 0.0 || c.dy_scaled <= 0.0)
    throw ConfigError("config: invalid grid block");

  const json solver = j.value("solver", json::object());
  c.tol.rtol = num(solver, "rtol", 1e-8);
  c.tol.atol = num(solver, "atol", 1e-12);
  if (c.tol.rtol <= 0.0 || c.tol.atol <= 0.0)
    throw ConfigError("config: tolerances must be positive");

  const json sweep = j.value("sweep", json::object());
  c.r0_list = num_list(sweep, "r0");
  c.alpha0_list = num_list(sweep, "alpha0");
  c.tau0_list = num_list(sweep, "tau0");
  c.damping_list = num_list(sweep, "damping");
  c.dephasing_list = num_list(sweep, "dephasing");
  c.nbar_env = num(sweep, "nbar_env", 1000.0);
  c.gts4_max = num(sweep, "gts4_max", 1.5);
  c.table = sweep.value("table", std::string(""));
  c.decoherence = sweep.value("decoherence", std::string("damping"));
  if (c.decoherence != "damping" && c.decoherence != "dephasing")
    throw ConfigError("config: decoherence must be damping or dephasing");

  c.out_prefix = j.value("output", json::object()).value("prefix", std::string("run"));
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

// ---------------------------------------------------------------------------
// Result tables and serialization

struct ExperimentResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  json summary;
  std::string aux_name;  // optional second table
  std::vector<std::string> aux_columns;
  std::vector<std::vector<double>> aux_rows;
};

inline std::string csv_text(const std::vector<std::string>& columns,
                            const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) {
    out += columns[i];
    out += (i + 1 < columns.size()) ? "," : "\r\n";
  }
  char buf[64];
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw NumericalError("csv_text: row width differs from the header");
    for (size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", row[i]);
      out += buf;
      out += (i + 1 < row.size()) ? "," : "\r\n";
    }
  }
  return out;
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  return hash;
}

// ---------------------------------------------------------------------------
// Shared machinery

// Basis size policy: N = max(40, ceil(12 sigma^2 sinh^2 r0 + 8 |alpha0|^2 + 20)),
// followed by the tail check at construction.
inline int auto_basis_size(const GaussianSpec& spec) {
  const double sig2 = 2.0 * spec.nbar0 + 1.0;
  const double sh = std::sinh(spec.r0);
  const double guess = 12.0 * sig2 * sh * sh + 8.0 * std::norm(spec.alpha0) + 20.0;
  return std::max(40, static_cast<int>(std::ceil(guess)));
}

inline int basis_size_for(const RunConfig& c) {
  if (c.n_max > 0) return c.n_max;
  if (c.state_kind == "number") return std::max(40, c.number_level + 20);
  if (c.state_kind == "coherent") {
    GaussianSpec s;
    s.alpha0 = c.spec.alpha0;
    return auto_basis_size(s);
  }
  return auto_basis_size(c.spec);
}

// Single-attempt construction at the given size.
inline DensityMatrix build_initial_at(const RunConfig& c, int n) {
  Dim dim(n);
  if (c.state_kind == "vacuum") return pure_density(vacuum_state(dim));
  if (c.state_kind == "number")
    return pure_density(number_state(dim, c.number_level));
  if (c.state_kind == "coherent")
    return pure_density(coherent_state(dim, c.spec.alpha0, c.tail_threshold));
  if (c.state_kind == "squeezed_vacuum")
    return pure_density(squeezed_vacuum_state(
        dim, std::polar(c.spec.r0, c.spec.theta0), c.tail_threshold));
  if (c.state_kind == "thermal") return thermal_state(dim, c.spec.nbar0, c.tail_threshold);
  if (c.state_kind == "squeezed_thermal")
    return squeezed_thermal_state(dim, c.spec.nbar0,
                                  std::polar(c.spec.r0, c.spec.theta0), c.tail_threshold);
  if (c.state_kind == "displaced_squeezed_thermal")
    return displaced_squeezed_thermal_state(dim, c.spec, c.tail_threshold);
  throw ConfigError("config: unknown state kind " + c.state_kind);
}

// The auto-sized basis is grown until the configured tail threshold is met;
// an explicitly configured n_max is used as-is (and may raise).
inline DensityMatrix build_initial(const RunConfig& c, int n) {
  if (c.n_max > 0) return build_initial_at(c, n);
  for (int attempt = 0; attempt < 8; ++attempt) {
    try {
      return build_initial_at(c, n);
    } catch (const TruncationError&) {
      n = static_cast<int>(std::ceil(n * 1.25));
    }
  }
  return build_initial_at(c, n);
}

// Grid for one evaluation: extents from the actual second moments (with the
// margin the extent pre-check needs), spacing from the squeezed-axis
// resolution targets.
inline PhaseGrid grid_for_state(const DensityMatrix& rho, double dx, double dy) {
  QuadratureMoments m = quadrature_moments(rho);
  auto extent = [](double mean, double var) {
    const double std = std::sqrt(std::max(var, 1e-6));
    const double ext =
        std::max(4.0 * std + 2.0, std::abs(mean) + 3.6 * std::sqrt(2.0) * std + 0.25);
    // phase-space radii beyond ~21 leave the double-precision envelope of
    // the transition-probability recurrence; the extent check still fires
    // if a state genuinely needs more
    return std::min(ext, 21.5);
  };
  const double xe = extent(m.mean_x, m.var_x);
  const double ye = extent(m.mean_y, m.var_y);
  const int nx = std::max(61, 2 * static_cast<int>(std::ceil(xe / dx)) + 1);
  const int ny = std::max(61, 2 * static_cast<int>(std::ceil(ye / dy)) + 1);
  return PhaseGrid(nx, ny, xe, ye);
}

inline PhaseGrid pick_grid(const RunConfig& c, const DensityMatrix& rho) {
  if (!c.auto_grid) return PhaseGrid(c.n_x, c.n_y, c.x_ext, c.y_ext);
  const double s = c.spec.squeeze_factor();
  const double sig = c.spec.thermal_width();
  double dx = c.dx_scaled, dy = c.dy_scaled;
  if (c.state_kind == "squeezed_vacuum" || c.state_kind == "squeezed_thermal") {
    dx = c.dx_scaled * sig / s;
    dy = c.dy_scaled * s * sig;
  }
  return grid_for_state(rho, dx, dy);
}

inline NegativityReport negativity_of_state(const RunConfig& c, const DensityMatrix& rho) {
  return negativity(wigner_grid(rho, pick_grid(c, rho)));
}

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

inline bool pure_kerr(const ModelParams& p) {
  return p.damping_rate == 0.0 && p.dephasing_rate == 0.0 &&
         p.harmonic_rate == 0.0 && p.parametric_drive == Complex(0.0, 0.0);
}

// Physical time per unit of the configured axis.
inline double axis_to_seconds(const RunConfig& c, const GaussianSpec& spec) {
  const double g = c.model.kerr_rate;
  if (g <= 0.0)
    throw ConfigError("scaled time axes need a positive kerr rate");
  const double s4 = std::pow(spec.squeeze_factor(), 4.0);
  const double sig2 = spec.thermal_width() * spec.thermal_width();
  if (c.axis == "gt") return 1.0 / g;
  if (c.axis == "gts4") return 1.0 / (g * s4);
  return sig2 / (g * s4);  // gts4_per_sigma2
}

struct NegCurve {
  std::vector<double> axis, n_vol, n_peak, converged;
};

// Negativity along the configured times; exact propagator for pure Kerr,
// the BDF integrator otherwise.
inline NegCurve negativity_curve(const RunConfig& c, const GaussianSpec& spec,
                                 const DensityMatrix& rho0) {
  NegCurve out;
  const double unit = axis_to_seconds(c, spec);
  std::vector<DensityMatrix> states;
  if (pure_kerr(c.model)) {
    states.reserve(c.scaled_times.size());
    for (double a : c.scaled_times)
      states.push_back(apply_kerr(rho0, c.model.kerr_rate, a * unit));
  } else {
    std::vector<double> times;
    bool has_zero = !c.scaled_times.empty() && c.scaled_times.front() == 0.0;
    times.reserve(c.scaled_times.size() + 1);
    if (!has_zero) times.push_back(0.0);
    for (double a : c.scaled_times) times.push_back(a * unit);
    Trajectory traj = evolve(rho0, c.model, times, c.tol, c.tail_threshold);
    states.assign(traj.states.begin() + (has_zero ? 0 : 1), traj.states.end());
  }
  for (size_t i = 0; i < states.size(); ++i) {
    NegativityReport rep = negativity_of_state(c, states[i]);
    out.axis.push_back(c.scaled_times[i]);
    out.n_vol.push_back(rep.n_vol);
    out.n_peak.push_back(rep.n_peak);
    out.converged.push_back(rep.converged ? 1.0 : 0.0);
  }
  return out;
}

// Maximum of N_vol over the scaled time gts4 in (0, gts4_max]: coarse scan
// plus golden-section refinement, restarting the integrator from the
// nearest stored coarse state.
struct MaxSearch {
  double gts4_at_max = 0.0;
  double max_n_vol = 0.0;
  double max_n_peak = 0.0;
  bool converged = true;
};

inline MaxSearch max_negvol_search(const RunConfig& c, const GaussianSpec& spec,
                                   const DensityMatrix& rho0, int coarse = 13) {
  const double g = c.model.kerr_rate;
  const double unit = 1.0 / (g * std::pow(spec.squeeze_factor(), 4.0));
  std::vector<double> taus(coarse);
  for (int i = 0; i < coarse; ++i) taus[i] = c.gts4_max * (i + 1.0) / coarse;

  std::vector<DensityMatrix> coarse_states;
  if (pure_kerr(c.model)) {
    for (double tau : taus) coarse_states.push_back(apply_kerr(rho0, g, tau * unit));
  } else {
    std::vector<double> times{0.0};
    for (double tau : taus) times.push_back(tau * unit);
    Trajectory traj = evolve(rho0, c.model, times, c.tol, c.tail_threshold);
    coarse_states.assign(traj.states.begin() + 1, traj.states.end());
  }

  MaxSearch out;
  std::vector<double> vols(coarse);
  bool all_conv = true;
  int best = 0;
  for (int i = 0; i < coarse; ++i) {
    NegativityReport rep = negativity_of_state(c, coarse_states[i]);
    vols[i] = rep.n_vol;
    all_conv = all_conv && rep.converged;
    out.max_n_peak = std::max(out.max_n_peak, rep.n_peak);
    if (vols[i] > vols[best]) best = i;
  }
  out.max_n_vol = vols[best];
  out.gts4_at_max = taus[best];

  auto state_at = [&](double tau) {
    // continue from the nearest stored state at or below tau
    int base = -1;
    for (int i = 0; i < coarse; ++i)
      if (taus[i] <= tau + 1e-12) base = i;
    const DensityMatrix& from = (base < 0) ? rho0 : coarse_states[base];
    const double t0 = (base < 0) ? 0.0 : taus[base];
    const double dt = (tau - t0) * unit;
    if (dt <= 0.0) return from;
    if (pure_kerr(c.model)) return apply_kerr(from, g, dt);
    Trajectory seg = evolve(from, c.model, {0.0, dt}, c.tol, c.tail_threshold);
    return seg.states.back();
  };
  auto eval = [&](double tau) {
    NegativityReport rep = negativity_of_state(c, state_at(tau));
    all_conv = all_conv && rep.converged;
    out.max_n_peak = std::max(out.max_n_peak, rep.n_peak);
    return rep.n_vol;
  };

  double lo = taus[std::max(0, best - 1)];
  double hi = taus[std::min(coarse - 1, best + 1)];
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = eval(x1), f2 = eval(x2);
  while (hi - lo > 0.02 * c.gts4_max) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = eval(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = eval(x1);
    }
    if (std::max(f1, f2) > out.max_n_vol) {
      out.max_n_vol = std::max(f1, f2);
      out.gts4_at_max = (f1 > f2) ? x1 : x2;
    }
  }
  out.converged = all_conv;
  return out;
}

inline AsymptoticParams asymptotic_from(const RunConfig& c, const GaussianSpec& spec,
                                        double damping_eff_over_gs2,
                                        double dephasing_over_g) {
  AsymptoticParams p;
  p.squeeze_factor = spec.squeeze_factor();
  p.thermal_width = spec.thermal_width();
  p.kerr_rate = c.model.kerr_rate;
  const double s2 = p.squeeze_factor * p.squeeze_factor;
  p.damping_rate_eff = damping_eff_over_gs2 * p.kerr_rate * s2;
  p.dephasing_rate = dephasing_over_g * p.kerr_rate;
  return p;
}

}  // namespace detail

// evolve: integrate and report fidelity to the initial state, purity and
// trace along the configured gt grid.
inline ExperimentResult experiment_evolve(const RunConfig& c) {
  if (c.scaled_times.empty()) throw ConfigError("evolve: no times given");
  const int n = basis_size_for(c);
  DensityMatrix rho0 = build_initial(c, n);
  const double unit = 1.0 / c.model.kerr_rate;
  std::vector<double> times{0.0};
  for (double a : c.scaled_times)
    if (a > 0.0) times.push_back(a * unit);
  Trajectory traj = evolve(rho0, c.model, times, c.tol, c.tail_threshold);

  ExperimentResult res;
  res.columns = {"gt", "fidelity_to_initial", "purity", "trace"};
  for (size_t i = 0; i < traj.times.size(); ++i) {
    const DensityMatrix& st = traj.states[i];
    const double fid = (st.elements * rho0.elements).trace().real();
    res.rows.push_back({traj.times[i] * c.model.kerr_rate, fid, st.purity(),
                        st.trace().real()});
  }
  res.summary["steps"] = traj.stats.steps;
  res.summary["rejected_steps"] = traj.stats.rejected_steps;
  res.summary["max_trace_drift"] = traj.stats.max_trace_drift;
  return res;
}

// negativity-vs-time for the configured initial state.
inline ExperimentResult experiment_negativity_vs_time(const RunConfig& c) {
  if (c.scaled_times.empty()) throw ConfigError("negativity-vs-time: no times given");
  const int n = basis_size_for(c);
  DensityMatrix rho0 = build_initial(c, n);
  detail::NegCurve curve = detail::negativity_curve(c, c.spec, rho0);
  ExperimentResult res;
  res.columns = {c.axis, "n_vol", "n_peak", "converged"};
  for (size_t i = 0; i < curve.axis.size(); ++i)
    res.rows.push_back({curve.axis[i], curve.n_vol[i], curve.n_peak[i], curve.converged[i]});
  res.summary["n_max"] = rho0.dim();
  return res;
}

// scaled-collapse: negativity curves on the rescaled time axis for every
// squeezing in the sweep.
inline ExperimentResult experiment_scaled_collapse(const RunConfig& c) {
  if (c.r0_list.empty()) throw ConfigError("scaled-collapse: sweep.r0 is empty");
  if (c.scaled_times.empty()) throw ConfigError("scaled-collapse: no times given");
  ExperimentResult res;
  res.columns = {"r0", "gts4_per_sigma2", "gts4", "n_vol", "n_peak",
                 "sigma2_n_peak", "converged"};
  for (double r0 : c.r0_list) {
    RunConfig local = c;
    local.spec.r0 = r0;
    local.axis = "gts4_per_sigma2";
    const int n = basis_size_for(local);
    DensityMatrix rho0 = build_initial(local, n);
    detail::NegCurve curve = detail::negativity_curve(local, local.spec, rho0);
    const double sig2 = local.spec.thermal_width() * local.spec.thermal_width();
    for (size_t i = 0; i < curve.axis.size(); ++i)
      res.rows.push_back({r0, curve.axis[i], curve.axis[i] * sig2, curve.n_vol[i],
                          curve.n_peak[i], curve.n_peak[i] * sig2, curve.converged[i]});
  }
  return res;
}

// kerr-decay: squeezed Kerr states decaying under damping or dephasing;
// growth and decay branches on the shared neutral axis.
inline ExperimentResult experiment_kerr_decay(const RunConfig& c) {
  if (c.tau0_list.empty()) throw ConfigError("kerr-decay: sweep.tau0 is empty");
  if (c.decay_times.empty()) throw ConfigError("kerr-decay: times.decay is empty");
  const double g = c.model.kerr_rate;
  const double s = c.spec.squeeze_factor();
  const double s2 = s * s, s4 = s2 * s2;

  RunConfig base = c;
  base.state_kind = "squeezed_vacuum";
  const int n = basis_size_for(base);
  DensityMatrix rho0 = build_initial(base, n);

  ExperimentResult res;
  res.columns = {"stage", "tau0", "neutral_axis", "n_vol", "n_peak", "converged"};

  // growth branch at the anchor times (unitary, exact)
  for (double tau0 : c.tau0_list) {
    DensityMatrix st = apply_kerr(rho0, g, tau0 / (g * s4));
    NegativityReport rep = negativity_of_state(base, st);
    res.rows.push_back({0.0, tau0, tau0, rep.n_vol, rep.n_peak,
                        rep.converged ? 1.0 : 0.0});
  }

  // decay branches: axis offsets measure gamma (2 nbar + 1) t s^2 for
  // damping or gamma_phi t s^4 for dephasing; neutral axis per the
  // growth/decay identification
  for (double tau0 : c.tau0_list) {
    DensityMatrix anchor = apply_kerr(rho0, g, tau0 / (g * s4));
    if (c.decoherence == "dephasing") {
      const double gphi = (c.model.dephasing_rate > 0.0) ? c.model.dephasing_rate : g;
      for (double off : c.decay_times) {
        if (off <= 0.0) continue;
        const double t = off / (gphi * s4);
        DensityMatrix st = dephasing_closed_form(anchor, 0.0, gphi, t);
        NegativityReport rep = negativity_of_state(base, st);
        res.rows.push_back({1.0, tau0, tau0 + off, rep.n_vol, rep.n_peak,
                            rep.converged ? 1.0 : 0.0});
      }
    } else {
      ModelParams damp;
      damp.damping_rate = (c.model.damping_rate > 0.0) ? c.model.damping_rate : g;
      damp.bath_occupancy = c.nbar_env;
      const double rate = damp.damping_rate * (2.0 * c.nbar_env + 1.0) * s2;
      std::vector<double> times{0.0};
      for (double off : c.decay_times)
        if (off > 0.0) times.push_back(off / rate);
      Trajectory traj = evolve(anchor, damp, times, c.tol, c.tail_threshold);
      for (size_t i = 1; i < traj.times.size(); ++i) {
        NegativityReport rep = negativity_of_state(base, traj.states[i]);
        res.rows.push_back({1.0, tau0, tau0 + traj.times[i] * rate, rep.n_vol,
                            rep.n_peak, rep.converged ? 1.0 : 0.0});
      }
    }
  }
  res.summary["n_max"] = rho0.dim();
  res.summary["neutral_axis"] = "gts4 on growth; decay offsets share the unit";
  return res;
}

// max-negvol-vs-damping: maximum negative volume against the effective
// damping rate, with the spectral-solver overlay.
inline ExperimentResult experiment_max_negvol_vs_damping(const RunConfig& c) {
  if (c.r0_list.empty()) throw ConfigError("max-negvol-vs-damping: sweep.r0 is empty");
  if (c.damping_list.empty())
    throw ConfigError("max-negvol-vs-damping: sweep.damping is empty");
  ExperimentResult res;
  res.columns = {"r0", "damping_eff_over_gs2", "max_n_vol", "max_n_peak",
                 "gts4_at_max", "asymptotic_max_n_vol", "converged"};
  for (double r0 : c.r0_list) {
    RunConfig local = c;
    local.spec.r0 = r0;
    local.state_kind = "squeezed_vacuum";
    const int n = basis_size_for(local);
    DensityMatrix rho0 = build_initial(local, n);
    const double s2 = std::exp(2.0 * r0);
    for (double rate : c.damping_list) {
      RunConfig cell = local;
      if (rate > 0.0) {
        cell.model.bath_occupancy = c.nbar_env;
        cell.model.damping_rate =
            rate * cell.model.kerr_rate * s2 / (2.0 * c.nbar_env + 1.0);
      }
      detail::MaxSearch found = detail::max_negvol_search(cell, cell.spec, rho0);
      AsymptoticParams ap = detail::asymptotic_from(cell, cell.spec, rate, 0.0);
      const double asym = asymptotic_max_negvol(ap, c.gts4_max);
      res.rows.push_back({r0, rate, found.max_n_vol, found.max_n_peak,
                          found.gts4_at_max, asym, found.converged ? 1.0 : 0.0});
    }
  }
  return res;
}

// max-negativity-contour: the damping x dephasing table per squeezing, with
// monotonicity flags and the additive-model residual diagnostic.
inline ExperimentResult experiment_max_negativity_contour(const RunConfig& c) {
  if (c.r0_list.empty() || c.damping_list.empty() || c.dephasing_list.empty())
    throw ConfigError("max-negativity-contour: sweep lists must be non-empty");
  ExperimentResult res;
  res.columns = {"r0", "damping_eff_over_gs2", "dephasing_over_g", "max_n_vol",
                 "max_n_peak", "asymptotic_max_n_vol", "converged"};
  for (double r0 : c.r0_list) {
    RunConfig local = c;
    local.spec.r0 = r0;
    local.state_kind = "squeezed_vacuum";
    const int n = basis_size_for(local);
    DensityMatrix rho0 = build_initial(local, n);
    const double s2 = std::exp(2.0 * r0);
    std::vector<std::vector<double>> cells;
    for (double damp : c.damping_list)
      for (double deph : c.dephasing_list) {
        RunConfig cell = local;
        if (damp > 0.0) {
          cell.model.bath_occupancy = c.nbar_env;
          cell.model.damping_rate =
              damp * cell.model.kerr_rate * s2 / (2.0 * c.nbar_env + 1.0);
        }
        cell.model.dephasing_rate = deph * cell.model.kerr_rate;
        detail::MaxSearch found = detail::max_negvol_search(cell, cell.spec, rho0);
        AsymptoticParams ap = detail::asymptotic_from(cell, cell.spec, damp, deph);
        const double asym = asymptotic_max_negvol(ap, c.gts4_max);
        res.rows.push_back({r0, damp, deph, found.max_n_vol, found.max_n_peak, asym,
                            found.converged ? 1.0 : 0.0});
        cells.push_back({damp, deph, found.max_n_vol});
      }

    // additive row/column fit of the r0 block: a large interaction residual
    // means the two decoherence channels do not combine additively
    const size_t nd = c.damping_list.size(), np = c.dephasing_list.size();
    std::vector<double> row_mean(nd, 0.0), col_mean(np, 0.0);
    double total = 0.0;
    for (size_t i = 0; i < nd; ++i)
      for (size_t j = 0; j < np; ++j) {
        const double v = cells[i * np + j][2];
        row_mean[i] += v / np;
        col_mean[j] += v / nd;
        total += v / (nd * np);
      }
    double interaction = 0.0;
    for (size_t i = 0; i < nd; ++i)
      for (size_t j = 0; j < np; ++j)
        interaction = std::max(
            interaction,
            std::abs(cells[i * np + j][2] - row_mean[i] - col_mean[j] + total));
    res.summary["additive_fit_residual"][std::to_string(r0)] = interaction;

    // negativity must not increase in either decoherence rate
    bool monotone = true;
    for (size_t i = 0; i < nd; ++i)
      for (size_t j = 0; j < np; ++j) {
        if (i > 0 && cells[i * np + j][2] > cells[(i - 1) * np + j][2] + 1e-6)
          monotone = false;
        if (j > 0 && cells[i * np + j][2] > cells[i * np + j - 1][2] + 1e-6)
          monotone = false;
      }
    res.summary["monotone_in_rates"][std::to_string(r0)] = monotone;
  }
  return res;
}

// coherent-plateau: plateau heights over alpha0 plus the short-time scaled
// curves; the linear fit lands in the summary.
inline ExperimentResult experiment_coherent_plateau(const RunConfig& c) {
  if (c.alpha0_list.empty()) throw ConfigError("coherent-plateau: sweep.alpha0 is empty");
  ExperimentResult res;
  res.columns = {"alpha0", "max_n_vol", "gt_at_max"};
  res.aux_name = "shorttime";
  res.aux_columns = {"alpha0", "gt_alpha32", "n_vol", "n_vol_over_alpha2", "converged"};

  const double g = c.model.kerr_rate;
  for (double a0 : c.alpha0_list) {
    if (a0 < 1.5) throw ConfigError("coherent-plateau: alpha0 below 1.5 is ill-defined");
    RunConfig local = c;
    local.state_kind = "coherent";
    local.spec = GaussianSpec{};
    local.spec.alpha0 = a0;
    const int n = basis_size_for(local);
    DensityMatrix rho0 = build_initial(local, n);

    // coarse scan of the half period (the evolution mirrors around pi/2g)
    const int coarse = 25;
    std::vector<double> gts(coarse);
    for (int i = 0; i < coarse; ++i) gts[i] = 0.5 * pi * (i + 1.0) / coarse;
    int best = 0;
    std::vector<double> vols(coarse);
    for (int i = 0; i < coarse; ++i) {
      DensityMatrix st = apply_kerr(rho0, g, gts[i] / g);
      vols[i] = negativity_of_state(local, st).n_vol;
      if (vols[i] > vols[best]) best = i;
    }
    double lo = gts[std::max(0, best - 1)], hi = gts[std::min(coarse - 1, best + 1)];
    auto eval = [&](double gt) {
      return negativity_of_state(local, apply_kerr(rho0, g, gt / g)).n_vol;
    };
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = eval(x1), f2 = eval(x2);
    double max_vol = vols[best], at = gts[best];
    while (hi - lo > 0.01) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = eval(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = eval(x1);
      }
      if (std::max(f1, f2) > max_vol) {
        max_vol = std::max(f1, f2);
        at = (f1 > f2) ? x1 : x2;
      }
    }
    res.rows.push_back({a0, max_vol, at});

    // short-time collapse data on the gt alpha0^(3/2) axis
    for (double axis : c.scaled_times) {
      const double gt = axis / std::pow(a0, 1.5);
      DensityMatrix st = apply_kerr(rho0, g, gt / g);
      NegativityReport rep = negativity_of_state(local, st);
      res.aux_rows.push_back({a0, axis, rep.n_vol, rep.n_vol / (a0 * a0),
                              rep.converged ? 1.0 : 0.0});
    }
  }

  // least-squares line through (alpha0, max_n_vol)
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = double(res.rows.size());
  for (const auto& row : res.rows) {
    sx += row[0];
    sy += row[1];
    sxx += row[0] * row[0];
    sxy += row[0] * row[1];
  }
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / m;
  res.summary["fit"]["slope"] = slope;
  res.summary["fit"]["intercept"] = intercept;
  return res;
}

// asymptotic-compare: full simulation against the spectral solver on the
// same scaled times.
inline ExperimentResult experiment_asymptotic_compare(const RunConfig& c) {
  if (c.scaled_times.empty()) throw ConfigError("asymptotic-compare: no times given");
  RunConfig local = c;
  local.axis = "gts4";
  const int n = basis_size_for(local);
  DensityMatrix rho0 = build_initial(local, n);
  detail::NegCurve full = detail::negativity_curve(local, local.spec, rho0);

  const double s2 = local.spec.squeeze_factor() * local.spec.squeeze_factor();
  const double damp_over_gs2 =
      local.model.damping_rate * (2.0 * local.model.bath_occupancy + 1.0) /
      (local.model.kerr_rate * s2);
  AsymptoticParams ap = detail::asymptotic_from(
      local, local.spec, damp_over_gs2,
      local.model.dephasing_rate / local.model.kerr_rate);
  AsymptoticNegativity asym = asymptotic_negativity(ap, c.scaled_times);

  ExperimentResult res;
  res.columns = {"gts4", "n_vol_full", "n_peak_full", "n_vol_asym",
                 "sigma2_n_peak_asym", "converged"};
  for (size_t i = 0; i < c.scaled_times.size(); ++i)
    res.rows.push_back({c.scaled_times[i], full.n_vol[i], full.n_peak[i],
                        asym.n_vol[i], asym.sigma2_n_peak[i], full.converged[i]});
  return res;
}

// table-gen: the squeezing and scaled-decay-time reference tables.
inline ExperimentResult experiment_table_gen(const RunConfig& c) {
  ExperimentResult res;
  std::vector<double> r0s = c.r0_list;
  if (c.table == "squeezing-table") {
    if (r0s.empty()) r0s = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5};
    res.columns = {"r0", "s"};
    for (double r0 : r0s) res.rows.push_back({r0, std::exp(r0)});
  } else if (c.table == "decay-table") {
    if (r0s.empty()) r0s = {0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
    res.columns = {"r0", "scaled_t_decay"};
    const double gamma = (c.model.damping_rate > 0.0) ? c.model.damping_rate : 1.0;
    const double nbar = (c.nbar_env > 0.0) ? c.nbar_env : 1000.0;
    for (double r0 : r0s) {
      const double s2 = std::exp(2.0 * r0);
      const double scaled =
          gamma * (2.0 * nbar + 1.0) * s2 * t_decay_high_temp(gamma, nbar);
      res.rows.push_back({r0, scaled});
    }
  } else {
    throw ConfigError("table-gen: unknown table " + c.table);
  }
  return res;
}

inline ExperimentResult run_experiment(const RunConfig& c) {
  if (c.experiment == "evolve") return experiment_evolve(c);
  if (c.experiment == "negativity-vs-time") return experiment_negativity_vs_time(c);
  if (c.experiment == "scaled-collapse") return experiment_scaled_collapse(c);
  if (c.experiment == "kerr-decay") return experiment_kerr_decay(c);
  if (c.experiment == "max-negvol-vs-damping")
    return experiment_max_negvol_vs_damping(c);
  if (c.experiment == "max-negativity-contour")
    return experiment_max_negativity_contour(c);
  if (c.experiment == "coherent-plateau") return experiment_coherent_plateau(c);
  if (c.experiment == "asymptotic-compare") return experiment_asymptotic_compare(c);
  if (c.experiment == "table-gen") return experiment_table_gen(c);
  throw ConfigError("unknown experiment kind: " + c.experiment);
}

// Writes <prefix>.csv (+ optional aux table) and the <prefix>.json sidecar
// with the config echo, version, hash and wall time.
inline void write_outputs(const RunConfig& c, const ExperimentResult& res,
                          const std::string& out_dir, double wall_seconds) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const std::string csv = csv_text(res.columns, res.rows);
  for (const auto& row : res.rows)
    for (double v : row)
      if (!std::isfinite(v)) throw NumericalError("write_outputs: non-finite cell");
  {
    std::ofstream out(fs::path(out_dir) / (c.out_prefix + ".csv"), std::ios::binary);
    out << csv;
  }
  if (!res.aux_rows.empty()) {
    std::ofstream out(fs::path(out_dir) / (c.out_prefix + "_" + res.aux_name + ".csv"),
                      std::ios::binary);
    out << csv_text(res.aux_columns, res.aux_rows);
  }
  json side;
  side["config"] = c.raw;
  side["library_version"] = version_string;
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx",
                static_cast<unsigned long long>(fnv1a(c.raw.dump())));
  side["config_hash"] = hash;
  side["wall_time_s"] = wall_seconds;
  side["summary"] = res.summary;
  std::ofstream out(fs::path(out_dir) / (c.out_prefix + ".json"));
  out << side.dump(2) << "\n";
}

inline void run_to_files(const RunConfig& c, const std::string& out_dir) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res = run_experiment(c);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_outputs(c, res, out_dir, wall);
}

}  // namespace kerrw::harness
