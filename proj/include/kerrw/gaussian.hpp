// Closed-form Gaussian Wigner functions, the damping fundamental solution,
// the negativity decay-time bound and unit conversions.  These are the exact
// oracles the numerical paths are checked against.
#pragma once

#include <cmath>
#include <limits>

#include "kerrw/common.hpp"
#include "kerrw/fock.hpp"

namespace kerrw {

// Displaced squeezed thermal Wigner function evaluated at (x, y).
inline double gaussian_wigner(const GaussianSpec& spec, double x, double y) {
  check_gaussian_spec(spec);
  const double sig2 = 2.0 * spec.nbar0 + 1.0;
  const double c = std::cos(0.5 * spec.theta0), s = std::sin(0.5 * spec.theta0);
  const double dx = x - spec.alpha0.real();
  const double dy = y - spec.alpha0.imag();
  const double er = std::exp(spec.r0), emr = std::exp(-spec.r0);
  const double u = (dx * c + dy * s) * er;   // squeezed axis
  const double v = (dx * s - dy * c) * emr;  // anti-squeezed axis
  return 2.0 / (pi * sig2) * std::exp(-2.0 * (u * u + v * v) / sig2);
}

// Ornstein-Uhlenbeck moments of the damping fundamental solution started
// from a delta at (x0, y0).
struct OUMoments {
  double mean_x = 0, mean_y = 0;
  double var_x = 0, var_y = 0, cov_xy = 0;
  double t = 0;
};

inline OUMoments ou_moments(double x0, double y0, double gamma, double nbar, double t) {
  if (gamma < 0.0) throw std::invalid_argument("ou_moments: gamma must be >= 0");
  OUMoments m;
  const double decay = std::exp(-0.5 * gamma * t);
  m.mean_x = x0 * decay;
  m.mean_y = y0 * decay;
  m.var_x = m.var_y = (2.0 * nbar + 1.0) / 4.0 * (-std::expm1(-gamma * t));
  m.cov_xy = 0.0;
  m.t = t;
  return m;
}

// Full second-moment set of a Gaussian state (means plus covariance).
struct GaussianMoments {
  double mean_x = 0, mean_y = 0;
  double var_x = 0, var_y = 0, cov_xy = 0;
};

inline GaussianMoments moments_of_spec(const GaussianSpec& spec) {
  check_gaussian_spec(spec);
  const double sig2 = 2.0 * spec.nbar0 + 1.0;
  const double a = sig2 / 4.0 * std::exp(-2.0 * spec.r0);  // squeezed axis variance
  const double b = sig2 / 4.0 * std::exp(2.0 * spec.r0);
  const double c = std::cos(0.5 * spec.theta0), s = std::sin(0.5 * spec.theta0);
  GaussianMoments m;
  m.mean_x = spec.alpha0.real();
  m.mean_y = spec.alpha0.imag();
  m.var_x = a * c * c + b * s * s;
  m.var_y = a * s * s + b * c * c;
  m.cov_xy = (a - b) * s * c;
  return m;
}

// Damping keeps Gaussians Gaussian: covariance relaxes toward the thermal
// one, means decay at half the energy rate.
inline GaussianMoments damp_gaussian(const GaussianMoments& init, double gamma,
                                     double nbar, double t) {
  if (gamma < 0.0) throw std::invalid_argument("damp_gaussian: gamma must be >= 0");
  const double e1 = std::exp(-gamma * t);
  const double grow = (2.0 * nbar + 1.0) / 4.0 * (1.0 - e1);
  GaussianMoments m;
  m.mean_x = init.mean_x * std::exp(-0.5 * gamma * t);
  m.mean_y = init.mean_y * std::exp(-0.5 * gamma * t);
  m.var_x = e1 * init.var_x + grow;
  m.var_y = e1 * init.var_y + grow;
  m.cov_xy = e1 * init.cov_xy;
  return m;
}

inline GaussianMoments damp_gaussian(const GaussianSpec& spec, double gamma,
                                     double nbar, double t) {
  return damp_gaussian(moments_of_spec(spec), gamma, nbar, t);
}

// Time after which damping alone guarantees a non-negative Wigner function.
// Returns a signaled infinity for gamma = 0; sweeps must branch on it.
inline double t_decay(double gamma, double nbar) {
  if (gamma < 0.0) throw std::invalid_argument("t_decay: gamma must be >= 0");
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  return std::log1p(1.0 / (2.0 * nbar + 1.0)) / gamma;
}

inline double t_decay_high_temp(double gamma, double nbar) {
  if (gamma < 0.0) throw std::invalid_argument("t_decay_high_temp: gamma must be >= 0");
  if (gamma == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / ((2.0 * nbar + 1.0) * gamma);
}

// Duffing oscillator parameters and the rotating-wave identification of the
// Kerr rate.
struct DuffingParams {
  double beta;   // J / m^4
  double mass;   // kg
  double omega;  // rad / s
};

struct KerrConversion {
  double g = 0.0;         // rad / s
  bool rwa_valid = true;  // g / omega <= 1e-3
};

inline KerrConversion duffing_to_kerr(const DuffingParams& p) {
  if (p.mass <= 0.0 || p.omega <= 0.0)
    throw std::invalid_argument("duffing_to_kerr: mass and omega must be > 0");
  KerrConversion out;
  out.g = 3.0 * hbar_si * p.beta / (8.0 * p.mass * p.mass * p.omega * p.omega);
  out.rwa_valid = std::abs(out.g) / p.omega <= 1e-3;
  return out;
}

}  // namespace kerrw
