// Large-squeezing spectral solver: per-line third-order dispersion plus
// diffusion in Fourier space, reconstruction of the rescaled and unscaled
// Wigner fields, and negativity under the approximation.
#pragma once

#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kerrw/common.hpp"
#include "kerrw/wigner.hpp"

namespace kerrw {

// Parameters of the rescaled short-time problem.  The approximation keeps
// only the leading powers of the squeeze factor; its validity needs the
// squeezing to dominate the thermal width.
struct AsymptoticParams {
  double squeeze_factor = 1.0;    // s = exp(r0), >= 1
  double thermal_width = 1.0;     // sigma = sqrt(2 nbar0 + 1), >= 1
  double kerr_rate = 1.0;         // g
  double damping_rate_eff = 0.0;  // gamma (2 nbar + 1)
  double dephasing_rate = 0.0;    // gamma_phi

  bool squeezing_dominates() const { return squeeze_factor >= 2.0 * thermal_width; }
};

inline void check_asymptotic(const AsymptoticParams& p) {
  if (p.squeeze_factor < 1.0 || p.thermal_width < 1.0)
    throw std::invalid_argument("AsymptoticParams: need s >= 1 and sigma >= 1");
  if (p.kerr_rate <= 0.0)
    throw std::invalid_argument("AsymptoticParams: kerr rate must be > 0");
  if (p.damping_rate_eff < 0.0 || p.dephasing_rate < 0.0)
    throw std::invalid_argument("AsymptoticParams: negative rate");
}

// One line of the rescaled problem at fixed y-tilde: the Fourier transform
// h(k) of the initial profile on a symmetric k grid.
struct SpectralLine {
  double y_line = 0.0;
  VectorXd k_grid;
  VectorXcd h;
};

inline VectorXd uniform_k_grid(int n_k = 1025, double k_max = 16.0) {
  VectorXd k(n_k);
  for (int i = 0; i < n_k; ++i) k[i] = -k_max + 2.0 * k_max * i / (n_k - 1);
  return k;
}

// h(k) = (1/pi) e^{-2 y^2} e^{-k^2/8}; identical for the rescaled vacuum
// and thermal initial states.
inline SpectralLine initial_spectrum(double y_line, const VectorXd& k_grid) {
  if (k_grid.size() < 2)
    throw KGridTooSmall("initial_spectrum: need at least two k nodes");
  const double k_max = std::max(std::abs(k_grid[0]), std::abs(k_grid[k_grid.size() - 1]));
  if (std::exp(-k_max * k_max / 8.0) > 1.5e-14)
    throw KGridTooSmall("initial_spectrum: k grid does not reach the spectral tail");
  SpectralLine line;
  line.y_line = y_line;
  line.k_grid = k_grid;
  line.h.resize(k_grid.size());
  const double amp = std::exp(-2.0 * y_line * y_line) / pi;
  for (int i = 0; i < k_grid.size(); ++i)
    line.h[i] = amp * std::exp(-k_grid[i] * k_grid[i] / 8.0);
  return line;
}

// beta controls the diffusion strength per line; the y = 0 line is
// invariant under the evolution and must be skipped by callers.
inline double beta_line(double y_line, const AsymptoticParams& p) {
  check_asymptotic(p);
  if (y_line == 0.0) throw SingularLine("beta_line: y-tilde = 0");
  const double s = p.squeeze_factor;
  return p.damping_rate_eff / (p.kerr_rate * s * s * y_line) +
         4.0 * p.dephasing_rate * y_line / p.kerr_rate;
}

// Each mode picks up exp(-i k^3 tau) from the dispersion and
// exp(-beta k^2 tau) from the diffusion.
inline VectorXcd evolve_line(const SpectralLine& line, double tau, double beta) {
  VectorXcd out(line.h.size());
  for (int i = 0; i < line.h.size(); ++i) {
    const double k = line.k_grid[i];
    out[i] = line.h[i] * std::polar(std::exp(-beta * k * k * tau), -k * k * k * tau);
  }
  return out;
}

// Inverse transform of an evolved spectrum onto uniform mu samples by
// direct quadrature with incremental phases.
inline VectorXd line_profile(const VectorXd& k_grid, const VectorXcd& spectrum,
                             const VectorXd& mu) {
  const int nk = static_cast<int>(k_grid.size());
  const double dk = k_grid[1] - k_grid[0];
  VectorXd out(mu.size());
  for (int i = 0; i < mu.size(); ++i) {
    const Complex step = std::polar(1.0, dk * mu[i]);
    Complex phase = std::polar(1.0, k_grid[0] * mu[i]);
    Complex acc(0.0, 0.0);
    for (int j = 0; j < nk; ++j) {
      acc += spectrum[j] * phase;
      phase *= step;
    }
    out[i] = (acc * dk).real() / std::sqrt(2.0 * pi);
  }
  return out;
}

// Scaled time of a line: tau(y) = g t s^4 y / (8 sigma^2), expressed in
// terms of the experiment axis gts4 = g t s^4.
inline double line_tau(double gts4, double y_line, const AsymptoticParams& p) {
  return gts4 * y_line / (8.0 * p.thermal_width * p.thermal_width);
}

// Bulk shift of a line: mu = x - 2 g t sigma^2 s^4 y^3.
inline double line_shift(double gts4, double y_line, const AsymptoticParams& p) {
  const double sig2 = p.thermal_width * p.thermal_width;
  return 2.0 * gts4 * sig2 * y_line * y_line * y_line;
}

struct AsymptoticField {
  WignerField scaled;    // W-tilde on the (x-tilde, y-tilde) grid
  WignerField unscaled;  // W on (x, y) = (sigma x-tilde / s, s sigma y-tilde)
};

// Reconstructs both the rescaled field and the physical-coordinate field at
// the scaled time gts4 = g t s^4.  Lines are independent and evaluated in
// parallel.
inline AsymptoticField reconstruct(const AsymptoticParams& p, double gts4,
                                   const PhaseGrid& scaled_grid,
                                   int n_k = 1025, double k_max = 16.0) {
  check_asymptotic(p);
  const VectorXd k = uniform_k_grid(n_k, k_max);
  MatrixXd values(scaled_grid.n_x, scaled_grid.n_y);

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (int j = 0; j < scaled_grid.n_y; ++j) {
    const double y = scaled_grid.y(j);
    SpectralLine line = initial_spectrum(y, k);
    VectorXd mu(scaled_grid.n_x);
    if (y == 0.0) {
      // invariant line: the initial profile itself
      for (int i = 0; i < scaled_grid.n_x; ++i) mu[i] = scaled_grid.x(i);
      VectorXd prof = line_profile(k, line.h, mu);
      for (int i = 0; i < scaled_grid.n_x; ++i) values(i, j) = prof[i];
      continue;
    }
    const double tau = line_tau(gts4, y, p);
    const double beta = beta_line(y, p);
    VectorXcd spec = evolve_line(line, tau, beta);
    const double shift = line_shift(gts4, y, p);
    for (int i = 0; i < scaled_grid.n_x; ++i) mu[i] = scaled_grid.x(i) - shift;
    VectorXd prof = line_profile(k, spec, mu);
    for (int i = 0; i < scaled_grid.n_x; ++i) values(i, j) = prof[i];
  }

  const double s = p.squeeze_factor, sig = p.thermal_width;
  AsymptoticField out{
      WignerField{scaled_grid, values, gts4},
      WignerField{PhaseGrid(scaled_grid.n_x, scaled_grid.n_y,
                            scaled_grid.x_ext * sig / s, scaled_grid.y_ext * s * sig),
                  values / (sig * sig), gts4}};
  return out;
}

struct AsymptoticNegativity {
  std::vector<double> gts4;
  std::vector<double> n_vol;
  std::vector<double> sigma2_n_peak;
};

namespace detail {

// mu window needed per line: the fringes live where the stationary-phase
// wavenumber k* = sqrt(mu / 3 tau) still carries spectral weight.
inline void negativity_mu_window(double tau, double y_line, double& lo, double& hi) {
  const double atau = std::abs(tau);
  const double reach = 24.0 * atau * std::max(0.0, 21.0 - 2.0 * y_line * y_line) + 10.0;
  if (tau >= 0.0) {
    lo = -10.0;
    hi = reach;
  } else {
    lo = -reach;
    hi = 10.0;
  }
}

}  // namespace detail

// Negativity on the shift-free (mu, y) representation; the bulk shift is an
// exact translation per line and drops out of both measures.  N_vol is
// independent of sigma, the peak carries the 1/sigma^2 amplitude.
inline AsymptoticNegativity asymptotic_negativity(const AsymptoticParams& p,
                                                  const std::vector<double>& gts4_list,
                                                  int n_lines_half = 128,
                                                  double y_max = 3.0,
                                                  double dmu = 0.04,
                                                  int n_k = 1025, double k_max = 16.0) {
  check_asymptotic(p);
  const VectorXd k = uniform_k_grid(n_k, k_max);
  const double dy = y_max / n_lines_half;

  AsymptoticNegativity out;
  out.gts4 = gts4_list;
  out.n_vol.assign(gts4_list.size(), 0.0);
  out.sigma2_n_peak.assign(gts4_list.size(), 0.0);

  for (size_t ti = 0; ti < gts4_list.size(); ++ti) {
    const double gts4 = gts4_list[ti];
    // per-line partials, reduced in a fixed order afterwards so results do
    // not depend on the thread count or schedule
    std::vector<double> line_vol(n_lines_half + 1, 0.0);
    std::vector<double> line_peak(n_lines_half + 1, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int j = 1; j <= n_lines_half; ++j) {
      const double y = j * dy;
      const double tau = line_tau(gts4, y, p);
      if (tau == 0.0) continue;
      SpectralLine line = initial_spectrum(y, k);
      VectorXcd spec = evolve_line(line, tau, beta_line(y, p));
      double lo, hi;
      detail::negativity_mu_window(tau, y, lo, hi);
      const int n_mu = static_cast<int>((hi - lo) / dmu) + 1;
      VectorXd mu(n_mu);
      for (int i = 0; i < n_mu; ++i) mu[i] = lo + i * dmu;
      VectorXd prof = line_profile(k, spec, mu);
      for (int i = 0; i < n_mu; ++i)
        if (prof[i] < 0.0) {
          line_vol[j] -= prof[i];
          line_peak[j] = std::max(line_peak[j], -prof[i]);
        }
      line_vol[j] *= dmu;
    }
    double vol = 0.0, peak = 0.0;
    for (int j = 1; j <= n_lines_half; ++j) {
      vol += line_vol[j];
      peak = std::max(peak, line_peak[j]);
    }
    // the y < 0 half contributes equally by parity
    out.n_vol[ti] = 2.0 * vol * dy;
    out.sigma2_n_peak[ti] = peak;
  }
  return out;
}

// Golden-section refinement of max over gts4 of the asymptotic negative
// volume, started from a coarse scan.
inline double asymptotic_max_negvol(const AsymptoticParams& p, double gts4_max,
                                    int coarse = 21, double rel_tol = 5e-3) {
  std::vector<double> taus(coarse);
  for (int i = 0; i < coarse; ++i) taus[i] = gts4_max * (i + 1.0) / coarse;
  AsymptoticNegativity scan = asymptotic_negativity(p, taus);
  int best = 0;
  for (int i = 1; i < coarse; ++i)
    if (scan.n_vol[i] > scan.n_vol[best]) best = i;
  double lo = taus[std::max(0, best - 1)];
  double hi = taus[std::min(coarse - 1, best + 1)];
  auto eval = [&](double t) { return asymptotic_negativity(p, {t}).n_vol[0]; };
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = eval(x1), f2 = eval(x2);
  double best_val = std::max({scan.n_vol[best], f1, f2});
  while (hi - lo > rel_tol * gts4_max) {
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
    best_val = std::max({best_val, f1, f2});
  }
  return best_val;
}

// Airy-kernel reference solution for the dispersion-only line,
//   u(mu, tau) = (3 tau)^(-1/3) integral f(xi) Ai((xi - mu)/(3 tau)^(1/3)),
// by composite Simpson quadrature.  A test oracle for evolve_line, never
// the production route.
inline double airy_reference(const std::function<double(double)>& f0, double tau,
                             double mu, const std::function<double(double)>& airy,
                             double xi_ext = 8.0, int n_xi = 4001) {
  if (tau <= 0.0) throw std::invalid_argument("airy_reference: tau must be > 0");
  if (n_xi % 2 == 0) ++n_xi;
  const double c = std::cbrt(3.0 * tau);
  const double h = 2.0 * xi_ext / (n_xi - 1);
  double acc = 0.0;
  for (int i = 0; i < n_xi; ++i) {
    const double xi = -xi_ext + i * h;
    const double w = (i == 0 || i == n_xi - 1) ? 1.0 : ((i % 2 == 1) ? 4.0 : 2.0);
    acc += w * f0(xi) * airy((xi - mu) / c);
  }
  return acc * h / (3.0 * c);
}

}  // namespace kerrw
