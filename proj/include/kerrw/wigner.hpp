// Wigner function evaluation from a density matrix via number-state
// transition probabilities, negativity measures, Q function and the Kerr
// phase-space current.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kerrw/common.hpp"
#include "kerrw/fock.hpp"

namespace kerrw {

inline constexpr double wigner_bound = 2.0 / pi;

// Rectangular sampling, symmetric about the origin: x_i = -x_ext + i dx,
// with x_{n_x-1} = +x_ext.
struct PhaseGrid {
  int n_x, n_y;
  double x_ext, y_ext;

  PhaseGrid(int nx, int ny, double xext, double yext)
      : n_x(nx), n_y(ny), x_ext(xext), y_ext(yext) {
    if (nx < 2 || ny < 2) throw std::invalid_argument("PhaseGrid: need >= 2 points per axis");
    if (xext <= 0.0 || yext <= 0.0) throw std::invalid_argument("PhaseGrid: extents must be > 0");
  }
  static PhaseGrid square(int n, double ext) { return PhaseGrid(n, n, ext, ext); }

  double dx() const { return 2.0 * x_ext / (n_x - 1); }
  double dy() const { return 2.0 * y_ext / (n_y - 1); }
  double x(int i) const { return -x_ext + i * dx(); }
  double y(int j) const { return -y_ext + j * dy(); }
};

struct WignerField {
  PhaseGrid grid;
  MatrixXd values;  // values(i, j) = W(x_i, y_j)
  double time = 0.0;
};

struct NegativityReport {
  double n_vol = 0.0;
  double n_peak = 0.0;
  PhaseGrid grid;
  bool converged = false;
  // (n_x, n_y, n_vol) per refinement level, coarsest first.
  std::vector<std::array<double, 3>> history;
};

namespace detail {

// phi[m] = sqrt(m!/(m+k)!) x^(k/2) e^(-x/2) L_m^k(x).  All values are
// magnitudes of displacement matrix elements, hence bounded by one; the
// upward recurrence in m is stable and free of raw factorials.
inline double phi_start(int k, double x) {
  if (x == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(0.5 * (k * std::log(x) - x - std::lgamma(k + 1.0)));
}

inline double phi_step(int m, int k, double x, double phi_m1, double phi_m2) {
  // L_m^k = ((2m-1+k-x) L_{m-1}^k - (m-1+k) L_{m-2}^k) / m, rescaled.
  const double a = (2.0 * m - 1.0 + k - x) / std::sqrt(double(m) * (m + k));
  const double b = std::sqrt((m - 1.0) * (m - 1.0 + k) / (double(m) * (m + k)));
  return a * phi_m1 - b * phi_m2;
}

}  // namespace detail

// W_{|m><n|}(alpha) = (2/pi)(-1)^m <n|D(2 alpha)|m>; for n < m the value is
// the conjugate of the transposed pair.
inline Complex transition_probability(int m, int n, Complex alpha) {
  if (m < 0 || n < 0) throw IndexError("transition_probability: negative level index");
  if (n < m) return std::conj(transition_probability(n, m, alpha));
  const int k = n - m;
  const double x = 4.0 * std::norm(alpha);
  double phi = detail::phi_start(k, x);
  double phi_prev = 0.0;
  for (int j = 1; j <= m; ++j) {
    double next = detail::phi_step(j, k, x, phi, phi_prev);
    phi_prev = phi;
    phi = next;
  }
  const double sign = (m % 2 == 0) ? 1.0 : -1.0;
  Complex phase = (k == 0) ? Complex(1.0, 0.0) : std::polar(1.0, k * std::arg(alpha));
  return (2.0 / pi) * sign * phi * phase;
}

namespace detail {

// Point evaluation used by both wigner_point and wigner_grid.  Assumes rho
// Hermitian (anti-Hermitian part already discarded by the caller); sums the
// k >= 0 diagonals with the conjugate pair folded in.
inline double wigner_point_hermitian(const MatrixXcd& rho, Complex alpha) {
  const int n = static_cast<int>(rho.rows());
  const double x = 4.0 * std::norm(alpha);
  const Complex eiphi = (x == 0.0) ? Complex(1.0, 0.0) : Complex(alpha / std::abs(alpha));
  Complex phase(1.0, 0.0);
  double w = 0.0;
  for (int k = 0; k < n; ++k) {
    double phi = phi_start(k, x);
    double phi_prev = 0.0;
    Complex acc(0.0, 0.0);
    for (int m = 0; m + k < n; ++m) {
      if (m > 0) {
        double next = phi_step(m, k, x, phi, phi_prev);
        phi_prev = phi;
        phi = next;
      }
      const double sign = (m % 2 == 0) ? 1.0 : -1.0;
      acc += sign * phi * rho(m, m + k);
    }
    w += (k == 0) ? acc.real() : 2.0 * (acc * phase).real();
    phase *= eiphi;
  }
  return (2.0 / pi) * w;
}

}  // namespace detail

inline double wigner_point(const DensityMatrix& rho, Complex alpha) {
  const double defect = hermiticity_defect(rho.elements);
  if (defect > 1e-8)
    throw NonHermitianInput("wigner_point: input is not Hermitian within 1e-8");
  MatrixXcd herm = 0.5 * (rho.elements + rho.elements.adjoint());
  return detail::wigner_point_hermitian(herm, alpha);
}

// Gaussian-envelope estimate of the state mass outside the grid, from the
// second moments.  Conservative for the states handled here.
inline double mass_outside_estimate(const DensityMatrix& rho, const PhaseGrid& grid) {
  QuadratureMoments m = quadrature_moments(rho);
  auto outside = [](double ext, double mean, double var) {
    if (var <= 0.0) return 0.0;
    double z = (ext - std::abs(mean)) / std::sqrt(2.0 * var);
    return std::erfc(std::max(z, 0.0));
  };
  return outside(grid.x_ext, m.mean_x, m.var_x) + outside(grid.y_ext, m.mean_y, m.var_y);
}

// Parallel evaluation of W on the grid.  Work is split into point chunks;
// every point is computed entirely by one thread, so results do not depend
// on the thread count.  state_checks = false skips the extent and 2/pi
// bound validation, for derivative-like (traceless) inputs.
inline WignerField wigner_grid(const DensityMatrix& rho, const PhaseGrid& grid,
                               double time = 0.0, bool state_checks = true) {
  if (hermiticity_defect(rho.elements) > 1e-8)
    throw NonHermitianInput("wigner_grid: input is not Hermitian within 1e-8");
  if (state_checks && mass_outside_estimate(rho, grid) > 1e-6)
    throw GridTooSmall("wigner_grid: second moments imply mass outside the grid");

  const int n = rho.dim();
  MatrixXcd herm = 0.5 * (rho.elements + rho.elements.adjoint());

  // Per-diagonal coefficients (-1)^m rho_{m, m+k}; diagonals with no weight
  // are skipped entirely (parity-even states carry only even k).
  std::vector<std::vector<Complex>> diag_coeff(n);
  std::vector<int> m_count(n, 0);
  const double cutoff = 1e-16 * herm.cwiseAbs().maxCoeff();
  for (int k = 0; k < n; ++k) {
    int last = -1;
    diag_coeff[k].resize(n - k);
    for (int m = 0; m + k < n; ++m) {
      Complex c = herm(m, m + k);
      if (m % 2 == 1) c = -c;
      diag_coeff[k][m] = c;
      if (std::abs(c) > cutoff) last = m;
    }
    m_count[k] = last + 1;
  }

  const int total = grid.n_x * grid.n_y;
  MatrixXd values(grid.n_x, grid.n_y);
  double* out = values.data();  // column-major: index j * n_x + i

#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    constexpr int chunk = 4096;
    std::vector<double> xq(chunk), phi(chunk), phi_prev(chunk), phi0(chunk), acc(chunk);
    std::vector<Complex> eiphi(chunk), phase(chunk);
#ifdef _OPENMP
    const int nt = omp_get_num_threads();
    const int tid = omp_get_thread_num();
#else
    const int nt = 1, tid = 0;
#endif
    for (int start = tid * chunk; start < total; start += nt * chunk) {
      const int count = std::min(chunk, total - start);
      for (int p = 0; p < count; ++p) {
        const int idx = start + p;
        const int i = idx % grid.n_x, j = idx / grid.n_x;
        const double px = grid.x(i), py = grid.y(j);
        const double r2 = px * px + py * py;
        xq[p] = 4.0 * r2;
        eiphi[p] = (r2 == 0.0) ? Complex(1.0, 0.0)
                               : Complex(px, py) / std::sqrt(r2);
        phase[p] = Complex(1.0, 0.0);
        phi0[p] = std::exp(-0.5 * xq[p]);
        acc[p] = 0.0;
      }
      for (int k = 0; k < n; ++k) {
        if (k > 0) {
          const double inv = 1.0 / std::sqrt(double(k));
          if (k % 8 == 0) {
            // re-seed from the log form: the incremental product underflows
            // for far grid corners at small k and must be able to recover
            const double half_lg = 0.5 * std::lgamma(k + 1.0);
            for (int p = 0; p < count; ++p) {
              phi0[p] = (xq[p] == 0.0)
                            ? 0.0
                            : std::exp(0.5 * (k * std::log(xq[p]) - xq[p]) - half_lg);
              phase[p] *= eiphi[p];
            }
          } else {
            // phi_start(k) = phi_start(k-1) * sqrt(x / k)
            for (int p = 0; p < count; ++p) {
              phi0[p] *= std::sqrt(xq[p]) * inv;
              phase[p] *= eiphi[p];
            }
          }
        }
        const int mc = m_count[k];
        if (mc == 0) continue;
        const Complex* coeff = diag_coeff[k].data();
        for (int p = 0; p < count; ++p) {
          phi[p] = phi0[p];
          phi_prev[p] = 0.0;
        }
        for (int m = 0; m < mc; ++m) {
          if (m > 0) {
            const double a_num = 2.0 * m - 1.0 + k;
            const double den = 1.0 / std::sqrt(double(m) * (m + k));
            const double b = std::sqrt((m - 1.0) * (m - 1.0 + k)) * den;
            for (int p = 0; p < count; ++p) {
              double next = (a_num - xq[p]) * den * phi[p] - b * phi_prev[p];
              phi_prev[p] = phi[p];
              phi[p] = next;
            }
          }
          const Complex c = coeff[m];
          if (std::abs(c) <= cutoff) continue;
          if (k == 0) {
            const double cr = c.real();
            for (int p = 0; p < count; ++p) acc[p] += cr * phi[p];
          } else {
            for (int p = 0; p < count; ++p)
              acc[p] += 2.0 * (c * phase[p]).real() * phi[p];
          }
        }
      }
      for (int p = 0; p < count; ++p) out[start + p] = (2.0 / pi) * acc[p];
    }
  }

  if (state_checks) {
    const double wmax = values.cwiseAbs().maxCoeff();
    if (wmax > wigner_bound + 1e-6)
      throw NumericalError("wigner_grid: value exceeds the 2/pi bound");
  }
  return {grid, std::move(values), time};
}

// Riemann-sum negative volume and grid-minimum negative peak.  The
// convergence flag compares against the stride-2 subsample of the same
// field (no extra evaluations).
inline NegativityReport negativity(const WignerField& field, double rel_tol = 0.05,
                                   double abs_floor = 1e-6) {
  const PhaseGrid& g = field.grid;
  double vol = 0.0, peak = 0.0, vol_half = 0.0;
  for (int j = 0; j < g.n_y; ++j) {
    double col = 0.0;
    for (int i = 0; i < g.n_x; ++i) {
      const double w = field.values(i, j);
      if (w < 0.0) {
        col -= w;
        peak = std::max(peak, -w);
        if (i % 2 == 0 && j % 2 == 0) vol_half -= w;
      }
    }
    vol += col;
  }
  vol *= g.dx() * g.dy();
  vol_half *= 4.0 * g.dx() * g.dy();
  NegativityReport rep{vol, peak, g, false, {}};
  rep.converged = std::abs(vol - vol_half) <= std::max(rel_tol * vol, abs_floor);
  rep.history.push_back({double(g.n_x), double(g.n_y), vol});
  return rep;
}

// Doubles the grid resolution until the negative volume settles.
inline NegativityReport negativity_refined(const DensityMatrix& rho, PhaseGrid grid,
                                           double rel_tol = 0.01, int max_refine = 3,
                                           double abs_floor = 1e-6) {
  NegativityReport rep = negativity(wigner_grid(rho, grid));
  std::vector<std::array<double, 3>> history = rep.history;
  for (int level = 0; level < max_refine; ++level) {
    PhaseGrid finer(2 * grid.n_x - 1, 2 * grid.n_y - 1, grid.x_ext, grid.y_ext);
    NegativityReport next = negativity(wigner_grid(rho, finer));
    history.push_back(next.history.front());
    const bool settled =
        std::abs(next.n_vol - rep.n_vol) <= std::max(rel_tol * next.n_vol, abs_floor);
    rep = next;
    grid = finer;
    if (settled) {
      rep.converged = true;
      break;
    }
    rep.converged = false;
  }
  rep.history = history;
  return rep;
}

// Q(alpha) = <alpha|rho|alpha> / pi  (normalized so the phase-space integral
// is one).
inline double q_function(const DensityMatrix& rho, Complex alpha,
                         double tail_threshold = default_tail_threshold) {
  StateVector coh = coherent_state(Dim(rho.dim()), alpha, tail_threshold);
  const double q = fidelity_to_pure(coh, rho) / pi;
  if (q < -1e-10) throw NumericalError("q_function: significantly negative value");
  return q;
}

struct KerrCurrent {
  MatrixXd j_phi;                   // azimuthal component on interior nodes
  double ring_divergence_max = 0.0;  // max over sampled rings of the closed
                                     // loop integral of div J
};

// J_phi = (-2 g (r^2 - 1) W + (g/8) laplacian W) r, from second-order
// central differences; boundary nodes are left at zero.
inline KerrCurrent kerr_current(const WignerField& field, double g_rate) {
  const PhaseGrid& g = field.grid;
  const double dx = g.dx(), dy = g.dy();
  if (dx > 0.1 || dy > 0.1)
    throw GridTooCoarse("kerr_current: grid spacing too coarse for the Laplacian");
  const MatrixXd& w = field.values;
  MatrixXd jphi = MatrixXd::Zero(g.n_x, g.n_y);
  for (int j = 1; j + 1 < g.n_y; ++j) {
    for (int i = 1; i + 1 < g.n_x; ++i) {
      const double lap = (w(i + 1, j) - 2.0 * w(i, j) + w(i - 1, j)) / (dx * dx) +
                         (w(i, j + 1) - 2.0 * w(i, j) + w(i, j - 1)) / (dy * dy);
      const double x = g.x(i), y = g.y(j);
      const double r2 = x * x + y * y;
      jphi(i, j) = (-2.0 * g_rate * (r2 - 1.0) * w(i, j) + g_rate / 8.0 * lap) *
                   std::sqrt(r2);
    }
  }

  // Cartesian divergence of J = J_phi phihat, integrated around a few rings
  // by bilinear interpolation; a consistency diagnostic for the finite
  // differences (analytically zero).
  MatrixXd jx = MatrixXd::Zero(g.n_x, g.n_y), jy = MatrixXd::Zero(g.n_x, g.n_y);
  for (int j = 1; j + 1 < g.n_y; ++j)
    for (int i = 1; i + 1 < g.n_x; ++i) {
      const double x = g.x(i), y = g.y(j);
      const double r = std::sqrt(x * x + y * y);
      if (r == 0.0) continue;
      jx(i, j) = -y / r * jphi(i, j);
      jy(i, j) = x / r * jphi(i, j);
    }
  auto interp = [&](const MatrixXd& f, double x, double y) {
    const double fi = (x + g.x_ext) / dx, fj = (y + g.y_ext) / dy;
    const int i = std::clamp(int(fi), 0, g.n_x - 2);
    const int j = std::clamp(int(fj), 0, g.n_y - 2);
    const double tx = fi - i, ty = fj - j;
    return (1 - tx) * (1 - ty) * f(i, j) + tx * (1 - ty) * f(i + 1, j) +
           (1 - tx) * ty * f(i, j + 1) + tx * ty * f(i + 1, j + 1);
  };
  double worst = 0.0;
  const double r_max = 0.8 * std::min(g.x_ext, g.y_ext);
  for (double r : {0.25 * r_max, 0.5 * r_max, 0.75 * r_max}) {
    const int m_ang = 256;
    double loop = 0.0;
    for (int a = 0; a < m_ang; ++a) {
      const double phi = 2.0 * pi * a / m_ang;
      const double x = r * std::cos(phi), y = r * std::sin(phi);
      const double hx = std::max(2 * dx, 1e-3);
      const double hy = std::max(2 * dy, 1e-3);
      const double div = (interp(jx, x + hx, y) - interp(jx, x - hx, y)) / (2 * hx) +
                         (interp(jy, x, y + hy) - interp(jy, x, y - hy)) / (2 * hy);
      loop += div;
    }
    worst = std::max(worst, std::abs(loop * 2.0 * pi / m_ang));
  }
  return {std::move(jphi), worst};
}

// ---------------------------------------------------------------------------
// Serialization: CSV (x, y, w rows) and a raw little-endian dump with an
// eight-field header {n_x, n_y, x_ext, y_ext, dx, dy, t, reserved}.

inline void save_wigner_csv(const WignerField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_wigner_csv: cannot open " + path);
  out << "x,y,w\r\n";
  char buf[160];
  for (int i = 0; i < field.grid.n_x; ++i)
    for (int j = 0; j < field.grid.n_y; ++j) {
      std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\r\n", field.grid.x(i),
                    field.grid.y(j), field.values(i, j));
      out << buf;
    }
}

inline void save_wigner_binary(const WignerField& field, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_wigner_binary: cannot open " + path);
  auto put_i64 = [&](std::int64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put_i64(field.grid.n_x);
  put_i64(field.grid.n_y);
  put_f64(field.grid.x_ext);
  put_f64(field.grid.y_ext);
  put_f64(field.grid.dx());
  put_f64(field.grid.dy());
  put_f64(field.time);
  put_i64(0);  // reserved
  for (int i = 0; i < field.grid.n_x; ++i)
    for (int j = 0; j < field.grid.n_y; ++j) put_f64(field.values(i, j));
}

inline WignerField load_wigner_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_wigner_binary: cannot open " + path);
  auto get_i64 = [&] {
    std::int64_t v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  auto get_f64 = [&] {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const std::int64_t nx = get_i64(), ny = get_i64();
  const double xext = get_f64(), yext = get_f64();
  get_f64();  // dx, implied by nx / xext
  get_f64();  // dy
  const double t = get_f64();
  get_i64();  // reserved
  WignerField field{PhaseGrid(int(nx), int(ny), xext, yext),
                    MatrixXd(int(nx), int(ny)), t};
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j) field.values(i, j) = get_f64();
  if (!in) throw std::runtime_error("load_wigner_binary: truncated file");
  return field;
}

}  // namespace kerrw
