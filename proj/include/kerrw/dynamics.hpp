// Time evolution: Lindblad master-equation integration (adaptive BDF),
// exact diagonal propagators for the Kerr Hamiltonian, closed-form
// dephasing, and superoperator-commutation diagnostics.
#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "kerrw/common.hpp"
#include "kerrw/fock.hpp"

namespace kerrw {

// Frequencies defining H = hbar omega n + hbar g a^dag a^dag a a
//   + i hbar (eta* a a - eta a^dag a^dag) and the damping / dephasing
// dissipators.  omega defaults to zero (rotating frame).
struct ModelParams {
  double kerr_rate = 0.0;        // g, rad/s
  double damping_rate = 0.0;     // gamma >= 0
  double bath_occupancy = 0.0;   // nbar >= 0
  double dephasing_rate = 0.0;   // gamma_phi >= 0
  double harmonic_rate = 0.0;    // omega
  Complex parametric_drive = 0;  // eta
};

inline void check_model(const ModelParams& p) {
  for (double v : {p.kerr_rate, p.damping_rate, p.bath_occupancy, p.dephasing_rate,
                   p.harmonic_rate, std::abs(p.parametric_drive)})
    if (!std::isfinite(v)) throw std::invalid_argument("ModelParams: rate not finite");
  if (p.damping_rate < 0 || p.bath_occupancy < 0 || p.dephasing_rate < 0)
    throw std::invalid_argument("ModelParams: negative rate");
}

struct Tolerances {
  double rtol = 1e-8;
  double atol = 1e-12;
};

struct SolverStats {
  long long steps = 0;
  long long rejected_steps = 0;
  double max_trace_drift = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  SolverStats stats;
};

// ---------------------------------------------------------------------------
// Right-hand side of the master equation, element-wise.

inline MatrixXcd master_rhs(const DensityMatrix& rho, const ModelParams& p) {
  check_model(p);
  const int n = rho.dim();
  const MatrixXcd& r = rho.elements;
  MatrixXcd out(n, n);
  const double g = p.kerr_rate, gamma = p.damping_rate, nbar = p.bath_occupancy;
  const double gphi = p.dephasing_rate, omega = p.harmonic_rate;
  for (int mi = 0; mi < n; ++mi) {
    for (int ni = 0; ni < n; ++ni) {
      const double m = mi, nn = ni;
      const double theta = omega * (m - nn) + g * ((m * m - m) - (nn * nn - nn));
      // a a^dag is evaluated with the truncated ladder operators (zero in
      // the top level), which keeps the generator exactly trace-free.
      const double up_m = (mi + 1 < n) ? m + 1.0 : 0.0;
      const double up_n = (ni + 1 < n) ? nn + 1.0 : 0.0;
      const double relax = 0.5 * gamma * (nbar + 1.0) * (m + nn) +
                           0.5 * gamma * nbar * (up_m + up_n) +
                           0.5 * gphi * (m - nn) * (m - nn);
      Complex v = (Complex(0.0, -theta) - relax) * r(mi, ni);
      if (mi + 1 < n && ni + 1 < n)
        v += gamma * (nbar + 1.0) * std::sqrt((m + 1.0) * (nn + 1.0)) * r(mi + 1, ni + 1);
      if (mi > 0 && ni > 0) v += gamma * nbar * std::sqrt(m * nn) * r(mi - 1, ni - 1);
      out(mi, ni) = v;
    }
  }
  if (p.parametric_drive != Complex(0.0, 0.0)) {
    const Complex eta = p.parametric_drive, etac = std::conj(eta);
    for (int mi = 0; mi < n; ++mi)
      for (int ni = 0; ni < n; ++ni) {
        const double m = mi, nn = ni;
        Complex v(0.0, 0.0);
        if (mi + 2 < n) v += etac * std::sqrt((m + 1.0) * (m + 2.0)) * r(mi + 2, ni);
        if (ni >= 2) v -= etac * std::sqrt(nn * (nn - 1.0)) * r(mi, ni - 2);
        if (mi >= 2) v -= eta * std::sqrt(m * (m - 1.0)) * r(mi - 2, ni);
        if (ni + 2 < n) v += eta * std::sqrt((nn + 1.0) * (nn + 2.0)) * r(mi, ni + 2);
        out(mi, ni) += v;
      }
  }
  return out;
}

// Individual superoperators through dense matrix products; used by the
// commutation diagnostics and as a cross-check of the element-wise loops.
inline MatrixXcd kerr_liouvillian(const MatrixXcd& rho, double g) {
  Dim dim(static_cast<int>(rho.rows()));
  OperatorMatrix a = annihilation_op(dim);
  MatrixXcd h = a.adjoint() * a.adjoint() * a * a;
  return Complex(0.0, -g) * (h * rho - rho * h);
}

inline MatrixXcd damping_liouvillian(const MatrixXcd& rho, double gamma, double nbar) {
  Dim dim(static_cast<int>(rho.rows()));
  OperatorMatrix a = annihilation_op(dim);
  OperatorMatrix ad = a.adjoint();
  MatrixXcd down = a * rho * ad - 0.5 * (ad * a * rho + rho * ad * a);
  MatrixXcd up = ad * rho * a - 0.5 * (a * ad * rho + rho * a * ad);
  return gamma * (nbar + 1.0) * down + gamma * nbar * up;
}

inline MatrixXcd dephasing_liouvillian(const MatrixXcd& rho, double gphi) {
  Dim dim(static_cast<int>(rho.rows()));
  OperatorMatrix nm = number_op(dim);
  return gphi * (nm * rho * nm - 0.5 * (nm * nm * rho + rho * nm * nm));
}

// ---------------------------------------------------------------------------
// Exact diagonal propagator for the Kerr Hamiltonian.

inline VectorXcd kerr_phases(Dim dim, double g, double t) {
  VectorXcd ph(dim.n_max);
  for (int k = 0; k < dim.n_max; ++k) {
    const double e = double(k) * k - k;
    ph[k] = std::polar(1.0, -g * e * t);
  }
  return ph;
}

inline StateVector apply_kerr(const StateVector& psi, double g, double t) {
  VectorXcd ph = kerr_phases(Dim(psi.dim()), g, t);
  return {ph.cwiseProduct(psi.coeffs)};
}

inline DensityMatrix apply_kerr(const DensityMatrix& rho, double g, double t) {
  VectorXcd ph = kerr_phases(Dim(rho.dim()), g, t);
  const int n = rho.dim();
  MatrixXcd out(n, n);
  for (int mi = 0; mi < n; ++mi)
    for (int ni = 0; ni < n; ++ni)
      out(mi, ni) = ph[mi] * std::conj(ph[ni]) * rho.elements(mi, ni);
  return {out};
}

// rho_mn(t) = exp(-i g ((m^2-m)-(n^2-n)) t - gamma_phi (m-n)^2 t / 2) rho_mn(0)
inline DensityMatrix dephasing_closed_form(const DensityMatrix& rho0, double g,
                                           double gphi, double t) {
  const int n = rho0.dim();
  MatrixXcd out(n, n);
  for (int mi = 0; mi < n; ++mi)
    for (int ni = 0; ni < n; ++ni) {
      const double m = mi, nn = ni;
      const double theta = g * ((m * m - m) - (nn * nn - nn)) * t;
      const double decay = 0.5 * gphi * (m - nn) * (m - nn) * t;
      out(mi, ni) = std::polar(std::exp(-decay), -theta) * rho0.elements(mi, ni);
    }
  return {out};
}

// Same evolution through the Gaussian rotation-average integral, evaluated
// by trapezoid quadrature; a cross-check for the closed form.
inline DensityMatrix dephasing_gaussian_quadrature(const DensityMatrix& rho0, double g,
                                                   double gphi, double t,
                                                   int nodes = 4001) {
  if (gphi * t <= 0.0) return apply_kerr(rho0, g, t);
  const int n = rho0.dim();
  const double var = gphi * t;
  const double lim = 8.0 * std::sqrt(var);
  const double h = 2.0 * lim / (nodes - 1);
  VectorXcd fd = VectorXcd::Zero(n);
  for (int j = 0; j < nodes; ++j) {
    const double phi = -lim + j * h;
    const double p = std::exp(-0.5 * phi * phi / var) / std::sqrt(2.0 * pi * var);
    const double wq = (j == 0 || j == nodes - 1) ? 0.5 : 1.0;
    for (int d = 0; d < n; ++d) fd[d] += wq * h * p * std::polar(1.0, d * phi);
  }
  MatrixXcd out(n, n);
  for (int mi = 0; mi < n; ++mi)
    for (int ni = 0; ni < n; ++ni) {
      const int d = std::abs(mi - ni);
      const Complex f = (mi >= ni) ? fd[d] : std::conj(fd[d]);
      out(mi, ni) = f * rho0.elements(mi, ni);
    }
  return apply_kerr(DensityMatrix{out}, g, t);
}

// ---------------------------------------------------------------------------
// Superoperator commutation residuals (max-abs norms).

struct SuperopCommutators {
  double residual_g_phi = 0.0;     // [L_g, L_phi] rho
  double residual_phi_gamma = 0.0; // [L_phi, L_gamma] rho
  double residual_g_gamma = 0.0;   // [L_g, L_gamma] rho
  double closed_form_g_gamma = 0.0;
  double mismatch_g_gamma = 0.0;   // residual against the closed form
};

inline SuperopCommutators superop_commutators(const DensityMatrix& rho,
                                              const ModelParams& p) {
  const MatrixXcd& r = rho.elements;
  const double g = p.kerr_rate, gamma = p.damping_rate, nbar = p.bath_occupancy;
  const double gphi = p.dephasing_rate;
  auto lg = [&](const MatrixXcd& x) { return kerr_liouvillian(x, g); };
  auto lgam = [&](const MatrixXcd& x) { return damping_liouvillian(x, gamma, nbar); };
  auto lphi = [&](const MatrixXcd& x) { return dephasing_liouvillian(x, gphi); };

  SuperopCommutators out;
  out.residual_g_phi = (lg(lphi(r)) - lphi(lg(r))).cwiseAbs().maxCoeff();
  out.residual_phi_gamma = (lphi(lgam(r)) - lgam(lphi(r))).cwiseAbs().maxCoeff();

  MatrixXcd res = lg(lgam(r)) - lgam(lg(r));
  out.residual_g_gamma = res.cwiseAbs().maxCoeff();

  // [L_g, L_gamma] rho = 2 i g gamma (nbar+1) [n, a rho a^dag]
  //                    - 2 i g gamma nbar     [n, a^dag rho a]
  Dim dim(rho.dim());
  OperatorMatrix a = annihilation_op(dim);
  OperatorMatrix nm = number_op(dim);
  MatrixXcd xi_plus = a * r * a.adjoint();
  MatrixXcd xi_minus = a.adjoint() * r * a;
  MatrixXcd closed = Complex(0.0, 2.0 * g * gamma) *
                     ((nbar + 1.0) * (nm * xi_plus - xi_plus * nm) -
                      nbar * (nm * xi_minus - xi_minus * nm));
  out.closed_form_g_gamma = closed.cwiseAbs().maxCoeff();
  out.mismatch_g_gamma = (res - closed).cwiseAbs().maxCoeff();
  return out;
}

// ---------------------------------------------------------------------------
// Liouvillian linear solves for the implicit integrator.  With eta = 0 the
// generator block-diagonalizes over the matrix diagonals d = m - n and every
// block is tridiagonal; otherwise a sparse LU over the vectorized state is
// used.

namespace detail {

class LiouvillianSolver {
 public:
  LiouvillianSolver(int n, const ModelParams& p) : n_(n), p_(p) {
    tridiagonal_ = (p.parametric_drive == Complex(0.0, 0.0));
    if (!tridiagonal_) build_sparse();
  }

  // diagonal part of L at (m, n); matches master_rhs including the
  // truncated a a^dag at the top level
  Complex diag(int mi, int ni) const {
    const double m = mi, nn = ni;
    const double theta = p_.harmonic_rate * (m - nn) +
                         p_.kerr_rate * ((m * m - m) - (nn * nn - nn));
    const double up_m = (mi + 1 < n_) ? m + 1.0 : 0.0;
    const double up_n = (ni + 1 < n_) ? nn + 1.0 : 0.0;
    const double relax = 0.5 * p_.damping_rate * (p_.bath_occupancy + 1.0) * (m + nn) +
                         0.5 * p_.damping_rate * p_.bath_occupancy * (up_m + up_n) +
                         0.5 * p_.dephasing_rate * (m - nn) * (m - nn);
    return Complex(-relax, -theta);
  }

  // Solves (I - shift L) x = rhs in place.  rhs must be Hermitian; the
  // lower triangle is reconstructed from the solved upper one.
  void solve(double shift, MatrixXcd& rhs) {
    if (tridiagonal_)
      solve_tridiagonal(shift, rhs);
    else
      solve_sparse(shift, rhs);
  }

 private:
  void solve_tridiagonal(double shift, MatrixXcd& rhs) {
    const double gu = p_.damping_rate * (p_.bath_occupancy + 1.0);
    const double gd = p_.damping_rate * p_.bath_occupancy;
    std::vector<Complex> c(n_), u(n_), x(n_);
    for (int d = 0; d < n_; ++d) {
      const int len = n_ - d;
      // block along (m, n) = (j + d, j)
      for (int j = 0; j < len; ++j) {
        const int mi = j + d, ni = j;
        c[j] = 1.0 - shift * diag(mi, ni);
        u[j] = -shift * gu * std::sqrt(double(mi + 1) * (ni + 1));  // to j+1
        x[j] = rhs(mi, ni);
      }
      // Thomas elimination; lower coupling to j-1 has coefficient
      // -shift gd sqrt(m n)
      for (int j = 1; j < len; ++j) {
        const int mi = j + d, ni = j;
        const Complex l = -shift * gd * std::sqrt(double(mi) * ni);
        const Complex w = l / c[j - 1];
        c[j] -= w * u[j - 1];
        x[j] -= w * x[j - 1];
      }
      x[len - 1] /= c[len - 1];
      for (int j = len - 2; j >= 0; --j) x[j] = (x[j] - u[j] * x[j + 1]) / c[j];
      for (int j = 0; j < len; ++j) {
        rhs(j + d, j) = x[j];
        if (d > 0) rhs(j, j + d) = std::conj(x[j]);
      }
    }
  }

  void build_sparse() {
    using Trip = Eigen::Triplet<Complex>;
    std::vector<Trip> trips;
    trips.reserve(7 * n_ * n_);
    auto idx = [&](int mi, int ni) { return mi * n_ + ni; };
    const double gu = p_.damping_rate * (p_.bath_occupancy + 1.0);
    const double gd = p_.damping_rate * p_.bath_occupancy;
    const Complex eta = p_.parametric_drive, etac = std::conj(eta);
    for (int mi = 0; mi < n_; ++mi)
      for (int ni = 0; ni < n_; ++ni) {
        const double m = mi, nn = ni;
        trips.emplace_back(idx(mi, ni), idx(mi, ni), diag(mi, ni));
        if (mi + 1 < n_ && ni + 1 < n_)
          trips.emplace_back(idx(mi, ni), idx(mi + 1, ni + 1),
                             Complex(gu * std::sqrt((m + 1.0) * (nn + 1.0))));
        if (mi > 0 && ni > 0)
          trips.emplace_back(idx(mi, ni), idx(mi - 1, ni - 1),
                             Complex(gd * std::sqrt(m * nn)));
        if (mi + 2 < n_)
          trips.emplace_back(idx(mi, ni), idx(mi + 2, ni),
                             etac * std::sqrt((m + 1.0) * (m + 2.0)));
        if (ni >= 2)
          trips.emplace_back(idx(mi, ni), idx(mi, ni - 2),
                             -etac * std::sqrt(nn * (nn - 1.0)));
        if (mi >= 2)
          trips.emplace_back(idx(mi, ni), idx(mi - 2, ni),
                             -eta * std::sqrt(m * (m - 1.0)));
        if (ni + 2 < n_)
          trips.emplace_back(idx(mi, ni), idx(mi, ni + 2),
                             eta * std::sqrt((nn + 1.0) * (nn + 2.0)));
      }
    lmat_.resize(n_ * n_, n_ * n_);
    lmat_.setFromTriplets(trips.begin(), trips.end());
  }

  void solve_sparse(double shift, MatrixXcd& rhs) {
    if (cached_shift_ < 0.0 || std::abs(shift - cached_shift_) > 1e-9 * shift) {
      Eigen::SparseMatrix<Complex> sys(n_ * n_, n_ * n_);
      sys.setIdentity();
      sys -= shift * lmat_;
      lu_.compute(sys);
      if (lu_.info() != Eigen::Success)
        throw NumericalError("LiouvillianSolver: sparse factorization failed");
      cached_shift_ = shift;
    }
    // vectorized rho: row-major index m * n + n
    VectorXcd v(n_ * n_);
    for (int mi = 0; mi < n_; ++mi)
      for (int ni = 0; ni < n_; ++ni) v[mi * n_ + ni] = rhs(mi, ni);
    VectorXcd sol = lu_.solve(v);
    for (int mi = 0; mi < n_; ++mi)
      for (int ni = 0; ni < n_; ++ni) rhs(mi, ni) = sol[mi * n_ + ni];
  }

  int n_;
  ModelParams p_;
  bool tridiagonal_ = true;
  Eigen::SparseMatrix<Complex> lmat_;
  Eigen::SparseLU<Eigen::SparseMatrix<Complex>> lu_;
  double cached_shift_ = -1.0;
};

inline double wrms_norm(const MatrixXcd& err, const MatrixXcd& ref, const Tolerances& tol) {
  const double* e = reinterpret_cast<const double*>(err.data());
  const double* y = reinterpret_cast<const double*>(ref.data());
  const long m = 2 * err.size();
  double acc = 0.0;
  for (long i = 0; i < m; ++i) {
    const double w = tol.atol + tol.rtol * std::abs(y[i]);
    const double q = e[i] / w;
    acc += q * q;
  }
  return std::sqrt(acc / m);
}

}  // namespace detail

// Adaptive implicit multistep integration of the master equation (variable
// step BDF1/BDF2; the system is linear, so each step is one linear solve).
// States are symmetrized after every accepted step and the truncation tail
// is watched throughout.
inline Trajectory evolve(const DensityMatrix& rho0, const ModelParams& p,
                         const std::vector<double>& times, Tolerances tol = {},
                         double tail_threshold = default_tail_threshold) {
  check_model(p);
  if (times.empty() || times.front() != 0.0)
    throw std::invalid_argument("evolve: times must start at 0");
  for (size_t i = 1; i < times.size(); ++i)
    if (times[i] <= times[i - 1])
      throw std::invalid_argument("evolve: times must be strictly increasing");
  if (tol.rtol <= 0.0 || tol.atol <= 0.0)
    throw std::invalid_argument("evolve: tolerances must be positive");

  const int n = rho0.dim();
  detail::LiouvillianSolver solver(n, p);

  Trajectory traj;
  traj.times = times;
  traj.states.reserve(times.size());

  MatrixXcd y = 0.5 * (rho0.elements + rho0.elements.adjoint());
  traj.states.push_back(DensityMatrix{y});
  if (times.size() == 1) return traj;

  const double t_end = times.back();
  // history: (t, y) pairs, newest last
  std::vector<double> ht{0.0};
  std::vector<MatrixXcd> hy{y};

  // initial step from the state-to-derivative ratio in the weighted norm
  MatrixXcd f0 = master_rhs(DensityMatrix{y}, p);
  const double f_w = detail::wrms_norm(f0, y, tol);
  const double y_w = detail::wrms_norm(y, y, tol);
  double h = std::min(t_end, 0.01 * std::max(y_w, 1.0) / std::max(f_w, 1e-3 / t_end));
  const double h_min = 1e-14 * t_end;

  double t = 0.0;
  size_t next_out = 1;
  int consecutive_rejects = 0;

  while (t < t_end) {
    if (times[next_out] - t < 4.0 * h_min) {
      // roundoff-scale leftover; emit and move on
      t = times[next_out];
      traj.states.push_back(DensityMatrix{y});
      if (++next_out >= times.size()) break;
      continue;
    }
    bool clipped = false;
    if (t + h >= times[next_out] - 1e-14 * t_end) {
      h = times[next_out] - t;
      clipped = true;
    }
    if (h < h_min) throw StepFailure("evolve: step size underflow");

    const int order = (hy.size() >= 2) ? 2 : 1;
    MatrixXcd ynew;
    MatrixXcd pred;
    if (order == 1) {
      const double shift = h;
      ynew = hy.back();
      solver.solve(shift, ynew);
      pred = hy.back() + h * f0;  // forward-Euler reference for the estimate
    } else {
      const double h_prev = ht[ht.size() - 1] - ht[ht.size() - 2];
      const double r = h / h_prev;
      const double a = (1.0 + r) * (1.0 + r) / (1.0 + 2.0 * r);
      const double b = -r * r / (1.0 + 2.0 * r);
      const double shift = h * (1.0 + r) / (1.0 + 2.0 * r);
      ynew = a * hy[hy.size() - 1] + b * hy[hy.size() - 2];
      solver.solve(shift, ynew);
      if (hy.size() >= 3) {
        // quadratic extrapolation through the last three accepted points
        const double t0 = ht[ht.size() - 3], t1 = ht[ht.size() - 2],
                     t2 = ht[ht.size() - 1], tp = t + h;
        const double w0 = (tp - t1) * (tp - t2) / ((t0 - t1) * (t0 - t2));
        const double w1 = (tp - t0) * (tp - t2) / ((t1 - t0) * (t1 - t2));
        const double w2 = (tp - t0) * (tp - t1) / ((t2 - t0) * (t2 - t1));
        pred = w0 * hy[hy.size() - 3] + w1 * hy[hy.size() - 2] + w2 * hy[hy.size() - 1];
      } else {
        pred = hy.back() + r * (hy[hy.size() - 1] - hy[hy.size() - 2]);
      }
    }

    const double est_factor = (order == 1) ? 0.5 : 0.3;
    const double err = est_factor * detail::wrms_norm(ynew - pred, ynew, tol);

    if (err <= 1.0 || h <= 2.0 * h_min) {
      // accept
      t += h;
      ynew = 0.5 * (ynew + ynew.adjoint()).eval();
      y = ynew;
      ht.push_back(t);
      hy.push_back(y);
      if (ht.size() > 3) {
        ht.erase(ht.begin());
        hy.erase(hy.begin());
      }
      traj.stats.steps++;
      consecutive_rejects = 0;
      traj.stats.max_trace_drift =
          std::max(traj.stats.max_trace_drift, std::abs(y.trace().real() - 1.0));
      if (diagonal_tail_mass(y) >= tail_threshold)
        throw TruncationError("evolve: state tail mass exceeded threshold mid-run");
      if (clipped) {
        traj.states.push_back(DensityMatrix{y});
        ++next_out;
        if (next_out >= times.size()) break;
      }
      // quantized growth: the step only changes when the controller asks
      // for a substantial jump, so implicit factorizations get reused
      const double desired =
          (err > 0.0) ? std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.3, 2.0) : 2.0;
      if (desired >= 1.35) h *= desired;
      h = std::min(h, t_end - t);
      if (h <= 0.0) h = h_min;
    } else {
      traj.stats.rejected_steps++;
      if (++consecutive_rejects > 60) throw StepFailure("evolve: repeated step rejections");
      h *= std::clamp(0.9 * std::pow(err, -1.0 / 3.0), 0.1, 0.5);
    }
  }
  return traj;
}

}  // namespace kerrw
