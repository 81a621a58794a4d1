// Truncated number-basis representation: ladder and transformation
// operators, canonical state constructors, expectation values.
#pragma once

#include <cmath>
#include <utility>

#include <unsupported/Eigen/MatrixFunctions>

#include "kerrw/common.hpp"

namespace kerrw {

// Basis size; the kept states are |0> ... |n_max - 1>.
struct Dim {
  int n_max;
  explicit Dim(int n) : n_max(n) {
    if (n < 1) throw std::invalid_argument("Dim: basis size must be >= 1");
  }
};

using OperatorMatrix = MatrixXcd;

inline constexpr double default_tail_threshold = 1e-8;
inline constexpr int tail_window = 5;

struct StateVector {
  VectorXcd coeffs;
  int dim() const { return static_cast<int>(coeffs.size()); }
};

struct DensityMatrix {
  MatrixXcd elements;
  int dim() const { return static_cast<int>(elements.rows()); }
  Complex trace() const { return elements.trace(); }
  double purity() const { return (elements * elements).trace().real(); }
};

// Displaced squeezed thermal state parameters.  sigma = sqrt(2 nbar0 + 1)
// and s = exp(r0); the conventions assume sigma >= 1 and s >= 1.
struct GaussianSpec {
  double nbar0 = 0.0;    // thermal occupancy before squeezing
  double r0 = 0.0;       // squeezing amplitude
  double theta0 = 0.0;   // squeezing angle, radians
  Complex alpha0 = 0.0;  // displacement

  double thermal_width() const { return std::sqrt(2.0 * nbar0 + 1.0); }
  double squeeze_factor() const { return std::exp(r0); }
};

inline void check_gaussian_spec(const GaussianSpec& spec) {
  if (spec.nbar0 < 0.0)
    throw std::invalid_argument("GaussianSpec: nbar0 must be >= 0");
  if (spec.r0 < 0.0)
    throw std::invalid_argument("GaussianSpec: r0 must be >= 0 (rotate theta0 instead)");
}

// ---------------------------------------------------------------------------
// Operators

inline OperatorMatrix annihilation_op(Dim dim) {
  const int n = dim.n_max;
  OperatorMatrix a = OperatorMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(double(k));
  return a;
}

inline OperatorMatrix creation_op(Dim dim) {
  return annihilation_op(dim).adjoint();
}

inline std::pair<OperatorMatrix, OperatorMatrix> ladder_operators(Dim dim) {
  OperatorMatrix a = annihilation_op(dim);
  return {a, a.adjoint()};
}

inline OperatorMatrix number_op(Dim dim) {
  const int n = dim.n_max;
  OperatorMatrix nm = OperatorMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) nm(k, k) = double(k);
  return nm;
}

// X = (a + a^dag)/2, Y = (a - a^dag)/2i
inline OperatorMatrix quadrature_x_op(Dim dim) {
  OperatorMatrix a = annihilation_op(dim);
  return 0.5 * (a + a.adjoint());
}

inline OperatorMatrix quadrature_y_op(Dim dim) {
  OperatorMatrix a = annihilation_op(dim);
  return Complex(0.0, -0.5) * (a - a.adjoint());
}

// ---------------------------------------------------------------------------
// Truncation adequacy: mass of the top `tail_window` basis states of a
// normalized state.  Rejected states raise rather than renormalize.

inline double tail_mass(const VectorXcd& coeffs, int window = tail_window) {
  const int n = static_cast<int>(coeffs.size());
  const double total = coeffs.squaredNorm();
  if (total <= 0.0) return 0.0;
  double tail = 0.0;
  for (int k = std::max(0, n - window); k < n; ++k) tail += std::norm(coeffs[k]);
  return tail / total;
}

inline double diagonal_tail_mass(const MatrixXcd& rho, int window = tail_window) {
  const int n = static_cast<int>(rho.rows());
  const double total = rho.trace().real();
  if (total <= 0.0) return 0.0;
  double tail = 0.0;
  for (int k = std::max(0, n - window); k < n; ++k) tail += rho(k, k).real();
  return tail / total;
}

inline void require_tail(double tail, double threshold, const char* what) {
  if (!(tail < threshold))
    throw TruncationError(std::string(what) + ": truncation tail mass " +
                          std::to_string(tail) + " exceeds threshold " +
                          std::to_string(threshold));
}

// ---------------------------------------------------------------------------
// Transformation operators.  Displacement and squeezing go through the dense
// matrix exponential (scaling and squaring); adequacy is checked on the
// transformed vacuum.

inline OperatorMatrix displacement_op(Dim dim, Complex lambda,
                                      double tail_threshold = default_tail_threshold) {
  OperatorMatrix a = annihilation_op(dim);
  OperatorMatrix gen = lambda * a.adjoint() - std::conj(lambda) * a;
  OperatorMatrix u = gen.exp();
  require_tail(tail_mass(u.col(0)), tail_threshold, "displacement_op");
  return u;
}

inline OperatorMatrix squeezing_op(Dim dim, Complex xi,
                                   double tail_threshold = default_tail_threshold) {
  OperatorMatrix a = annihilation_op(dim);
  OperatorMatrix aa = a * a;
  OperatorMatrix gen = 0.5 * (std::conj(xi) * aa - xi * aa.adjoint());
  OperatorMatrix u = gen.exp();
  require_tail(tail_mass(u.col(0)), tail_threshold, "squeezing_op");
  return u;
}

// First n_cols columns of the squeezing matrix through the
// parity-conserving two-term recurrence.  Column n is the squeezed number
// state S|n>, exact to roundoff for low columns; relative accuracy degrades
// deep into high columns, so callers keep n_cols within the range their
// weights actually reach (thermal mixing decays geometrically).
inline MatrixXcd squeezed_number_columns(Dim dim, Complex xi, int n_cols) {
  const int n = dim.n_max;
  n_cols = std::min(n_cols, n);
  const double r = std::abs(xi);
  if (r == 0.0) return MatrixXcd::Identity(n, n_cols);
  const double theta = std::arg(xi);
  const Complex r00 = -std::polar(std::tanh(r), theta);
  const double r01 = 1.0 / std::cosh(r);
  const Complex r11 = std::polar(std::tanh(r), -theta);

  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) sq[i] = std::sqrt(double(i));
  MatrixXcd s = MatrixXcd::Zero(n, n_cols);
  s(0, 0) = std::sqrt(r01);
  for (int m = 2; m < n; m += 2) s(m, 0) = sq[m - 1] / sq[m] * r00 * s(m - 2, 0);
  for (int nn = 1; nn < n_cols; ++nn)
    for (int m = (nn % 2); m < n; m += 2) {
      Complex v(0.0, 0.0);
      if (nn >= 2) v += sq[nn - 1] / sq[nn] * r11 * s(m, nn - 2);
      if (m >= 1) v += sq[m] / sq[nn] * r01 * s(m - 1, nn - 1);
      s(m, nn) = v;
    }
  return s;
}

// Diagonal, exactly unitary.
inline OperatorMatrix rotation_op(Dim dim, double phi) {
  const int n = dim.n_max;
  OperatorMatrix u = OperatorMatrix::Zero(n, n);
  for (int k = 0; k < n; ++k) u(k, k) = std::exp(Complex(0.0, phi * k));
  return u;
}

// ---------------------------------------------------------------------------
// State constructors

inline StateVector vacuum_state(Dim dim) {
  VectorXcd c = VectorXcd::Zero(dim.n_max);
  c[0] = 1.0;
  return {c};
}

inline StateVector number_state(Dim dim, int n) {
  if (n < 0 || n >= dim.n_max)
    throw IndexError("number_state: level outside truncated basis");
  VectorXcd c = VectorXcd::Zero(dim.n_max);
  c[n] = 1.0;
  return {c};
}

// c_n = exp(-|alpha|^2/2) alpha^n / sqrt(n!), evaluated through logs.
inline StateVector coherent_state(Dim dim, Complex alpha,
                                  double tail_threshold = default_tail_threshold) {
  const int n = dim.n_max;
  VectorXcd c = VectorXcd::Zero(n);
  const double amod = std::abs(alpha);
  if (amod == 0.0) {
    c[0] = 1.0;
    return {c};
  }
  const double arg = std::arg(alpha);
  for (int k = 0; k < n; ++k) {
    double lg = -0.5 * amod * amod + k * std::log(amod) - 0.5 * std::lgamma(k + 1.0);
    c[k] = std::polar(std::exp(lg), k * arg);
  }
  require_tail(tail_mass(c), tail_threshold, "coherent_state");
  c /= c.norm();
  return {c};
}

// Closed-form number-basis expansion of S(xi)|0>; only even levels hold
// population.  Log-scaled magnitudes, no raw factorials.
inline StateVector squeezed_vacuum_state(Dim dim, Complex xi,
                                         double tail_threshold = default_tail_threshold) {
  const int n = dim.n_max;
  const double r0 = std::abs(xi);
  if (r0 == 0.0) return vacuum_state(dim);
  const double theta0 = std::arg(xi);
  const double log_tanh = std::log(std::tanh(r0));
  const double log_cosh = std::log(std::cosh(r0));
  VectorXcd c = VectorXcd::Zero(n);
  for (int m = 0; 2 * m < n; ++m) {
    double lg = 0.5 * std::lgamma(2.0 * m + 1.0) - m * std::log(2.0) -
                std::lgamma(m + 1.0) + m * log_tanh - 0.5 * log_cosh;
    double sign = (m % 2 == 0) ? 1.0 : -1.0;
    c[2 * m] = sign * std::polar(std::exp(lg), m * theta0);
  }
  require_tail(tail_mass(c), tail_threshold, "squeezed_vacuum_state");
  c /= c.norm();
  return {c};
}

inline DensityMatrix pure_density(const StateVector& psi) {
  return {psi.coeffs * psi.coeffs.adjoint()};
}

// Thermal state normalized within the truncated basis.
inline DensityMatrix thermal_state(Dim dim, double nbar0,
                                   double tail_threshold = default_tail_threshold) {
  if (nbar0 < 0.0) throw std::invalid_argument("thermal_state: nbar0 must be >= 0");
  const int n = dim.n_max;
  MatrixXcd rho = MatrixXcd::Zero(n, n);
  if (nbar0 == 0.0) {
    rho(0, 0) = 1.0;
    return {rho};
  }
  const double log_q = std::log(nbar0) - std::log(nbar0 + 1.0);
  double z = 0.0;
  for (int k = 0; k < n; ++k) {
    double p = std::exp(k * log_q);
    rho(k, k) = p;
    z += p;
  }
  rho /= z;
  require_tail(diagonal_tail_mass(rho.real().cast<Complex>()), tail_threshold,
               "thermal_state");
  return {rho};
}

// Thermal weights q^n reach only the first few dozen number states, so the
// squeezed mixture is assembled from that many recurrence columns.
inline int thermal_column_count(double nbar0) {
  if (nbar0 <= 0.0) return 1;
  const double log_q = std::log(nbar0) - std::log(nbar0 + 1.0);
  return static_cast<int>(std::ceil(std::log(1e-17) / log_q)) + 1;
}

inline DensityMatrix squeezed_thermal_state(Dim dim, double nbar0, Complex xi,
                                            double tail_threshold = default_tail_threshold) {
  DensityMatrix th = thermal_state(dim, nbar0, 1.0);  // tail checked on the result
  const int n_cols = thermal_column_count(nbar0);
  MatrixXcd cols = squeezed_number_columns(dim, xi, n_cols);
  VectorXd weights(std::min(n_cols, dim.n_max));
  for (int k = 0; k < weights.size(); ++k) weights[k] = th.elements(k, k).real();
  MatrixXcd rho = cols.leftCols(weights.size()) * weights.asDiagonal() *
                  cols.leftCols(weights.size()).adjoint();
  require_tail(diagonal_tail_mass(rho), tail_threshold, "squeezed_thermal_state");
  rho /= rho.trace().real();
  return {rho};
}

inline DensityMatrix displaced_squeezed_thermal_state(
    Dim dim, const GaussianSpec& spec,
    double tail_threshold = default_tail_threshold) {
  check_gaussian_spec(spec);
  DensityMatrix th = thermal_state(dim, spec.nbar0, 1.0);
  MatrixXcd rho = th.elements;
  if (spec.r0 != 0.0) {
    const int n_cols = thermal_column_count(spec.nbar0);
    MatrixXcd cols =
        squeezed_number_columns(dim, std::polar(spec.r0, spec.theta0), n_cols);
    VectorXd weights(std::min(n_cols, dim.n_max));
    for (int k = 0; k < weights.size(); ++k) weights[k] = rho(k, k).real();
    rho = cols.leftCols(weights.size()) * weights.asDiagonal() *
          cols.leftCols(weights.size()).adjoint();
    rho /= rho.trace().real();
  }
  if (spec.alpha0 != Complex(0.0, 0.0)) {
    OperatorMatrix d = displacement_op(dim, spec.alpha0, tail_threshold);
    rho = d * rho * d.adjoint();
  }
  require_tail(diagonal_tail_mass(rho), tail_threshold, "displaced_squeezed_thermal_state");
  rho /= rho.trace().real();
  return {rho};
}

inline DensityMatrix make_state(Dim dim, const GaussianSpec& spec,
                                double tail_threshold = default_tail_threshold) {
  return displaced_squeezed_thermal_state(dim, spec, tail_threshold);
}

// ---------------------------------------------------------------------------
// Expectation values and derived moments

inline Complex expectation(const OperatorMatrix& op, const DensityMatrix& rho) {
  if (op.rows() != rho.elements.rows() || op.cols() != rho.elements.cols())
    throw DimMismatch("expectation: operator and state dimensions differ");
  return (rho.elements * op).trace();
}

inline Complex expectation(const OperatorMatrix& op, const StateVector& psi) {
  if (op.rows() != psi.coeffs.size())
    throw DimMismatch("expectation: operator and state dimensions differ");
  return psi.coeffs.dot(op * psi.coeffs);  // dot conjugates the left argument
}

inline double mean_occupancy(const DensityMatrix& rho) {
  double s = 0.0;
  for (int k = 0; k < rho.dim(); ++k) s += k * rho.elements(k, k).real();
  return s;
}

struct QuadratureMoments {
  double mean_x = 0, mean_y = 0;
  double var_x = 0, var_y = 0, cov_xy = 0;
};

inline QuadratureMoments quadrature_moments(const DensityMatrix& rho) {
  Dim dim(rho.dim());
  OperatorMatrix x = quadrature_x_op(dim);
  OperatorMatrix y = quadrature_y_op(dim);
  QuadratureMoments m;
  m.mean_x = expectation(x, rho).real();
  m.mean_y = expectation(y, rho).real();
  m.var_x = expectation(x * x, rho).real() - m.mean_x * m.mean_x;
  m.var_y = expectation(y * y, rho).real() - m.mean_y * m.mean_y;
  OperatorMatrix sym = 0.5 * (x * y + y * x);
  m.cov_xy = expectation(sym, rho).real() - m.mean_x * m.mean_y;
  return m;
}

// Overlap with a pure reference; equals Uhlmann fidelity when psi is pure.
inline double fidelity_to_pure(const StateVector& psi, const DensityMatrix& rho) {
  if (psi.dim() != rho.dim())
    throw DimMismatch("fidelity_to_pure: dimensions differ");
  return (psi.coeffs.adjoint() * rho.elements * psi.coeffs)(0, 0).real();
}

inline double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return (a.elements - b.elements).norm();
}

inline double hermiticity_defect(const MatrixXcd& rho) {
  return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

// Validates the standing density-matrix invariants; used by tests and at
// construction boundaries, not in inner loops.
inline void validate_density(const DensityMatrix& rho, double herm_tol = 1e-12,
                             double trace_tol = 1e-10, double psd_tol = 1e-8) {
  if (hermiticity_defect(rho.elements) > herm_tol)
    throw NumericalError("density matrix is not Hermitian");
  if (std::abs(rho.trace() - Complex(1.0, 0.0)) > trace_tol)
    throw NumericalError("density matrix trace differs from one");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(rho.elements);
  if (es.eigenvalues().minCoeff() < -psd_tol)
    throw NumericalError("density matrix has a significantly negative eigenvalue");
}

// Bose-Einstein occupancy for a mode of angular frequency omega at
// temperature T (SI units).
inline double thermal_occupancy(double omega, double temperature) {
  if (temperature <= 0.0) return 0.0;
  return 1.0 / std::expm1(hbar_si * omega / (k_boltzmann_si * temperature));
}

}  // namespace kerrw
