// Shared scalar types, error categories and numeric constants.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace kerrw {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline constexpr const char* version_string = "0.1.0";
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double hbar_si = 1.054571817e-34;   // J s
inline constexpr double k_boltzmann_si = 1.380649e-23;  // J / K

// Thrown when a state (or a transformed state) carries too much weight in
// the top of the truncated basis.  States are rejected, never renormalized.
struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Adaptive integrator could not make progress at the minimum step size.
struct StepFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct GridTooCoarse : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonHermitianInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct KGridTooSmall : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested a spectral line at y-tilde = 0, where the rescaled evolution is
// singular (the line is invariant; callers skip it).
struct SingularLine : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kerrw
