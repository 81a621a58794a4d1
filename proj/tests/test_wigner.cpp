#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "kerrw/gaussian.hpp"
#include "kerrw/wigner.hpp"

using namespace kerrw;
using Catch::Approx;

namespace {

DensityMatrix random_mixed_state(int n, unsigned seed, int pure_terms = 3) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  MatrixXcd rho = MatrixXcd::Zero(n, n);
  for (int t = 0; t < pure_terms; ++t) {
    VectorXcd psi(n);
    for (int i = 0; i < n; ++i) psi[i] = Complex(gauss(rng), gauss(rng));
    psi /= psi.norm();
    rho += psi * psi.adjoint();
  }
  rho /= rho.trace().real();
  return {rho};
}

}  // namespace

TEST_CASE("transition probability point values") {
  // m = n = 0: (2/pi) e^{-2|alpha|^2}
  const Complex alpha(0.6, -0.4);
  CHECK(transition_probability(0, 0, alpha).real() ==
        Approx(2.0 / pi * std::exp(-2.0 * std::norm(alpha))).epsilon(1e-12));
  CHECK(transition_probability(0, 0, alpha).imag() == 0.0);

  // m = n = 1 at the origin: -2/pi
  CHECK(transition_probability(1, 1, 0.0).real() == Approx(-2.0 / pi).epsilon(1e-12));

  // Hermitian symmetry
  const Complex z(0.7, 0.3);
  Complex w25 = transition_probability(2, 5, z);
  Complex w52 = transition_probability(5, 2, z);
  CHECK(std::abs(w25 - std::conj(w52)) <= 1e-15);

  CHECK_THROWS_AS(transition_probability(-1, 2, z), IndexError);
}

TEST_CASE("transition probability against the displaced-parity definition") {
  // (2/pi)(-1)^m <n|D(2 alpha)|m> evaluated through the operator route
  Dim dim(40);
  const Complex alpha(0.45, -0.8);
  MatrixXcd d2 = displacement_op(dim, 2.0 * alpha);
  for (int m : {0, 1, 3}) {
    for (int n : {0, 2, 5}) {
      Complex direct = (2.0 / pi) * ((m % 2 == 0) ? 1.0 : -1.0) * d2(n, m);
      CHECK(std::abs(transition_probability(m, n, alpha) - direct) <= 1e-10);
    }
  }
}

TEST_CASE("wigner point values at the origin") {
  Dim dim(8);
  CHECK(wigner_point(pure_density(vacuum_state(dim)), 0.0) ==
        Approx(2.0 / pi).margin(1e-10));
  CHECK(wigner_point(pure_density(number_state(dim, 1)), 0.0) ==
        Approx(-2.0 / pi).margin(1e-10));
}

TEST_CASE("parity identity for random diagonal states") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> un(0.0, 1.0);
  const int n = 12;
  MatrixXcd rho = MatrixXcd::Zero(n, n);
  double z = 0.0;
  for (int k = 0; k < n; ++k) {
    rho(k, k) = un(rng);
    z += rho(k, k).real();
  }
  rho /= z;
  double expect = 0.0;
  for (int k = 0; k < n; ++k)
    expect += 2.0 / pi * ((k % 2 == 0) ? 1.0 : -1.0) * rho(k, k).real();
  CHECK(wigner_point({rho}, 0.0) == Approx(expect).margin(1e-10));
}

TEST_CASE("wigner grid matches closed-form gaussian states") {
  PhaseGrid grid(161, 161, 4.0, 9.0);

  // squeezed vacuum
  DensityMatrix sq = pure_density(squeezed_vacuum_state(Dim(150), 1.0));
  WignerField f = wigner_grid(sq, grid);
  GaussianSpec spec;
  spec.r0 = 1.0;
  double worst = 0.0;
  for (int i = 0; i < grid.n_x; ++i)
    for (int j = 0; j < grid.n_y; ++j)
      worst = std::max(worst, std::abs(f.values(i, j) -
                                       gaussian_wigner(spec, grid.x(i), grid.y(j))));
  CHECK(worst <= 1e-8);

  // thermal
  DensityMatrix th = thermal_state(Dim(80), 1.0);
  PhaseGrid tgrid = PhaseGrid::square(121, 6.0);
  WignerField ft = wigner_grid(th, tgrid);
  GaussianSpec tspec;
  tspec.nbar0 = 1.0;
  worst = 0.0;
  for (int i = 0; i < tgrid.n_x; ++i)
    for (int j = 0; j < tgrid.n_y; ++j)
      worst = std::max(worst, std::abs(ft.values(i, j) - gaussian_wigner(tspec, tgrid.x(i),
                                                                         tgrid.y(j))));
  CHECK(worst <= 1e-8);
}

TEST_CASE("vacuum riemann integral is one") {
  WignerField f =
      wigner_grid(pure_density(vacuum_state(Dim(12))), PhaseGrid::square(201, 4.0));
  const double integral = f.values.sum() * f.grid.dx() * f.grid.dy();
  CHECK(integral == Approx(1.0).margin(1e-6));
}

TEST_CASE("wigner values respect the 2/pi bound") {
  PhaseGrid grid = PhaseGrid::square(161, 14.0);
  for (unsigned seed : {1u, 2u, 3u}) {
    WignerField f = wigner_grid(random_mixed_state(16, seed), grid);
    CHECK(f.values.cwiseAbs().maxCoeff() <= wigner_bound + 1e-9);
  }
}

TEST_CASE("negativity of gaussian states vanishes") {
  GaussianSpec spec;
  spec.nbar0 = 0.5;
  spec.r0 = 0.8;
  DensityMatrix rho = make_state(Dim(160), spec);
  NegativityReport rep = negativity(wigner_grid(rho, PhaseGrid(201, 201, 3.0, 12.0)));
  CHECK(rep.n_vol <= 1e-6);
  CHECK(rep.n_peak <= 1e-6);
}

TEST_CASE("negativity of the first number state") {
  DensityMatrix one = pure_density(number_state(Dim(8), 1));
  NegativityReport rep = negativity_refined(one, PhaseGrid::square(201, 4.5), 1e-4, 3);
  CHECK(rep.converged);
  CHECK(rep.n_peak == Approx(2.0 / pi).margin(1e-4));
  // closed form: N_vol(|1>) = 2 e^{-1/2} - 1
  CHECK(rep.n_vol == Approx(2.0 * std::exp(-0.5) - 1.0).margin(1e-4));
}

TEST_CASE("number state negative volume against the radial quadrature oracle") {
  // independent 1D route: W_{|n>}(r) = (2/pi)(-1)^n L_n(4 r^2) e^{-2 r^2},
  // N_vol = -2 pi int r min(0, W) dr by Simpson integration
  auto radial_nvol = [](int n) {
    const double rmax = 2.5 * std::sqrt(double(n)) + 4.0;
    const int steps = 200000;
    const double h = rmax / steps;
    double total = 0.0;
    for (int k = 0; k <= steps; ++k) {
      const double r = k * h;
      const double x = 4.0 * r * r;
      double l0 = 1.0, l1 = 1.0 - x;  // Laguerre upward recurrence
      double ln = (n == 0) ? l0 : l1;
      for (int m = 2; m <= n; ++m) {
        double l2 = ((2.0 * m - 1.0 - x) * l1 - (m - 1.0) * l0) / m;
        l0 = l1;
        l1 = l2;
        ln = l2;
      }
      const double w = 2.0 / pi * ((n % 2 == 0) ? 1.0 : -1.0) * ln * std::exp(-2.0 * r * r);
      const double f = (w < 0.0) ? -w * r : 0.0;
      const double simpson = (k == 0 || k == steps) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
      total += simpson * f;
    }
    return 2.0 * pi * total * h / 3.0;
  };
  for (int n : {4, 9}) {
    DensityMatrix rho = pure_density(number_state(Dim(n + 12), n));
    const double ext = 4.5 * std::sqrt((2.0 * n + 1.0) / 4.0) + 2.0;
    PhaseGrid grid = PhaseGrid::square(501, ext);
    NegativityReport rep = negativity(wigner_grid(rho, grid));
    CHECK(rep.converged);
    CHECK(rep.n_vol == Approx(radial_nvol(n)).epsilon(2e-3));
  }
}

TEST_CASE("negativity invariant under squeezing") {
  // |1><1| squeezed by r' keeps its negative volume; extents follow e^{r'}
  DensityMatrix one = pure_density(number_state(Dim(60), 1));
  NegativityReport base = negativity(wigner_grid(one, PhaseGrid::square(301, 4.5)));
  const double rp = 0.5;
  MatrixXcd s = squeezing_op(Dim(60), rp);
  DensityMatrix squeezed{s * one.elements * s.adjoint()};
  const double e = std::exp(rp);
  NegativityReport after =
      negativity(wigner_grid(squeezed, PhaseGrid(301, 301, 4.5 / e, 4.5 * e)));
  CHECK(std::abs(after.n_vol - base.n_vol) <= 2e-4);
}

TEST_CASE("transformation covariance of the wigner function") {
  // a pure superposition with structure in both quadratures
  Dim dim(40);
  VectorXcd psi = VectorXcd::Zero(40);
  psi[0] = 1.0;
  psi[1] = Complex(0.0, 0.8);
  psi[3] = 0.5;
  psi /= psi.norm();
  DensityMatrix rho{psi * psi.adjoint()};

  const Complex alpha0(0.7, -0.4);  // complex, to pin the phase convention
  MatrixXcd d = displacement_op(dim, alpha0);
  DensityMatrix moved{d * rho.elements * d.adjoint()};
  double worst = 0.0;
  for (double x : {-0.9, 0.0, 0.6, 1.3})
    for (double y : {-1.1, -0.2, 0.5}) {
      const Complex z(x, y);
      worst = std::max(worst, std::abs(wigner_point(moved, z) -
                                       wigner_point(rho, z - alpha0)));
    }
  CHECK(worst <= 1e-8);

  // rotation moves the distribution forward: W_{R rho R^dag}(z) = W(z e^{-i phi})
  const double phi = 0.9;
  MatrixXcd r = rotation_op(dim, phi);
  DensityMatrix rotated{r * rho.elements * r.adjoint()};
  worst = 0.0;
  for (double x : {-0.8, 0.3, 1.0})
    for (double y : {-0.5, 0.4}) {
      const Complex z(x, y);
      worst = std::max(worst, std::abs(wigner_point(rotated, z) -
                                       wigner_point(rho, z * std::polar(1.0, -phi))));
    }
  CHECK(worst <= 1e-10);
}

TEST_CASE("q function values") {
  Dim dim(30);
  CHECK(q_function(pure_density(vacuum_state(dim)), 0.0) ==
        Approx(1.0 / pi).margin(1e-12));

  const double nbar0 = 0.8;
  DensityMatrix th = thermal_state(Dim(60), nbar0);
  for (const Complex alpha : {Complex(0.0, 0.0), Complex(0.9, -0.5)}) {
    const double expect =
        std::exp(-std::norm(alpha) / (nbar0 + 1.0)) / (pi * (nbar0 + 1.0));
    CHECK(q_function(th, alpha) == Approx(expect).margin(1e-8));
  }
}

TEST_CASE("q function equals the gaussian-smoothed wigner function") {
  GaussianSpec spec;
  spec.nbar0 = 0.4;
  spec.alpha0 = Complex(0.5, 0.3);
  DensityMatrix rho = make_state(Dim(60), spec);
  WignerField f = wigner_grid(rho, PhaseGrid::square(201, 5.0));
  for (const Complex beta : {Complex(0.0, 0.0), Complex(0.8, -0.2)}) {
    double conv = 0.0;
    for (int i = 0; i < f.grid.n_x; ++i)
      for (int j = 0; j < f.grid.n_y; ++j) {
        const double dx = f.grid.x(i) - beta.real(), dy = f.grid.y(j) - beta.imag();
        conv += f.values(i, j) * 2.0 / pi * std::exp(-2.0 * (dx * dx + dy * dy));
      }
    conv *= f.grid.dx() * f.grid.dy();
    CHECK(conv == Approx(q_function(rho, beta)).margin(2e-3));
  }
}

TEST_CASE("kerr current on the anti-squeezed axis") {
  // On x = 0 the azimuthal current reduces to
  //   J_x = 2 g y (y^2 - 1) W - (g/8) y lap W,
  // with the exact Gaussian derivatives available as oracle.
  const double r0 = 0.5, g_rate = 1.0;
  const double s2 = std::exp(2.0 * r0);
  GaussianSpec spec;
  spec.r0 = r0;
  DensityMatrix rho = pure_density(squeezed_vacuum_state(Dim(80), r0));
  PhaseGrid grid(401, 401, 2.0, 2.0);
  WignerField f = wigner_grid(rho, grid, 0.0, false);
  KerrCurrent cur = kerr_current(f, g_rate);

  const int i0 = (grid.n_x - 1) / 2;  // x = 0 column
  double worst = 0.0;
  for (int j = 0; j < grid.n_y; ++j) {
    const double y = grid.y(j);
    if (std::abs(y) < 0.3 || std::abs(y) > 1.6) continue;
    const double w = gaussian_wigner(spec, 0.0, y);
    const double lap = (-4.0 * s2 - 4.0 / s2 + 16.0 * y * y / (s2 * s2)) * w;
    const double jx_ref = 2.0 * g_rate * y * (y * y - 1.0) * w - g_rate / 8.0 * y * lap;
    // phi-hat at (0, y > 0) is -x-hat
    const double jx = (y > 0.0 ? -1.0 : 1.0) * cur.j_phi(i0, j);
    worst = std::max(worst, std::abs(jx - jx_ref));
  }
  CHECK(worst <= 5e-4);
  CHECK(cur.ring_divergence_max <= 1e-3);

  CHECK_THROWS_AS(kerr_current(wigner_grid(rho, PhaseGrid::square(21, 2.0), 0.0, false), 1.0),
                  GridTooCoarse);
}

TEST_CASE("error paths") {
  MatrixXcd bad = MatrixXcd::Zero(4, 4);
  bad(0, 1) = 0.5;  // not Hermitian
  bad(0, 0) = 1.0;
  CHECK_THROWS_AS(wigner_point({bad}, 0.0), NonHermitianInput);

  DensityMatrix wide = thermal_state(Dim(120), 3.0);
  CHECK_THROWS_AS(wigner_grid(wide, PhaseGrid::square(41, 1.5)), GridTooSmall);
}

TEST_CASE("field serialization") {
  DensityMatrix rho = pure_density(coherent_state(Dim(40), Complex(0.8, 0.4)));
  WignerField f = wigner_grid(rho, PhaseGrid(61, 41, 3.5, 3.0), 1.25);

  save_wigner_binary(f, "wf_test.bin");
  WignerField back = load_wigner_binary("wf_test.bin");
  REQUIRE(back.grid.n_x == f.grid.n_x);
  REQUIRE(back.grid.n_y == f.grid.n_y);
  CHECK(back.grid.x_ext == f.grid.x_ext);
  CHECK(back.time == f.time);
  CHECK((back.values - f.values).cwiseAbs().maxCoeff() == 0.0);

  save_wigner_csv(f, "wf_test.csv");
  std::ifstream in("wf_test.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.substr(0, 5) == "x,y,w");
  std::remove("wf_test.bin");
  std::remove("wf_test.csv");
}
