#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "bll/derivs.hpp"
#include "bll/poisson.hpp"
#include "bll/quad.hpp"
#include "bll/spectral.hpp"

using namespace bll;

namespace {

GridPtr small_grid() {
  GridParams p;
  p.n_x = 32;
  p.n_y = 96;
  p.n_z = 96;
  return make_grid(p);
}

GridPtr fine_grid() {
  GridParams p;
  p.n_x = 64;
  p.n_y = 256;
  p.n_z = 256;
  return make_grid(p);
}

}  // namespace

TEST_CASE("psi piecewise values") {
  CHECK(psi(0.5, 0.1) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(psi(4.0, 0.1) == doctest::Approx(0.08).epsilon(1e-14));
  CHECK(psi(0.0, 0.1) == 0.0);
  // Blend region stays between the two branches and is continuous.
  double prev = psi(1.0, 0.1);
  for (double y = 1.0; y <= 2.0; y += 0.01) {
    const double v = psi(y, 0.1);
    CHECK(v > 0.0);
    CHECK(std::abs(v - prev) < 5e-3);
    prev = v;
  }
  CHECK_THROWS_AS(psi(-1.0, 0.1), domain_error);
  CHECK_THROWS_AS(psi(1.0, 0.0), domain_error);
}

TEST_CASE("grid invariants") {
  auto g = small_grid();
  CHECK(g->y_nodes().front() == 0.0);
  CHECK(g->y_nodes().back() == g->y_max());
  CHECK(g->z_nodes().front() == 0.0);
  CHECK(g->z_nodes().back() == g->z_max());
  GridParams bad;
  bad.n_x = 7;
  CHECK_THROWS_AS(make_grid(bad), domain_error);
}

TEST_CASE("ddx exact on resolved modes") {
  auto g = small_grid();
  auto f = Field::sample(g, FieldKind::interior,
                         [](double x, double) { return std::sin(x); });
  auto d = ddx(f);
  auto exact = Field::sample(g, FieldKind::interior,
                             [](double x, double) { return std::cos(x); });
  CHECK((d - exact).max_abs() < 1e-13);

  auto c = Field::sample(g, FieldKind::interior, [](double, double) { return 3.5; });
  CHECK(ddx(c).max_abs() < 1e-13);

  auto f3 = Field::sample(g, FieldKind::interior, [](double x, double y) {
    return std::sin(3 * x) * std::exp(-y);
  });
  auto d3 = ddx(f3);
  auto e3 = Field::sample(g, FieldKind::interior, [](double x, double y) {
    return 3 * std::cos(3 * x) * std::exp(-y);
  });
  CHECK((d3 - e3).max_abs() < 1e-12);

  // Composition equals the second spectral derivative exactly.
  auto dd = ddx(ddx(f3));
  auto dd2 = ddx_pow(f3, 2);
  CHECK((dd - dd2).max_abs() < 1e-11);
}

TEST_CASE("ddy refinement and polynomial exactness") {
  auto fy = [](double, double y) { return std::exp(-y); };
  auto dfy = [](double, double y) { return -std::exp(-y); };
  GridParams p1;
  p1.n_x = 8;
  p1.n_y = 64;
  GridParams p2 = p1;
  p2.n_y = 128;
  auto g1 = make_grid(p1);
  auto g2 = make_grid(p2);
  const double e1 = (ddy(Field::sample(g1, FieldKind::interior, fy)) -
                     Field::sample(g1, FieldKind::interior, dfy))
                        .max_abs();
  const double e2 = (ddy(Field::sample(g2, FieldKind::interior, fy)) -
                     Field::sample(g2, FieldKind::interior, dfy))
                        .max_abs();
  const double order = std::log2(e1 / e2);
  CHECK(order >= 3.5);

  // Second derivative of a linear field vanishes to rounding.
  auto g = small_grid();
  auto lin = Field::sample(g, FieldKind::interior,
                           [](double, double y) { return 2.0 + 3.0 * y; });
  CHECK(ddy(lin, 2).max_abs() < 1e-10);

  // Polynomial exactness: d/dy y^2 = 2y, check at an interior node.
  auto quad = Field::sample(g, FieldKind::interior,
                            [](double, double y) { return y * y; });
  auto dq = ddy(quad, 1);
  const auto& yn = g->y_nodes();
  for (int iy = 0; iy < g->n_y(); ++iy)
    CHECK(dq(0, iy) == doctest::Approx(2.0 * yn[iy]).epsilon(1e-9));

  CHECK_THROWS_AS(ddy(lin, 3), domain_error);
}

TEST_CASE("conormal_Z and tilde_Z") {
  auto g = small_grid();
  auto f = Field::sample(g, FieldKind::interior, [](double x, double y) {
    return std::sin(x) * std::exp(-y);
  });
  CHECK((conormal_Z(f, 0) - f).max_abs() == 0.0);

  // conormal_Z(y, 1) = psi(y).
  auto fy = Field::sample(g, FieldKind::interior, [](double, double y) { return y; });
  auto z1 = conormal_Z(fy, 1);
  for (int iy = 0; iy < g->n_y(); ++iy)
    CHECK(z1(0, iy) == doctest::Approx(g->psi_at(iy)).epsilon(1e-8));

  // Z^2 e^{-y} = psi(y)^2 * d_y^2 e^{-y} = psi^2 e^{-y}, pointwise oracle.
  auto e = Field::sample(g, FieldKind::interior,
                         [](double, double y) { return std::exp(-y); });
  auto z2 = conormal_Z(e, 2);
  const auto& yn = g->y_nodes();
  for (int iy = 0; iy < g->n_y(); ++iy) {
    const double y = yn[iy];
    if (y > 8.0) break;
    const double psi_v = g->psi_at(iy);
    const double expect = psi_v * psi_v * std::exp(-y);
    CHECK(z2(0, iy) == doctest::Approx(expect).epsilon(5e-6).scale(1e-4));
  }

  CHECK_THROWS_AS(conormal_Z(Field::zero(g, FieldKind::layer), 1), domain_error);
  CHECK_THROWS_AS(tilde_Z(Field::zero(g, FieldKind::interior), 1), domain_error);

  // tilde_Z(z, 1) = delta*z.
  auto fz = Field::sample(g, FieldKind::layer, [](double, double z) { return z; });
  auto t1 = tilde_Z(fz, 1);
  const auto& zn = g->z_nodes();
  for (int iz = 0; iz < g->n_z(); ++iz)
    CHECK(t1(0, iz) == doctest::Approx(0.1 * zn[iz]).epsilon(1e-8));

  // tilde_Z(e^{-z^2}, 1) = delta*z*(-2z e^{-z^2}).
  auto gz = Field::sample(g, FieldKind::layer,
                          [](double, double z) { return std::exp(-z * z); });
  auto t2 = tilde_Z(gz, 1);
  for (int iz = 0; iz < g->n_z(); ++iz) {
    const double z = zn[iz];
    if (z > 4.0) break;
    const double expect = 0.1 * z * (-2.0 * z * std::exp(-z * z));
    CHECK(t2(0, iz) == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("vertical quadrature and cumulative integrals") {
  auto g = small_grid();
  const VertOps& ops = g->ops_z();
  // Exact for degree-5 polynomials over [0, z_max].
  Eigen::MatrixXd poly(1, g->n_z());
  const double L = g->z_max();
  for (int i = 0; i < g->n_z(); ++i) {
    const double z = g->z_nodes()[i];
    poly(0, i) = std::pow(z, 5) - 2.0 * z * z + 1.0;
  }
  const double exact = std::pow(L, 6) / 6.0 - 2.0 * L * L * L / 3.0 + L;
  const double got = (poly * ops.quad_weights())(0, 0);
  CHECK(got == doctest::Approx(exact).epsilon(1e-11));

  // erf-type integral: int_z^{inf} e^{-s^2} ds, at acceptance resolution.
  auto gf = fine_grid();
  auto f = Field::sample(gf, FieldKind::layer,
                         [](double, double z) { return std::exp(-z * z); });
  auto tail = integral_to_top(f);
  for (int iz = 0; iz < gf->n_z(); ++iz) {
    const double z = gf->z_nodes()[iz];
    const double expect = 0.5 * std::sqrt(M_PI) * std::erfc(z);
    CHECK(std::abs(tail(0, iz) - expect) < 1e-8);
  }
}

TEST_CASE("solve_poisson manufactured solution") {
  auto g = fine_grid();
  const double ym = g->y_max();
  auto phi_exact = Field::sample(g, FieldKind::interior, [ym](double x, double y) {
    return std::sin(x) * (std::exp(-y) - std::exp(-ym));
  });
  // laplace(phi) = sin(x)(e^{-y} - e^{-ym})*(-1) + sin(x)e^{-y}
  auto rhs = Field::sample(g, FieldKind::interior, [ym](double x, double y) {
    return -std::sin(x) * (std::exp(-y) - std::exp(-ym)) +
           std::sin(x) * std::exp(-y);
  });
  XProfile bottom(g->n_x());
  for (int i = 0; i < g->n_x(); ++i)
    bottom(i) = std::sin(g->x_nodes()[i]) * (1.0 - std::exp(-ym));
  auto phi = solve_poisson(rhs, BoundarySpec::dirichlet(bottom),
                           BoundarySpec::dirichlet_zero());
  CHECK((phi - phi_exact).max_abs() < 1e-8);

  // Zero data -> zero.
  auto zero = solve_poisson(Field::zero(g, FieldKind::interior),
                            BoundarySpec::dirichlet_zero(),
                            BoundarySpec::dirichlet_zero());
  CHECK(zero.max_abs() == 0.0);

  // Neumann-bottom residual check: apply discrete laplacian to the solution.
  auto rhs2 = Field::sample(g, FieldKind::interior, [](double x, double y) {
    return std::sin(x) * std::exp(-2.0 * y) * y * y;
  });
  auto sol = solve_poisson(rhs2, BoundarySpec::neumann_zero(),
                           BoundarySpec::decay());
  auto lap = ddx_pow(sol, 2) + ddy(sol, 2);
  double max_res = 0.0;
  for (int iy = 2; iy < g->n_y() - 2; ++iy)
    for (int ix = 0; ix < g->n_x(); ++ix)
      max_res = std::max(max_res, std::abs(lap(ix, iy) - rhs2(ix, iy)));
  CHECK(max_res < 1e-6);
  CHECK(std::abs(wall_deriv(sol)(3)) < 1e-10);
}

TEST_CASE("velocity_from_vorticity") {
  auto g = fine_grid();
  // Manufactured div-free pair: u = sin(x) a'(y), v = -cos(x) a(y), a(0)=0.
  auto a = [](double y) { return y * y * std::exp(-2.0 * y); };
  auto ap = [](double y) { return (2.0 * y - 2.0 * y * y) * std::exp(-2.0 * y); };
  auto app = [](double y) {
    return (2.0 - 8.0 * y + 4.0 * y * y) * std::exp(-2.0 * y);
  };
  auto u_exact = Field::sample(g, FieldKind::interior,
                               [&](double x, double y) { return std::sin(x) * ap(y); });
  auto v_exact = Field::sample(g, FieldKind::interior,
                               [&](double x, double y) { return -std::cos(x) * a(y); });
  auto omega = Field::sample(g, FieldKind::interior, [&](double x, double y) {
    return std::sin(x) * app(y) - std::sin(x) * a(y);
  });
  auto [u, v] = velocity_from_vorticity(omega, XProfile::Zero(g->n_x()));
  CHECK((u - u_exact).max_abs() < 1e-6);
  CHECK((v - v_exact).max_abs() < 1e-6);

  // Divergence property.
  auto div = ddx(u) + ddy(v);
  CHECK(div.max_abs() < 1e-8);

  // omega = 0 -> v = 0 and u equals the far-field constant.
  auto [u0, v0] = velocity_from_vorticity(Field::zero(g, FieldKind::interior),
                                          XProfile::Zero(g->n_x()), 1.25);
  CHECK(v0.max_abs() < 1e-12);
  CHECK(std::abs(u0.max_abs() - 1.25) < 1e-12);
}

TEST_CASE("random rhs poisson residual") {
  auto g = fine_grid();
  std::mt19937 rng(7);
  std::normal_distribution<double> dist;
  // Smooth random rhs: few Fourier modes in x, smooth decaying y profile.
  Field rhs = Field::zero(g, FieldKind::interior);
  for (int k = 1; k <= 3; ++k) {
    const double ak = dist(rng), bk = dist(rng), ck = std::abs(dist(rng)) + 0.5;
    for (int iy = 0; iy < g->n_y(); ++iy) {
      const double y = g->y_nodes()[iy];
      const double prof = y * std::exp(-ck * y);
      for (int ix = 0; ix < g->n_x(); ++ix) {
        const double x = g->x_nodes()[ix];
        rhs(ix, iy) += (ak * std::cos(k * x) + bk * std::sin(k * x)) * prof;
      }
    }
  }
  auto sol = solve_poisson(rhs, BoundarySpec::dirichlet_zero(),
                           BoundarySpec::dirichlet_zero());
  auto lap = ddx_pow(sol, 2) + ddy(sol, 2);
  double max_res = 0.0;
  for (int iy = 2; iy < g->n_y() - 2; ++iy)
    for (int ix = 0; ix < g->n_x(); ++ix)
      max_res = std::max(max_res, std::abs(lap(ix, iy) - rhs(ix, iy)));
  CHECK(max_res < 1e-6);
}

TEST_CASE("layer interpolation sample_at") {
  auto g = small_grid();
  auto f = Field::sample(g, FieldKind::layer, [](double x, double z) {
    return std::cos(x) * std::exp(-0.5 * z * z);
  });
  XProfile q(g->n_x());
  for (int i = 0; i < g->n_x(); ++i) q(i) = 0.3 + 0.1 * i;
  auto s = sample_at(f, q);
  for (int i = 0; i < g->n_x(); ++i) {
    const double zq = q(i);
    if (zq > g->z_max()) {
      CHECK(s(i) == 0.0);
    } else {
      const double expect = std::cos(g->x_nodes()[i]) * std::exp(-0.5 * zq * zq);
      CHECK(std::abs(s(i) - expect) < 1e-7);
    }
  }
}
