#include "bll/euler.hpp"

#include <cmath>

#include "bll/derivs.hpp"
#include "bll/poisson.hpp"
#include "bll/quad.hpp"
#include "bll/spectral.hpp"

namespace bll {

namespace {

Field advect(const Field& u, const Field& v, const Field& q) {
  return u * ddx(q) + v * ddy(q);
}

void check_cfl(const Field& u, const Field& v, double dt, double cfl_max,
               double t) {
  const GridPtr& g = u.grid();
  const double dx = 2.0 * M_PI / g->n_x();
  const auto& yn = g->y_nodes();
  double c = 0.0;
  for (int iy = 0; iy < g->n_y(); ++iy) {
    const double dy_lo = iy == 0 ? yn[1] - yn[0] : yn[iy] - yn[iy - 1];
    for (int ix = 0; ix < g->n_x(); ++ix)
      c = std::max(c, std::abs(u(ix, iy)) / dx + std::abs(v(ix, iy)) / dy_lo);
  }
  if (c * dt > cfl_max)
    throw solver_error("euler: advective CFL violated at t=" + std::to_string(t) +
                       " (c*dt=" + std::to_string(c * dt) + ")");
}

}  // namespace

EulerState::EulerState(Field u_, Field v_, Field omega_, double t_)
    : u(std::move(u_)), v(std::move(v_)), omega(std::move(omega_)), t(t_) {}

void EulerState::check_invariants(const XProfile& v_bottom, double tol) const {
  const Field div = ddx(u) + ddy(v);
  require(div.max_abs() < tol, "EulerState: divergence exceeds tolerance");
  for (int ix = 0; ix < v.n_x(); ++ix)
    require(std::abs(v(ix, 0) - v_bottom(ix)) < tol,
            "EulerState: wall-normal boundary value mismatch");
  const Field w = ddy(u) - ddx(v);
  // Discretization-level consistency, not solver tolerance.
  require((w - omega).max_abs() < 1e-4 * (1.0 + omega.max_abs()),
          "EulerState: omega != curl(u,v)");
}

const EulerState& EulerTraj::at(double t) const {
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) < 1e-11) return states[i];
  throw domain_error("EulerTraj: no state stored at t=" + std::to_string(t));
}

bool EulerTraj::has(double t) const {
  for (double ts : times)
    if (std::abs(ts - t) < 1e-11) return true;
  return false;
}

EulerTraj solve_euler_nonlinear(const Field& omega0, const EulerRunParams& p,
                                const VorticityForcing& forcing) {
  require(p.T > 0.0 && p.dt > 0.0, "solve_euler_nonlinear: need T, dt > 0");
  const GridPtr& g = omega0.grid();
  const XProfile zero_b = XProfile::Zero(g->n_x());
  const int n_steps = static_cast<int>(std::round(p.T / p.dt));
  require(std::abs(n_steps * p.dt - p.T) < 1e-10,
          "solve_euler_nonlinear: T must be a multiple of dt");

  auto rhs = [&](const Field& w, double t) -> Field {
    auto [u, v] = velocity_from_vorticity(w, zero_b, p.u_far);
    Field r = -1.0 * advect(u, v, w);
    if (forcing) r += forcing(t);
    return r;
  };

  EulerTraj traj;
  Field w = omega0;
  for (int step = 0; step <= n_steps; ++step) {
    const double t = step * p.dt;
    auto [u, v] = velocity_from_vorticity(w, zero_b, p.u_far);
    w.require_finite("solve_euler_nonlinear");
    traj.times.push_back(t);
    traj.energy.push_back(l2_norm_sq(u) + l2_norm_sq(v));
    traj.states.emplace_back(u, v, w, t);
    if (step == n_steps) break;
    check_cfl(u, v, p.dt, p.cfl_max, t);
    const Field k1 = rhs(w, t);
    const Field k2 = rhs(w + 0.5 * p.dt * k1, t + 0.5 * p.dt);
    const Field k3 = rhs(w + 0.5 * p.dt * k2, t + 0.5 * p.dt);
    const Field k4 = rhs(w + p.dt * k3, t + p.dt);
    w += (p.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return traj;
}

EulerTraj solve_euler_linearized(const EulerTraj& background,
                                 const BoundaryProfileFn& v_bottom,
                                 const EulerRunParams& p,
                                 const VorticityForcing& forcing) {
  require(!background.states.empty(), "solve_euler_linearized: empty background");
  const GridPtr& g = background.states.front().omega.grid();
  const int n_steps = static_cast<int>(std::round(p.T / p.dt));
  require(std::abs(n_steps * p.dt - p.T) < 1e-10,
          "solve_euler_linearized: T must be a multiple of dt");
  for (int step = 0; step <= n_steps; ++step) {
    require(background.has(step * p.dt), "solve_euler_linearized: background missing a time level");
    if (step < n_steps)
      require(background.has((step + 0.5) * p.dt),
              "solve_euler_linearized: background missing a half-step level");
  }

  auto rhs = [&](const Field& wj, double t) -> Field {
    const EulerState& bg = background.at(t);
    auto [uj, vj] = velocity_from_vorticity(wj, v_bottom(t));
    Field r = -1.0 * advect(bg.u, bg.v, wj) - advect(uj, vj, bg.omega);
    if (forcing) r += forcing(t);
    return r;
  };

  EulerTraj traj;
  Field w = Field::zero(g, FieldKind::interior);
  for (int step = 0; step <= n_steps; ++step) {
    const double t = step * p.dt;
    auto [u, v] = velocity_from_vorticity(w, v_bottom(t));
    w.require_finite("solve_euler_linearized");
    traj.times.push_back(t);
    traj.energy.push_back(l2_norm_sq(u) + l2_norm_sq(v));
    traj.states.emplace_back(u, v, w, t);
    if (step == n_steps) break;
    const Field k1 = rhs(w, t);
    const Field k2 = rhs(w + 0.5 * p.dt * k1, t + 0.5 * p.dt);
    const Field k3 = rhs(w + 0.5 * p.dt * k2, t + 0.5 * p.dt);
    const Field k4 = rhs(w + p.dt * k3, t + p.dt);
    w += (p.dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return traj;
}

Field euler_pressure(const EulerState& s) {
  // -lap(p) = div(U.grad U); Neumann wall data from the y-momentum equation
  // with v(.,0) = 0 steady: d_y p(0) = -(u d_x v + v d_y v)(0).
  const Field a1 = advect(s.u, s.v, s.u);
  const Field a2 = advect(s.u, s.v, s.v);
  const Field rhs = -1.0 * (ddx(a1) + ddy(a2));
  XProfile neumann = -1.0 * a2.values().col(0);
  return solve_poisson(rhs, BoundarySpec::neumann(neumann),
                       BoundarySpec::decay());
}

Field euler_pressure_linearized(const EulerState& sj, const EulerState& bg,
                                const XProfile& dvdt_bottom) {
  const Field a1 = advect(bg.u, bg.v, sj.u) + advect(sj.u, sj.v, bg.u);
  const Field a2 = advect(bg.u, bg.v, sj.v) + advect(sj.u, sj.v, bg.v);
  const Field rhs = -1.0 * (ddx(a1) + ddy(a2));
  XProfile neumann = -(dvdt_bottom + XProfile(a2.values().col(0)));
  return solve_poisson(rhs, BoundarySpec::neumann(neumann),
                       BoundarySpec::decay());
}

}  // namespace bll
