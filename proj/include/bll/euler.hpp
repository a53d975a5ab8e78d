#ifndef BLL_EULER_HPP
#define BLL_EULER_HPP

#include <functional>
#include <optional>
#include <vector>

#include "bll/field.hpp"

namespace bll {

// Incompressible Euler state on the interior grid.
struct EulerState {
  Field u, v, omega;
  double t = 0.0;

  EulerState(Field u_, Field v_, Field omega_, double t_);
  // Checks divergence, wall impermeability (against the supplied boundary
  // values) and the vorticity/velocity consistency.
  void check_invariants(const XProfile& v_bottom, double tol = 1e-8) const;
};

// Time-indexed trajectory with exact-time lookup.
struct EulerTraj {
  std::vector<double> times;
  std::vector<EulerState> states;
  std::vector<double> energy;  // L2 kinetic energy at each stored time

  const EulerState& at(double t) const;
  bool has(double t) const;
};

struct EulerRunParams {
  double T = 0.25;
  double dt = 1e-2;
  double u_far = 0.0;     // x-mean tangential velocity at Y_max
  double cfl_max = 0.9;
};

// Vorticity forcing callback (already in curl form), by time.
using VorticityForcing = std::function<Field(double)>;
// Wall-normal boundary data for the linearized systems, by time.
using BoundaryProfileFn = std::function<XProfile(double)>;

// Nonlinear Euler: RK4 transport of vorticity, velocity recovered from
// omega with v=0 at the wall. Stores every step.
EulerTraj solve_euler_nonlinear(const Field& omega0, const EulerRunParams& p,
                                const VorticityForcing& forcing = nullptr);

// Linearized Euler around a stored background trajectory, in vorticity form:
// d_t omega_j + U0.grad(omega_j) + Uj.grad(omega0) = forcing,
// with v_j = v_bottom(t) at the wall and zero initial data. The background
// must contain states at the half-step times used by the RK4 stages.
EulerTraj solve_euler_linearized(const EulerTraj& background,
                                 const BoundaryProfileFn& v_bottom,
                                 const EulerRunParams& p,
                                 const VorticityForcing& forcing = nullptr);

// Pressure recovery by a Poisson solve: -lap(p) = div(U.grad U) with Neumann
// data at the wall from the y-momentum equation and decay at the top.
Field euler_pressure(const EulerState& s);
// Linearized variant; dvdt_bottom is the time derivative of the prescribed
// wall-normal data of the linearized state.
Field euler_pressure_linearized(const EulerState& sj, const EulerState& bg,
                                const XProfile& dvdt_bottom);

}  // namespace bll

#endif
