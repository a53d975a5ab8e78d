#ifndef BLL_PRANDTL_HPP
#define BLL_PRANDTL_HPP

#include <functional>
#include <memory>
#include <vector>

#include "bll/field.hpp"

namespace bll {

// Wall-trace profile as a function of time, g(t) -> values on the x nodes.
using TraceFn = std::function<XProfile(double)>;

// Time-indexed layer trajectory with exact-time lookup, storing every step.
struct LayerTraj {
  std::vector<double> times;
  std::vector<Field> fields;

  const Field& at(double t) const;
  bool has(double t) const;
  double dt() const;
};

// Generic IMEX stepper for layer equations of the form
//   d_t u + (explicit transport / source terms) = d_z^2 u,
// with an implicit Crank-Nicolson diffusion solve, Adams-Bashforth-2
// extrapolation of the explicit terms (trapezoidal predictor-corrector on the
// first step), a Neumann or Robin row at z = 0 and a Dirichlet far-field row
// at Z_max. The explicit callback returns the terms as they appear on the
// left-hand side of the equation.
class LayerStepper {
 public:
  using ExplicitLhs = std::function<Field(double, const Field&)>;

  struct Options {
    double dt = 1e-2;
    // Wall condition: d_z u(0) = robin_beta * u(0) + wall(t).
    double robin_beta = 0.0;
    TraceFn wall;          // empty => homogeneous
    TraceFn far_dirichlet; // empty => zero at Z_max
    ExplicitLhs explicit_lhs; // empty => pure diffusion
    // Abort when max|d_z u| exceeds this multiple of (1 + its initial value).
    double blowup_factor = 100.0;
  };

  LayerStepper(GridPtr grid, Options opt, Field initial, double t0 = 0.0);
  ~LayerStepper();
  LayerStepper(LayerStepper&&) noexcept;

  const Field& current() const;
  double t() const;
  void advance();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Wall traces of Euler stage outputs consumed by the linear layer hierarchy.
// Overlines denote traces at y = 0; only the entries a stage uses need to be
// set, missing entries are treated as identically zero.
struct StageTraces {
  TraceFn ue0;      // trace of u_e^(0)
  TraceFn dx_ue0;   // trace of d_x u_e^(0)
  TraceFn dy_ue0;   // trace of d_y u_e^(0)
  TraceFn dxy_ue0;  // trace of d_xy u_e^(0)
  TraceFn dy_ve0;   // trace of d_y v_e^(0)
  TraceFn dyy_ve0;  // trace of d_yy v_e^(0)
  TraceFn dy_ve1;   // trace of d_y v_e^(1) (first-stage transport variant)
  TraceFn ve3;      // trace of v_e^(3)
  TraceFn ve4;      // trace of v_e^(4)
};

// Transport-coefficient variant for the first layer stage: the z-weighted
// coefficient multiplying d_z u_p^(1).
enum class Up1Transport { dy_ve0, dy_ve1 };

// Explicit (non-diffusive) left-hand-side terms of each stage equation,
// evaluated at time t on the candidate field u. Exposed so that time
// derivatives can be reconstructed from the stage PDEs:
//   d_t u = dzz(u) - stage_lhs(t, u).
Field up1_lhs(GridPtr grid, const StageTraces& tr, Up1Transport transport,
              double t, const Field& u);
Field up2_lhs(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
              double t, const Field& u);
Field up3_lhs(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
              const LayerTraj& up2, double t, const Field& u);

// First linear layer stage: d_t u + u dx(ue0~) + ue0~ dx(u) + z c~ dz(u)
// = dzz(u), with dz u(0) = beta * ue0~, zero initial data.
LayerTraj solve_up1(GridPtr grid, const StageTraces& tr, double beta, double T,
                    double dt, Up1Transport transport = Up1Transport::dy_ve0);

// Second stage, coupling to (up1, vp3) and the ve3 trace; wall condition
// dz u(0) = beta * up1(0) - dy_ue0~ (the first-order Euler velocity vanishes).
LayerTraj solve_up2(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
                    double beta, double T, double dt);

// Third stage with all z- and z^2-weighted coefficient terms; wall condition
// dz u(0) = beta * up2(0) (second-order Euler contributions vanish).
LayerTraj solve_up3(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
                    const LayerTraj& up2, double beta, double T, double dt);

// Vertical velocity two orders up the hierarchy:
// v(z) = int_z^{Z_max} d_x u dz', so that d_x u + d_z v = 0 and v(Z_max) = 0.
Field recover_vp(const Field& up);

// Layer pressure corrector from the v_p^(3) momentum balance:
// p(z) = -int_z^{Z_max} [dzz(vp3) - dt_vp3 - ue0~ dx(vp3) - up3 dx_ve0~
//        - vp3 dy_ve0~ - z dxy_ve0~ up1 - z dy_ve0~ dz(vp3)] dz'.
Field solve_pp5(const Field& vp3, const Field& dt_vp3, const Field& up1,
                const Field& up3, const XProfile& ue0, const XProfile& dx_ve0,
                const XProfile& dy_ve0, const XProfile& dxy_ve0);

// Nonlinear layer problem (unit-scaling regime): in shifted variables,
//   d_t u + u dx(u) + v dz(u) + dx_pe0~ = dzz(u),   v = -int_0^z dx(u) dz',
// with the Robin wall condition dz u(0) = beta u(0), far field u -> ue0~, and
// initial data u(0,x,z) = ue0~(0,x).
LayerTraj solve_nonlinear_prandtl_robin(GridPtr grid, const TraceFn& ue0,
                                        const TraceFn& dx_pe0, double beta,
                                        double T, double dt,
                                        double blowup_factor = 100.0);

// Shifted vertical velocity for the nonlinear problem: v = -int_0^z dx(u).
Field nonlinear_prandtl_v(const Field& u);

}  // namespace bll

#endif
