#ifndef BLL_NS_HPP
#define BLL_NS_HPP

#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "bll/expansion.hpp"
#include "bll/field.hpp"
#include "bll/norms.hpp"

namespace bll {

// Body forcing (F_u, F_v)(t) in the momentum equations.
using NSForcing = std::function<std::pair<Field, Field>(double)>;

struct NSParams {
  double epsilon = 0.1;
  double gamma = 0.5;  // wall-condition exponent: beta u = eps^gamma d_y u
  double beta = 1.0;
  double u_far = 0.0;   // x-mean tangential velocity held at Y_max
  double cfl_max = 0.9;
  // dt must additionally satisfy dt <= eps_dt_factor * epsilon (layer-time
  // resolution); set to 0 to disable the check.
  double eps_dt_factor = 1.0;
  // Abort when the kinetic energy exceeds this multiple of its running
  // reference max(E(0), 1e-12); the friction condition can inject energy at
  // the wall, so growth is monitored rather than assumed impossible.
  double energy_abort_factor = 100.0;
  // Assemble the wall row as a pure Neumann condition d_y u = 0 regardless of
  // beta (slip-dominant reference).
  bool free_slip = false;
  NSForcing forcing;      // optional
  std::string diag_csv;   // per-step diagnostics appended when non-empty
  std::string dump_prefix;  // state dump written here on abort, when non-empty
};

struct NSState {
  Field u, v, p, omega;
  double t = 0.0;
  double epsilon = 0.1, gamma = 0.5, beta = 1.0;

  NSState(Field u_, Field v_, Field p_, Field omega_, double t_);
  // Structural checks: divergence below div_tol, wall-normal velocity zero at
  // the nodes, and the friction condition |beta u - eps^gamma d_y u| at the
  // wall below boundary_tol (the pressure correction perturbs the implicitly
  // enforced wall row by O(dt * d_x phi)).
  void check_invariants(double div_tol = 1e-8,
                        double boundary_tol = 1e-4) const;
};

// Per-step scalar diagnostics (also the CSV row layout).
struct NSStepDiagnostics {
  double t = 0.0, dt = 0.0;
  double energy = 0.0;        // (1/2) ||U||_{L2}^2
  double div_max = 0.0;
  double robin_residual = 0.0;  // max_x |beta u - eps^gamma d_y u| at y=0
  double v_wall_max = 0.0;
  double wall_flux = 0.0;       // eps^2 int u d_y u dx at y=0
  double dissipation = 0.0;     // eps^2 ||grad U||_{L2}^2
  double forcing_power = 0.0;
  double balance_residual = 0.0;  // |dE/dt + dissipation - flux - power|
};

// Vorticity-streamfunction stepper: Crank-Nicolson viscous terms,
// Adams-Bashforth advection with a trapezoidal predictor-corrector first
// step, velocity recovered from the vorticity so the discrete divergence
// vanishes to machine precision at every node, and the friction condition
// beta u = eps^gamma d_y u enforced implicitly through an influence-matrix
// wall coupling (the implicit treatment absorbs the eps^{-gamma} wall
// stiffness). The pressure is recovered each step from its Poisson equation.
class NSStepper {
 public:
  NSStepper(GridPtr grid, NSParams params);
  ~NSStepper();
  NSStepper(NSStepper&&) noexcept;

  const NSParams& params() const;

  // Projects the initial velocity, recovers the initial pressure from its
  // Poisson equation, and resets the multistep history.
  NSState initialize(const Field& u0, const Field& v0, double t0 = 0.0);

  // One step of size dt. Throws on CFL violation, non-finite values, or
  // energy blow-up past the configured factor (state dumped first when a
  // dump prefix is set).
  NSState step(const NSState& s, double dt);

  const NSStepDiagnostics& last_diagnostics() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Pressure recovery for a (divergence-free) state by a Poisson solve with
// Neumann wall data from the y-momentum equation (d_t v vanishes at the wall).
Field ns_pressure(const NSState& s, const NSForcing& forcing = nullptr);

// Error between the computed solution and the assembled approximate one.
struct ErrorState {
  Field u, v, p;
  Field omega_err;  // vorticity error, approximate part by defining operators
  Field eta;        // omega_err - beta eps^{-gamma} u - eps g e^{-y}
  Field tilde_v;    // v + eps^2 f e^{-y}
  double t = 0.0;
  double epsilon = 0.1, gamma = 0.5, beta = 1.0;
};

// Requires matching grid layout and times, and the defining-operator
// vorticity stored on the approximate solution.
ErrorState error_fields(const NSState& ns, const ApproxSolution& approx);

// eta = omega_err - beta eps^{-gamma} u - eps g e^{-y}; the definition
// round-trips bit-exactly and the wall trace cancels through the vorticity
// boundary identity.
Field compute_eta(const ErrorState& err, const XProfile& g);

// Pointwise residual of the modified vorticity equation; dt_eta must be
// supplied from a stored time stencil of eta.
Field eta_residual(const ErrorState& err, const ApproxSolution& approx,
                   const Field& r1, const Field& r2, const Field& h,
                   const Field& dt_eta);

// Diagnostic pressure from the div of the error momentum equations with the
// wall-normal Neumann data of the y-momentum trace.
Field error_pressure_solve(const ErrorState& err,
                           const ApproxSolution& approx, const Field& r1,
                           const Field& r2);
// Lower-level entry: -lap(p) = dx(F) + dy(G) - dx(R1) - dy(R2) with the given
// Neumann wall data, decay at the top.
Field error_pressure_from_sources(const Field& F, const Field& G,
                                  const Field& r1, const Field& r2,
                                  const XProfile& neumann_bottom);

struct EnergyFunctionals {
  double E = 0.0, F = 0.0, G = 0.0;
};

// E = eps^{-2}(||U||_{X3}^2 + eps^4) + ||eta||_{X2}^2,
// F = eps^{-2} ||U||_{Y3}^2 + ||eta||_{Y2}^2,
// G = ||grad U||_{X3}^2 + eps^2 ||grad eta||_{X2}^2.
// The Gevrey parameters are taken at base index 3 for U and 2 for eta.
EnergyFunctionals energy_functionals(const ErrorState& err, const Field& eta,
                                     const GevreyParams& gev);

}  // namespace bll

#endif
