#ifndef BLL_EXPANSION_HPP
#define BLL_EXPANSION_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bll/euler.hpp"
#include "bll/field.hpp"
#include "bll/norms.hpp"
#include "bll/prandtl.hpp"

namespace bll {

enum class Gamma { half, one };
double gamma_value(Gamma g);

struct PipelineConfig {
  Gamma gamma = Gamma::half;
  double T = 0.25;
  // Step of the later stages. The base Euler flow and the first layer stage
  // run (and store) at dt/2 so the linearized Euler RK4 stages can evaluate
  // their background and wall data at half-step times.
  double dt = 2.5e-3;
  double beta = 1.0;
  double u_far = 0.0;
  double cfl_max = 0.9;
  Up1Transport up1_transport = Up1Transport::dy_ve0;
};

// Immutable stage outputs of the construction pipeline.
// gamma = 1/2 hierarchy: base Euler flow -> first layer stage (up1)
//   -> linearized Euler correction of order 3 (elin) -> second layer stage
//   (up2) -> third layer stage (up3). The vertical layer velocities are
//   recovered on demand, two orders up: v_p^(j+2) = recover_vp(u_p^(j)).
// gamma = 1 hierarchy: base Euler flow -> nonlinear layer profile in shifted
//   variables (tilde_u) -> linearized Euler correction of order 1 (elin)
//   -> first layer corrector (up1c). The order-zero layer field is
//   u_p^(0) = tilde_u - (wall trace of the base Euler flow).
struct Pipeline {
  GridPtr grid;
  PipelineConfig cfg;
  EulerTraj e0;
  EulerTraj elin;
  LayerTraj up1, up2, up3;  // gamma = 1/2 (up1 at dt/2 levels)
  LayerTraj tilde_u, up1c;  // gamma = 1 (tilde_u at dt/2 levels)

  std::vector<double> output_times() const;  // multiples of cfg.dt
};

Pipeline run_pipeline(GridPtr grid, const Field& omega0,
                      const PipelineConfig& cfg);

// Wall-trace callbacks bound to the stored base/linearized Euler stages.
// For gamma = 1/2 the ve4 entry carries the matching trace of the omitted
// fourth-order Euler correction, -v_p^(4)(t,x,0).
StageTraces pipeline_traces(const Pipeline& pl);

// gamma = 1 derived layer fields at time t.
Field g1_up0(const Pipeline& pl, double t);
// Explicit left-hand-side terms of the gamma = 1 first-corrector equation,
// for plugging solved fields back into the stage PDE.
Field g1_up1_lhs(const Pipeline& pl, double t, const Field& u);

// Boundary-data profiles of the modified system.
struct ForcingProfiles {
  XProfile f, f_bar, g0, g;  // g = g0 + eps d_x f
  XProfile dt_f, dt_g0, dt_f_bar;
};
ForcingProfiles compute_f_g0(const Pipeline& pl, double eps, double t);

// Interior-grid sampling of a layer field at z = y / eps; rows with
// y / eps > Z_max are zero (layer profiles have decayed there).
Field lift_layer(const Field& layer, double eps);

struct ApproxSolution {
  Gamma gamma = Gamma::half;
  double eps = 0.0;
  double beta = 1.0;
  double t = 0.0;
  Field u, v, p;
  ForcingProfiles fg;
  // Defining-operator evaluations filled in by assemble(): the divergence
  // with the vertical derivative of each lifted layer component taken on the
  // layer grid, and likewise the wall derivative of u. Interior stencils
  // cannot resolve the lifted layer profiles to these tolerances.
  std::optional<Field> div;
  std::optional<XProfile> wall_dy_u;
  // Vorticity and its vertical derivative, again with the layer parts
  // differentiated on their own grid before lifting.
  std::optional<Field> omega;
  std::optional<Field> dy_omega;

  ApproxSolution(Field u_, Field v_, Field p_);
  // Checks the structural identities: divergence to discretization
  // tolerance, wall-normal trace = eps^2 f at nodes, the wall Robin
  // condition with g0 to stencil tolerance, and g = g0 + eps d_x f.
  void check_invariants(double div_tol = 1e-6, double bc_tol = 1e-6) const;
};

ApproxSolution assemble(const Pipeline& pl, double eps, double t);

struct Remainders {
  Field r1, r2;
  // Named additive groups of -R1 / -R2 (formula path only).
  std::vector<std::pair<std::string, Field>> groups1, groups2;
};

// Term-by-term transcription of the remainder representation.
Remainders remainders_formula(const Pipeline& pl, double eps, double t);
// Independent path: minus the left-hand side of the modified system applied
// to the assembled composite fields, with time derivatives reconstructed
// from the stage PDEs (never from stored-state differencing).
Remainders remainders_residual(const Pipeline& pl, double eps, double t);

// Forcing field of the modified vorticity equation:
// h = -eps e^{-y} [dt_g + u^a dx(g) - tilde_v^a g + u dx(g) - tilde_v g
//                  - eps^2 g - eps^2 dxx(g)],
// where tilde_v^a = v^a - eps^2 f e^{-y}; (err_u, err_tilde_v) are the error
// fields (zero fields give the approximate-solution part alone).
Field compute_h(const ApproxSolution& ap, const Field& err_u,
                const Field& err_tilde_v, const XProfile& g,
                const XProfile& dt_g);

// Numerical certificates for the assumptions on the approximate solution.
struct AssumptionReport {
  double t = 0.0, eps = 0.0;
  // Truncated weighted sums of the uniform-bound certificates: interior
  // Gevrey band sum for (u^e, v^e) (squared-norm convention) and the
  // Gaussian-weighted layer band sums per layer pair (norm convention).
  double h1_euler = 0.0;
  std::vector<double> h1_layer;
  double h1_tail_share = 0.0;  // last-m share of the interior sum
  // Remainder bounds: squared truncated norms and their eps-normalized
  // ratios.
  double h2_r_x3 = 0.0, h2_gradr_x2 = 0.0;
  double h2_ratio_eps4 = 0.0, h2_grad_ratio_eps2 = 0.0;
  // Boundary-data bounds.
  double h3_f_x5 = 0.0, h3_dtf_x3 = 0.0;
  double h3_g0_x5 = 0.0, h3_dtg0_x3 = 0.0;
  double h3_dtfbar_l2 = 0.0;
  bool finite = false;
};

AssumptionReport verify_assumptions(const Pipeline& pl, double eps, double t,
                                    const Remainders& rem,
                                    const GevreyParams& gev,
                                    const LayerNormParams& lay);

}  // namespace bll

#endif
