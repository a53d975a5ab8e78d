#include "bll/ns.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <tuple>
#include <vector>

#include "bll/banded.hpp"
#include "bll/derivs.hpp"
#include "bll/poisson.hpp"
#include "bll/quad.hpp"
#include "bll/spectral.hpp"

namespace bll {

namespace {

Field broadcast_x(const GridPtr& g, const XProfile& prof) {
  Field out(g, FieldKind::interior);
  for (int j = 0; j < out.n_vert(); ++j) out.values().col(j) = prof;
  return out;
}

Field exp_minus_y(const GridPtr& g) {
  return Field::sample(g, FieldKind::interior,
                       [](double, double y) { return std::exp(-y); });
}

std::pair<Field, Field> eval_forcing(const NSForcing& f, const GridPtr& g,
                                     double t) {
  if (f) return f(t);
  return {Field::zero(g, FieldKind::interior),
          Field::zero(g, FieldKind::interior)};
}

void dump_state(const std::string& prefix, const NSState& s,
                const std::string& reason) {
  const auto write_raw = [&](const std::string& name, const Field& f) {
    std::ofstream out(prefix + "_" + name + ".f64", std::ios::binary);
    out.write(reinterpret_cast<const char*>(f.values().data()),
              static_cast<std::streamsize>(sizeof(double) * f.values().size()));
  };
  write_raw("u", s.u);
  write_raw("v", s.v);
  write_raw("p", s.p);
  write_raw("omega", s.omega);
  std::ofstream man(prefix + "_manifest.json");
  man << "{\n"
      << "  \"reason\": \"" << reason << "\",\n"
      << "  \"t\": " << s.t << ",\n"
      << "  \"epsilon\": " << s.epsilon << ",\n"
      << "  \"gamma\": " << s.gamma << ",\n"
      << "  \"beta\": " << s.beta << ",\n"
      << "  \"fields\": [\"u\", \"v\", \"p\", \"omega\"],\n"
      << "  \"shape\": [" << s.u.n_x() << ", " << s.u.n_vert() << "],\n"
      << "  \"dtype\": \"<f8\",\n"
      << "  \"order\": \"row-major, x fastest\"\n"
      << "}\n";
}

}  // namespace

NSState::NSState(Field u_, Field v_, Field p_, Field omega_, double t_)
    : u(std::move(u_)),
      v(std::move(v_)),
      p(std::move(p_)),
      omega(std::move(omega_)),
      t(t_) {
  require(u.kind() == FieldKind::interior && v.kind() == FieldKind::interior &&
              p.kind() == FieldKind::interior &&
              omega.kind() == FieldKind::interior,
          "NSState: interior fields required");
}

void NSState::check_invariants(double div_tol, double boundary_tol) const {
  const double dmax = (ddx(u) + ddy(v)).max_abs();
  if (dmax >= div_tol)
    throw solver_error("NSState: divergence " + std::to_string(dmax) +
                       " exceeds tolerance");
  const double vw = wall_trace(v).cwiseAbs().maxCoeff();
  if (vw >= 1e-10)
    throw solver_error("NSState: wall-normal velocity " + std::to_string(vw) +
                       " at the wall");
  const XProfile res = beta * wall_trace(u) -
                       std::pow(epsilon, gamma) * wall_deriv(u, 1);
  const double rmax = res.cwiseAbs().maxCoeff();
  if (rmax >= boundary_tol)
    throw solver_error("NSState: friction-condition residual " +
                       std::to_string(rmax) + " exceeds tolerance");
}

// ---------------------------------------------------------------------------
// Stepper
// ---------------------------------------------------------------------------

struct NSStepper::Impl {
  GridPtr grid;
  NSParams par;

  // Viscous Helmholtz factorizations (I - a(d2 - k^2)) per x mode with
  // Dirichlet rows at the wall and the top, rebuilt when dt changes.
  double helm_dt = -1.0;
  std::vector<BandedLU> helm;
  // Influence data per mode: the homogeneous solution with unit wall
  // vorticity, and the wall-velocity response it induces.
  std::vector<Eigen::VectorXd> omega_h;
  Eigen::VectorXd resp;
  // Mode-wise Poisson factorizations (d2 - k^2) with Dirichlet rows, used to
  // compute the responses; built once.
  std::vector<BandedLU> pois;

  // Multistep history of the advective term.
  bool has_prev = false;
  Field prev_n;
  double prev_dt = 0.0, prev_end_t = 0.0;

  double energy_ref = -1.0;
  std::vector<double> dy_min;  // per-node vertical spacing for the CFL bound
  std::ofstream diag_out;
  NSStepDiagnostics diag;

  explicit Impl(GridPtr g, NSParams p)
      : grid(std::move(g)),
        par(std::move(p)),
        prev_n(Field::zero(grid, FieldKind::interior)) {
    build_poisson();
    const auto& yn = grid->y_nodes();
    dy_min.resize(yn.size());
    for (size_t i = 0; i < yn.size(); ++i) {
      double d = 1e300;
      if (i > 0) d = std::min(d, yn[i] - yn[i - 1]);
      if (i + 1 < yn.size()) d = std::min(d, yn[i + 1] - yn[i]);
      dy_min[i] = d;
    }
    if (!par.diag_csv.empty()) {
      diag_out.open(par.diag_csv, std::ios::app);
      diag_out << "t,dt,energy,div_max,robin_residual,v_wall_max,wall_flux,"
                  "dissipation,forcing_power,balance_residual\n";
    }
  }

  double wall_coupling() const {
    return par.free_slip ? 0.0
                         : par.beta * std::pow(par.epsilon, -par.gamma);
  }

  void build_poisson() {
    const VertOps& ops = grid->ops_y();
    const int ny = grid->n_y();
    const int nm = grid->n_x() / 2 + 1;
    pois.reserve(nm);
    for (int k = 0; k < nm; ++k) {
      BandedLU lu(ny, 5, 5);
      for (int i = 1; i < ny - 1; ++i) {
        const int s = ops.window_start(i);
        const auto& row = ops.d2_row(i);
        for (int j = 0; j < VertOps::kWindow; ++j) lu.set(i, s + j, row[j]);
        lu.add(i, i, -static_cast<double>(k) * k);
      }
      lu.set(0, 0, 1.0);
      lu.set(ny - 1, ny - 1, 1.0);
      lu.factor();
      pois.push_back(std::move(lu));
    }
  }

  // Factor the viscous solves for this dt and precompute the influence data:
  // for each mode, the homogeneous viscous solution omega_h with unit wall
  // value, and the wall velocity resp(k) it induces through the recovery
  // (streamfunction solve for k >= 1, vertical integral for the mean mode).
  void build_helmholtz(double dt) {
    if (std::abs(dt - helm_dt) < 1e-15 * (1.0 + dt)) return;
    const double a = 0.5 * par.epsilon * par.epsilon * dt;
    const VertOps& ops = grid->ops_y();
    const int ny = grid->n_y();
    const int nm = grid->n_x() / 2 + 1;
    helm.clear();
    helm.reserve(nm);
    omega_h.assign(nm, Eigen::VectorXd());
    resp = Eigen::VectorXd::Zero(nm);
    for (int k = 0; k < nm; ++k) {
      BandedLU lu(ny, 5, 5);
      for (int i = 1; i < ny - 1; ++i) {
        const int s = ops.window_start(i);
        const auto& row = ops.d2_row(i);
        for (int j = 0; j < VertOps::kWindow; ++j)
          lu.set(i, s + j, -a * row[j]);
        lu.add(i, i, 1.0 + a * static_cast<double>(k) * k);
      }
      lu.set(0, 0, 1.0);
      lu.set(ny - 1, ny - 1, 1.0);
      lu.factor();

      Eigen::VectorXd wh = Eigen::VectorXd::Zero(ny);
      wh(0) = 1.0;
      wh = lu.solve(wh);
      if (k == 0) {
        resp(0) = -ops.quad_weights().dot(wh);
      } else if (k < grid->n_x() / 2) {
        // (d2 - k^2) w = omega_h, w(0) = w(top) = 0; the induced wall
        // velocity of the unit-wall-vorticity mode is d_y w at the wall.
        Eigen::VectorXd w = wh;
        w(0) = 0.0;
        w(ny - 1) = 0.0;
        w = pois[k].solve(w);
        Eigen::MatrixXd row(1, ny);
        row.row(0) = w.transpose();
        resp(k) = ops.d1(row)(0, 0);
      }
      omega_h[k] = std::move(wh);
      helm.push_back(std::move(lu));
    }
    const double c = wall_coupling();
    for (int k = 0; k < nm; ++k)
      if (std::abs(1.0 - c * resp(k)) < 1e-10)
        throw solver_error(
            "NSStepper: singular wall coupling (1 - c * response ~ 0)");
    helm_dt = dt;
  }

  Field advect(const NSState& s) const {
    return s.u * ddx(s.omega) + s.v * ddy(s.omega);
  }

  // Crank-Nicolson viscous solve of the vorticity equation with homogeneous
  // Dirichlet data, followed by the influence-matrix wall correction that
  // enforces omega(0) = beta eps^{-gamma} u(0) exactly at the discrete level.
  NSState advance(const NSState& s, const Field& n_ext, double dt,
                  double t_mid) {
    build_helmholtz(dt);
    const double eps2 = par.epsilon * par.epsilon;
    const double a = 0.5 * eps2 * dt;
    const auto [fu, fv] = eval_forcing(par.forcing, grid, t_mid);
    const Field curl_f = ddy(fu) - ddx(fv);
    const Field rhs_f = s.omega +
                        a * (ddx_pow(s.omega, 2) + ddy(s.omega, 2)) +
                        dt * (curl_f - n_ext);

    const int n_x = grid->n_x();
    const int ny = grid->n_y();
    const int nm = n_x / 2 + 1;
    Eigen::MatrixXcd wm = x_modes(rhs_f.values());
    for (int k = 0; k < nm; ++k) {
      Eigen::MatrixXd b(ny, 2);
      for (int i = 0; i < ny; ++i) {
        b(i, 0) = wm(k, i).real();
        b(i, 1) = wm(k, i).imag();
      }
      b(0, 0) = b(0, 1) = 0.0;          // wall value added separately
      b(ny - 1, 0) = b(ny - 1, 1) = 0.0;  // decay at the top
      helm[k].solve(b);
      for (int i = 0; i < ny; ++i) wm(k, i) = {b(i, 0), b(i, 1)};
    }
    Field omega_p(grid, FieldKind::interior, x_modes_inverse(wm, n_x));

    // Wall correction: with omega = omega_p + sum_k D_k omega_h,k e^{ikx},
    // the recovered wall velocity is u0p_k + D_k resp(k) per mode, so the
    // friction condition fixes D_k = c u0p_k / (1 - c resp(k)).
    const double c = wall_coupling();
    if (c != 0.0) {
      auto [up, vp] = velocity_from_vorticity(omega_p, {}, par.u_far);
      (void)vp;
      const Eigen::MatrixXcd u0m =
          x_modes(Eigen::MatrixXd(XProfile(wall_trace(up))));
      for (int k = 0; k < nm; ++k) {
        std::complex<double> dk = c * u0m(k, 0) / (1.0 - c * resp(k));
        if (k == n_x / 2) dk = {u0m(k, 0).real() * c / (1.0 - c * resp(k)), 0.0};
        for (int i = 0; i < ny; ++i) wm(k, i) += dk * omega_h[k](i);
      }
      omega_p = Field(grid, FieldKind::interior, x_modes_inverse(wm, n_x));
    }

    auto [u1, v1] = velocity_from_vorticity(omega_p, {}, par.u_far);
    NSState out(u1, v1, Field::zero(grid, FieldKind::interior),
                std::move(omega_p), s.t + dt);
    out.epsilon = s.epsilon;
    out.gamma = s.gamma;
    out.beta = s.beta;
    return out;
  }

  void enforce_dt(const NSState& s, double dt) {
    if (par.eps_dt_factor > 0.0 && dt > par.eps_dt_factor * par.epsilon)
      abort_run(s, "dt " + std::to_string(dt) +
                       " exceeds the layer-resolution bound " +
                       std::to_string(par.eps_dt_factor * par.epsilon));
    const double dx = 2.0 * M_PI / grid->n_x();
    double rate = 0.0;
    for (int j = 0; j < s.u.n_vert(); ++j)
      for (int i = 0; i < s.u.n_x(); ++i)
        rate = std::max(rate, std::abs(s.u(i, j)) / dx +
                                  std::abs(s.v(i, j)) / dy_min[j]);
    if (dt * rate > par.cfl_max)
      abort_run(s, "advective CFL violation: dt * rate = " +
                       std::to_string(dt * rate));
  }

  [[noreturn]] void abort_run(const NSState& s, const std::string& reason) {
    if (!par.dump_prefix.empty()) dump_state(par.dump_prefix, s, reason);
    if (diag_out.is_open()) diag_out.flush();
    throw solver_error("NSStepper: " + reason + " at t = " +
                       std::to_string(s.t));
  }

  void log_step(const NSState& s_old, const NSState& s_new, double dt,
                double forcing_power) {
    const double eps2 = par.epsilon * par.epsilon;
    NSStepDiagnostics d;
    d.t = s_new.t;
    d.dt = dt;
    d.energy = 0.5 * (l2_norm_sq(s_new.u) + l2_norm_sq(s_new.v));
    d.div_max = (ddx(s_new.u) + ddy(s_new.v)).max_abs();
    d.robin_residual =
        (par.beta * wall_trace(s_new.u) -
         std::pow(par.epsilon, par.gamma) * wall_deriv(s_new.u, 1))
            .cwiseAbs()
            .maxCoeff();
    d.v_wall_max = wall_trace(s_new.v).cwiseAbs().maxCoeff();
    const XProfile u0 = wall_trace(s_new.u);
    const XProfile du0 = wall_deriv(s_new.u, 1);
    d.wall_flux = eps2 * (2.0 * M_PI / grid->n_x()) * u0.dot(du0);
    d.dissipation =
        eps2 * (l2_norm_sq(ddx(s_new.u)) + l2_norm_sq(ddy(s_new.u)) +
                l2_norm_sq(ddx(s_new.v)) + l2_norm_sq(ddy(s_new.v)));
    d.forcing_power = forcing_power;
    const double e_old = 0.5 * (l2_norm_sq(s_old.u) + l2_norm_sq(s_old.v));
    d.balance_residual = std::abs((d.energy - e_old) / dt + d.dissipation -
                                  d.wall_flux - d.forcing_power);
    diag = d;
    if (diag_out.is_open())
      diag_out << d.t << ',' << d.dt << ',' << d.energy << ',' << d.div_max
               << ',' << d.robin_residual << ',' << d.v_wall_max << ','
               << d.wall_flux << ',' << d.dissipation << ',' << d.forcing_power
               << ',' << d.balance_residual << '\n';
  }
};

NSStepper::NSStepper(GridPtr grid, NSParams params)
    : impl_(std::make_unique<Impl>(std::move(grid), std::move(params))) {}
NSStepper::~NSStepper() = default;
NSStepper::NSStepper(NSStepper&&) noexcept = default;

const NSParams& NSStepper::params() const { return impl_->par; }
const NSStepDiagnostics& NSStepper::last_diagnostics() const {
  return impl_->diag;
}

NSState NSStepper::initialize(const Field& u0, const Field& v0, double t0) {
  Impl& im = *impl_;
  require(u0.kind() == FieldKind::interior &&
              u0.grid()->same_layout(*im.grid) &&
              v0.grid()->same_layout(*im.grid),
          "NSStepper::initialize: grid mismatch");
  const Field omega0 = ddy(u0) - ddx(v0);
  auto [u, v] = velocity_from_vorticity(omega0, {}, im.par.u_far);
  NSState s(u, v, Field::zero(im.grid, FieldKind::interior), omega0, t0);
  s.epsilon = im.par.epsilon;
  s.gamma = im.par.gamma;
  s.beta = im.par.beta;
  s.p = ns_pressure(s, im.par.forcing);
  im.has_prev = false;
  im.energy_ref = std::max(0.5 * (l2_norm_sq(u) + l2_norm_sq(v)), 1e-12);
  return s;
}

NSState NSStepper::step(const NSState& s, double dt) {
  Impl& im = *impl_;
  require(dt > 0.0, "NSStepper::step: dt must be positive");
  require(s.u.grid()->same_layout(*im.grid), "NSStepper::step: grid mismatch");
  if (!s.u.all_finite() || !s.v.all_finite() || !s.omega.all_finite())
    im.abort_run(s, "non-finite state");
  im.enforce_dt(s, dt);

  const Field n_now = im.advect(s);
  const bool ab2 = im.has_prev &&
                   std::abs(im.prev_dt - dt) < 1e-14 * (1.0 + dt) &&
                   std::abs(im.prev_end_t - s.t) < 1e-12 * (1.0 + s.t);
  const double t_mid = s.t + 0.5 * dt;

  NSState out = s;
  if (ab2) {
    out = im.advance(s, 1.5 * n_now - 0.5 * im.prev_n, dt, t_mid);
  } else {
    // Trapezoidal predictor-corrector start.
    NSState pred = im.advance(s, n_now, dt, t_mid);
    out = im.advance(s, 0.5 * (n_now + im.advect(pred)), dt, t_mid);
  }
  out.p = ns_pressure(out, im.par.forcing);

  if (!out.u.all_finite() || !out.v.all_finite() || !out.p.all_finite())
    im.abort_run(out, "non-finite values after step");
  const double energy = 0.5 * (l2_norm_sq(out.u) + l2_norm_sq(out.v));
  if (im.energy_ref < 0.0)
    im.energy_ref =
        std::max(0.5 * (l2_norm_sq(s.u) + l2_norm_sq(s.v)), 1e-12);
  if (energy > im.par.energy_abort_factor * im.energy_ref)
    im.abort_run(out, "kinetic energy grew past the abort factor");

  const auto [fu, fv] = eval_forcing(im.par.forcing, im.grid, t_mid);
  const double power = l2_inner(out.u, fu) + l2_inner(out.v, fv);
  im.log_step(s, out, dt, power);

  im.prev_n = n_now;
  im.prev_dt = dt;
  im.prev_end_t = out.t;
  im.has_prev = true;
  return out;
}

Field ns_pressure(const NSState& s, const NSForcing& forcing) {
  const GridPtr& g = s.u.grid();
  const double eps2 = s.epsilon * s.epsilon;
  const auto [fu, fv] = eval_forcing(forcing, g, s.t);
  const Field nu = s.u * ddx(s.u) + s.v * ddy(s.u);
  const Field nv = s.u * ddx(s.v) + s.v * ddy(s.v);
  const Field su = fu - nu + eps2 * (ddx_pow(s.u, 2) + ddy(s.u, 2));
  const Field sv = fv - nv + eps2 * (ddx_pow(s.v, 2) + ddy(s.v, 2));
  const Field rhs = ddx(su) + ddy(sv);  // lap(p) = div(F - N + eps^2 lap U)
  const XProfile nb = wall_trace(sv);   // d_t v vanishes on the wall
  return solve_poisson(rhs, BoundarySpec::neumann(nb), BoundarySpec::decay());
}

// ---------------------------------------------------------------------------
// Error fields and diagnostics
// ---------------------------------------------------------------------------

ErrorState error_fields(const NSState& ns, const ApproxSolution& approx) {
  require(ns.u.grid()->same_layout(*approx.u.grid()),
          "error_fields: grid mismatch");
  require(std::abs(ns.t - approx.t) <= 1e-9 * (1.0 + std::abs(ns.t)),
          "error_fields: time mismatch");
  require(std::abs(ns.epsilon - approx.eps) <= 1e-12 &&
              std::abs(ns.gamma - gamma_value(approx.gamma)) <= 1e-12 &&
              std::abs(ns.beta - approx.beta) <= 1e-12,
          "error_fields: parameter mismatch");
  require(approx.omega.has_value(),
          "error_fields: approximate solution lacks the defining-operator "
          "vorticity");
  const GridPtr& g = ns.u.grid();
  const double eps = ns.epsilon;
  const Field emy = exp_minus_y(g);
  ErrorState es{ns.u - approx.u,
                ns.v - approx.v,
                ns.p - approx.p,
                ns.omega - *approx.omega,
                Field::zero(g, FieldKind::interior),
                Field::zero(g, FieldKind::interior),
                ns.t,
                ns.epsilon,
                ns.gamma,
                ns.beta};
  es.tilde_v = es.v + (eps * eps) * (broadcast_x(g, approx.fg.f) * emy);
  es.eta = compute_eta(es, approx.fg.g);
  return es;
}

Field compute_eta(const ErrorState& err, const XProfile& g) {
  const GridPtr& grid = err.u.grid();
  const double c = err.beta * std::pow(err.epsilon, -err.gamma);
  return err.omega_err - c * err.u -
         err.epsilon * (broadcast_x(grid, g) * exp_minus_y(grid));
}

Field eta_residual(const ErrorState& err, const ApproxSolution& approx,
                   const Field& r1, const Field& r2, const Field& h,
                   const Field& dt_eta) {
  require(approx.omega && approx.dy_omega && approx.div,
          "eta_residual: defining-operator fields missing on the "
          "approximate solution");
  const GridPtr& g = err.u.grid();
  const double eps = err.epsilon;
  const double eps2 = eps * eps;
  const double c = err.beta * std::pow(eps, -err.gamma);
  const Field emy = exp_minus_y(g);

  const Field dy_ua = *approx.omega + ddx(approx.v);
  const Field dy_va = *approx.div - ddx(approx.u);
  const Field eta_a = *approx.omega - c * approx.u;
  const Field dy_eta_a = *approx.dy_omega - c * dy_ua;
  const Field tilde_va =
      approx.v - eps2 * (broadcast_x(g, approx.fg.f) * emy);

  const Field dx_eta = ddx(err.eta);
  const Field dy_eta = ddy(err.eta);
  const Field lap_eta = ddx_pow(err.eta, 2) + ddy(err.eta, 2);

  Field lhs = dt_eta - eps2 * lap_eta + approx.u * dx_eta +
              tilde_va * dy_eta + err.u * ddx(eta_a) +
              err.tilde_v * dy_eta_a + err.u * dx_eta + err.tilde_v * dy_eta -
              c * ddx(err.p);
  Field rhs = ddy(r1) - ddx(r2) +
              eps2 * (broadcast_x(g, approx.fg.f) * emy) * dy_ua +
              eps2 * (broadcast_x(g, ddx_profile(approx.fg.f)) * emy) * dy_va -
              c * r1 + h;
  return lhs - rhs;
}

Field error_pressure_from_sources(const Field& F, const Field& G,
                                  const Field& r1, const Field& r2,
                                  const XProfile& neumann_bottom) {
  const Field rhs = -1.0 * (ddx(F) + ddy(G) - ddx(r1) - ddy(r2));
  return solve_poisson(rhs, BoundarySpec::neumann(neumann_bottom),
                       BoundarySpec::decay());
}

Field error_pressure_solve(const ErrorState& err,
                           const ApproxSolution& approx, const Field& r1,
                           const Field& r2) {
  require(approx.omega && approx.div,
          "error_pressure_solve: defining-operator fields missing on the "
          "approximate solution");
  const GridPtr& g = err.u.grid();
  const double eps = err.epsilon;
  const double eps2 = eps * eps;
  const Field emy = exp_minus_y(g);
  const Field dy_ua = *approx.omega + ddx(approx.v);
  const Field dy_va = *approx.div - ddx(approx.u);
  const Field tilde_va =
      approx.v - eps2 * (broadcast_x(g, approx.fg.f) * emy);

  const Field F = approx.u * ddx(err.u) + tilde_va * ddy(err.u) +
                  err.u * ddx(approx.u) + err.tilde_v * dy_ua +
                  err.u * ddx(err.u) + err.tilde_v * ddy(err.u);
  const Field G = approx.u * ddx(err.v) + tilde_va * ddy(err.v) +
                  err.u * ddx(approx.v) + err.tilde_v * dy_va +
                  err.u * ddx(err.v) + err.tilde_v * ddy(err.v);

  const XProfile nb =
      -err.beta * std::pow(eps, 2.0 - err.gamma) *
          XProfile(wall_trace(ddx(err.u))) -
      std::pow(eps, 3) * XProfile(ddx_profile(approx.fg.g0)) +
      XProfile(wall_trace(r2)) + eps2 * approx.fg.dt_f -
      std::pow(eps, 4) * XProfile(ddx_profile(approx.fg.f, 2)) -
      XProfile(wall_trace(approx.u).cwiseProduct(wall_trace(ddx(err.v))));
  return error_pressure_from_sources(F, G, r1, r2, nb);
}

EnergyFunctionals energy_functionals(const ErrorState& err, const Field& eta,
                                     const GevreyParams& gev) {
  GevreyParams p3 = gev;
  p3.k = 3;
  GevreyParams p2 = gev;
  p2.k = 2;
  const double eps2 = err.epsilon * err.epsilon;
  const auto sq = [](double x) { return x * x; };

  EnergyFunctionals out;
  out.E = (sq(gevrey_X(err.u, p3).value) + sq(gevrey_X(err.v, p3).value) +
           eps2 * eps2) /
              eps2 +
          sq(gevrey_X(eta, p2).value);
  out.F = (sq(gevrey_Y(err.u, p3).value) + sq(gevrey_Y(err.v, p3).value)) /
              eps2 +
          sq(gevrey_Y(eta, p2).value);
  out.G = sq(gevrey_X(ddx(err.u), p3).value) +
          sq(gevrey_X(ddy(err.u), p3).value) +
          sq(gevrey_X(ddx(err.v), p3).value) +
          sq(gevrey_X(ddy(err.v), p3).value) +
          eps2 * (sq(gevrey_X(ddx(eta), p2).value) +
                  sq(gevrey_X(ddy(eta), p2).value));
  return out;
}

}  // namespace bll
