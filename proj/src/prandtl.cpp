#include "bll/prandtl.hpp"

#include <cmath>
#include <utility>

#include "bll/banded.hpp"
#include "bll/derivs.hpp"
#include "bll/spectral.hpp"
#include "bll/vertops.hpp"

namespace bll {

namespace {

constexpr double kDecayTol = 1e-8;

XProfile trace_or_zero(const TraceFn& f, double t, int n_x) {
  return f ? f(t) : XProfile(XProfile::Zero(n_x));
}

// Multiply each x row by a profile value: (c(x) f)(x, z).
Field row_scale(const XProfile& c, const Field& f) {
  Field out = f;
  out.values().array().colwise() *= c.array();
  return out;
}

// Multiply each column by z^power.
Field z_weight(Field f, int power) {
  const auto& z = f.vert_nodes();
  for (int j = 0; j < f.n_vert(); ++j)
    f.values().col(j) *= std::pow(z[j], power);
  return f;
}

void check_decay(const Field& u, double t) {
  // The far-field row is pinned to the Dirichlet value, so inspect the last
  // few free rows for mass reaching the truncation height.
  const int nz = u.n_vert();
  double m = 0.0;
  for (int j = std::max(0, nz - 4); j < nz - 1; ++j)
    m = std::max(m, u.values().col(j).cwiseAbs().maxCoeff());
  if (m >= kDecayTol)
    throw solver_error(
        "layer solve: solution has not decayed at Z_max (value " +
        std::to_string(m) + " at t=" + std::to_string(t) +
        "); enlarge Z_max");
}

}  // namespace

const Field& LayerTraj::at(double t) const {
  for (size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) < 1e-11) return fields[i];
  throw domain_error("LayerTraj: no field stored at t=" + std::to_string(t));
}

bool LayerTraj::has(double t) const {
  for (double ts : times)
    if (std::abs(ts - t) < 1e-11) return true;
  return false;
}

double LayerTraj::dt() const {
  require(times.size() >= 2, "LayerTraj: need at least two levels for dt");
  return times[1] - times[0];
}

struct LayerStepper::Impl {
  GridPtr grid;
  Options opt;
  Field u;
  double t;
  bool have_prev = false;
  Field prev_lhs;
  BandedLU lu;
  double dzu0;

  Impl(GridPtr g, Options o, Field init, double t0)
      : grid(std::move(g)),
        opt(std::move(o)),
        u(std::move(init)),
        t(t0),
        prev_lhs(Field::zero(grid, FieldKind::layer)),
        lu(grid->n_z(), VertOps::kWindow - 1, VertOps::kWindow - 1) {
    require(u.kind() == FieldKind::layer && u.grid()->same_layout(*grid),
            "LayerStepper: layer-kind initial data on the stepper grid required");
    require(opt.dt > 0.0, "LayerStepper: dt must be positive");
    const VertOps& ops = grid->ops_z();
    const int nz = grid->n_z();
    for (int i = 1; i < nz - 1; ++i) {
      lu.set(i, i, 1.0);
      const int s = ops.window_start(i);
      const auto& row = ops.d2_row(i);
      for (int j = 0; j < VertOps::kWindow; ++j)
        lu.add(i, s + j, -0.5 * opt.dt * row[j]);
    }
    {
      const int s = ops.window_start(0);
      const auto& row = ops.d1_row(0);
      for (int j = 0; j < VertOps::kWindow; ++j) lu.set(0, s + j, row[j]);
      lu.add(0, 0, -opt.robin_beta);
    }
    lu.set(nz - 1, nz - 1, 1.0);
    lu.factor();
    dzu0 = ddy(u).max_abs();
  }

  Field explicit_lhs(double tt, const Field& w) const {
    return opt.explicit_lhs ? opt.explicit_lhs(tt, w)
                            : Field::zero(grid, FieldKind::layer);
  }

  Field implicit_solve(const Field& lhs_hat) const {
    const int n_x = grid->n_x();
    const int nz = grid->n_z();
    Field rhs = u + 0.5 * opt.dt * ddy(u, 2) - opt.dt * lhs_hat;
    Eigen::MatrixXd b = rhs.values().transpose();  // nz x nx
    b.row(0) = trace_or_zero(opt.wall, t + opt.dt, n_x).transpose();
    b.row(nz - 1) = trace_or_zero(opt.far_dirichlet, t + opt.dt, n_x).transpose();
    lu.solve(b);
    return Field(grid, FieldKind::layer, b.transpose());
  }

  void advance() {
    const Field lhs_n = explicit_lhs(t, u);
    Field next = Field::zero(grid, FieldKind::layer);
    if (have_prev) {
      next = implicit_solve(1.5 * lhs_n - 0.5 * prev_lhs);
    } else {
      // Trapezoidal predictor-corrector start.
      const Field pred = implicit_solve(lhs_n);
      next = implicit_solve(0.5 * (lhs_n + explicit_lhs(t + opt.dt, pred)));
    }
    prev_lhs = lhs_n;
    have_prev = true;
    u = std::move(next);
    t += opt.dt;
    u.require_finite("LayerStepper::advance");
    if (ddy(u).max_abs() > opt.blowup_factor * (1.0 + dzu0))
      throw solver_error(
          "LayerStepper: wall-gradient blow-up monitor tripped at t=" +
          std::to_string(t));
  }
};

LayerStepper::LayerStepper(GridPtr grid, Options opt, Field initial, double t0)
    : impl_(std::make_unique<Impl>(std::move(grid), std::move(opt),
                                   std::move(initial), t0)) {}
LayerStepper::~LayerStepper() = default;
LayerStepper::LayerStepper(LayerStepper&&) noexcept = default;

const Field& LayerStepper::current() const { return impl_->u; }
double LayerStepper::t() const { return impl_->t; }
void LayerStepper::advance() { impl_->advance(); }

namespace {

LayerTraj march(GridPtr grid, LayerStepper::Options opt, Field initial,
                double T) {
  const int n_steps = static_cast<int>(std::round(T / opt.dt));
  require(n_steps > 0 && std::abs(n_steps * opt.dt - T) < 1e-10,
          "layer solve: T must be a positive multiple of dt");
  LayerStepper stepper(grid, std::move(opt), std::move(initial));
  LayerTraj traj;
  traj.times.push_back(stepper.t());
  traj.fields.push_back(stepper.current());
  for (int s = 0; s < n_steps; ++s) {
    stepper.advance();
    check_decay(stepper.current(), stepper.t());
    traj.times.push_back(stepper.t());
    traj.fields.push_back(stepper.current());
  }
  return traj;
}

}  // namespace

Field up1_lhs(GridPtr grid, const StageTraces& tr, Up1Transport transport,
              double t, const Field& u) {
  const int n_x = grid->n_x();
  const XProfile a = trace_or_zero(tr.ue0, t, n_x);
  const XProfile c = trace_or_zero(tr.dx_ue0, t, n_x);
  const XProfile w = trace_or_zero(
      transport == Up1Transport::dy_ve0 ? tr.dy_ve0 : tr.dy_ve1, t, n_x);
  return row_scale(c, u) + row_scale(a, ddx(u)) +
         z_weight(row_scale(w, ddy(u)), 1);
}

Field up2_lhs(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
              double t, const Field& u) {
  const int n_x = grid->n_x();
  const XProfile a = trace_or_zero(tr.ue0, t, n_x);
  const XProfile c = trace_or_zero(tr.dx_ue0, t, n_x);
  const XProfile w = trace_or_zero(tr.dy_ve0, t, n_x);
  const XProfile v3 = trace_or_zero(tr.ve3, t, n_x);
  const Field& u1 = up1.at(t);
  const Field dz_u1 = ddy(u1);
  return row_scale(a, ddx(u)) + row_scale(c, u) +
         z_weight(row_scale(w, ddy(u)), 1) + u1 * ddx(u1) +
         row_scale(v3, dz_u1) + recover_vp(u1) * dz_u1;
}

Field up3_lhs(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
              const LayerTraj& up2, double t, const Field& u) {
  const int n_x = grid->n_x();
  const XProfile a = trace_or_zero(tr.ue0, t, n_x);
  const XProfile dxu = trace_or_zero(tr.dx_ue0, t, n_x);
  const XProfile dyu = trace_or_zero(tr.dy_ue0, t, n_x);
  const XProfile dxyu = trace_or_zero(tr.dxy_ue0, t, n_x);
  const XProfile dyv = trace_or_zero(tr.dy_ve0, t, n_x);
  const XProfile dyyv = trace_or_zero(tr.dyy_ve0, t, n_x);
  const XProfile v3 = trace_or_zero(tr.ve3, t, n_x);
  const XProfile v4 = trace_or_zero(tr.ve4, t, n_x);
  const Field& u1 = up1.at(t);
  const Field& u2 = up2.at(t);
  const Field dz_u1 = ddy(u1);
  const Field dz_u2 = ddy(u2);
  const Field vp3 = recover_vp(u1);
  const Field vp4 = recover_vp(u2);
  return row_scale(a, ddx(u)) + row_scale(dxu, u) + u1 * ddx(u2) +
         u2 * ddx(u1) + row_scale(dyu, vp3) +
         (row_scale(v3, dz_u2) + vp3 * dz_u2) +
         (row_scale(v4, dz_u1) + vp4 * dz_u1) +
         z_weight(row_scale(dxyu, u1), 1) +
         z_weight(row_scale(dyu, ddx(u1)), 1) +
         z_weight(row_scale(dyv, ddy(u)), 1) +
         0.5 * z_weight(row_scale(dyyv, dz_u1), 2);
}

LayerTraj solve_up1(GridPtr grid, const StageTraces& tr, double beta, double T,
                    double dt, Up1Transport transport) {
  const int n_x = grid->n_x();
  LayerStepper::Options opt;
  opt.dt = dt;
  opt.wall = [&tr, beta, n_x](double t) {
    return XProfile(beta * trace_or_zero(tr.ue0, t, n_x));
  };
  opt.explicit_lhs = [grid, &tr, transport](double t, const Field& u) {
    return up1_lhs(grid, tr, transport, t, u);
  };
  return march(grid, std::move(opt), Field::zero(grid, FieldKind::layer), T);
}

LayerTraj solve_up2(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
                    double beta, double T, double dt) {
  const int n_x = grid->n_x();
  LayerStepper::Options opt;
  opt.dt = dt;
  opt.wall = [&tr, &up1, beta, n_x](double t) {
    return XProfile(beta * wall_trace(up1.at(t)) -
                    trace_or_zero(tr.dy_ue0, t, n_x));
  };
  opt.explicit_lhs = [grid, &tr, &up1](double t, const Field& u) {
    return up2_lhs(grid, tr, up1, t, u);
  };
  return march(grid, std::move(opt), Field::zero(grid, FieldKind::layer), T);
}

LayerTraj solve_up3(GridPtr grid, const StageTraces& tr, const LayerTraj& up1,
                    const LayerTraj& up2, double beta, double T, double dt) {
  LayerStepper::Options opt;
  opt.dt = dt;
  opt.wall = [&up2, beta](double t) {
    return XProfile(beta * wall_trace(up2.at(t)));
  };
  opt.explicit_lhs = [grid, &tr, &up1, &up2](double t, const Field& u) {
    return up3_lhs(grid, tr, up1, up2, t, u);
  };
  return march(grid, std::move(opt), Field::zero(grid, FieldKind::layer), T);
}

Field recover_vp(const Field& up) {
  require(up.kind() == FieldKind::layer, "recover_vp: layer field required");
  return integral_to_top(ddx(up));
}

Field solve_pp5(const Field& vp3, const Field& dt_vp3, const Field& up1,
                const Field& up3, const XProfile& ue0, const XProfile& dx_ve0,
                const XProfile& dy_ve0, const XProfile& dxy_ve0) {
  const Field dz_p = ddy(vp3, 2) - dt_vp3 - row_scale(ue0, ddx(vp3)) -
                     row_scale(dx_ve0, up3) - row_scale(dy_ve0, vp3) -
                     z_weight(row_scale(dxy_ve0, up1), 1) -
                     z_weight(row_scale(dy_ve0, ddy(vp3)), 1);
  return -1.0 * integral_to_top(dz_p);
}

LayerTraj solve_nonlinear_prandtl_robin(GridPtr grid, const TraceFn& ue0,
                                        const TraceFn& dx_pe0, double beta,
                                        double T, double dt,
                                        double blowup_factor) {
  const int n_x = grid->n_x();
  require(static_cast<bool>(ue0),
          "solve_nonlinear_prandtl_robin: far-field trace required");
  LayerStepper::Options opt;
  opt.dt = dt;
  opt.robin_beta = beta;
  opt.far_dirichlet = ue0;
  opt.blowup_factor = blowup_factor;
  opt.explicit_lhs = [grid, &dx_pe0, n_x](double t, const Field& u) {
    Field out = u * ddx(u) + nonlinear_prandtl_v(u) * ddy(u);
    const XProfile dp = trace_or_zero(dx_pe0, t, n_x);
    out.values().array().colwise() += dp.array();
    return out;
  };
  Field init(grid, FieldKind::layer);
  const XProfile u0 = ue0(0.0);
  for (int j = 0; j < grid->n_z(); ++j) init.values().col(j) = u0;
  const int n_steps = static_cast<int>(std::round(T / dt));
  require(n_steps > 0 && std::abs(n_steps * dt - T) < 1e-10,
          "solve_nonlinear_prandtl_robin: T must be a positive multiple of dt");
  LayerStepper stepper(grid, std::move(opt), std::move(init));
  LayerTraj traj;
  traj.times.push_back(stepper.t());
  traj.fields.push_back(stepper.current());
  for (int s = 0; s < n_steps; ++s) {
    stepper.advance();
    traj.times.push_back(stepper.t());
    traj.fields.push_back(stepper.current());
  }
  return traj;
}

Field nonlinear_prandtl_v(const Field& u) {
  require(u.kind() == FieldKind::layer,
          "nonlinear_prandtl_v: layer field required");
  return -1.0 * integral_from_bottom(ddx(u));
}

}  // namespace bll
