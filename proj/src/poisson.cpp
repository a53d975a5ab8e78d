#include "bll/poisson.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "bll/banded.hpp"
#include "bll/derivs.hpp"
#include "bll/spectral.hpp"

namespace bll {

namespace {

constexpr int kBand = 5;

XProfile profile_or_zero(const XProfile& p, int n_x, const char* what) {
  if (p.size() == 0) return XProfile::Zero(n_x);
  require(static_cast<int>(p.size()) == n_x, std::string(what) + ": boundary profile length mismatch");
  return p;
}

}  // namespace

struct PoissonSolver::Impl {
  GridPtr grid;
  BoundarySpec::Type bottom, top;
  std::vector<BandedLU> mode_lu;  // one factorization per x mode

  Impl(GridPtr g, BoundarySpec::Type b, BoundarySpec::Type t)
      : grid(std::move(g)), bottom(b), top(t) {
    require(top == BoundarySpec::Type::dirichlet || top == BoundarySpec::Type::decay,
            "PoissonSolver: top condition must be Dirichlet or decay");
    const VertOps& ops = grid->ops_y();
    const int ny = grid->n_y();
    const int nm = grid->n_x() / 2 + 1;
    mode_lu.reserve(nm);
    for (int k = 0; k < nm; ++k) {
      BandedLU lu(ny, kBand, kBand);
      for (int i = 1; i < ny - 1; ++i) {
        const int s = ops.window_start(i);
        const auto& row = ops.d2_row(i);
        for (int j = 0; j < VertOps::kWindow; ++j) lu.set(i, s + j, row[j]);
        lu.add(i, i, -static_cast<double>(k) * k);
      }
      if (bottom == BoundarySpec::Type::dirichlet) {
        lu.set(0, 0, 1.0);
      } else {
        const int s = ops.window_start(0);
        const auto& row = ops.d1_row(0);
        for (int j = 0; j < VertOps::kWindow; ++j) lu.set(0, s + j, row[j]);
      }
      lu.set(ny - 1, ny - 1, 1.0);
      lu.factor();
      mode_lu.push_back(std::move(lu));
    }
  }
};

PoissonSolver::PoissonSolver(GridPtr grid, BoundarySpec::Type bottom,
                             BoundarySpec::Type top)
    : impl_(std::make_unique<Impl>(std::move(grid), bottom, top)) {}
PoissonSolver::~PoissonSolver() = default;
PoissonSolver::PoissonSolver(PoissonSolver&&) noexcept = default;

Field PoissonSolver::solve(const Field& rhs, const XProfile& bottom_values,
                           const XProfile& top_values) const {
  const Impl& im = *impl_;
  require(rhs.kind() == FieldKind::interior && rhs.grid()->same_layout(*im.grid),
          "PoissonSolver: rhs grid mismatch");
  const int n_x = im.grid->n_x();
  const int ny = im.grid->n_y();
  const int nm = n_x / 2 + 1;

  const XProfile bv = profile_or_zero(bottom_values, n_x, "PoissonSolver");
  const XProfile tv = profile_or_zero(top_values, n_x, "PoissonSolver");

  const Eigen::MatrixXcd rm = x_modes(rhs.values());        // nm x ny
  const Eigen::MatrixXcd bm = x_modes(Eigen::MatrixXd(bv)); // nm x 1
  const Eigen::MatrixXcd tm = x_modes(Eigen::MatrixXd(tv));

  Eigen::MatrixXcd sol(nm, ny);
  for (int k = 0; k < nm; ++k) {
    Eigen::MatrixXd b(ny, 2);
    for (int i = 0; i < ny; ++i) {
      b(i, 0) = rm(k, i).real();
      b(i, 1) = rm(k, i).imag();
    }
    b(0, 0) = bm(k, 0).real();
    b(0, 1) = bm(k, 0).imag();
    b(ny - 1, 0) = tm(k, 0).real();
    b(ny - 1, 1) = tm(k, 0).imag();
    im.mode_lu[k].solve(b);
    for (int i = 0; i < ny; ++i) sol(k, i) = {b(i, 0), b(i, 1)};
  }
  Field out(im.grid, FieldKind::interior, x_modes_inverse(sol, n_x));
  out.require_finite("PoissonSolver::solve");
  return out;
}

Field solve_poisson(const Field& rhs, const BoundarySpec& bottom,
                    const BoundarySpec& top) {
  require(top.type != BoundarySpec::Type::neumann,
          "solve_poisson: Neumann top not supported");
  return cached_poisson(rhs.grid(), bottom.type, top.type)
      .solve(rhs, bottom.values, top.values);
}

const PoissonSolver& cached_poisson(const GridPtr& grid,
                                    BoundarySpec::Type bottom,
                                    BoundarySpec::Type top) {
  static std::mutex mtx;
  static std::map<std::tuple<const Grid*, int, int>,
                  std::unique_ptr<PoissonSolver>>
      cache;
  std::lock_guard<std::mutex> lock(mtx);
  const auto key = std::make_tuple(grid.get(), static_cast<int>(bottom),
                                   static_cast<int>(top));
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<PoissonSolver>(grid, bottom, top))
             .first;
  return *it->second;
}

std::pair<Field, Field> velocity_from_vorticity(const Field& omega,
                                                const XProfile& v_boundary,
                                                double u_far) {
  require(omega.kind() == FieldKind::interior,
          "velocity_from_vorticity: interior vorticity required");
  const GridPtr& grid = omega.grid();
  const int n_x = grid->n_x();
  const int ny = grid->n_y();
  const int nm = n_x / 2 + 1;
  const VertOps& ops = grid->ops_y();

  const XProfile vb = profile_or_zero(v_boundary, n_x, "velocity_from_vorticity");
  require(std::abs(vb.mean()) <= 1e-10 * (1.0 + vb.cwiseAbs().maxCoeff()),
          "velocity_from_vorticity: v_boundary must have zero x-mean");

  Field rhs(grid, FieldKind::interior, -ddx_matrix(omega.values(), 1));
  Field v = cached_poisson(grid, BoundarySpec::Type::dirichlet,
                           BoundarySpec::Type::dirichlet)
                .solve(rhs, vb, XProfile::Zero(n_x));

  // u from the divergence-free condition per mode: u_k = i v_k' / k.
  const Eigen::MatrixXcd vm = x_modes(v.values());  // nm x ny
  Eigen::MatrixXd vre(1, ny), vim(1, ny);
  Eigen::MatrixXcd um = Eigen::MatrixXcd::Zero(nm, ny);
  for (int k = 1; k < nm; ++k) {
    if (k == n_x / 2) continue;  // Nyquist carries no resolvable u information
    vre.row(0) = vm.row(k).real();
    vim.row(0) = vm.row(k).imag();
    const Eigen::MatrixXd dre = ops.d1(vre);
    const Eigen::MatrixXd dim = ops.d1(vim);
    for (int i = 0; i < ny; ++i)
      um(k, i) = std::complex<double>(0.0, 1.0 / k) *
                 std::complex<double>(dre(0, i), dim(0, i));
  }
  // x-mean of u integrated down from the far-field value at Y_max.
  const Eigen::MatrixXcd wm = x_modes(omega.values());
  Eigen::MatrixXd w0(1, ny);
  w0.row(0) = wm.row(0).real();
  const Eigen::MatrixXd tail = ops.cumulative_from_top(w0);
  for (int i = 0; i < ny; ++i) um(0, i) = u_far - tail(0, i);

  Field u(grid, FieldKind::interior, x_modes_inverse(um, n_x));
  u.require_finite("velocity_from_vorticity");
  v.require_finite("velocity_from_vorticity");
  return {std::move(u), std::move(v)};
}

}  // namespace bll
