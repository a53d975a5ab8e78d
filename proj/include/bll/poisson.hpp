#ifndef BLL_POISSON_HPP
#define BLL_POISSON_HPP

#include <memory>

#include "bll/field.hpp"

namespace bll {

// Boundary condition at the wall (y=0) or the truncation height (y=Y_max).
struct BoundarySpec {
  enum class Type { dirichlet, neumann, decay };
  Type type = Type::dirichlet;
  XProfile values;  // empty means homogeneous

  static BoundarySpec dirichlet(XProfile v) { return {Type::dirichlet, std::move(v)}; }
  static BoundarySpec dirichlet_zero() { return {Type::dirichlet, {}}; }
  static BoundarySpec neumann(XProfile v) { return {Type::neumann, std::move(v)}; }
  static BoundarySpec neumann_zero() { return {Type::neumann, {}}; }
  // Far-field decay: treated as homogeneous Dirichlet at Y_max.
  static BoundarySpec decay() { return {Type::decay, {}}; }
};

// Solve laplace(phi) = rhs on the periodic strip, mode by mode in x, with the
// given wall and top conditions. Factorizations are cached per call site via
// PoissonSolver; the free function builds a solver on the fly.
class PoissonSolver {
 public:
  PoissonSolver(GridPtr grid, BoundarySpec::Type bottom, BoundarySpec::Type top);
  ~PoissonSolver();
  PoissonSolver(PoissonSolver&&) noexcept;

  Field solve(const Field& rhs, const XProfile& bottom_values,
              const XProfile& top_values) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Field solve_poisson(const Field& rhs, const BoundarySpec& bottom,
                    const BoundarySpec& top);

// Process-wide factorization cache keyed by (grid layout, bc types).
const PoissonSolver& cached_poisson(const GridPtr& grid,
                                    BoundarySpec::Type bottom,
                                    BoundarySpec::Type top);

// Recover (u, v) from interior vorticity: laplace(v) = -ddx(omega) with
// v = v_boundary at the wall and v = 0 at the top; u from the divergence-free
// condition mode-wise, and the x-mean of u integrated down from the far-field
// value u_far at Y_max. v_boundary must have zero x-mean.
std::pair<Field, Field> velocity_from_vorticity(const Field& omega,
                                                const XProfile& v_boundary,
                                                double u_far = 0.0);

}  // namespace bll

#endif
