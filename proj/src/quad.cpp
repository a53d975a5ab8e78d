#include "bll/quad.hpp"

#include <cmath>

namespace bll {

double l2_inner(const Field& a, const Field& b) {
  require(a.kind() == b.kind() && a.grid()->same_layout(*b.grid()),
          "l2_inner: mismatched fields");
  const VertOps& ops = a.kind() == FieldKind::interior ? a.grid()->ops_y()
                                                       : a.grid()->ops_z();
  const double wx = 2.0 * M_PI / a.n_x();
  const Eigen::VectorXd col =
      (a.values().cwiseProduct(b.values())).colwise().sum();
  return wx * col.dot(ops.quad_weights());
}

double l2_norm_sq(const Field& f) { return l2_inner(f, f); }

double l2_norm(const Field& f) { return std::sqrt(std::max(0.0, l2_norm_sq(f))); }

double l2_norm_sq_profile(const XProfile& g) {
  return 2.0 * M_PI / g.size() * g.squaredNorm();
}

double l2_norm_profile(const XProfile& g) {
  return std::sqrt(l2_norm_sq_profile(g));
}

}  // namespace bll
