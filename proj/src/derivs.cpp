#include "bll/derivs.hpp"

#include <cmath>

namespace bll {

namespace {

const VertOps& ops_for(const Field& f) {
  return f.kind() == FieldKind::interior ? f.grid()->ops_y() : f.grid()->ops_z();
}

}  // namespace

Field ddy(const Field& f, int order) {
  require(order == 1 || order == 2, "ddy: order must be 1 or 2");
  const VertOps& ops = ops_for(f);
  return Field(f.grid(), f.kind(),
               order == 1 ? ops.d1(f.values()) : ops.d2(f.values()));
}

Field ddy_pow(const Field& f, int p) {
  require(p >= 0, "ddy_pow: order must be non-negative");
  Field out = f;
  for (int i = 0; i < p; ++i) out = ddy(out, 1);
  return out;
}

Field conormal_Z(const Field& f, int k) {
  require(f.kind() == FieldKind::interior, "conormal_Z: interior fields only");
  require(k >= 0, "conormal_Z: order must be non-negative");
  // Z^k = psi(y)^k d_y^k.
  const auto& psi_nodes = f.grid()->psi_nodes();
  Field out = ddy_pow(f, k);
  for (int iy = 0; iy < out.n_vert(); ++iy)
    out.values().col(iy) *= std::pow(psi_nodes[iy], k);
  return out;
}

Field tilde_Z(const Field& f, int k) {
  require(f.kind() == FieldKind::layer, "tilde_Z: layer fields only");
  require(k >= 0, "tilde_Z: order must be non-negative");
  // tilde-Z^k = (delta z)^k d_z^k.
  const double delta = f.grid()->delta();
  const auto& z = f.grid()->z_nodes();
  Field out = ddy_pow(f, k);
  for (int iz = 0; iz < out.n_vert(); ++iz)
    out.values().col(iz) *= std::pow(delta * z[iz], k);
  return out;
}

XProfile wall_trace(const Field& f) { return f.values().col(0); }

XProfile wall_deriv(const Field& f, int order) {
  require(order == 1 || order == 2, "wall_deriv: order must be 1 or 2");
  const VertOps& ops = ops_for(f);
  const auto& row = order == 1 ? ops.d1_row(0) : ops.d2_row(0);
  const int s = ops.window_start(0);
  XProfile out = XProfile::Zero(f.n_x());
  for (int j = 0; j < VertOps::kWindow; ++j)
    out += row[j] * f.values().col(s + j);
  return out;
}

XProfile integrate_vert(const Field& f) {
  return f.values() * ops_for(f).quad_weights();
}

Field integral_to_top(const Field& f) {
  return Field(f.grid(), f.kind(), ops_for(f).cumulative_from_top(f.values()));
}

Field integral_from_bottom(const Field& f) {
  return Field(f.grid(), f.kind(), ops_for(f).cumulative_from_bottom(f.values()));
}

XProfile sample_at(const Field& f, const XProfile& q) {
  require(q.size() == f.n_x(), "sample_at: profile length mismatch");
  const VertOps& ops = ops_for(f);
  const double top = ops.nodes().back();
  XProfile out = XProfile::Zero(f.n_x());
  for (int ix = 0; ix < f.n_x(); ++ix) {
    const double zq = q(ix);
    require(zq >= 0.0, "sample_at: negative query point");
    if (zq > top) continue;  // beyond the layer box: treat as decayed to zero
    int start;
    std::array<double, VertOps::kWindow> w;
    ops.interp_weights(zq, start, w);
    double v = 0.0;
    for (int j = 0; j < VertOps::kWindow; ++j) v += w[j] * f(ix, start + j);
    out(ix) = v;
  }
  return out;
}

}  // namespace bll
