#ifndef BLL_DERIVS_HPP
#define BLL_DERIVS_HPP

#include "bll/field.hpp"

namespace bll {

// Vertical derivative of the field on its own grid (y for interior fields,
// z for layer fields). order must be 1 or 2; higher derivatives are formed by
// the callers through repeated application where they control the noise.
Field ddy(const Field& f, int order = 1);

// Repeated first-derivative application, d^p/dy^p as ddy^p.
Field ddy_pow(const Field& f, int p);

// Conormal derivative Z^k f = psi(y)^k d_y^k f. Interior fields only.
Field conormal_Z(const Field& f, int k);

// Layer conormal derivative (delta z)^k d_z^k f. Layer fields only.
Field tilde_Z(const Field& f, int k);

// Wall traces (values at the bottom node) as x profiles.
XProfile wall_trace(const Field& f);
// One-sided derivative trace at the wall, order in {1, 2}.
XProfile wall_deriv(const Field& f, int order = 1);

// Vertical integral over the full column, per x node.
XProfile integrate_vert(const Field& f);
// F(x, v) = int_{v}^{v_max} f dv' (per x node).
Field integral_to_top(const Field& f);
// F(x, v) = int_{0}^{v} f dv'.
Field integral_from_bottom(const Field& f);

// Interpolate a layer field at z = q(x) per x node; zero for q beyond z_max.
XProfile sample_at(const Field& f, const XProfile& q);

}  // namespace bll

#endif
