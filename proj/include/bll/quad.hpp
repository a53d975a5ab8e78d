#ifndef BLL_QUAD_HPP
#define BLL_QUAD_HPP

#include "bll/field.hpp"

namespace bll {

// Discrete L^2 inner products on the periodic-strip domain: exact uniform
// weights 2*pi/n_x in x, high-order composite weights on the stretched
// vertical grid.

double l2_inner(const Field& a, const Field& b);
double l2_norm(const Field& f);
double l2_norm_sq(const Field& f);

// Tangential profiles: L^2 over the periodic x circle.
double l2_norm_profile(const XProfile& g);
double l2_norm_sq_profile(const XProfile& g);

}  // namespace bll

#endif
