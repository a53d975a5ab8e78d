#ifndef BLL_SPECTRAL_HPP
#define BLL_SPECTRAL_HPP

#include <Eigen/Dense>

#include "bll/field.hpp"

namespace bll {

// Fourier transforms along the periodic x direction. All operations are exact
// for trigonometric polynomials resolved on the grid.

// Half-spectrum (rfft) of each vertical column: (n_x/2+1) x n_vert complex.
Eigen::MatrixXcd x_modes(const Eigen::MatrixXd& values);
Eigen::MatrixXd x_modes_inverse(const Eigen::MatrixXcd& modes, int n_x);

// d^p/dx^p via (ik)^p multiplication; Nyquist zeroed for odd p.
Eigen::MatrixXd ddx_matrix(const Eigen::MatrixXd& values, int p);

Field ddx(const Field& f);
Field ddx_pow(const Field& f, int p);

XProfile ddx_profile(const XProfile& g, int p = 1);
// Spectral antiderivative; requires (and removes) zero x-mean.
XProfile antiderivative_x(const XProfile& g);
double x_mean(const XProfile& g);

}  // namespace bll

#endif
