#ifndef BLL_NORMS_HPP
#define BLL_NORMS_HPP

#include <functional>
#include <utility>

#include "bll/field.hpp"

namespace bll {

// Parameters of the truncated Gevrey norms. The weight at level m is
// rho(t)^{2(m-k)} / ((m-k)!)^{2/gamma}; multi-index sums run over
// |alpha| = m with the vertical derivative order capped at dy_cap (the
// portion above the cap, like the portion above the truncation order M,
// enters the reported tail bound instead of the value).
struct GevreyParams {
  double gamma = 0.5;   // Gevrey index, in (0, 1]
  int k = 3;            // base index
  double rho0 = 2.0;    // rho(0)
  double lambda = 1.0;  // rho(t) = rho0 - lambda * t
  int M = 11;           // truncation order of the m-sum (default k + 8)
  int dy_cap = 6;       // largest vertical derivative order evaluated
  double t = 0.0;       // evaluation time

  double rho() const;  // rho(t), validated in [1, 2]
  void validate() const;
};

// Parameters of the Gaussian-weighted layer norms: weight e^{a0 z^2} for the
// uniform-bound style, or e^{phi_p} with phi_p = rho_p(t) z^2.
struct LayerNormParams {
  double a0 = 0.25;
  bool use_a0 = true;       // false: weight rate is rho_p(t) instead of a0
  double rho_p0 = 2.0;
  double lambda_p = 1.0;
  double t = 0.0;
  double decay_tol = 1e-8;  // allowed weighted magnitude at z = Z_max

  double rate() const;      // a0 or rho_p(t)
  void validate() const;
};

// Norm value together with the estimated contribution of the truncated terms.
struct NormValue {
  double value = 0.0;
  double tail_bound = 0.0;
};

// Conormal Sobolev norm: sum_{k+l<=s} ||Z^k d_x^l f||_{L2}.
double conormal_sobolev(const Field& f, int s);

// Truncated conormal Gevrey norms with d^alpha = d_x^{alpha1} Z^{alpha2}.
NormValue gevrey_X(const Field& f, const GevreyParams& p);
NormValue gevrey_Y(const Field& f, const GevreyParams& p);
// Full-derivative variant, d^alpha = d_x^{alpha1} d_y^{alpha2}.
NormValue gevrey_Xe(const Field& f, const GevreyParams& p);
// Tangential-profile variant, pure d_x^m.
NormValue gevrey_Xx(const XProfile& g, const GevreyParams& p);

// Weighted layer norm ||e^{rate z^2} d_z^s f||_{L2}. Errors if the weighted
// field fails the decay check at Z_max; entries below 1e-12 of the running
// peak are floored to zero to keep the amplified far tail out of the value.
double layer_weighted_norm(const Field& f, const LayerNormParams& p, int s = 0);

// Lemma-style exact multi-index identities in integer arithmetic.
// Identity (b): for alpha = (alpha1, m - alpha1),
//   sum_{|beta|=j, beta<=alpha} C(alpha1,beta1) C(alpha2,beta2)  vs  C(m,j).
std::pair<long long, long long> multiindex_identity_b(int m, int j, int alpha1);
// Identity (a): sum_{|alpha|=m} sum_{|beta|=j, beta<=alpha} x(beta) y(alpha-beta)
//   vs  (sum_{|alpha|=j} x(alpha)) (sum_{|beta|=m-j} y(beta)).
std::pair<long long, long long> multiindex_identity_a(
    int m, int j, const std::function<long long(int, int)>& x,
    const std::function<long long(int, int)>& y);

// Exact binomial coefficient (long long, valid well past m = 12).
long long binomial(int n, int r);

}  // namespace bll

#endif
