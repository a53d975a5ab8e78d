#include "bll/norms.hpp"

#include <cmath>
#include <vector>

#include "bll/derivs.hpp"
#include "bll/quad.hpp"
#include "bll/spectral.hpp"

namespace bll {

double GevreyParams::rho() const { return rho0 - lambda * t; }

void GevreyParams::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, "GevreyParams: gamma must be in (0,1]");
  require(k >= 0, "GevreyParams: k must be non-negative");
  require(t >= 0.0, "GevreyParams: t must be non-negative");
  const double r = rho();
  require(r >= 1.0 && r <= 2.0, "GevreyParams: rho(t) must lie in [1,2]");
  require(M >= k + 2, "GevreyParams: truncation order M must be >= k+2");
  require(dy_cap >= 2, "GevreyParams: dy_cap must be >= 2");
}

double LayerNormParams::rate() const { return use_a0 ? a0 : rho_p0 - lambda_p * t; }

void LayerNormParams::validate() const {
  require(t >= 0.0, "LayerNormParams: t must be non-negative");
  if (use_a0) {
    require(a0 > 0.0, "LayerNormParams: a0 must be positive");
  } else {
    require(rho_p0 - lambda_p * t >= 1.0,
            "LayerNormParams: rho_p(t) must be >= 1");
  }
}

namespace {

// Squared discrete L2 norms of d_x^p h for all p in [0, pmax], computed in
// Fourier space (discrete Parseval; exactly consistent with ddx + l2_norm).
// weights: vertical quadrature weights of h's own grid.
std::vector<double> dx_ladder_sq(const Eigen::MatrixXd& h,
                                 const Eigen::VectorXd& wv, int pmax) {
  const int n = static_cast<int>(h.rows());
  const int nm = n / 2 + 1;
  const Eigen::MatrixXcd modes = x_modes(h);
  // Per-mode vertical energy.
  std::vector<double> energy(nm, 0.0);
  for (int k = 0; k < nm; ++k) {
    double e = 0.0;
    for (int i = 0; i < modes.cols(); ++i) e += std::norm(modes(k, i)) * wv(i);
    const double mult = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    energy[k] = 2.0 * M_PI * mult * e;
  }
  std::vector<double> out(pmax + 1, 0.0);
  for (int p = 0; p <= pmax; ++p) {
    double s = 0.0;
    for (int k = 0; k < nm; ++k) {
      if (p >= 1 && k == n / 2 && p % 2 == 1) continue;  // odd-order Nyquist
      s += std::pow(static_cast<double>(k), 2.0 * p) * energy[k];
    }
    out[p] = s;
  }
  return out;
}

const Eigen::VectorXd& vert_weights(const Field& f) {
  return (f.kind() == FieldKind::interior ? f.grid()->ops_y()
                                          : f.grid()->ops_z())
      .quad_weights();
}

enum class VertKind { conormal, full };

struct LevelSums {
  // sums[m] = sum over |alpha| = m (alpha2 <= dy_cap) of ||d^alpha f||_2^2;
  // last_term[m] = the alpha2-largest included term, dropped[m] = true when
  // alpha2 terms above the cap were omitted at this m.
  std::vector<double> sums, last_term;
  std::vector<bool> dropped;
};

LevelSums level_sums(const Field& f, VertKind vk, int M, int dy_cap) {
  const int a2max = std::min(M, dy_cap);
  LevelSums ls;
  ls.sums.assign(M + 1, 0.0);
  ls.last_term.assign(M + 1, 0.0);
  ls.dropped.assign(M + 1, false);
  const Eigen::VectorXd& wv = vert_weights(f);
  Field dyf = f;
  for (int a2 = 0; a2 <= a2max; ++a2) {
    if (a2 > 0) dyf = ddy(dyf, 1);
    Eigen::MatrixXd vert = dyf.values();
    if (vk == VertKind::conormal) {
      const auto& psi_nodes = f.grid()->psi_nodes();
      for (int iy = 0; iy < vert.cols(); ++iy)
        vert.col(iy) *= std::pow(psi_nodes[iy], a2);
    }
    const auto ladder = dx_ladder_sq(vert, wv, M - a2);
    for (int a1 = 0; a1 + a2 <= M; ++a1) {
      ls.sums[a1 + a2] += ladder[a1];
      ls.last_term[a1 + a2] = ladder[a1];  // overwritten by growing a2
    }
  }
  for (int m = dy_cap + 1; m <= M; ++m) ls.dropped[m] = true;
  return ls;
}

double level_weight(const GevreyParams& p, int m, bool y_factor) {
  const double r = p.rho();
  const double fact = std::tgamma(static_cast<double>(m - p.k) + 1.0);
  double w = std::pow(r, 2.0 * (m - p.k)) / std::pow(fact, 2.0 / p.gamma);
  if (y_factor) w *= static_cast<double>(m - p.k);
  return w;
}

NormValue assemble(const Field& f, const GevreyParams& p, VertKind vk,
                   bool y_norm) {
  p.validate();
  require(f.kind() == FieldKind::interior,
          "gevrey norm: interior fields only");
  const LevelSums ls = level_sums(f, vk, p.M, p.dy_cap);
  const int m0 = y_norm ? p.k + 1 : p.k;
  double value_sq = l2_norm_sq(f);
  double tail = 0.0;
  double prev_contrib = 0.0, last_contrib = 0.0;
  for (int m = m0; m <= p.M; ++m) {
    const double w = level_weight(p, m, y_norm);
    const double contrib = w * ls.sums[m];
    value_sq += contrib;
    prev_contrib = last_contrib;
    last_contrib = contrib;
    if (ls.dropped[m]) {
      // Dropped alpha2 > dy_cap portion, estimated from the last included
      // alpha2 term with a guarded geometric ratio.
      tail += 10.0 * w * ls.last_term[m];
    }
  }
  // m > M tail via geometric extrapolation of the last two level sums.
  if (last_contrib > 0.0 && prev_contrib > 0.0) {
    const double q = std::min(0.9, last_contrib / prev_contrib);
    tail += last_contrib * q / (1.0 - q);
  } else {
    tail += last_contrib;
  }
  NormValue nv;
  nv.value = std::sqrt(std::max(0.0, value_sq));
  // Tail reported on the norm scale: sqrt(value^2 + tail) - value.
  nv.tail_bound = std::sqrt(value_sq + tail) - nv.value;
  return nv;
}

}  // namespace

double conormal_sobolev(const Field& f, int s) {
  require(f.kind() == FieldKind::interior,
          "conormal_sobolev: interior fields only");
  require(s >= 0 && s <= 6, "conormal_sobolev: s must be in [0,6]");
  double total = 0.0;
  for (int k = 0; k <= s; ++k) {
    Field zf = conormal_Z(f, k);
    for (int l = 0; l + k <= s; ++l) total += l2_norm(ddx_pow(zf, l));
  }
  return total;
}

NormValue gevrey_X(const Field& f, const GevreyParams& p) {
  return assemble(f, p, VertKind::conormal, false);
}

NormValue gevrey_Y(const Field& f, const GevreyParams& p) {
  return assemble(f, p, VertKind::conormal, true);
}

NormValue gevrey_Xe(const Field& f, const GevreyParams& p) {
  return assemble(f, p, VertKind::full, false);
}

NormValue gevrey_Xx(const XProfile& g, const GevreyParams& p) {
  p.validate();
  const int n = static_cast<int>(g.size());
  const int nm = n / 2 + 1;
  const Eigen::MatrixXcd modes = x_modes(Eigen::MatrixXd(g));
  std::vector<double> energy(nm, 0.0);
  for (int k = 0; k < nm; ++k) {
    const double mult = (k == 0 || k == n / 2) ? 1.0 : 2.0;
    energy[k] = 2.0 * M_PI * mult * std::norm(modes(k, 0));
  }
  double value_sq = 0.0;
  for (int k = 0; k < nm; ++k) value_sq += energy[k];  // ||g||_2^2
  double prev_contrib = 0.0, last_contrib = 0.0, tail = 0.0;
  for (int m = p.k; m <= p.M; ++m) {
    double s = 0.0;
    for (int k = 0; k < nm; ++k) {
      if (m >= 1 && k == n / 2 && m % 2 == 1) continue;
      s += std::pow(static_cast<double>(k), 2.0 * m) * energy[k];
    }
    const double contrib = level_weight(p, m, false) * s;
    value_sq += contrib;
    prev_contrib = last_contrib;
    last_contrib = contrib;
  }
  if (last_contrib > 0.0 && prev_contrib > 0.0) {
    const double q = std::min(0.9, last_contrib / prev_contrib);
    tail = last_contrib * q / (1.0 - q);
  } else {
    tail = last_contrib;
  }
  NormValue nv;
  nv.value = std::sqrt(std::max(0.0, value_sq));
  nv.tail_bound = std::sqrt(value_sq + tail) - nv.value;
  return nv;
}

double layer_weighted_norm(const Field& f, const LayerNormParams& p, int s) {
  p.validate();
  require(f.kind() == FieldKind::layer, "layer_weighted_norm: layer fields only");
  require(s >= 0 && s <= 4, "layer_weighted_norm: s must be in [0,4]");
  const double rate = p.rate();
  Field g = ddy_pow(f, s);
  const auto& zn = f.grid()->z_nodes();
  Eigen::MatrixXd weighted = g.values();
  for (int iz = 0; iz < weighted.cols(); ++iz)
    weighted.col(iz) *= std::exp(rate * zn[iz] * zn[iz]);
  const double top = weighted.col(weighted.cols() - 1).cwiseAbs().maxCoeff();
  if (!weighted.allFinite() || top > p.decay_tol)
    throw solver_error(
        "layer_weighted_norm: weight outruns the field's decay at Z_max");
  // Floor tiny weighted entries: they are pure rounding noise amplified by
  // the Gaussian weight.
  const double peak = weighted.cwiseAbs().maxCoeff();
  const double floor = 1e-12 * peak;
  weighted = (weighted.cwiseAbs().array() < floor)
                 .select(Eigen::MatrixXd::Zero(weighted.rows(), weighted.cols()),
                         weighted);
  return l2_norm(Field(f.grid(), FieldKind::layer, std::move(weighted)));
}

long long binomial(int n, int r) {
  require(n >= 0 && r >= 0 && r <= n, "binomial: invalid arguments");
  long long num = 1;
  for (int i = 0; i < r; ++i) {
    num = num * (n - i) / (i + 1);  // exact: product of i+1 consecutive ints
  }
  return num;
}

std::pair<long long, long long> multiindex_identity_b(int m, int j, int alpha1) {
  require(m >= 0 && m <= 20 && j >= 0 && j <= m, "identity_b: need 0 <= j <= m <= 20");
  require(alpha1 >= 0 && alpha1 <= m, "identity_b: need 0 <= alpha1 <= m");
  const int alpha2 = m - alpha1;
  long long lhs = 0;
  for (int b1 = 0; b1 <= std::min(j, alpha1); ++b1) {
    const int b2 = j - b1;
    if (b2 > alpha2) continue;
    lhs += binomial(alpha1, b1) * binomial(alpha2, b2);
  }
  return {lhs, binomial(m, j)};
}

std::pair<long long, long long> multiindex_identity_a(
    int m, int j, const std::function<long long(int, int)>& x,
    const std::function<long long(int, int)>& y) {
  require(m >= 0 && j >= 0 && j <= m, "identity_a: need 0 <= j <= m");
  long long lhs = 0;
  for (int a1 = 0; a1 <= m; ++a1) {
    const int a2 = m - a1;
    for (int b1 = 0; b1 <= std::min(j, a1); ++b1) {
      const int b2 = j - b1;
      if (b2 > a2) continue;
      lhs += x(b1, b2) * y(a1 - b1, a2 - b2);
    }
  }
  long long xs = 0, ys = 0;
  for (int a1 = 0; a1 <= j; ++a1) xs += x(a1, j - a1);
  for (int b1 = 0; b1 <= m - j; ++b1) ys += y(b1, m - j - b1);
  return {lhs, xs * ys};
}

}  // namespace bll
