#include "bll/grid.hpp"

#include <cmath>

namespace bll {

namespace {

// exp(-1/t) partition of unity: s(t)=0 for t<=0, 1 for t>=1, smooth monotone.
double smoothstep_inf(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return a / (a + b);
}

// Algebraic boundary-layer map: s in [0,1] -> [0,L], clustered at 0 for small sigma.
double stretch_map(double s, double L, double sigma) {
  return L * sigma * s / (1.0 + sigma - s);
}

std::vector<double> mapped_nodes(int n, double L, double sigma) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    v[i] = stretch_map(s, L, sigma);
  }
  v[0] = 0.0;
  v[n - 1] = L;
  return v;
}

}  // namespace

double psi(double y, double delta) {
  require(y >= 0.0, "psi: y must be non-negative");
  require(delta > 0.0, "psi: delta must be positive");
  if (y <= 1.0) return delta * y;
  if (y >= 2.0) return delta * y / (1.0 + y);
  const double w = smoothstep_inf(y - 1.0);
  return (1.0 - w) * (delta * y) + w * (delta * y / (1.0 + y));
}

Grid::Grid(const GridParams& p) : p_(p) {
  require(p.n_x >= 8 && p.n_x % 2 == 0, "Grid: n_x must be even and >= 8");
  require(p.n_y >= 6, "Grid: n_y must be >= 6");
  require(p.n_z >= 6, "Grid: n_z must be >= 6");
  require(p.y_max > 0.0 && p.z_max > 0.0, "Grid: domain heights must be positive");
  require(p.delta > 0.0, "Grid: delta must be positive");
  require(p.stretch_y > 0.0 && p.stretch_z > 0.0, "Grid: stretch parameters must be positive");

  x_.resize(p.n_x);
  const double two_pi = 2.0 * M_PI;
  for (int i = 0; i < p.n_x; ++i) x_[i] = two_pi * i / p.n_x;

  y_ = mapped_nodes(p.n_y, p.y_max, p.stretch_y);
  z_ = mapped_nodes(p.n_z, p.z_max, p.stretch_z);

  for (int i = 1; i < p.n_y; ++i)
    require(y_[i] > y_[i - 1], "Grid: y nodes must be strictly increasing");
  for (int i = 1; i < p.n_z; ++i)
    require(z_[i] > z_[i - 1], "Grid: z nodes must be strictly increasing");

  psi_y_.resize(p.n_y);
  for (int i = 0; i < p.n_y; ++i) psi_y_[i] = psi(y_[i], p.delta);

  ops_y_ = std::make_shared<const VertOps>(y_);
  ops_z_ = std::make_shared<const VertOps>(z_);
}

bool Grid::same_layout(const Grid& o) const {
  return p_.n_x == o.p_.n_x && p_.n_y == o.p_.n_y && p_.n_z == o.p_.n_z &&
         p_.y_max == o.p_.y_max && p_.z_max == o.p_.z_max &&
         p_.stretch_y == o.p_.stretch_y && p_.stretch_z == o.p_.stretch_z;
}

GridPtr make_grid(const GridParams& p) { return std::make_shared<const Grid>(p); }

}  // namespace bll
