#ifndef BLL_GRID_HPP
#define BLL_GRID_HPP

#include <memory>
#include <vector>

#include "bll/common.hpp"
#include "bll/vertops.hpp"

namespace bll {

// Smooth conormal weight: delta*y below y=1, delta*y/(1+y) above y=2,
// C-infinity exp(-1/t) partition blend on (1,2).
double psi(double y, double delta);

struct GridParams {
  int n_x = 64;
  int n_y = 128;
  int n_z = 128;
  double y_max = 10.0;
  double z_max = 12.0;
  double delta = 0.1;
  double stretch_y = 0.25;  // algebraic map parameter, smaller = more wall clustering
  double stretch_z = 2.0;
};

// Discrete half-plane strip: 2*pi-periodic uniform x nodes, algebraically
// stretched y nodes on [0, y_max] clustered at the wall, and the layer z grid
// on [0, z_max].
class Grid {
 public:
  explicit Grid(const GridParams& p);

  int n_x() const { return p_.n_x; }
  int n_y() const { return p_.n_y; }
  int n_z() const { return p_.n_z; }
  double y_max() const { return p_.y_max; }
  double z_max() const { return p_.z_max; }
  double delta() const { return p_.delta; }
  const GridParams& params() const { return p_; }

  const std::vector<double>& x_nodes() const { return x_; }
  const std::vector<double>& y_nodes() const { return y_; }
  const std::vector<double>& z_nodes() const { return z_; }

  double psi_at(int iy) const { return psi_y_[iy]; }
  const std::vector<double>& psi_nodes() const { return psi_y_; }

  // Vertical derivative/quadrature/interpolation operators on each grid.
  const VertOps& ops_y() const { return *ops_y_; }
  const VertOps& ops_z() const { return *ops_z_; }

  bool same_layout(const Grid& o) const;

 private:
  GridParams p_;
  std::vector<double> x_, y_, z_, psi_y_;
  std::shared_ptr<const VertOps> ops_y_, ops_z_;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(const GridParams& p);

}  // namespace bll

#endif
