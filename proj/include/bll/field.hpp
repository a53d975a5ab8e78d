#ifndef BLL_FIELD_HPP
#define BLL_FIELD_HPP

#include <Eigen/Dense>
#include <functional>

#include "bll/grid.hpp"

namespace bll {

enum class FieldKind { interior, layer };

// Scalar field sampled on the grid, (x node, vertical node). Storage is
// column-major with x fastest, matching the on-disk dump layout.
// Fields are immutable by convention: operations return new fields.
class Field {
 public:
  Field(GridPtr grid, FieldKind kind);
  Field(GridPtr grid, FieldKind kind, Eigen::MatrixXd values);

  static Field zero(GridPtr grid, FieldKind kind) { return Field(grid, kind); }
  // f(x, y) or f(x, z) sampled at nodes.
  static Field sample(GridPtr grid, FieldKind kind,
                      const std::function<double(double, double)>& f);

  const GridPtr& grid() const { return grid_; }
  FieldKind kind() const { return kind_; }
  int n_x() const { return static_cast<int>(values_.rows()); }
  int n_vert() const { return static_cast<int>(values_.cols()); }
  const std::vector<double>& vert_nodes() const;

  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& values() { return values_; }
  double operator()(int ix, int iv) const { return values_(ix, iv); }
  double& operator()(int ix, int iv) { return values_(ix, iv); }

  double max_abs() const { return values_.cwiseAbs().maxCoeff(); }
  bool all_finite() const { return values_.allFinite(); }
  void require_finite(const std::string& where) const;

  // Largest |value| on the top row (z = z_max / y = y_max); used for decay checks.
  double top_row_max_abs() const;

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(double c);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double c, Field a) { return a *= c; }
  // Pointwise product.
  friend Field operator*(const Field& a, const Field& b);

 private:
  GridPtr grid_;
  FieldKind kind_;
  Eigen::MatrixXd values_;
};

// Tangential profile g(x) on the x nodes.
using XProfile = Eigen::VectorXd;

}  // namespace bll

#endif
