#include "bll/field.hpp"

namespace bll {

Field::Field(GridPtr grid, FieldKind kind)
    : grid_(std::move(grid)), kind_(kind) {
  const int nv = (kind_ == FieldKind::interior) ? grid_->n_y() : grid_->n_z();
  values_ = Eigen::MatrixXd::Zero(grid_->n_x(), nv);
}

Field::Field(GridPtr grid, FieldKind kind, Eigen::MatrixXd values)
    : grid_(std::move(grid)), kind_(kind), values_(std::move(values)) {
  const int nv = (kind_ == FieldKind::interior) ? grid_->n_y() : grid_->n_z();
  require(values_.rows() == grid_->n_x() && values_.cols() == nv,
          "Field: value shape does not match grid");
}

Field Field::sample(GridPtr grid, FieldKind kind,
                    const std::function<double(double, double)>& f) {
  Field out(grid, kind);
  const auto& xs = grid->x_nodes();
  const auto& vs = out.vert_nodes();
  for (int iv = 0; iv < out.n_vert(); ++iv)
    for (int ix = 0; ix < out.n_x(); ++ix)
      out(ix, iv) = f(xs[ix], vs[iv]);
  return out;
}

const std::vector<double>& Field::vert_nodes() const {
  return kind_ == FieldKind::interior ? grid_->y_nodes() : grid_->z_nodes();
}

void Field::require_finite(const std::string& where) const {
  if (!all_finite())
    throw solver_error(where + ": field contains NaN/Inf");
}

double Field::top_row_max_abs() const {
  return values_.col(values_.cols() - 1).cwiseAbs().maxCoeff();
}

Field& Field::operator+=(const Field& o) {
  require(kind_ == o.kind_ && grid_->same_layout(*o.grid_), "Field+: mismatched fields");
  values_ += o.values_;
  return *this;
}

Field& Field::operator-=(const Field& o) {
  require(kind_ == o.kind_ && grid_->same_layout(*o.grid_), "Field-: mismatched fields");
  values_ -= o.values_;
  return *this;
}

Field& Field::operator*=(double c) {
  values_ *= c;
  return *this;
}

Field operator*(const Field& a, const Field& b) {
  require(a.kind() == b.kind() && a.grid()->same_layout(*b.grid()),
          "Field*: mismatched fields");
  return Field(a.grid(), a.kind(), a.values().cwiseProduct(b.values()));
}

}  // namespace bll
