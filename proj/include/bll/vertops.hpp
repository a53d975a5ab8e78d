#ifndef BLL_VERTOPS_HPP
#define BLL_VERTOPS_HPP

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace bll {

// Finite-difference weights for derivatives 0..max_order at point x0 over the
// given nodes (Fornberg's recursion). Column d holds the order-d weights.
Eigen::MatrixXd fd_weights(double x0, const std::vector<double>& nodes,
                           int max_order);

// Derivative, quadrature and interpolation operators on a nonuniform vertical
// grid. All stencils use 6-point sliding windows: first derivatives are
// 5th-order, second derivatives and quadrature at least 4th-order, and
// polynomials up to degree 5 are handled exactly.
class VertOps {
 public:
  static constexpr int kWindow = 6;

  explicit VertOps(std::vector<double> nodes);

  int size() const { return n_; }
  const std::vector<double>& nodes() const { return nodes_; }

  // Derivative along columns: out.col(i) = sum_j w(i,j) in.col(win(i)+j).
  Eigen::MatrixXd d1(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd d2(const Eigen::MatrixXd& values) const;

  // Stencil row i (window start + kWindow weights), for banded assembly and
  // one-sided wall traces.
  int window_start(int i) const { return win_[i]; }
  const std::array<double, kWindow>& d1_row(int i) const { return d1_w_[i]; }
  const std::array<double, kWindow>& d2_row(int i) const { return d2_w_[i]; }

  // Order-6 composite quadrature weights for the full integral over [x0, xN].
  const Eigen::VectorXd& quad_weights() const { return quad_w_; }

  // Cumulative integrals at the nodes: from_top[i] = int_{x_i}^{x_N} f,
  // from_bottom[i] = int_{x_0}^{x_i} f, per column.
  Eigen::MatrixXd cumulative_from_top(const Eigen::MatrixXd& values) const;
  Eigen::MatrixXd cumulative_from_bottom(const Eigen::MatrixXd& values) const;

  // 6-point Lagrange interpolation weights at query point xq.
  void interp_weights(double xq, int& start,
                      std::array<double, kWindow>& w) const;

 private:
  int n_;
  std::vector<double> nodes_;
  std::vector<int> win_;
  std::vector<std::array<double, kWindow>> d1_w_, d2_w_;
  Eigen::VectorXd quad_w_;
  // Per-interval window quadrature weights: integral over [x_i, x_{i+1}].
  std::vector<int> iwin_;
  std::vector<std::array<double, kWindow>> interval_w_;
};

}  // namespace bll

#endif
