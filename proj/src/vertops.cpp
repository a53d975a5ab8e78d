#include "bll/vertops.hpp"

#include <algorithm>
#include <cmath>

#include "bll/common.hpp"

namespace bll {

Eigen::MatrixXd fd_weights(double x0, const std::vector<double>& nodes,
                           int max_order) {
  const int n = static_cast<int>(nodes.size());
  require(n >= 1 && max_order >= 0 && max_order < n,
          "fd_weights: need more nodes than derivative order");
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, max_order + 1);
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c(0, 0) = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, max_order);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c(i, k) = c1 * (k * c(i - 1, k - 1) - c5 * c(i - 1, k)) / c2;
        c(i, 0) = -c1 * c5 * c(i - 1, 0) / c2;
      }
      for (int k = mn; k >= 1; --k)
        c(j, k) = (c4 * c(j, k) - k * c(j, k - 1)) / c3;
      c(j, 0) = c4 * c(j, 0) / c3;
    }
    c1 = c2;
  }
  return c;
}

namespace {

// Window start for a stencil centered as well as possible on index i.
int clamp_window(int i, int n, int w) {
  return std::clamp(i - w / 2 + 1, 0, n - w);
}

}  // namespace

VertOps::VertOps(std::vector<double> nodes) : nodes_(std::move(nodes)) {
  n_ = static_cast<int>(nodes_.size());
  require(n_ >= kWindow, "VertOps: need at least 6 nodes");
  for (int i = 1; i < n_; ++i)
    require(nodes_[i] > nodes_[i - 1], "VertOps: nodes must be strictly increasing");

  win_.resize(n_);
  d1_w_.resize(n_);
  d2_w_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    const int s = clamp_window(i, n_, kWindow);
    win_[i] = s;
    std::vector<double> local(nodes_.begin() + s, nodes_.begin() + s + kWindow);
    Eigen::MatrixXd w = fd_weights(nodes_[i], local, 2);
    for (int j = 0; j < kWindow; ++j) {
      d1_w_[i][j] = w(j, 1);
      d2_w_[i][j] = w(j, 2);
    }
  }

  // Per-interval quadrature: integrate the degree-5 interpolant through the
  // 6-node window surrounding each interval. Local coordinates are centered
  // and scaled for conditioning.
  iwin_.resize(n_ - 1);
  interval_w_.resize(n_ - 1);
  quad_w_ = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < n_ - 1; ++i) {
    const int start = std::clamp(i - 2, 0, n_ - kWindow);
    iwin_[i] = start;
    const double a = nodes_[i], b = nodes_[i + 1];
    const double xc = 0.5 * (a + b), h = 0.5 * (b - a);
    Eigen::MatrixXd V(kWindow, kWindow);
    Eigen::VectorXd rhs(kWindow);
    for (int k = 0; k < kWindow; ++k) {
      for (int j = 0; j < kWindow; ++j)
        V(k, j) = std::pow((nodes_[start + j] - xc) / h, k);
      // int_{-1}^{1} t^k dt, scaled by h.
      rhs(k) = (k % 2 == 0) ? 2.0 * h / (k + 1) : 0.0;
    }
    Eigen::VectorXd w = V.fullPivLu().solve(rhs);
    for (int j = 0; j < kWindow; ++j) {
      interval_w_[i][j] = w(j);
      quad_w_(start + j) += w(j);
    }
  }
}

Eigen::MatrixXd VertOps::d1(const Eigen::MatrixXd& values) const {
  require(values.cols() == n_, "VertOps::d1: column count mismatch");
  Eigen::MatrixXd out(values.rows(), n_);
  for (int i = 0; i < n_; ++i) {
    out.col(i).setZero();
    for (int j = 0; j < kWindow; ++j)
      out.col(i) += d1_w_[i][j] * values.col(win_[i] + j);
  }
  return out;
}

Eigen::MatrixXd VertOps::d2(const Eigen::MatrixXd& values) const {
  require(values.cols() == n_, "VertOps::d2: column count mismatch");
  Eigen::MatrixXd out(values.rows(), n_);
  for (int i = 0; i < n_; ++i) {
    out.col(i).setZero();
    for (int j = 0; j < kWindow; ++j)
      out.col(i) += d2_w_[i][j] * values.col(win_[i] + j);
  }
  return out;
}

Eigen::MatrixXd VertOps::cumulative_from_top(const Eigen::MatrixXd& values) const {
  require(values.cols() == n_, "VertOps::cumulative_from_top: column count mismatch");
  Eigen::MatrixXd out(values.rows(), n_);
  out.col(n_ - 1).setZero();
  for (int i = n_ - 2; i >= 0; --i) {
    out.col(i) = out.col(i + 1);
    for (int j = 0; j < kWindow; ++j)
      out.col(i) += interval_w_[i][j] * values.col(iwin_[i] + j);
  }
  return out;
}

Eigen::MatrixXd VertOps::cumulative_from_bottom(const Eigen::MatrixXd& values) const {
  require(values.cols() == n_, "VertOps::cumulative_from_bottom: column count mismatch");
  Eigen::MatrixXd out(values.rows(), n_);
  out.col(0).setZero();
  for (int i = 1; i < n_; ++i) {
    out.col(i) = out.col(i - 1);
    for (int j = 0; j < kWindow; ++j)
      out.col(i) += interval_w_[i - 1][j] * values.col(iwin_[i - 1] + j);
  }
  return out;
}

void VertOps::interp_weights(double xq, int& start,
                             std::array<double, kWindow>& w) const {
  require(xq >= nodes_.front() && xq <= nodes_.back(),
          "VertOps::interp_weights: query outside node range");
  // Locate the interval containing xq.
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), xq);
  int i = std::clamp(static_cast<int>(it - nodes_.begin()) - 1, 0, n_ - 2);
  start = clamp_window(i, n_, kWindow);
  for (int j = 0; j < kWindow; ++j) {
    double num = 1.0, den = 1.0;
    for (int k = 0; k < kWindow; ++k) {
      if (k == j) continue;
      num *= xq - nodes_[start + k];
      den *= nodes_[start + j] - nodes_[start + k];
    }
    w[j] = num / den;
  }
}

}  // namespace bll
