#ifndef BLL_BANDED_HPP
#define BLL_BANDED_HPP

#include <Eigen/Dense>
#include <vector>

namespace bll {

// General banded linear system in LAPACK band storage, factored once with
// dgbtrf and reusable for many right-hand sides (dgbtrs).
class BandedLU {
 public:
  // n unknowns, kl sub- and ku super-diagonals.
  BandedLU(int n, int kl, int ku);

  int n() const { return n_; }

  // Assembly: add/set entry (row, col); |row - col| must fit in the band.
  void set(int row, int col, double value);
  void add(int row, int col, double value);
  // Zero out a full row (for boundary-condition rows).
  void clear_row(int row);

  void factor();
  bool factored() const { return factored_; }

  // Solve in place; rhs may have many columns.
  void solve(Eigen::MatrixXd& rhs) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  int n_, kl_, ku_;
  bool factored_ = false;
  std::vector<double> ab_;   // (2*kl+ku+1) x n, column-major LAPACK band storage
  std::vector<int> ipiv_;
  int ldab_;
  double& at(int row, int col);
};

}  // namespace bll

#endif
