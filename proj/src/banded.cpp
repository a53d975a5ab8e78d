#include "bll/banded.hpp"

#include <lapacke.h>

#include "bll/common.hpp"

namespace bll {

BandedLU::BandedLU(int n, int kl, int ku) : n_(n), kl_(kl), ku_(ku) {
  require(n > 0 && kl >= 0 && ku >= 0, "BandedLU: invalid sizes");
  ldab_ = 2 * kl_ + ku_ + 1;
  ab_.assign(static_cast<size_t>(ldab_) * n_, 0.0);
  ipiv_.assign(n_, 0);
}

double& BandedLU::at(int row, int col) {
  require(row >= 0 && row < n_ && col >= 0 && col < n_,
          "BandedLU: index out of range");
  require(col - row <= ku_ && row - col <= kl_, "BandedLU: entry outside band");
  // LAPACK band storage with factorization workspace: AB(kl+ku+row-col, col).
  return ab_[static_cast<size_t>(col) * ldab_ + (kl_ + ku_ + row - col)];
}

void BandedLU::set(int row, int col, double value) {
  require(!factored_, "BandedLU: cannot modify after factor()");
  at(row, col) = value;
}

void BandedLU::add(int row, int col, double value) {
  require(!factored_, "BandedLU: cannot modify after factor()");
  at(row, col) += value;
}

void BandedLU::clear_row(int row) {
  require(!factored_, "BandedLU: cannot modify after factor()");
  const int lo = std::max(0, row - kl_);
  const int hi = std::min(n_ - 1, row + ku_);
  for (int col = lo; col <= hi; ++col) at(row, col) = 0.0;
}

void BandedLU::factor() {
  require(!factored_, "BandedLU: already factored");
  const int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, n_, n_, kl_, ku_,
                                  ab_.data(), ldab_, ipiv_.data());
  if (info != 0)
    throw solver_error("BandedLU: dgbtrf failed, info=" + std::to_string(info));
  factored_ = true;
}

void BandedLU::solve(Eigen::MatrixXd& rhs) const {
  require(factored_, "BandedLU: factor() before solve()");
  require(rhs.rows() == n_, "BandedLU: rhs size mismatch");
  const int info = LAPACKE_dgbtrs(
      LAPACK_COL_MAJOR, 'N', n_, kl_, ku_, static_cast<int>(rhs.cols()),
      ab_.data(), ldab_, ipiv_.data(), rhs.data(), n_);
  if (info != 0)
    throw solver_error("BandedLU: dgbtrs failed, info=" + std::to_string(info));
}

Eigen::VectorXd BandedLU::solve(const Eigen::VectorXd& rhs) const {
  Eigen::MatrixXd m = rhs;
  solve(m);
  return m.col(0);
}

}  // namespace bll
