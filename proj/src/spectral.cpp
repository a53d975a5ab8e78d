#include "bll/spectral.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>

namespace bll {

namespace {

// FFTW plans keyed by n_x. Plan creation is not thread-safe; execution on
// caller-owned buffers is.
struct Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex g_plan_mutex;
std::map<int, Plans>& plan_cache() {
  static std::map<int, Plans> cache;
  return cache;
}

Plans get_plans(int n) {
  std::lock_guard<std::mutex> lock(g_plan_mutex);
  auto& cache = plan_cache();
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<std::complex<double>> cplx(n / 2 + 1);
  Plans p;
  p.fwd = fftw_plan_dft_r2c_1d(n, real.data(),
                               reinterpret_cast<fftw_complex*>(cplx.data()),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.bwd = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(cplx.data()),
                               real.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
  cache[n] = p;
  return p;
}

}  // namespace

Eigen::MatrixXcd x_modes(const Eigen::MatrixXd& values) {
  const int n = static_cast<int>(values.rows());
  const int nv = static_cast<int>(values.cols());
  const int nm = n / 2 + 1;
  Plans plans = get_plans(n);
  Eigen::MatrixXcd out(nm, nv);
  std::vector<double> buf(n);
  std::vector<std::complex<double>> cbuf(nm);
  for (int j = 0; j < nv; ++j) {
    Eigen::VectorXd col = values.col(j);
    fftw_execute_dft_r2c(plans.fwd, col.data(),
                         reinterpret_cast<fftw_complex*>(cbuf.data()));
    for (int k = 0; k < nm; ++k) out(k, j) = cbuf[k] / static_cast<double>(n);
  }
  return out;
}

Eigen::MatrixXd x_modes_inverse(const Eigen::MatrixXcd& modes, int n_x) {
  const int nm = n_x / 2 + 1;
  require(modes.rows() == nm, "x_modes_inverse: mode count mismatch");
  const int nv = static_cast<int>(modes.cols());
  Plans plans = get_plans(n_x);
  Eigen::MatrixXd out(n_x, nv);
  std::vector<std::complex<double>> cbuf(nm);
  std::vector<double> buf(n_x);
  for (int j = 0; j < nv; ++j) {
    for (int k = 0; k < nm; ++k) cbuf[k] = modes(k, j);
    fftw_execute_dft_c2r(plans.bwd,
                         reinterpret_cast<fftw_complex*>(cbuf.data()), buf.data());
    for (int i = 0; i < n_x; ++i) out(i, j) = buf[i];
  }
  return out;
}

Eigen::MatrixXd ddx_matrix(const Eigen::MatrixXd& values, int p) {
  const int n = static_cast<int>(values.rows());
  Eigen::MatrixXcd modes = x_modes(values);
  const std::complex<double> iu(0.0, 1.0);
  for (int k = 0; k < modes.rows(); ++k) {
    std::complex<double> factor = std::pow(iu * static_cast<double>(k),
                                           static_cast<double>(p));
    if (p % 2 == 1 && k == n / 2) factor = 0.0;  // Nyquist
    modes.row(k) *= factor;
  }
  return x_modes_inverse(modes, n);
}

Field ddx(const Field& f) { return ddx_pow(f, 1); }

Field ddx_pow(const Field& f, int p) {
  require(p >= 0, "ddx_pow: order must be non-negative");
  require(f.n_x() >= 8, "ddx: needs >= 8 x nodes");
  if (p == 0) return f;
  return Field(f.grid(), f.kind(), ddx_matrix(f.values(), p));
}

XProfile ddx_profile(const XProfile& g, int p) {
  Eigen::MatrixXd m = g;
  return ddx_matrix(m, p).col(0);
}

double x_mean(const XProfile& g) { return g.mean(); }

XProfile antiderivative_x(const XProfile& g) {
  const int n = static_cast<int>(g.size());
  Eigen::MatrixXd m = g;
  Eigen::MatrixXcd modes = x_modes(m);
  const std::complex<double> iu(0.0, 1.0);
  modes(0, 0) = 0.0;  // mean removed
  for (int k = 1; k < modes.rows(); ++k) {
    if (k == n / 2) { modes(k, 0) = 0.0; continue; }
    modes(k, 0) /= iu * static_cast<double>(k);
  }
  return x_modes_inverse(modes, n).col(0);
}

}  // namespace bll
