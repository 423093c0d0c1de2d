#pragma once

// One-dimensional FFT inversion of the Bessel symbol, used to pin the Fourier
// convention of bessel_kernel.  Requires linking against FFTW3.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wib/fftw_lock.hpp"
#include "wib/kernels.hpp"

namespace wib {

struct CalibrationPoint {
  double radius = 0.0;
  double fft_value = 0.0;
  double quadrature_value = 0.0;
  double ratio = 0.0;
};

struct CalibrationOptions {
  double tau = 1e-3;       ///< Gaussian damping e^{-tau xi^2} of the symbol
  int size = 8192;
  double dx = std::numbers::pi / 200.0;
  std::vector<int> offsets{32, 48, 64, 96, 128, 160, 208, 256, 288, 318};  ///< radii in units of dx
};

/// (2 pi)^{-1} \int (1 + xi^2)^{-alpha/2} e^{-tau xi^2} e^{i x xi} d xi on the
/// grid x_j = (j - N/2) dx, compared with the tau-smoothed subordination formula.
inline std::vector<CalibrationPoint> fft_calibration(double alpha, const CalibrationOptions& opt = {}) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  const int N = opt.size;
  if (N < 16 || N % 2 != 0) throw std::invalid_argument("fft size must be even and >= 16");
  for (int off : opt.offsets) {
    if (off < 0 || off >= N / 2) throw std::invalid_argument("calibration radius outside the FFT grid");
  }
  const double dxi = 2.0 * std::numbers::pi / (N * opt.dx);
  fftw_complex* buf = fftw_alloc_complex(N);
  for (int k = 0; k < N; ++k) {
    const double xi = (k - N / 2) * dxi;
    const double sym = std::pow(1.0 + xi * xi, -0.5 * alpha) * std::exp(-opt.tau * xi * xi);
    buf[k][0] = (k % 2 == 0 ? 1.0 : -1.0) * sym;
    buf[k][1] = 0.0;
  }
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(N, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::vector<CalibrationPoint> out;
  for (int off : opt.offsets) {
    const int j = N / 2 + off;
    const double sign = ((j + N / 2) % 2 == 0) ? 1.0 : -1.0;
    CalibrationPoint pt;
    pt.radius = off * opt.dx;
    pt.fft_value = sign * buf[j][0] * dxi / (2.0 * std::numbers::pi);
    pt.quadrature_value = smoothed_bessel_kernel(1, alpha, opt.tau, pt.radius, 1e-10).value;
    pt.ratio = pt.fft_value / pt.quadrature_value;
    out.push_back(pt);
  }
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf);
  return out;
}

}  // namespace wib
