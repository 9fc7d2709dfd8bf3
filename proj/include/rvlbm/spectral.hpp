#pragma once

// Discrete-Fourier application of constant-coefficient operators to periodic
// grid fields. Exact for band-limited data.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <vector>

#include "rvlbm/differential_operator.hpp"
#include "rvlbm/scheme_core.hpp"

namespace rvlbm {

namespace detail {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
struct FftwPlanDestroy {
  void operator()(fftw_plan p) const { fftw_destroy_plan(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;
using FftwPlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, FftwPlanDestroy>;

}  // namespace detail

/// Forward and inverse transforms over one grid, reusable across fields.
class SpectralGrid {
 public:
  explicit SpectralGrid(Grid grid) : grid_(std::move(grid)), n_(grid_.cells()) {
    buf_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_)));
    // FFTW is row-major with the last dimension fastest; our axis 0 is fastest.
    std::vector<int> dims(grid_.n.rbegin(), grid_.n.rend());
    fwd_.reset(fftw_plan_dft(grid_.dim(), dims.data(), buf_.get(), buf_.get(), FFTW_FORWARD,
                             FFTW_ESTIMATE));
    inv_.reset(fftw_plan_dft(grid_.dim(), dims.data(), buf_.get(), buf_.get(), FFTW_BACKWARD,
                             FFTW_ESTIMATE));
    wavenumbers_.resize(n_);
    for (std::size_t c = 0; c < n_; ++c) {
      const auto idx = grid_.unravel(c);
      std::vector<double> k(grid_.dim());
      nyquist_.push_back(false);
      for (int a = 0; a < grid_.dim(); ++a) {
        const int N = grid_.n[a];
        int i = idx[a] <= N / 2 ? idx[a] : idx[a] - N;
        if (N % 2 == 0 && idx[a] == N / 2) nyquist_.back() = true;
        k[a] = 2.0 * std::numbers::pi * i / grid_.length[a];
      }
      wavenumbers_[c] = std::move(k);
    }
  }

  const Grid& grid() const { return grid_; }

  /// op applied to `field` (real, one value per cell).
  std::vector<double> apply(const DifferentialOperator& op, const std::vector<double>& field) {
    for (std::size_t c = 0; c < n_; ++c) {
      buf_[c][0] = field[c];
      buf_[c][1] = 0.0;
    }
    fftw_execute(fwd_.get());
    for (std::size_t c = 0; c < n_; ++c) {
      // Nyquist modes are dropped.
      const std::complex<double> sym = nyquist_[c] ? 0.0 : op.symbol<double>(wavenumbers_[c]);
      const std::complex<double> v = sym * std::complex<double>(buf_[c][0], buf_[c][1]);
      buf_[c][0] = v.real();
      buf_[c][1] = v.imag();
    }
    fftw_execute(inv_.get());
    std::vector<double> out(n_);
    for (std::size_t c = 0; c < n_; ++c) out[c] = buf_[c][0] / static_cast<double>(n_);
    return out;
  }

  /// Normalized Fourier coefficient (1/N) sum_x field(x) exp(-i k.x) at integer mode.
  std::complex<double> coefficient(const std::vector<double>& field, const std::vector<int>& mode) const {
    std::complex<double> sum = 0.0;
    for (std::size_t c = 0; c < n_; ++c) {
      const Vector x = grid_.position(c);
      double phase = 0.0;
      for (int a = 0; a < grid_.dim(); ++a)
        phase += 2.0 * std::numbers::pi * mode[a] * x[a] / grid_.length[a];
      sum += field[c] * std::polar(1.0, -phase);
    }
    return sum / static_cast<double>(n_);
  }

 private:
  Grid grid_;
  std::size_t n_;
  detail::FftwBuffer buf_;
  detail::FftwPlan fwd_, inv_;
  std::vector<std::vector<double>> wavenumbers_;
  std::vector<bool> nyquist_;
};

}  // namespace rvlbm
