#pragma once
// ============================================================================
// Core types for the DOPO soliton fluctuation toolkit: model parameters,
// periodic grid, two-component fluctuation fields, scalar product, and
// spectral derivatives.
//
// Conventions used throughout:
//   * fields live on a uniform periodic grid x_j = -L/2 + j*dx, j = 0..n-1;
//   * wavenumbers are FFT-ordered, k_m = 2*pi*m/L for m in [0, n/2) and
//     k_m = 2*pi*(m-n)/L for m in [n/2, n);
//   * a fluctuation field stacks the two independent quadrature components
//     (upper, lower) of the generalized-P phase space; the lower component is
//     NOT constrained to be the conjugate of the upper one;
//   * <u|s> = integral dx [conj(u_up) s_up + conj(u_lo) s_lo].
// ============================================================================

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dopo {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

// ============================================================================
// error taxonomy
// ============================================================================

/// Base class of all library errors.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Errors caused by an invalid or physically inadmissible configuration;
/// the CLI maps these to exit code 2.
struct config_error : error {
  using error::error;
};

/// Errors caused by a numerical failure at runtime (instability, missed
/// bracketing, lost mode); the CLI maps these to exit code 3.
struct numerical_error : error {
  using error::error;
};

/// Malformed argument (bad grid size, negative width, unknown key, ...).
struct invalid_argument : config_error {
  using config_error::config_error;
};

/// Requested parameters lie outside the soliton existence region.
struct existence_error : config_error {
  using config_error::config_error;
};

/// Grid too coarse to resolve the requested state.
struct resolution_error : config_error {
  using config_error::config_error;
};

/// Not enough data for a statistically meaningful estimate.
struct insufficient_data_error : config_error {
  using config_error::config_error;
};

/// An expected mode (goldstone, momentum, hopf pair) could not be identified.
struct classification_error : numerical_error {
  using numerical_error::numerical_error;
};

/// The linearization has a growing mode; fluctuation spectra are undefined.
struct non_stationary_error : numerical_error {
  using numerical_error::numerical_error;
};

/// A root bracket does not contain a sign change.
struct no_crossing_error : numerical_error {
  using numerical_error::numerical_error;
};

/// A stochastic trajectory left the linear regime (or the scheme is unstable).
struct blow_up_error : numerical_error {
  using numerical_error::numerical_error;
};

// ============================================================================
// model parameters
// ============================================================================

/// Parameters of the parametrically driven NLS model obtained from the DOPO
/// in the large-pump-detuning limit.
struct ModelParams {
  double mu = 1.2;     ///< pump parameter (threshold at mu = 1)
  double delta1 = 1.2; ///< signal detuning
  int sigma = +1;      ///< nonlinearity sign (+1: self-focusing, bright case)
  double kappa = 1.0;  ///< dimensionless system-size parameter (noise scale)

  void validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu))
      throw invalid_argument("mu must be finite and non-negative");
    if (!std::isfinite(delta1))
      throw invalid_argument("delta1 must be finite");
    if (sigma != 1 && sigma != -1)
      throw invalid_argument("sigma must be +1 or -1");
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw invalid_argument("kappa must be finite and positive");
  }
};

// ============================================================================
// grid
// ============================================================================

/// Uniform periodic 1D grid with FFT-ordered wavenumbers.
struct Grid1D {
  int n_points = 0;  ///< number of points (power of two, >= 8)
  double length = 0; ///< domain length L
  double dx = 0;     ///< spacing L / n
  rvec x;            ///< nodes x_j = -L/2 + j*dx
  rvec k;            ///< FFT-ordered wavenumbers
};

/// Build a periodic grid. n must be a power of two >= 8; length positive.
inline Grid1D make_grid(int n, double length) {
  if (n < 8 || (n & (n - 1)) != 0)
    throw invalid_argument("grid size must be a power of two >= 8");
  if (!(length > 0.0) || !std::isfinite(length))
    throw invalid_argument("grid length must be finite and positive");
  Grid1D g;
  g.n_points = n;
  g.length = length;
  g.dx = length / n;
  g.x.resize(n);
  g.k.resize(n);
  const double dk = 2.0 * M_PI / length;
  for (int j = 0; j < n; ++j) {
    g.x[j] = -0.5 * length + g.dx * j;
    g.k[j] = dk * (j < n / 2 ? j : j - n);
  }
  return g;
}

// ============================================================================
// fluctuation fields
// ============================================================================

/// Two-component fluctuation field (a, a+) of the generalized-P phase space.
/// The components are independent; physical local-oscillator shapes satisfy
/// lower = conj(upper) but eigenmodes generally do not.
struct FluctuationField {
  cvec upper;
  cvec lower;

  FluctuationField() = default;
  explicit FluctuationField(int n) : upper(n, 0.0), lower(n, 0.0) {}

  int size() const { return static_cast<int>(upper.size()); }
};

/// Physical field built from a single complex profile: (f, conj f).
inline FluctuationField physical_field(const cvec& f) {
  FluctuationField out(static_cast<int>(f.size()));
  for (std::size_t j = 0; j < f.size(); ++j) {
    out.upper[j] = f[j];
    out.lower[j] = std::conj(f[j]);
  }
  return out;
}

/// <u|s> = integral dx [conj(u_up) s_up + conj(u_lo) s_lo].
inline cplx scalar_product(const FluctuationField& u, const FluctuationField& s,
                           const Grid1D& grid) {
  if (u.size() != grid.n_points || s.size() != grid.n_points)
    throw invalid_argument("scalar_product: field/grid size mismatch");
  cplx acc = 0.0;
  for (int j = 0; j < grid.n_points; ++j)
    acc += std::conj(u.upper[j]) * s.upper[j] + std::conj(u.lower[j]) * s.lower[j];
  return grid.dx * acc;
}

/// sqrt(<u|u>), real by construction.
inline double field_norm(const FluctuationField& u, const Grid1D& grid) {
  return std::sqrt(std::real(scalar_product(u, u, grid)));
}

// ============================================================================
// FFT helpers (plan cache; FFTW_ESTIMATE keeps plan choice deterministic so
// equal seeds give byte-identical outputs run to run)
// ============================================================================

namespace detail {

class FftCache {
 public:
  static FftCache& instance() {
    static FftCache c;
    return c;
  }

  /// Execute an out-of-place transform of length n; sign FFTW_FORWARD or
  /// FFTW_BACKWARD (backward is unnormalized).
  void transform(const cplx* in, cplx* out, int n, int sign) {
    fftw_plan p;
    {
      std::lock_guard<std::mutex> lk(mutex_);
      auto key = std::make_pair(n, sign);
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        // plan with UNALIGNED + ESTIMATE so the plan is valid for any buffers
        std::vector<cplx> a(n), b(n);
        p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                             reinterpret_cast<fftw_complex*>(b.data()), sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_[key] = p;
      } else {
        p = it->second;
      }
    }
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
  }

 private:
  FftCache() = default;
  std::mutex mutex_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Discrete Fourier transform, FFTW sign convention, unnormalized.
inline cvec fft(const cvec& f) {
  cvec out(f.size());
  detail::FftCache::instance().transform(f.data(), out.data(),
                                         static_cast<int>(f.size()), FFTW_FORWARD);
  return out;
}

/// Inverse transform including the 1/n normalization.
inline cvec ifft(const cvec& f) {
  cvec out(f.size());
  detail::FftCache::instance().transform(f.data(), out.data(),
                                         static_cast<int>(f.size()), FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(f.size());
  for (auto& z : out) z *= s;
  return out;
}

/// Spectral first derivative of a single complex profile.
inline cvec first_derivative_profile(const cvec& f, const Grid1D& grid) {
  if (static_cast<int>(f.size()) != grid.n_points)
    throw invalid_argument("first_derivative_profile: size mismatch");
  cvec F = fft(f);
  for (int m = 0; m < grid.n_points; ++m) F[m] *= cplx(0.0, grid.k[m]);
  return ifft(F);
}

/// Spectral second derivative of a single complex profile.
inline cvec second_derivative_profile(const cvec& f, const Grid1D& grid) {
  if (static_cast<int>(f.size()) != grid.n_points)
    throw invalid_argument("second_derivative_profile: size mismatch");
  cvec F = fft(f);
  for (int m = 0; m < grid.n_points; ++m) F[m] *= -grid.k[m] * grid.k[m];
  return ifft(F);
}

/// Spectral second derivative applied to both components of a field.
inline FluctuationField second_derivative(const FluctuationField& f,
                                          const Grid1D& grid) {
  FluctuationField out;
  out.upper = second_derivative_profile(f.upper, grid);
  out.lower = second_derivative_profile(f.lower, grid);
  return out;
}

}  // namespace dopo
