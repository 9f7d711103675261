#pragma once
// ============================================================================
// Fluctuation spectra of the linearized dynamics: modal diffusion matrix,
// modal cross-spectra, homodyne squeezing spectra (full-beam, windowed
// detector, general two-component local oscillator), intensity-fluctuation
// spectrum, local-oscillator phase optimization, and the soliton-position
// drift (phase-space diffusion) constant.
//
// Conventions:
//   * fluctuations are expanded over the retained eigenmodes: all modes
//     except the goldstone (excluded exactly; its secular motion is treated
//     as position diffusion) and any marginal |Re lambda| <= margin modes
//     (zero stationary weight at a bifurcation point);
//   * D_ij = int [w_i^u* w_j^u* alpha0 + w_i^l* w_j^l* alpha0*] dx,
//     symmetrized to exact D_ij = D_ji;
//   * S_ij(Omega) = D_ij / ((lambda_i - i Omega)(lambda_j + i Omega));
//   * S_out(Omega) = (2/N) sum_ij P_i P_j S_ij(Omega) with P_i = <lof|v_i>
//     and N = int |lof_upper|^2 dx; 0 dB shot noise maps to S_out = 0 and
//     perfect squeezing to S_out = -1, so physical spectra obey
//     S_out >= -1 and Im S_out = 0 (tracked in max_imag_residual).
// ============================================================================

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dopo/core.hpp"
#include "dopo/linop.hpp"

extern "C" {
void zgemv_(const char* trans, const int* m, const int* n, const void* alpha,
            const void* a, const int* lda, const void* x, const int* incx,
            const void* beta, void* y, const int* incy);
void zgemm_(const char* transa, const char* transb, const int* m, const int* n,
            const int* k, const void* alpha, const void* a, const int* lda,
            const void* b, const int* ldb, const void* beta, void* c,
            const int* ldc);
}

namespace dopo {

// ============================================================================
// result types
// ============================================================================

/// A real spectrum sampled on a frequency axis.  For analytic spectra
/// std_error is empty; stochastic estimates fill it per bin.
struct SpectrumResult {
  rvec omega;
  rvec values;
  rvec std_error;
  double max_imag_residual = 0.0; ///< largest |Im| discarded when taking Re
};

/// Uniform frequency axis [0, omega_max] with n points.
inline rvec omega_axis(double omega_max, int n) {
  if (n < 1 || !(omega_max >= 0.0))
    throw invalid_argument("omega axis needs n >= 1 and omega_max >= 0");
  rvec om(n);
  for (int i = 0; i < n; ++i)
    om[i] = (n == 1) ? 0.0 : omega_max * i / (n - 1);
  return om;
}

/// Diffusion matrix over the retained (non-goldstone, damped) modes.
struct ModalDiffusionMatrix {
  std::vector<cplx> d;       ///< column-major size x size, symmetric
  std::vector<int> modes;    ///< retained indices into the eigensystem
  std::vector<cplx> lambdas; ///< eigenvalues of the retained modes
  int size = 0;
};

// ============================================================================
// retained modes and diffusion
// ============================================================================

/// Indices of modes kept in spectral sums: goldstone-tagged modes are
/// excluded exactly, marginal modes (|Re lambda| <= margin) carry zero
/// stationary weight and are excluded, and any growing mode raises
/// non_stationary_error.
inline std::vector<int> retained_modes(const EigenSystem& E,
                                       double margin = 1e-6) {
  std::vector<int> keep;
  keep.reserve(E.n_modes);
  for (int i = 0; i < E.n_modes; ++i) {
    if (E.tags[i] == ModeTag::goldstone) continue;
    const double re = E.eigenvalues[i].real();
    if (re > margin)
      throw non_stationary_error(
          "growing mode Re lambda = " + std::to_string(re) +
          "; fluctuation spectra are undefined");
    if (re > -margin) continue;
    keep.push_back(i);
  }
  return keep;
}

/// Build the modal diffusion matrix over the retained modes.
inline ModalDiffusionMatrix modal_diffusion(const EigenSystem& E,
                                            const Alpha0Field& a0,
                                            double margin = 1e-6) {
  const int n = E.dim / 2;
  if (static_cast<int>(a0.values.size()) != n)
    throw invalid_argument("alpha0 size does not match the eigensystem grid");
  ModalDiffusionMatrix Dm;
  Dm.modes = retained_modes(E, margin);
  const int M = static_cast<int>(Dm.modes.size());
  Dm.size = M;
  Dm.lambdas.resize(M);
  for (int i = 0; i < M; ++i) Dm.lambdas[i] = E.eigenvalues[Dm.modes[i]];

  // D = dx [ conj(Wu)^T diag(a0) conj(Wu) + conj(Wl)^T diag(a0*) conj(Wl) ]
  std::vector<cplx> Cu(static_cast<std::size_t>(n) * M),
      Cl(static_cast<std::size_t>(n) * M), Au(Cu), Al(Cl);
  for (int i = 0; i < M; ++i) {
    const cplx* w = &E.left[static_cast<std::size_t>(Dm.modes[i]) * E.dim];
    for (int j = 0; j < n; ++j) {
      const cplx wu = std::conj(w[j]);
      const cplx wl = std::conj(w[n + j]);
      Cu[j + static_cast<std::size_t>(i) * n] = wu;
      Cl[j + static_cast<std::size_t>(i) * n] = wl;
      Au[j + static_cast<std::size_t>(i) * n] = a0.values[j] * wu;
      Al[j + static_cast<std::size_t>(i) * n] = std::conj(a0.values[j]) * wl;
    }
  }
  Dm.d.assign(static_cast<std::size_t>(M) * M, 0.0);
  const cplx one = E.grid.dx, zero = 0.0, onec = 1.0;
  zgemm_("T", "N", &M, &M, &n, &one, Cu.data(), &n, Au.data(), &n, &zero,
         Dm.d.data(), &M);
  zgemm_("T", "N", &M, &M, &n, &one, Cl.data(), &n, Al.data(), &n, &onec,
         Dm.d.data(), &M);
  // exact symmetrization
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j) {
      const cplx s = 0.5 * (Dm.d[i + static_cast<std::size_t>(j) * M] +
                            Dm.d[j + static_cast<std::size_t>(i) * M]);
      Dm.d[i + static_cast<std::size_t>(j) * M] = s;
      Dm.d[j + static_cast<std::size_t>(i) * M] = s;
    }
  return Dm;
}

/// Modal cross-spectrum matrix at one frequency:
/// S_ij = D_ij / ((lambda_i - i Omega)(lambda_j + i Omega)).
inline std::vector<cplx> modal_spectrum(const ModalDiffusionMatrix& Dm,
                                        double omega) {
  const int M = Dm.size;
  std::vector<cplx> S(static_cast<std::size_t>(M) * M);
  for (int j = 0; j < M; ++j) {
    const cplx dj = Dm.lambdas[j] + cplx(0.0, omega);
    for (int i = 0; i < M; ++i) {
      const cplx di = Dm.lambdas[i] - cplx(0.0, omega);
      S[i + static_cast<std::size_t>(j) * M] =
          Dm.d[i + static_cast<std::size_t>(j) * M] / (di * dj);
    }
  }
  return S;
}

// ============================================================================
// homodyne projections and spectra
// ============================================================================

/// Optional spatial detector window, widths measured via the dimensionless
/// Sigma = width / beta relation width = Sigma * beta.
struct DetectorWindow {
  double center = 0.0;
  double width = 0.0;
  double sigma = 0.0; ///< dimensionless width the window was built from
};

/// Window of dimensionless width Sigma centered at x0 for the given profile.
inline DetectorWindow make_detector_window(double sigma, double x0,
                                           const SolitonProfile& sol) {
  if (!(sigma > 0.0))
    throw invalid_argument("detector window needs Sigma > 0");
  DetectorWindow w;
  w.sigma = sigma;
  w.width = sigma * sol.beta;
  w.center = x0;
  const double lo = w.center - 0.5 * w.width, hi = w.center + 0.5 * w.width;
  if (lo < sol.grid.x.front() - 1e-12 || hi > sol.grid.x.back() + sol.grid.dx)
    throw invalid_argument("detector window extends beyond the domain");
  return w;
}

namespace detail {

inline rvec window_mask(const Grid1D& g, const DetectorWindow* win) {
  rvec m(g.n_points, 1.0);
  if (!win) return m;
  const double lo = win->center - 0.5 * win->width - 1e-12;
  const double hi = win->center + 0.5 * win->width + 1e-12;
  for (int j = 0; j < g.n_points; ++j)
    m[j] = (g.x[j] >= lo && g.x[j] <= hi) ? 1.0 : 0.0;
  return m;
}

/// P_i = <lof|v_i> restricted to the window mask (both components masked).
inline std::vector<cplx> project_lof(const EigenSystem& E,
                                     const ModalDiffusionMatrix& Dm,
                                     const FluctuationField& lof,
                                     const rvec& mask) {
  const int n = E.dim / 2;
  std::vector<cplx> P(Dm.size);
  for (int i = 0; i < Dm.size; ++i) {
    const cplx* v = &E.right[static_cast<std::size_t>(Dm.modes[i]) * E.dim];
    cplx acc = 0.0;
    for (int j = 0; j < n; ++j)
      acc += mask[j] * (std::conj(lof.upper[j]) * v[j] +
                        std::conj(lof.lower[j]) * v[n + j]);
    P[i] = E.grid.dx * acc;
  }
  return P;
}

/// S(Omega) = (2/N) q^T D r with q_i = P_i/(lambda_i - i Omega),
/// r_i = P_i/(lambda_i + i Omega); returns the complex values.
inline std::vector<cplx> spectrum_from_projection(const ModalDiffusionMatrix& Dm,
                                                  const std::vector<cplx>& P,
                                                  double norm, const rvec& omega) {
  const int M = Dm.size;
  if (!(norm > 0.0))
    throw invalid_argument("local oscillator has zero power in the window");
  std::vector<cplx> out(omega.size());
  std::vector<cplx> q(M), r(M), y(M);
  const int inc = 1;
  const cplx one = 1.0, zero = 0.0;
  for (std::size_t t = 0; t < omega.size(); ++t) {
    const cplx iom(0.0, omega[t]);
    for (int i = 0; i < M; ++i) {
      q[i] = P[i] / (Dm.lambdas[i] - iom);
      r[i] = P[i] / (Dm.lambdas[i] + iom);
    }
    zgemv_("N", &M, &M, &one, Dm.d.data(), &M, r.data(), &inc, &zero, y.data(),
           &inc);
    cplx acc = 0.0;
    for (int i = 0; i < M; ++i) acc += q[i] * y[i];
    out[t] = 2.0 / norm * acc;
  }
  return out;
}

inline SpectrumResult realize(const rvec& omega, const std::vector<cplx>& s) {
  SpectrumResult out;
  out.omega = omega;
  out.values.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    out.values[i] = s[i].real();
    out.max_imag_residual = std::max(out.max_imag_residual,
                                     std::abs(s[i].imag()));
  }
  return out;
}

inline void require_physical(const FluctuationField& lof) {
  double scale = 0.0, dev = 0.0;
  for (int j = 0; j < lof.size(); ++j) {
    scale = std::max(scale, std::abs(lof.upper[j]));
    dev = std::max(dev,
                   std::abs(lof.lower[j] - std::conj(lof.upper[j])));
  }
  if (scale == 0.0) throw invalid_argument("local oscillator is zero");
  if (dev > 1e-8 * scale)
    throw invalid_argument(
        "local oscillator is not physical (lower != conj(upper)); "
        "use squeezing_spectrum_general for mode-derived shapes");
}

}  // namespace detail

/// Full-beam homodyne squeezing spectrum for a physical local oscillator.
inline SpectrumResult squeezing_spectrum(const EigenSystem& E,
                                         const ModalDiffusionMatrix& Dm,
                                         const FluctuationField& lof,
                                         const rvec& omega) {
  if (lof.size() != E.dim / 2)
    throw invalid_argument("local oscillator size does not match the grid");
  detail::require_physical(lof);
  const rvec mask(E.dim / 2, 1.0);
  const auto P = detail::project_lof(E, Dm, lof, mask);
  double norm = 0.0;
  for (int j = 0; j < lof.size(); ++j) norm += std::norm(lof.upper[j]);
  norm *= E.grid.dx;
  return detail::realize(omega,
                         detail::spectrum_from_projection(Dm, P, norm, omega));
}

/// Squeezing spectrum observed through a finite detector window.
inline SpectrumResult squeezing_spectrum_detector(const EigenSystem& E,
                                                  const ModalDiffusionMatrix& Dm,
                                                  const FluctuationField& lof,
                                                  const DetectorWindow& win,
                                                  const rvec& omega) {
  if (lof.size() != E.dim / 2)
    throw invalid_argument("local oscillator size does not match the grid");
  detail::require_physical(lof);
  const rvec mask = detail::window_mask(E.grid, &win);
  const auto P = detail::project_lof(E, Dm, lof, mask);
  double norm = 0.0;
  for (int j = 0; j < lof.size(); ++j)
    norm += mask[j] * std::norm(lof.upper[j]);
  norm *= E.grid.dx;
  return detail::realize(omega,
                         detail::spectrum_from_projection(Dm, P, norm, omega));
}

/// Squeezing spectrum for a general two-component local oscillator (used for
/// mode-derived shapes whose lower component is not conj(upper)); the
/// normalization uses the upper-component power.
inline SpectrumResult squeezing_spectrum_general(const EigenSystem& E,
                                                 const ModalDiffusionMatrix& Dm,
                                                 const FluctuationField& lof,
                                                 const rvec& omega) {
  if (lof.size() != E.dim / 2)
    throw invalid_argument("local oscillator size does not match the grid");
  const rvec mask(E.dim / 2, 1.0);
  const auto P = detail::project_lof(E, Dm, lof, mask);
  double norm = 0.0;
  for (int j = 0; j < lof.size(); ++j) norm += std::norm(lof.upper[j]);
  norm *= E.grid.dx;
  return detail::realize(omega,
                         detail::spectrum_from_projection(Dm, P, norm, omega));
}

/// Intensity-fluctuation spectrum: homodyne with the soliton itself as the
/// local oscillator, optionally through a detector window.
inline SpectrumResult intensity_spectrum(const EigenSystem& E,
                                         const ModalDiffusionMatrix& Dm,
                                         const SolitonProfile& sol,
                                         const rvec& omega,
                                         const DetectorWindow* win = nullptr) {
  const FluctuationField lof = physical_field(sol.psi_bar);
  if (win) return squeezing_spectrum_detector(E, Dm, lof, *win, omega);
  return squeezing_spectrum(E, Dm, lof, omega);
}

// ============================================================================
// plane-wave local-oscillator phase optimization
// ============================================================================

/// Result of the phase scan: optimal theta, value there, and the scan table.
struct PhaseOptimum {
  double theta = 0.0;
  double s_value = 0.0;
  rvec scan_theta;
  rvec scan_s;
};

/// Minimize S(Omega_eval; theta) over the phase of a plane-wave local
/// oscillator exp(i theta), optionally windowed: 360-point scan followed by
/// golden-section refinement to 1e-6 in theta.
inline PhaseOptimum optimize_lof_phase(const EigenSystem& E,
                                       const ModalDiffusionMatrix& Dm,
                                       double omega_eval = 0.0,
                                       const DetectorWindow* win = nullptr) {
  const int n = E.dim / 2;
  const rvec mask = detail::window_mask(E.grid, win);
  // P_i(theta) = e^{-i theta} A_i + e^{i theta} B_i
  std::vector<cplx> A(Dm.size), B(Dm.size);
  for (int i = 0; i < Dm.size; ++i) {
    const cplx* v = &E.right[static_cast<std::size_t>(Dm.modes[i]) * E.dim];
    cplx au = 0.0, bl = 0.0;
    for (int j = 0; j < n; ++j) {
      au += mask[j] * v[j];
      bl += mask[j] * v[n + j];
    }
    A[i] = E.grid.dx * au;
    B[i] = E.grid.dx * bl;
  }
  double norm = 0.0;
  for (int j = 0; j < n; ++j) norm += mask[j];
  norm *= E.grid.dx;
  if (!(norm > 0.0))
    throw invalid_argument("window contains no grid points");

  // S(theta) = (2/N) (e^{-2 i theta} Qaa + Qab + e^{2 i theta} Qbb)
  const cplx iom(0.0, omega_eval);
  const int M = Dm.size;
  std::vector<cplx> qa(M), ra(M), qb(M), rb(M), ya(M), yb(M);
  for (int i = 0; i < M; ++i) {
    qa[i] = A[i] / (Dm.lambdas[i] - iom);
    ra[i] = A[i] / (Dm.lambdas[i] + iom);
    qb[i] = B[i] / (Dm.lambdas[i] - iom);
    rb[i] = B[i] / (Dm.lambdas[i] + iom);
  }
  const int inc = 1;
  const cplx one = 1.0, zero = 0.0;
  zgemv_("N", &M, &M, &one, Dm.d.data(), &M, ra.data(), &inc, &zero, ya.data(),
         &inc);
  zgemv_("N", &M, &M, &one, Dm.d.data(), &M, rb.data(), &inc, &zero, yb.data(),
         &inc);
  cplx Qaa = 0.0, Qbb = 0.0, Qab = 0.0;
  for (int i = 0; i < M; ++i) {
    Qaa += qa[i] * ya[i];
    Qbb += qb[i] * yb[i];
    Qab += qa[i] * yb[i] + qb[i] * ya[i];
  }
  auto S = [&](double th) {
    const cplx e2(std::cos(2.0 * th), std::sin(2.0 * th));
    return (2.0 / norm * (Qaa / e2 + Qab + Qbb * e2)).real();
  };

  PhaseOptimum out;
  out.scan_theta.resize(360);
  out.scan_s.resize(360);
  int best = 0;
  for (int i = 0; i < 360; ++i) {
    out.scan_theta[i] = 2.0 * M_PI * i / 360.0;
    out.scan_s[i] = S(out.scan_theta[i]);
    if (out.scan_s[i] < out.scan_s[best]) best = i;
  }
  // golden-section refinement on the bracketing neighbours
  const double step = 2.0 * M_PI / 360.0;
  double a = out.scan_theta[best] - step, b = out.scan_theta[best] + step;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = S(c), fd = S(d);
  while (b - a > 1e-6) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = S(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = S(d);
    }
  }
  out.theta = 0.5 * (a + b);
  if (out.theta < 0.0) out.theta += 2.0 * M_PI;
  out.s_value = S(out.theta);
  return out;
}

// ============================================================================
// soliton-position drift
// ============================================================================

/// Diffusion constant of the soliton position x1:
/// D = (2/kappa^2) Re int (w1^u)^2 alpha0* dx with the <w1|Gx> = 1 goldstone
/// normalization.  Cross-checked internally against the two-component
/// diffusion-matrix form, which coincides once the left mode is
/// swap-conjugation symmetric.
inline double drift_diffusion(const EigenSystem& E, const Alpha0Field& a0,
                              double kappa) {
  const int gi = E.find_tag(ModeTag::goldstone);
  if (gi < 0)
    throw classification_error("no goldstone mode: drift constant undefined");
  if (!(kappa > 0.0)) throw invalid_argument("kappa must be positive");
  const int n = E.dim / 2;
  const cplx* w = &E.left[static_cast<std::size_t>(gi) * E.dim];
  cplx upper = 0.0, both = 0.0;
  for (int j = 0; j < n; ++j) {
    upper += w[j] * w[j] * std::conj(a0.values[j]);
    both += std::conj(w[j]) * std::conj(w[j]) * a0.values[j] +
            std::conj(w[n + j]) * std::conj(w[n + j]) * std::conj(a0.values[j]);
  }
  const double d_upper = 2.0 / (kappa * kappa) * E.grid.dx * upper.real();
  const double d_both = 1.0 / (kappa * kappa) * E.grid.dx * both.real();
  if (std::abs(d_upper - d_both) > 1e-8 * std::max(1.0, std::abs(d_upper)))
    throw numerical_error(
        "drift-constant forms disagree; left goldstone mode lost its "
        "swap-conjugation symmetry");
  return d_upper;
}

}  // namespace dopo
