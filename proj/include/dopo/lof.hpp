#pragma once
// ============================================================================
// Local oscillator field (LOF) shapes for homodyne detection of the soliton
// fluctuations, and the width scan for the practical Gauss-Hermite
// approximation to the optimal (momentum-mode) local oscillator.
//
// Physical LOFs satisfy lower = conj(upper).  The momentum-mode LOF
// (i psi', conj) drives perfect squeezing at zero frequency at threshold;
// the first Gauss-Hermite function i e^{i phi} (x - x0) exp(-(x-x0)^2/(2 xi^2))
// approximates it with a single tunable width.  The amplitude-mode LOF is
// frozen to its threshold shape (beta0 = sqrt(delta1)) but phase-locked to
// the current soliton phase.  Above the Hopf threshold the relevant shapes
// are the left modes of the two most damped eigenmodes (lambda near
// -2 +- i omega_HB), which are genuinely two-component.
// ============================================================================

#include <cmath>
#include <limits>
#include <string>

#include "dopo/core.hpp"
#include "dopo/linop.hpp"
#include "dopo/soliton.hpp"
#include "dopo/spectra.hpp"

namespace dopo {

// ============================================================================
// shape builders
// ============================================================================

/// Plane wave exp(i theta) on the grid.
inline FluctuationField lof_plane_wave(double theta, const Grid1D& grid) {
  cvec f(grid.n_points, std::exp(cplx(0.0, theta)));
  return physical_field(f);
}

/// First Gauss-Hermite function, phase phi, width xi, centered at x_shift:
/// i e^{i phi} (x - x_shift) exp(-(x - x_shift)^2 / (2 xi^2)).
inline FluctuationField lof_gauss_hermite(double xi, double x_shift, double phi,
                                          const Grid1D& grid) {
  if (!(xi > 0.0) || !std::isfinite(xi))
    throw invalid_argument("Gauss-Hermite width must be finite and positive");
  cvec f(grid.n_points);
  const cplx amp = cplx(0.0, 1.0) * std::exp(cplx(0.0, phi));
  for (int j = 0; j < grid.n_points; ++j) {
    const double u = grid.x[j] - x_shift;
    f[j] = amp * u * std::exp(-0.5 * u * u / (xi * xi));
  }
  return physical_field(f);
}

/// Momentum-mode LOF (i psi', conj): the optimal squeezing shape.
inline FluctuationField lof_momentum(const SolitonProfile& sol) {
  cvec f(sol.grid.n_points);
  for (int j = 0; j < sol.grid.n_points; ++j)
    f[j] = cplx(0.0, 1.0) * sol.dpsi_bar[j];
  return physical_field(f);
}

/// Amplitude-mode LOF frozen to its threshold shape (beta0 = sqrt(delta1))
/// and locked to the current soliton phase.
inline FluctuationField lof_amplitude_frozen(const SolitonProfile& sol) {
  const double b0 = std::sqrt(sol.params.delta1);
  const Grid1D& g = sol.grid;
  cvec f(g.n_points);
  const cplx e = std::exp(cplx(0.0, sol.phi));
  for (int j = 0; j < g.n_points; ++j) {
    const double x = g.x[j];
    const double S = std::sqrt(b0 / 2.0) / std::cosh(b0 * x);
    const double T = b0 * std::tanh(b0 * x);
    f[j] = -(1.0 / b0) * S * cplx(b0 * b0, x * T - 1.0) * e;
  }
  return physical_field(f);
}

/// The soliton itself as local oscillator (intensity detection).
inline FluctuationField lof_soliton(const SolitonProfile& sol) {
  return physical_field(sol.psi_bar);
}

namespace detail {

/// Index of the mode with eigenvalue closest to target.
inline int nearest_mode(const EigenSystem& E, cplx target) {
  int best = 0;
  double bd = std::abs(E.eigenvalues[0] - target);
  for (int i = 1; i < E.n_modes; ++i) {
    const double d = std::abs(E.eigenvalues[i] - target);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

/// Oscillation frequency of the marginal (hopf-pair tagged) modes.
inline double hopf_frequency(const EigenSystem& E) {
  const int h = E.find_tag(ModeTag::hopf_pair);
  if (h < 0)
    throw classification_error(
        "no marginal oscillatory pair: evaluate at the Hopf threshold");
  return std::abs(E.eigenvalues[h].imag());
}

}  // namespace detail

/// Left mode of the most damped eigenmode (lambda near -2 + i omega_HB); a
/// genuinely two-component shape, usable only through the general spectrum
/// entry point.
inline FluctuationField lof_hopf_single(const EigenSystem& E) {
  const double om = detail::hopf_frequency(E);
  const int i = detail::nearest_mode(E, cplx(-2.0, om));
  return E.left_mode(i);
}

/// Sum of the left modes of the two most damped eigenmodes (lambda near
/// -2 +- i omega_HB).
inline FluctuationField lof_hopf_sum(const EigenSystem& E) {
  const double om = detail::hopf_frequency(E);
  const int ip = detail::nearest_mode(E, cplx(-2.0, om));
  const int im = detail::nearest_mode(E, cplx(-2.0, -om));
  if (ip == im)
    throw classification_error("damped Hopf partner modes not separated");
  FluctuationField a = E.left_mode(ip);
  const FluctuationField b = E.left_mode(im);
  for (int j = 0; j < a.size(); ++j) {
    a.upper[j] += b.upper[j];
    a.lower[j] += b.lower[j];
  }
  return a;
}

// ============================================================================
// LOF specification (CLI-facing dispatch)
// ============================================================================

enum class LofKind {
  plane_wave,       ///< exp(i theta)
  gauss_hermite,    ///< first Gauss-Hermite function (xi <= 0: auto width)
  momentum_mode,    ///< i psi' (optimal)
  amplitude_frozen, ///< threshold amplitude-mode shape, phase-locked
  hopf_single,      ///< left mode at -2 + i omega_HB
  hopf_sum,         ///< sum of left modes at -2 +- i omega_HB
  soliton,          ///< the soliton profile itself
};

struct LofSpec {
  LofKind kind = LofKind::momentum_mode;
  double theta = 0.0;   ///< plane-wave phase
  double xi = 0.0;      ///< Gauss-Hermite width; <= 0 requests minimization
  double x_shift = 0.0; ///< Gauss-Hermite center offset
  double phi = std::numeric_limits<double>::quiet_NaN(); ///< NaN: soliton phase
};

/// True for kinds whose lower component is conj(upper).
inline bool lof_is_physical(LofKind k) {
  return k != LofKind::hopf_single && k != LofKind::hopf_sum;
}

// ============================================================================
// Gauss-Hermite width selection
// ============================================================================

/// S(omega_eval) of the Gauss-Hermite LOF as a function of width.
inline double gh_spectrum_value(double xi, const SolitonProfile& sol,
                                const EigenSystem& E,
                                const ModalDiffusionMatrix& Dm,
                                double omega_eval = 0.0, double x_shift = 0.0) {
  const FluctuationField lof =
      lof_gauss_hermite(xi, x_shift, sol.phi, sol.grid);
  const rvec om{omega_eval};
  return squeezing_spectrum(E, Dm, lof, om).values[0];
}

/// Width minimizing S(0) over [0.1/beta, 10/beta] (golden-section after a
/// coarse log-spaced bracket).
inline double gh_best_width(const SolitonProfile& sol, const EigenSystem& E,
                            const ModalDiffusionMatrix& Dm,
                            double omega_eval = 0.0) {
  const double lo = 0.1 / sol.beta, hi = 10.0 / sol.beta;
  const int coarse = 25;
  double best_xi = lo, best_s = 0.0;
  for (int i = 0; i < coarse; ++i) {
    const double xi = lo * std::pow(hi / lo, static_cast<double>(i) / (coarse - 1));
    const double s = gh_spectrum_value(xi, sol, E, Dm, omega_eval);
    if (i == 0 || s < best_s) {
      best_s = s;
      best_xi = xi;
    }
  }
  const double step = std::pow(hi / lo, 1.0 / (coarse - 1));
  double a = std::max(lo, best_xi / step), b = std::min(hi, best_xi * step);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = gh_spectrum_value(c, sol, E, Dm, omega_eval);
  double fd = gh_spectrum_value(d, sol, E, Dm, omega_eval);
  while (b - a > 1e-6 / sol.beta) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = gh_spectrum_value(c, sol, E, Dm, omega_eval);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = gh_spectrum_value(d, sol, E, Dm, omega_eval);
    }
  }
  return 0.5 * (a + b);
}

/// Width-scan table: S(Omega; xi) for log-spaced widths in [0.1/beta,
/// 10/beta] at the requested frequencies, plus the minimizing width at the
/// first frequency.
struct GhWidthScan {
  rvec xi;
  rvec omegas;
  std::vector<rvec> s; ///< s[t][i] = S(omegas[t]; xi[i])
  double best_xi = 0.0;
};

inline GhWidthScan gh_width_scan(const SolitonProfile& sol,
                                 const EigenSystem& E,
                                 const ModalDiffusionMatrix& Dm,
                                 const rvec& omegas = {0.0, 1.0, 2.0},
                                 int n_widths = 41) {
  if (omegas.empty() || n_widths < 2)
    throw invalid_argument("width scan needs frequencies and >= 2 widths");
  GhWidthScan out;
  out.omegas = omegas;
  out.xi.resize(n_widths);
  const double lo = 0.1 / sol.beta, hi = 10.0 / sol.beta;
  for (int i = 0; i < n_widths; ++i)
    out.xi[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n_widths - 1));
  out.s.assign(omegas.size(), rvec(n_widths, 0.0));
  for (int i = 0; i < n_widths; ++i) {
    const FluctuationField lof =
        lof_gauss_hermite(out.xi[i], 0.0, sol.phi, sol.grid);
    const SpectrumResult r = squeezing_spectrum(E, Dm, lof, omegas);
    for (std::size_t t = 0; t < omegas.size(); ++t) out.s[t][i] = r.values[t];
  }
  out.best_xi = gh_best_width(sol, E, Dm, omegas[0]);
  return out;
}

// ============================================================================
// dispatch
// ============================================================================

/// Materialize a LOF specification on the profile's grid.  Mode-derived
/// kinds need the eigensystem; automatic Gauss-Hermite width additionally
/// needs the diffusion matrix.
inline FluctuationField render_lof(const LofSpec& spec,
                                   const SolitonProfile& sol,
                                   const EigenSystem* E = nullptr,
                                   const ModalDiffusionMatrix* Dm = nullptr) {
  switch (spec.kind) {
    case LofKind::plane_wave:
      return lof_plane_wave(spec.theta, sol.grid);
    case LofKind::gauss_hermite: {
      const double phi = std::isnan(spec.phi) ? sol.phi : spec.phi;
      double xi = spec.xi;
      if (!(xi > 0.0)) {
        if (!E || !Dm)
          throw invalid_argument(
              "automatic Gauss-Hermite width needs the eigensystem");
        xi = gh_best_width(sol, *E, *Dm);
      }
      return lof_gauss_hermite(xi, spec.x_shift, phi, sol.grid);
    }
    case LofKind::momentum_mode:
      return lof_momentum(sol);
    case LofKind::amplitude_frozen:
      return lof_amplitude_frozen(sol);
    case LofKind::hopf_single:
      if (!E) throw invalid_argument("mode-derived LOF needs the eigensystem");
      return lof_hopf_single(*E);
    case LofKind::hopf_sum:
      if (!E) throw invalid_argument("mode-derived LOF needs the eigensystem");
      return lof_hopf_sum(*E);
    case LofKind::soliton:
      return lof_soliton(sol);
  }
  throw invalid_argument("unknown LOF kind");
}

}  // namespace dopo
