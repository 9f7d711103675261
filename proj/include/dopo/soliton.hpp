#pragma once
// ============================================================================
// Stationary bright cavity soliton of the parametrically driven NLS model and
// the classification of the (mu, delta1) parameter plane.
//
// The profile is psi(x) = sqrt(2) beta exp(i phi) sech(beta x) with
//   beta^2 = delta1 + branch * sqrt(mu^2 - 1),   cos(2 phi) = 1 / mu,
// and the sign of sin(2 phi) fixed by requiring the profile to be a stationary
// solution.  Both sign candidates are tried and verified against the
// stationary-equation residual; the acceptance gate scales with the spectral
// truncation error of sech on the given grid, so an under-resolved grid is
// reported as a resolution error rather than silently accepted.
// ============================================================================

#include <algorithm>
#include <cmath>
#include <string>

#include "dopo/core.hpp"

namespace dopo {

// ============================================================================
// types
// ============================================================================

/// Stationary bright-soliton profile together with its construction context.
struct SolitonProfile {
  double beta = 0;    ///< inverse width
  double phi = 0;     ///< locked phase (sin 2phi >= 0 on the + branch)
  cvec psi_bar;       ///< profile sampled on the grid
  cvec dpsi_bar;      ///< spectral first derivative of psi_bar
  ModelParams params; ///< parameters the profile was built for
  Grid1D grid;        ///< grid the profile lives on
  int branch = +1;    ///< sign in beta^2 = delta1 + branch*sqrt(mu^2-1)
  double residual = 0;///< max-norm stationary-equation residual on the grid
};

/// Outcome of the parameter-plane classification.
enum class RegionKind {
  no_soliton,                ///< below threshold, wrong detuning sign, or dark case
  bright_soliton_stable,     ///< bright soliton exists; no Hopf instability known
  bright_soliton_hopf_unstable, ///< bright soliton exists but mu > mu_HB
  above_mu0,                 ///< pump above the upper existence edge mu0
};

/// Classification plus the upper existence edge for the given detuning.
struct ExistenceRegion {
  RegionKind classification = RegionKind::no_soliton;
  double mu0 = 0; ///< sqrt(1 + delta1^2)
};

inline const char* to_string(RegionKind k) {
  switch (k) {
    case RegionKind::no_soliton: return "no-soliton";
    case RegionKind::bright_soliton_stable: return "bright-soliton-stable";
    case RegionKind::bright_soliton_hopf_unstable:
      return "bright-soliton-hopf-unstable";
    case RegionKind::above_mu0: return "above-mu0";
  }
  return "?";
}

// ============================================================================
// classification
// ============================================================================

/// Classify (mu, delta1) ignoring the Hopf line: existence only.
inline ExistenceRegion classify_region(const ModelParams& p) {
  p.validate();
  ExistenceRegion r;
  r.mu0 = std::sqrt(1.0 + p.delta1 * p.delta1);
  if (p.sigma != +1 || p.delta1 <= 0.0 || p.mu < 1.0)
    r.classification = RegionKind::no_soliton;
  else if (p.mu > r.mu0)
    r.classification = RegionKind::above_mu0;
  else
    r.classification = RegionKind::bright_soliton_stable;
  return r;
}

/// Classify with a known Hopf threshold mu_HB (from find_hopf_threshold):
/// existing solitons with mu > mu_HB are reported Hopf-unstable.
inline ExistenceRegion classify_region(const ModelParams& p, double mu_hb) {
  ExistenceRegion r = classify_region(p);
  if (r.classification == RegionKind::bright_soliton_stable && p.mu > mu_hb)
    r.classification = RegionKind::bright_soliton_hopf_unstable;
  return r;
}

// ============================================================================
// profile construction
// ============================================================================

/// Build the stationary bright soliton on the given grid.
///
/// Throws existence_error outside the existence region, resolution_error if
/// the verified stationary residual exceeds the grid-truncation gate.
inline SolitonProfile soliton_profile(const ModelParams& p, const Grid1D& grid,
                                      int branch = +1) {
  p.validate();
  if (branch != +1 && branch != -1)
    throw invalid_argument("soliton branch must be +1 or -1");
  if (p.sigma != +1)
    throw existence_error("bright soliton requires sigma = +1");
  if (p.delta1 <= 0.0)
    throw existence_error("bright soliton requires delta1 > 0");
  if (p.mu < 1.0)
    throw existence_error("mu below tangent bifurcation: mu < 1");
  const double mu0 = std::sqrt(1.0 + p.delta1 * p.delta1);
  if (p.mu > mu0)
    throw existence_error("above upper existence edge: mu > mu0");

  const double s = std::sqrt(p.mu * p.mu - 1.0);
  const double beta2 = p.delta1 + branch * s;
  if (!(beta2 > 0.0))
    throw existence_error("beta^2 <= 0 on the requested branch");
  const double beta = std::sqrt(beta2);
  const int n = grid.n_points;

  const double cos2phi = 1.0 / p.mu;
  const double s2 = std::sqrt(std::max(0.0, 1.0 - cos2phi * cos2phi));

  // try both sin(2 phi) signs; keep the smaller stationary residual
  struct Cand {
    double res;
    double phi;
    cvec psi;
  };
  Cand best{0, 0, {}}, other{0, 0, {}};
  for (int which = 0; which < 2; ++which) {
    const double sin2phi = (which == 0 ? +1.0 : -1.0) * s2;
    const double phi = 0.5 * std::atan2(sin2phi, cos2phi);
    cvec psi(n);
    const cplx amp = std::sqrt(2.0) * beta * std::exp(cplx(0.0, phi));
    for (int j = 0; j < n; ++j) psi[j] = amp / std::cosh(beta * grid.x[j]);
    cvec psixx = second_derivative_profile(psi, grid);
    double res = 0.0;
    for (int j = 0; j < n; ++j) {
      const cplx r = p.mu * std::conj(psi[j]) - cplx(1.0, p.delta1) * psi[j] +
                     cplx(0.0, 1.0) * psixx[j] +
                     cplx(0.0, static_cast<double>(p.sigma)) *
                         std::norm(psi[j]) * psi[j];
      res = std::max(res, std::abs(r));
    }
    Cand c{res, phi, std::move(psi)};
    if (which == 0)
      best = std::move(c);
    else if (c.res < best.res) {
      other = std::move(best);
      best = std::move(c);
    } else
      other = std::move(c);
  }

  // gate: spectral truncation of sech(beta x) at the grid Nyquist wavenumber,
  // with headroom; the two candidates must separate unless both are stationary
  // (at mu = 1 the signs coincide)
  const double kmax = M_PI / grid.dx;
  const double scale = std::sqrt(2.0) * beta;
  const double tol =
      std::max(1e-6, 3.0 * (1.0 + kmax * kmax) *
                         std::exp(-M_PI * kmax / (2.0 * beta))) *
      scale;
  if (!(best.res <= tol && (best.res <= 0.1 * other.res || other.res <= tol)))
    throw resolution_error(
        "grid too coarse for soliton: residual " + std::to_string(best.res) +
        " exceeds gate " + std::to_string(tol));

  SolitonProfile out;
  out.beta = beta;
  out.phi = best.phi;
  out.psi_bar = std::move(best.psi);
  out.dpsi_bar = first_derivative_profile(out.psi_bar, grid);
  out.params = p;
  out.grid = grid;
  out.branch = branch;
  out.residual = best.res;
  return out;
}

}  // namespace dopo
