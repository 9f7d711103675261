#pragma once
// ============================================================================
// Stochastic verification layer: Euler-Maruyama integration of the linearized
// Langevin dynamics on the grid (and per-mode), with the goldstone component
// projected out each step and booked as soliton position, plus a Bartlett
// cross-spectrum estimator for the non-conjugated periodogram the analytic
// spectra predict.
//
// Determinism: noise is a pure function of (seed, trajectory, step, grid
// point) through a counter-based splitmix generator, so results are
// independent of batching and trajectory order, and equal seeds give
// byte-identical outputs.
//
// Stepper: the state of all trajectories is held transposed ([point][traj],
// split real/imaginary), so every butterfly of the batched radix-2 FFT and
// every pointwise update runs unit-stride across trajectories.  The forward
// transform uses decimation in frequency (natural -> bit-reversed order), the
// spectral multiplier table is stored bit-reversed with the 1/n folded in,
// and the inverse uses decimation in time (bit-reversed -> natural), so no
// reordering pass is ever needed.
// ============================================================================

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dopo/core.hpp"
#include "dopo/linop.hpp"
#include "dopo/soliton.hpp"
#include "dopo/spectra.hpp"

namespace dopo {

// ============================================================================
// counter-based noise
// ============================================================================

namespace rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

/// Per-trajectory stream seed.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t traj) {
  return mix64(seed + kGolden * (traj + 1));
}

/// counter-th uniform of a stream, in (0, 1).
inline double uniform(std::uint64_t stream, std::uint64_t counter) {
  const std::uint64_t x = mix64(stream + kGolden * (counter + 1));
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Branch-free polynomial ln and sin/cos so the Box-Muller fill
// auto-vectorizes (libm calls would serialize the hot loop).  Absolute
// accuracy ~1e-9, far below any statistical resolution of the oracle.

/// ln(u) for u in (0, 1), branch-free (single-compare selects only, so the
/// vectorizer can if-convert).
inline double poly_log(double u) {
  const std::uint64_t b = std::bit_cast<std::uint64_t>(u);
  const double m0 = std::bit_cast<double>((b & 0x000FFFFFFFFFFFFFull) |
                                          0x3FF0000000000000ull);  // [1, 2)
  const double e0 = static_cast<double>(static_cast<std::int32_t>(b >> 52));
  // center the mantissa around 1: m in [sqrt2/2, sqrt2)
  const double m = m0 > 1.4142135623730951 ? 0.5 * m0 : m0;
  const double e = (m0 > 1.4142135623730951 ? e0 + 1.0 : e0) - 1023.0;
  const double s = (m - 1.0) / (m + 1.0);  // |s| <= 0.1716
  const double s2 = s * s;
  const double p =
      2.0 * s *
      (1.0 +
       s2 * (1.0 / 3 +
             s2 * (1.0 / 5 +
                   s2 * (1.0 / 7 +
                         s2 * (1.0 / 9 + s2 * (1.0 / 11 + s2 * (1.0 / 13)))))));
  return e * 0.6931471805599453 + p;
}

/// cos and sin of 2 pi u for u in (0, 1), branch-free.
inline void poly_sincos(double u, double& c, double& s) {
  const double w = 4.0 * u;
  const double q = std::floor(w);       // quadrant 0..3
  const double a = (w - q) * M_PI_2;    // [0, pi/2)
  const double a2 = a * a;
  const double c0 =
      1.0 +
      a2 * (-1.0 / 2 +
            a2 * (1.0 / 24 +
                  a2 * (-1.0 / 720 +
                        a2 * (1.0 / 40320 +
                              a2 * (-1.0 / 3628800 + a2 * (1.0 / 479001600))))));
  const double s0 =
      a * (1.0 +
           a2 * (-1.0 / 6 +
                 a2 * (1.0 / 120 +
                       a2 * (-1.0 / 5040 +
                             a2 * (1.0 / 362880 + a2 * (-1.0 / 39916800))))));
  const double swap = q - 2.0 * std::floor(0.5 * q);        // q mod 2: 0 or 1
  const double sign_s = q >= 2.0 ? -1.0 : 1.0;              // lower half-plane
  const double sign_c = std::abs(q - 1.5) < 1.0 ? -1.0 : 1.0;  // q = 1 or 2
  c = sign_c * (c0 + swap * (s0 - c0));
  s = sign_s * (s0 + swap * (c0 - s0));
}

/// Standard-normal pair (Box-Muller) from counters (base, base+1) of a stream.
inline void normal_pair(std::uint64_t stream, std::uint64_t base, double& n1,
                        double& n2) {
  const double u1 = uniform(stream, base);
  const double u2 = uniform(stream, base + 1);
  const double r = std::sqrt(-2.0 * poly_log(u1));
  double c, s;
  poly_sincos(u2, c, s);
  n1 = r * c;
  n2 = r * s;
}

/// Fill one normal pair per lane: out1[b], out2[b] from counters
/// (c0, c0 + 1) of streams[b].  Two passes over stack-resident chunks: the
/// integer hashing first, then the pure-floating-point Box-Muller transform,
/// which vectorizes cleanly.
inline void fill_pairs(const std::uint64_t* __restrict streams, int lanes,
                       std::uint64_t c0, double* __restrict out1,
                       double* __restrict out2) {
  constexpr int chunk = 256;
  double u1[chunk], u2[chunk];
  for (int off = 0; off < lanes; off += chunk) {
    const int m = std::min(chunk, lanes - off);
    for (int b = 0; b < m; ++b) {
      u1[b] = uniform(streams[off + b], c0);
      u2[b] = uniform(streams[off + b], c0 + 1);
    }
    double* __restrict o1 = out1 + off;
    double* __restrict o2 = out2 + off;
#pragma omp simd
    for (int b = 0; b < m; ++b) {
      const double r = std::sqrt(-2.0 * poly_log(u1[b]));
      double c, s;
      poly_sincos(u2[b], c, s);
      o1[b] = r * c;
      o2[b] = r * s;
    }
  }
}

}  // namespace rng

// ============================================================================
// configuration
// ============================================================================

/// Euler-Maruyama integration configuration.
struct SdeConfig {
  double dt = 1e-3;
  double t_total = 2000.0;
  int n_traj = 100;
  std::uint64_t seed = 1;
  int sample_stride = 10;      ///< record every sample_stride-th step
  std::string scheme = "euler-maruyama";

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt))
      throw invalid_argument("dt must be finite and positive");
    if (!(t_total > 0.0)) throw invalid_argument("t_total must be positive");
    if (n_traj < 1) throw invalid_argument("n_traj must be >= 1");
    if (sample_stride < 1) throw invalid_argument("sample_stride must be >= 1");
    if (scheme != "euler-maruyama")
      throw invalid_argument("unsupported scheme: " + scheme);
  }
};

/// Check the explicit-scheme stability of dt against the eigenvalues:
/// every non-goldstone mode must satisfy |1 + dt lambda| < 1 (the
/// Euler-Maruyama mean-stability disk) and dt |lambda| < 0.1 (accuracy).
/// Violations raise blow_up_error: the step would amplify.
inline void validate_scheme_stability(const SdeConfig& cfg,
                                      const EigenSystem& E) {
  cfg.validate();
  for (int i = 0; i < E.n_modes; ++i) {
    const cplx lam = E.eigenvalues[i];
    if (cfg.dt * std::abs(lam) >= 0.1)
      throw blow_up_error("dt too large: dt*|lambda| = " +
                          std::to_string(cfg.dt * std::abs(lam)) + " >= 0.1");
    if (E.tags[i] == ModeTag::goldstone) continue;  // projected out each step
    const double g = std::abs(1.0 + cfg.dt * lam);
    if (!(g < 1.0))
      throw blow_up_error(
          "Euler-Maruyama unstable: |1 + dt lambda| = " + std::to_string(g) +
          " >= 1 for lambda = (" + std::to_string(lam.real()) + ", " +
          std::to_string(lam.imag()) + ")");
  }
}

/// Transient to discard before sampling: 10 / |Re lambda|_min over the
/// retained modes.
inline double transient_time(const EigenSystem& E, double margin = 1e-6) {
  const auto keep = retained_modes(E, margin);
  if (keep.empty()) throw classification_error("no retained modes");
  double worst = 1e300;
  for (int i : keep) worst = std::min(worst, -E.eigenvalues[i].real());
  return 10.0 / worst;
}

// ============================================================================
// batched transposed-layout FFT kernel
// ============================================================================

namespace detail {

/// Radix-2 FFT over arrays laid out [point][lane] (lane = trajectory),
/// split real/imaginary.  forward(): natural -> bit-reversed order;
/// inverse(): bit-reversed -> natural, unnormalized.
class BatchFft {
 public:
  BatchFft(int n, int lanes) : n_(n), lanes_(lanes) {
    int stages = 0;
    while ((1 << stages) < n) ++stages;
    if ((1 << stages) != n) throw invalid_argument("batch FFT needs power of two");
    tw_re_.resize(stages);
    tw_im_.resize(stages);
    for (int s = 0, len = n; len >= 2; len >>= 1, ++s) {
      const int half = len / 2;
      tw_re_[s].resize(half);
      tw_im_[s].resize(half);
      for (int m = 0; m < half; ++m) {
        tw_re_[s][m] = std::cos(-2.0 * M_PI * m / len);
        tw_im_[s][m] = std::sin(-2.0 * M_PI * m / len);
      }
    }
  }

  void forward(double* __restrict re, double* __restrict im) const {
    const int B = lanes_;
    int s = 0;
    for (int len = n_; len >= 2; len >>= 1, ++s) {
      const int half = len / 2;
      for (int start = 0; start < n_; start += len) {
        for (int m = 0; m < half; ++m) {
          const double wr = tw_re_[s][m], wi = tw_im_[s][m];
          double* __restrict ar = re + static_cast<std::size_t>(start + m) * B;
          double* __restrict ai = im + static_cast<std::size_t>(start + m) * B;
          double* __restrict br =
              re + static_cast<std::size_t>(start + m + half) * B;
          double* __restrict bi =
              im + static_cast<std::size_t>(start + m + half) * B;
          for (int b = 0; b < B; ++b) {
            const double tr = ar[b] - br[b];
            const double ti = ai[b] - bi[b];
            ar[b] += br[b];
            ai[b] += bi[b];
            br[b] = tr * wr - ti * wi;
            bi[b] = tr * wi + ti * wr;
          }
        }
      }
    }
  }

  void inverse(double* __restrict re, double* __restrict im) const {
    const int B = lanes_;
    int s = static_cast<int>(tw_re_.size()) - 1;
    for (int len = 2; len <= n_; len <<= 1, --s) {
      const int half = len / 2;
      for (int start = 0; start < n_; start += len) {
        for (int m = 0; m < half; ++m) {
          // conjugate twiddles of the forward stage with the same len
          const double wr = tw_re_[s][m], wi = -tw_im_[s][m];
          double* __restrict ar = re + static_cast<std::size_t>(start + m) * B;
          double* __restrict ai = im + static_cast<std::size_t>(start + m) * B;
          double* __restrict br =
              re + static_cast<std::size_t>(start + m + half) * B;
          double* __restrict bi =
              im + static_cast<std::size_t>(start + m + half) * B;
          for (int b = 0; b < B; ++b) {
            const double cr = br[b] * wr - bi[b] * wi;
            const double ci = br[b] * wi + bi[b] * wr;
            br[b] = ar[b] - cr;
            bi[b] = ai[b] - ci;
            ar[b] += cr;
            ai[b] += ci;
          }
        }
      }
    }
  }

  int size() const { return n_; }
  int lanes() const { return lanes_; }

 private:
  int n_, lanes_;
  std::vector<rvec> tw_re_, tw_im_;
};

/// Bit-reversal permutation of 0..n-1.
inline std::vector<int> bit_reversal(int n) {
  int bits = 0;
  while ((1 << bits) < n) ++bits;
  std::vector<int> rev(n);
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b)
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    rev[i] = r;
  }
  return rev;
}

}  // namespace detail

// ============================================================================
// grid stepper
// ============================================================================

namespace detail {

/// Batched Euler-Maruyama stepper for the linearized Langevin equation on the
/// grid.  Holds all trajectories transposed; emits homodyne records and the
/// accumulated soliton position at every sample.
class GridStepper {
 public:
  GridStepper(const SolitonProfile& sol, const EigenSystem& E,
              const SdeConfig& cfg, const std::vector<FluctuationField>& lofs)
      : sol_(sol), cfg_(cfg), n_(sol.grid.n_points), B_(cfg.n_traj),
        fft_(n_, cfg.n_traj) {
    validate_scheme_stability(cfg, E);
    const int gi = E.find_tag(ModeTag::goldstone);
    if (gi < 0)
      throw classification_error("grid simulation needs a goldstone mode");
    const Grid1D& g = sol.grid;
    const double dt = cfg.dt;

    // pointwise coefficients
    const Alpha0Field a0 = alpha0(sol);
    a0r_.resize(n_);
    a0i_.resize(n_);
    absf_.resize(n_);
    nfr_.resize(n_);
    nfi_.resize(n_);
    fac_.resize(n_);
    const auto rev = bit_reversal(n_);
    const double namp = std::sqrt(dt / g.dx);
    for (int j = 0; j < n_; ++j) {
      a0r_[j] = a0.values[j].real();
      a0i_[j] = a0.values[j].imag();
      absf_[j] = 2.0 * sol.params.sigma * std::norm(sol.psi_bar[j]);
      const cplx s = namp * std::sqrt(a0.values[j]);  // principal branch
      nfr_[j] = s.real();
      nfi_[j] = s.imag();
      const double k = g.k[rev[j]];
      fac_[j] = -k * k / n_;
    }

    // goldstone pair and LOF shapes
    const FluctuationField v1 = E.right_mode(gi), w1 = E.left_mode(gi);
    v1ur_.resize(n_); v1ui_.resize(n_); v1lr_.resize(n_); v1li_.resize(n_);
    w1ur_.resize(n_); w1ui_.resize(n_); w1lr_.resize(n_); w1li_.resize(n_);
    for (int j = 0; j < n_; ++j) {
      v1ur_[j] = v1.upper[j].real(); v1ui_[j] = v1.upper[j].imag();
      v1lr_[j] = v1.lower[j].real(); v1li_[j] = v1.lower[j].imag();
      w1ur_[j] = w1.upper[j].real(); w1ui_[j] = w1.upper[j].imag();
      w1lr_[j] = w1.lower[j].real(); w1li_[j] = w1.lower[j].imag();
    }
    for (const auto& lof : lofs) {
      if (lof.size() != n_) throw invalid_argument("LOF size mismatch");
      Lof l;
      l.ur.resize(n_); l.ui.resize(n_); l.lr.resize(n_); l.li.resize(n_);
      for (int j = 0; j < n_; ++j) {
        l.ur[j] = lof.upper[j].real(); l.ui[j] = lof.upper[j].imag();
        l.lr[j] = lof.lower[j].real(); l.li[j] = lof.lower[j].imag();
      }
      lofs_.push_back(std::move(l));
    }

    // state and scratch
    const std::size_t sz = static_cast<std::size_t>(n_) * B_;
    ur_.assign(sz, 0.0); ui_.assign(sz, 0.0);
    lr_.assign(sz, 0.0); li_.assign(sz, 0.0);
    d2ur_.assign(sz, 0.0); d2ui_.assign(sz, 0.0);
    d2lr_.assign(sz, 0.0); d2li_.assign(sz, 0.0);
    er_.assign(sz, 0.0); ei_.assign(sz, 0.0);
    x1r_.assign(B_, 0.0); x1i_.assign(B_, 0.0);
    streams_.resize(B_);
    for (int b = 0; b < B_; ++b)
      streams_[b] = rng::stream_seed(cfg.seed, static_cast<std::uint64_t>(b));
    blow_up_scale_ = 1e3 * std::sqrt(2.0) * sol.beta;
  }

  int n_lofs() const { return static_cast<int>(lofs_.size()); }

  /// Advance one Euler-Maruyama step (step index defines the noise counters).
  void step(std::uint64_t s) {
    const int n = n_, B = B_;
    const double dt = cfg_.dt;
    const double d1 = sol_.params.delta1;

    // noise: one Box-Muller pair per grid point and trajectory
    const std::uint64_t base = s * static_cast<std::uint64_t>(2 * n);
    for (int j = 0; j < n; ++j)
      rng::fill_pairs(streams_.data(), B,
                      base + 2 * static_cast<std::uint64_t>(j),
                      er_.data() + static_cast<std::size_t>(j) * B,
                      ei_.data() + static_cast<std::size_t>(j) * B);

    // spectral second derivatives
    std::copy(ur_.begin(), ur_.end(), d2ur_.begin());
    std::copy(ui_.begin(), ui_.end(), d2ui_.begin());
    fft_.forward(d2ur_.data(), d2ui_.data());
    apply_spectral_factor(d2ur_.data(), d2ui_.data());
    fft_.inverse(d2ur_.data(), d2ui_.data());
    std::copy(lr_.begin(), lr_.end(), d2lr_.begin());
    std::copy(li_.begin(), li_.end(), d2li_.begin());
    fft_.forward(d2lr_.data(), d2li_.data());
    apply_spectral_factor(d2lr_.data(), d2li_.data());
    fft_.inverse(d2lr_.data(), d2li_.data());

    // pointwise drift + noise
    for (int j = 0; j < n; ++j) {
      const std::size_t o = static_cast<std::size_t>(j) * B;
      double* __restrict pur = ur_.data() + o;
      double* __restrict pui = ui_.data() + o;
      double* __restrict plr = lr_.data() + o;
      double* __restrict pli = li_.data() + o;
      const double* __restrict du_r = d2ur_.data() + o;
      const double* __restrict du_i = d2ui_.data() + o;
      const double* __restrict dl_r = d2lr_.data() + o;
      const double* __restrict dl_i = d2li_.data() + o;
      const double* __restrict e1 = er_.data() + o;
      const double* __restrict e2 = ei_.data() + o;
      const double f = absf_[j], ar = a0r_[j], ai = a0i_[j];
      const double sr = nfr_[j], si = nfi_[j];
#pragma omp simd
      for (int b = 0; b < B; ++b) {
        const double u_r = pur[b], u_i = pui[b];
        const double l_r = plr[b], l_i = pli[b];
        // L1 u = -(1+i d1) u + i d2u + i f u ; upper row adds a0 l
        const double gur = -u_r + d1 * u_i - du_i[b] - f * u_i + ar * l_r -
                           ai * l_i;
        const double gui = -u_i - d1 * u_r + du_r[b] + f * u_r + ar * l_i +
                           ai * l_r;
        // conj(L1) l = -(1-i d1) l - i d2l - i f l ; lower row adds a0* u
        const double glr = -l_r - d1 * l_i + dl_i[b] + f * l_i + ar * u_r +
                           ai * u_i;
        const double gli = -l_i + d1 * l_r - dl_r[b] - f * l_r + ar * u_i -
                           ai * u_r;
        pur[b] = u_r + dt * gur + sr * e1[b];
        pui[b] = u_i + dt * gui + si * e1[b];
        plr[b] = l_r + dt * glr + sr * e2[b];
        pli[b] = l_i + dt * gli - si * e2[b];
      }
    }

    // project out the goldstone component; book it as position increment
    cgr_.assign(B, 0.0);
    cgi_.assign(B, 0.0);
    for (int j = 0; j < n; ++j) {
      const std::size_t o = static_cast<std::size_t>(j) * B;
      const double* __restrict pur = ur_.data() + o;
      const double* __restrict pui = ui_.data() + o;
      const double* __restrict plr = lr_.data() + o;
      const double* __restrict pli = li_.data() + o;
      const double wur = w1ur_[j], wui = w1ui_[j];
      const double wlr = w1lr_[j], wli = w1li_[j];
      double* __restrict cr = cgr_.data();
      double* __restrict ci = cgi_.data();
#pragma omp simd
      for (int b = 0; b < B; ++b) {
        // conj(w) . a accumulated over both components
        cr[b] += wur * pur[b] + wui * pui[b] + wlr * plr[b] + wli * pli[b];
        ci[b] += wur * pui[b] - wui * pur[b] + wlr * pli[b] - wli * plr[b];
      }
    }
    const double dx = sol_.grid.dx;
    for (int b = 0; b < B; ++b) {
      cgr_[b] *= dx;
      cgi_[b] *= dx;
    }
    for (int j = 0; j < n; ++j) {
      const std::size_t o = static_cast<std::size_t>(j) * B;
      double* __restrict pur = ur_.data() + o;
      double* __restrict pui = ui_.data() + o;
      double* __restrict plr = lr_.data() + o;
      double* __restrict pli = li_.data() + o;
      const double vur = v1ur_[j], vui = v1ui_[j];
      const double vlr = v1lr_[j], vli = v1li_[j];
      const double* __restrict cr = cgr_.data();
      const double* __restrict ci = cgi_.data();
#pragma omp simd
      for (int b = 0; b < B; ++b) {
        pur[b] -= cr[b] * vur - ci[b] * vui;
        pui[b] -= cr[b] * vui + ci[b] * vur;
        plr[b] -= cr[b] * vlr - ci[b] * vli;
        pli[b] -= cr[b] * vli + ci[b] * vlr;
      }
    }
    const double inv_kappa = 1.0 / sol_.params.kappa;
    for (int b = 0; b < B; ++b) {
      x1r_[b] -= cgr_[b] * inv_kappa;
      x1i_[b] -= cgi_[b] * inv_kappa;
    }
  }

  /// Homodyne record of LOF l for every trajectory: dx <lof|a>.
  void records(int l, cplx* out) const {
    const int n = n_, B = B_;
    const Lof& lo = lofs_[l];
    acc_r_.assign(B, 0.0);
    acc_i_.assign(B, 0.0);
    for (int j = 0; j < n; ++j) {
      const std::size_t o = static_cast<std::size_t>(j) * B;
      const double* __restrict pur = ur_.data() + o;
      const double* __restrict pui = ui_.data() + o;
      const double* __restrict plr = lr_.data() + o;
      const double* __restrict pli = li_.data() + o;
      const double wur = lo.ur[j], wui = lo.ui[j];
      const double wlr = lo.lr[j], wli = lo.li[j];
      double* __restrict cr = acc_r_.data();
      double* __restrict ci = acc_i_.data();
#pragma omp simd
      for (int b = 0; b < B; ++b) {
        cr[b] += wur * pur[b] + wui * pui[b] + wlr * plr[b] + wli * pli[b];
        ci[b] += wur * pui[b] - wui * pur[b] + wlr * pli[b] - wli * plr[b];
      }
    }
    const double dx = sol_.grid.dx;
    for (int b = 0; b < B; ++b) out[b] = dx * cplx(acc_r_[b], acc_i_[b]);
  }

  void positions(cplx* out) const {
    for (int b = 0; b < B_; ++b) out[b] = cplx(x1r_[b], x1i_[b]);
  }

  /// Throw blow_up_error if any trajectory left the linear regime.
  void check_blow_up(std::uint64_t s) const {
    double peak = 0.0;
    for (std::size_t i = 0; i < ur_.size(); ++i)
      peak = std::max(peak, std::abs(ur_[i]) + std::abs(ui_[i]));
    if (!(peak < blow_up_scale_))
      throw blow_up_error("trajectory blow-up at step " + std::to_string(s) +
                          ": |a| = " + std::to_string(peak));
  }

 private:
  struct Lof {
    rvec ur, ui, lr, li;
  };

  void apply_spectral_factor(double* __restrict re,
                             double* __restrict im) const {
    const int n = n_, B = B_;
    for (int j = 0; j < n; ++j) {
      const double f = fac_[j];
      double* __restrict r = re + static_cast<std::size_t>(j) * B;
      double* __restrict i = im + static_cast<std::size_t>(j) * B;
#pragma omp simd
      for (int b = 0; b < B; ++b) {
        r[b] *= f;
        i[b] *= f;
      }
    }
  }

  SolitonProfile sol_;
  SdeConfig cfg_;
  int n_, B_;
  BatchFft fft_;
  rvec a0r_, a0i_, absf_, nfr_, nfi_, fac_;
  rvec v1ur_, v1ui_, v1lr_, v1li_, w1ur_, w1ui_, w1lr_, w1li_;
  std::vector<Lof> lofs_;
  rvec ur_, ui_, lr_, li_;
  rvec d2ur_, d2ui_, d2lr_, d2li_, er_, ei_;
  rvec x1r_, x1i_;
  mutable rvec cgr_, cgi_, acc_r_, acc_i_;
  std::vector<std::uint64_t> streams_;
  double blow_up_scale_ = 0.0;
};

}  // namespace detail

// ============================================================================
// modal simulation
// ============================================================================

/// Sampled modal trajectories: c[traj][sample*n_modes + mode].
struct ModalSeries {
  std::vector<cvec> c;
  int n_modes = 0;
  int n_samples = 0;
  double dt_sample = 0.0;
};

/// Integrate the selected modal amplitudes c_i driven by the grid noise
/// projected onto the left modes (exact noise correlations by construction).
/// The noise counters match simulate_grid, so with equal seed and step count
/// the modal trajectory equals the projection of the grid trajectory.
inline ModalSeries simulate_modal(const EigenSystem& E, const Alpha0Field& a0,
                                  const std::vector<int>& modes,
                                  const SdeConfig& cfg) {
  cfg.validate();
  if (modes.empty()) throw invalid_argument("no modes selected");
  const int n = E.dim / 2;
  const int m = static_cast<int>(modes.size());
  for (int i : modes) {
    if (i < 0 || i >= E.n_modes) throw invalid_argument("mode index out of range");
    const cplx lam = E.eigenvalues[i];
    if (cfg.dt * std::abs(lam) >= 0.1)
      throw blow_up_error("dt too large for mode " + std::to_string(i));
    if (E.tags[i] != ModeTag::goldstone && !(std::abs(1.0 + cfg.dt * lam) < 1.0))
      throw blow_up_error("Euler-Maruyama unstable for mode " +
                          std::to_string(i));
  }

  // noise projection rows: xi_i = sqrt(dt/dx) dx [conj(w_u) sqrt(a0) eta
  //                                              + conj(w_l) sqrt(a0*) eta+]
  const double namp = std::sqrt(cfg.dt / E.grid.dx) * E.grid.dx;
  std::vector<cvec> row_u(m, cvec(n)), row_l(m, cvec(n));
  for (int q = 0; q < m; ++q) {
    const cplx* w = &E.left[static_cast<std::size_t>(modes[q]) * E.dim];
    for (int j = 0; j < n; ++j) {
      const cplx sq = std::sqrt(a0.values[j]);
      row_u[q][j] = namp * std::conj(w[j]) * sq;
      row_l[q][j] = namp * std::conj(w[n + j]) * std::conj(sq);
    }
  }

  const auto steps = static_cast<std::uint64_t>(cfg.t_total / cfg.dt);
  const int n_samples = static_cast<int>(steps / cfg.sample_stride);
  ModalSeries out;
  out.n_modes = m;
  out.n_samples = n_samples;
  out.dt_sample = cfg.dt * cfg.sample_stride;
  out.c.assign(cfg.n_traj, cvec());

  rvec eta(n), etap(n);
  for (int t = 0; t < cfg.n_traj; ++t) {
    const std::uint64_t stream =
        rng::stream_seed(cfg.seed, static_cast<std::uint64_t>(t));
    cvec c(m, 0.0);
    cvec& hist = out.c[t];
    hist.reserve(static_cast<std::size_t>(n_samples) * m);
    for (std::uint64_t s = 0; s < steps; ++s) {
      const std::uint64_t base = s * static_cast<std::uint64_t>(2 * n);
      for (int j = 0; j < n; ++j)
        rng::normal_pair(stream, base + 2 * static_cast<std::uint64_t>(j),
                         eta[j], etap[j]);
      for (int q = 0; q < m; ++q) {
        cplx xi = 0.0;
        for (int j = 0; j < n; ++j)
          xi += row_u[q][j] * eta[j] + row_l[q][j] * etap[j];
        c[q] += cfg.dt * E.eigenvalues[modes[q]] * c[q] + xi;
      }
      if ((s + 1) % static_cast<std::uint64_t>(cfg.sample_stride) == 0 &&
          hist.size() < static_cast<std::size_t>(n_samples) * m)
        hist.insert(hist.end(), c.begin(), c.end());
    }
  }
  return out;
}

// ============================================================================
// grid simulation (raw series)
// ============================================================================

/// Raw sampled output of the grid simulation.
struct GridSeries {
  std::vector<std::vector<cvec>> records; ///< [lof][traj][sample]
  std::vector<cvec> x1;                   ///< [traj][sample]
  double dt_sample = 0.0;
  double transient = 0.0;
};

/// Integrate the full linearized Langevin dynamics on the grid and return
/// sampled homodyne records and soliton positions.  The goldstone component
/// is projected out every step and booked into x1; sampling starts after the
/// transient 10/|Re lambda|_min.  Memory-guarded: use run_grid_oracle for
/// production-size runs.
inline GridSeries simulate_grid(const SolitonProfile& sol,
                                const EigenSystem& E, const SdeConfig& cfg,
                                const std::vector<FluctuationField>& lofs) {
  cfg.validate();
  const auto trans_steps =
      static_cast<std::uint64_t>(transient_time(E) / cfg.dt);
  const auto steps = static_cast<std::uint64_t>(cfg.t_total / cfg.dt);
  const auto n_samples =
      static_cast<std::uint64_t>(steps / cfg.sample_stride);
  const double entries =
      static_cast<double>(n_samples) * cfg.n_traj * (lofs.size() + 1);
  if (entries > 2e7)
    throw invalid_argument(
        "raw series too large; use run_grid_oracle for production runs");

  detail::GridStepper stepper(sol, E, cfg, lofs);
  GridSeries out;
  out.dt_sample = cfg.dt * cfg.sample_stride;
  out.transient = trans_steps * cfg.dt;
  out.records.assign(lofs.size(), std::vector<cvec>(cfg.n_traj));
  out.x1.assign(cfg.n_traj, cvec());

  cvec buf(cfg.n_traj);
  std::uint64_t taken = 0;
  for (std::uint64_t s = 0; s < trans_steps + steps; ++s) {
    stepper.step(s);
    if (s >= trans_steps &&
        (s - trans_steps) % static_cast<std::uint64_t>(cfg.sample_stride) == 0 &&
        taken < n_samples) {
      for (std::size_t l = 0; l < lofs.size(); ++l) {
        stepper.records(static_cast<int>(l), buf.data());
        for (int b = 0; b < cfg.n_traj; ++b) out.records[l][b].push_back(buf[b]);
      }
      stepper.positions(buf.data());
      for (int b = 0; b < cfg.n_traj; ++b) out.x1[b].push_back(buf[b]);
      if (taken % 64 == 0) stepper.check_blow_up(s);
      ++taken;
    }
  }
  return out;
}

// ============================================================================
// Bartlett non-conjugated cross-spectrum estimator
// ============================================================================

/// Per-bin accumulator of segment periodograms P(Omega) = F(Omega) F(-Omega)
/// / T_seg (non-conjugated product, matching the analytic spectra).
class BartlettAccumulator {
 public:
  BartlettAccumulator(int seg_len, double dt_sample, double omega_max)
      : seg_len_(seg_len), dts_(dt_sample) {
    if (seg_len < 2) throw invalid_argument("segment length must be >= 2");
    const double dom = 2.0 * M_PI / (seg_len * dt_sample);
    for (int k = 0; k < seg_len / 2; ++k) {
      if (k * dom > omega_max) break;
      bins_.push_back(k);
      omega_.push_back(k * dom);
    }
    sum_.assign(bins_.size(), 0.0);
    sum_sq_.assign(bins_.size(), 0.0);
  }

  /// Feed one complete segment of samples.
  void feed(const cplx* seg) {
    cvec f(seg, seg + seg_len_);
    cvec F = fft(f);
    const double T = seg_len_ * dts_;
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      const int k = bins_[i];
      const int km = (seg_len_ - k) % seg_len_;
      const double p = (dts_ * F[k] * dts_ * F[km] / T).real();
      sum_[i] += p;
      sum_sq_[i] += p * p;
    }
    ++count_;
  }

  int n_segments() const { return count_; }

  /// Mean and standard error per bin; needs >= min_segments segments.
  SpectrumResult result(int min_segments = 8) const {
    if (count_ < min_segments)
      throw insufficient_data_error(
          "only " + std::to_string(count_) + " segments; need >= " +
          std::to_string(min_segments));
    SpectrumResult r;
    r.omega = omega_;
    r.values.resize(bins_.size());
    r.std_error.resize(bins_.size());
    for (std::size_t i = 0; i < bins_.size(); ++i) {
      const double mean = sum_[i] / count_;
      const double var =
          std::max(0.0, (sum_sq_[i] - count_ * mean * mean) / (count_ - 1));
      r.values[i] = mean;
      r.std_error[i] = std::sqrt(var / count_);
    }
    return r;
  }

 private:
  int seg_len_;
  double dts_;
  std::vector<int> bins_;
  rvec omega_;
  rvec sum_, sum_sq_;
  int count_ = 0;
};

/// Bartlett estimate of the non-conjugated spectrum of per-trajectory record
/// series (raw periodogram units; scale by 2/N_lof for squeezing spectra).
inline SpectrumResult estimate_spectrum(const std::vector<cvec>& records,
                                        double dt_sample, int seg_len,
                                        double omega_max = 10.0,
                                        int min_segments = 8) {
  BartlettAccumulator acc(seg_len, dt_sample, omega_max);
  for (const auto& h : records) {
    const int nseg = static_cast<int>(h.size()) / seg_len;
    for (int s = 0; s < nseg; ++s)
      acc.feed(h.data() + static_cast<std::size_t>(s) * seg_len);
  }
  return acc.result(min_segments);
}

// ============================================================================
// streaming oracle run (spectra + drift from one pass)
// ============================================================================

/// Least-squares line fit y = slope t + intercept.
struct DriftFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline DriftFit linear_fit(const rvec& t, const rvec& y) {
  const std::size_t n = t.size();
  if (n < 2 || y.size() != n) throw invalid_argument("fit needs >= 2 points");
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double den = n * stt - st * st;
  DriftFit f;
  f.slope = (n * sty - st * sy) / den;
  f.intercept = (sy - f.slope * st) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (std::size_t i = 0; i < n; ++i) {
    const double fit = f.slope * t[i] + f.intercept;
    ss_res += (y[i] - fit) * (y[i] - fit);
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = (ss_tot > 0) ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

/// Streaming oracle result: squeezing-spectrum estimates per LOF (already in
/// 2/N units), position-variance series, and its linear drift fit.
struct OracleRun {
  std::vector<SpectrumResult> spectra; ///< per LOF
  rvec var_time;
  rvec var_x1;
  DriftFit drift;
  double transient = 0.0;
  int n_segments = 0;
};

/// One-pass production run: Bartlett spectra for every LOF and the position
/// diffusion fit, without storing raw series.
inline OracleRun run_grid_oracle(const SolitonProfile& sol,
                                 const EigenSystem& E, const SdeConfig& cfg,
                                 const std::vector<FluctuationField>& lofs,
                                 int seg_len = 8192, double omega_max = 10.0,
                                 int min_segments = 8) {
  cfg.validate();
  if (lofs.empty()) throw invalid_argument("no local oscillators given");
  detail::GridStepper stepper(sol, E, cfg, lofs);
  const auto trans_steps =
      static_cast<std::uint64_t>(transient_time(E) / cfg.dt);
  const auto steps = static_cast<std::uint64_t>(cfg.t_total / cfg.dt);
  const auto n_samples = static_cast<std::uint64_t>(steps / cfg.sample_stride);
  const double dts = cfg.dt * cfg.sample_stride;

  const int L = static_cast<int>(lofs.size());
  std::vector<BartlettAccumulator> acc(
      static_cast<std::size_t>(L), BartlettAccumulator(seg_len, dts, omega_max));
  // per-LOF, per-trajectory segment buffers
  std::vector<std::vector<cvec>> seg(
      L, std::vector<cvec>(cfg.n_traj, cvec(seg_len)));
  rvec norms(L, 0.0);
  for (int l = 0; l < L; ++l) {
    double nrm = 0.0;
    for (int j = 0; j < sol.grid.n_points; ++j) nrm += std::norm(lofs[l].upper[j]);
    norms[l] = nrm * sol.grid.dx;
  }

  OracleRun out;
  out.transient = trans_steps * cfg.dt;
  out.var_time.resize(n_samples);
  out.var_x1.assign(n_samples, 0.0);

  cvec buf(cfg.n_traj);
  std::uint64_t taken = 0;
  int fill = 0;
  for (std::uint64_t s = 0; s < trans_steps + steps; ++s) {
    stepper.step(s);
    if (s < trans_steps ||
        (s - trans_steps) % static_cast<std::uint64_t>(cfg.sample_stride) != 0 ||
        taken >= n_samples)
      continue;
    for (int l = 0; l < L; ++l) {
      stepper.records(l, buf.data());
      for (int b = 0; b < cfg.n_traj; ++b) seg[l][b][fill] = buf[b];
    }
    stepper.positions(buf.data());
    double vsum = 0.0;
    for (int b = 0; b < cfg.n_traj; ++b) vsum += (buf[b] * buf[b]).real();
    out.var_time[taken] = taken * dts;
    out.var_x1[taken] = vsum / cfg.n_traj;
    if (taken % 256 == 0) stepper.check_blow_up(s);
    ++taken;
    if (++fill == seg_len) {
      for (int l = 0; l < L; ++l)
        for (int b = 0; b < cfg.n_traj; ++b) acc[l].feed(seg[l][b].data());
      fill = 0;
    }
  }

  for (int l = 0; l < L; ++l) {
    SpectrumResult r = acc[l].result(min_segments);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      r.values[i] *= 2.0 / norms[l];
      r.std_error[i] *= 2.0 / norms[l];
    }
    out.spectra.push_back(std::move(r));
    out.n_segments = acc[l].n_segments();
  }
  out.drift = linear_fit(out.var_time, out.var_x1);
  return out;
}

}  // namespace dopo
