// ============================================================================
// Local oscillator shapes: closed-form builders, the Gauss-Hermite width
// scan, Hopf-threshold mode-derived shapes, and the specification dispatch.
// ============================================================================

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>

#include "dopo/core.hpp"
#include "dopo/linop.hpp"
#include "dopo/lof.hpp"
#include "dopo/soliton.hpp"
#include "dopo/spectra.hpp"

using Catch::Approx;
using dopo::cplx;
using dopo::rvec;

namespace {

dopo::ModelParams params(double mu, double delta1) {
  dopo::ModelParams p;
  p.mu = mu;
  p.delta1 = delta1;
  return p;
}

struct Context {
  dopo::SolitonProfile sol;
  dopo::EigenSystem E;
  dopo::ModalDiffusionMatrix Dm;
};

const Context& context(double mu, double delta1, int n, double length = 40.0) {
  static std::map<std::tuple<double, double, int, double>, Context> cache;
  const auto key = std::make_tuple(mu, delta1, n, length);
  auto it = cache.find(key);
  if (it == cache.end()) {
    const auto g = dopo::make_grid(n, length);
    Context c{dopo::soliton_profile(params(mu, delta1), g), {}, {}};
    const auto ops = dopo::build_operators(c.sol);
    c.E = dopo::eigensystem(ops.first, ops.second);
    c.Dm = dopo::modal_diffusion(c.E, dopo::alpha0(c.sol));
    it = cache.emplace(key, std::move(c)).first;
  }
  return it->second;
}

}  // namespace

// ============================================================================
// closed-form shapes
// ============================================================================

TEST_CASE("plane-wave local oscillator carries a pure phase", "[lof]") {
  const auto g = dopo::make_grid(32, 10.0);
  const auto flat = dopo::lof_plane_wave(0.0, g);
  for (int j = 0; j < 32; ++j) {
    REQUIRE(flat.upper[j] == cplx(1.0, 0.0));
    REQUIRE(flat.lower[j] == cplx(1.0, 0.0));
  }
  const double th = 0.8;
  const auto tilted = dopo::lof_plane_wave(th, g);
  for (int j = 0; j < 32; ++j) {
    REQUIRE(std::abs(tilted.upper[j] - std::exp(cplx(0.0, th))) < 1e-15);
    REQUIRE(std::abs(tilted.lower[j] - std::exp(cplx(0.0, -th))) < 1e-15);
  }
}

TEST_CASE("Gauss-Hermite shape: parity, center, and validation", "[lof]") {
  const auto g = dopo::make_grid(128, 20.0);

  SECTION("odd about its center with the peak at |x - x0| = xi") {
    const double xi = 1.3;
    const auto f = dopo::lof_gauss_hermite(xi, 0.0, 0.2, g);
    for (int j = 1; j < 128; ++j)
      REQUIRE(std::abs(f.upper[j] + f.upper[128 - j]) < 1e-12);
    // amplitude maximum of u exp(-u^2/(2 xi^2)) sits at u = xi
    int jmax = 0;
    double amax = 0.0;
    for (int j = 0; j < 128; ++j)
      if (std::abs(f.upper[j]) > amax) {
        amax = std::abs(f.upper[j]);
        jmax = j;
      }
    REQUIRE(std::abs(std::abs(g.x[jmax]) - xi) <= g.dx);
  }

  SECTION("lower component is the conjugate (physical shape)") {
    const auto f = dopo::lof_gauss_hermite(0.9, 0.7, 1.1, g);
    for (int j = 0; j < 128; ++j)
      REQUIRE(std::abs(f.lower[j] - std::conj(f.upper[j])) < 1e-15);
  }

  SECTION("non-positive width is rejected") {
    REQUIRE_THROWS_AS(dopo::lof_gauss_hermite(0.0, 0.0, 0.0, g),
                      dopo::invalid_argument);
    REQUIRE_THROWS_AS(dopo::lof_gauss_hermite(-1.0, 0.0, 0.0, g),
                      dopo::invalid_argument);
  }
}

TEST_CASE("momentum local oscillator is i psi'", "[lof]") {
  const auto& ctx = context(1.2, 1.2, 128);
  const auto f = dopo::lof_momentum(ctx.sol);
  for (int j = 0; j < 128; ++j) {
    const cplx expect = cplx(0.0, 1.0) * ctx.sol.dpsi_bar[j];
    REQUIRE(std::abs(f.upper[j] - expect) < 1e-15);
    REQUIRE(std::abs(f.lower[j] - std::conj(expect)) < 1e-15);
  }
}

TEST_CASE("frozen amplitude shape matches the threshold left mode", "[lof]") {
  // at mu = 1 the frozen shape IS the closed-form amplitude left mode
  const auto& ctx = context(1.0, 1.2, 256);
  const auto f = dopo::lof_amplitude_frozen(ctx.sol);
  const auto A = dopo::analytic_modes_mu1(params(1.0, 1.2), ctx.sol.grid);
  const auto w3 = A.left_mode(2);
  double dev = 0.0;
  for (int j = 0; j < 256; ++j)
    dev = std::max(dev, std::abs(f.upper[j] - w3.upper[j]));
  REQUIRE(dev < 1e-12);
}

TEST_CASE("soliton local oscillator is the profile itself", "[lof]") {
  const auto& ctx = context(1.2, 1.2, 128);
  const auto f = dopo::lof_soliton(ctx.sol);
  for (int j = 0; j < 128; ++j) {
    REQUIRE(f.upper[j] == ctx.sol.psi_bar[j]);
    REQUIRE(f.lower[j] == std::conj(ctx.sol.psi_bar[j]));
  }
}

// ============================================================================
// Gauss-Hermite width selection
// ============================================================================

TEST_CASE("best Gauss-Hermite width closely approximates the optimum",
          "[lof][width]") {
  // at (mu, delta1) = (1.2, 1.0) the optimal width xi ~ 1.17/beta gives
  // S(0) = -0.950, within 0.06 of the momentum-mode ideal S(0) = -1
  const auto& ctx = context(1.2, 1.0, 256);
  const double xi = dopo::gh_best_width(ctx.sol, ctx.E, ctx.Dm);
  REQUIRE(ctx.sol.beta * xi > 0.95);
  REQUIRE(ctx.sol.beta * xi < 1.40);

  const double s0 = dopo::gh_spectrum_value(xi, ctx.sol, ctx.E, ctx.Dm);
  REQUIRE(s0 == Approx(-0.9499).margin(5e-3));
  REQUIRE(s0 >= -1.0);
}

TEST_CASE("width scan brackets the minimum it reports", "[lof][width]") {
  const auto& ctx = context(1.2, 1.0, 256);
  const auto scan = dopo::gh_width_scan(ctx.sol, ctx.E, ctx.Dm, {0.0}, 21);
  REQUIRE(scan.xi.size() == 21);
  REQUIRE(scan.s.size() == 1);
  REQUIRE(scan.s[0].size() == 21);
  REQUIRE(scan.xi.front() == Approx(0.1 / ctx.sol.beta));
  REQUIRE(scan.xi.back() == Approx(10.0 / ctx.sol.beta));

  // the refined best width beats every scanned width
  const double s_best =
      dopo::gh_spectrum_value(scan.best_xi, ctx.sol, ctx.E, ctx.Dm);
  for (double s : scan.s[0]) REQUIRE(s_best <= s + 1e-12);

  REQUIRE_THROWS_AS(dopo::gh_width_scan(ctx.sol, ctx.E, ctx.Dm, {}, 21),
                    dopo::invalid_argument);
}

TEST_CASE("off-center local oscillators lose squeezing", "[lof][width]") {
  const auto& ctx = context(1.2, 1.2, 256);
  const double xi = dopo::gh_best_width(ctx.sol, ctx.E, ctx.Dm);
  const double s0 = dopo::gh_spectrum_value(xi, ctx.sol, ctx.E, ctx.Dm, 0.0, 0.0);
  const double s1 = dopo::gh_spectrum_value(xi, ctx.sol, ctx.E, ctx.Dm, 0.0, 1.0);
  const double s2 = dopo::gh_spectrum_value(xi, ctx.sol, ctx.E, ctx.Dm, 0.0, 2.0);
  REQUIRE(s0 < s1);
  REQUIRE(s1 < s2);
}

// ============================================================================
// Hopf-threshold shapes
// ============================================================================

TEST_CASE("at the Hopf threshold the damped-pair left modes drive the dip",
          "[lof][hopf]") {
  // evaluated exactly at mu_HB(delta1 = 3); the marginal pair is tagged and
  // the damped partners at -2 +- i omega_HB supply the local oscillators
  const auto& ctx = context(1.6501815796, 3.0, 256, 24.0);
  REQUIRE(ctx.E.find_tag(dopo::ModeTag::hopf_pair) >= 0);

  const rvec om = dopo::omega_axis(10.0, 401);

  SECTION("single left mode: genuinely two-component") {
    const auto f = dopo::lof_hopf_single(ctx.E);
    double scale = 0.0, dev = 0.0;
    for (int j = 0; j < f.size(); ++j) {
      scale = std::max(scale, std::abs(f.upper[j]));
      dev = std::max(dev, std::abs(f.lower[j] - std::conj(f.upper[j])));
    }
    REQUIRE(dev / scale > 0.1);

    const auto S = dopo::squeezing_spectrum_general(ctx.E, ctx.Dm, f, om);
    const auto it = std::min_element(S.values.begin(), S.values.end());
    REQUIRE(*it == Approx(-0.3392).margin(0.02));
    const double om_min = om[it - S.values.begin()];
    REQUIRE(om_min > 5.7);
    REQUIRE(om_min < 6.5);
  }

  SECTION("summed pair: twice the squeezing near omega_HB") {
    const auto f = dopo::lof_hopf_sum(ctx.E);
    const auto S = dopo::squeezing_spectrum_general(ctx.E, ctx.Dm, f, om);
    const auto it = std::min_element(S.values.begin(), S.values.end());
    REQUIRE(*it == Approx(-0.6387).margin(0.02));
    const double om_min = om[it - S.values.begin()];
    REQUIRE(om_min > 5.5);
    REQUIRE(om_min < 6.1);
    for (double v : S.values) REQUIRE(v >= -1.0 - 1e-6);
  }
}

TEST_CASE("away from the Hopf threshold the mode-derived shapes are refused",
          "[lof][hopf][errors]") {
  const auto& ctx = context(1.2, 1.2, 128);
  REQUIRE_THROWS_AS(dopo::lof_hopf_single(ctx.E), dopo::classification_error);
  REQUIRE_THROWS_AS(dopo::lof_hopf_sum(ctx.E), dopo::classification_error);
}

// ============================================================================
// specification dispatch
// ============================================================================

TEST_CASE("LOF specifications render to the direct builders", "[lof][spec]") {
  const auto& ctx = context(1.2, 1.2, 128);

  SECTION("plane wave") {
    dopo::LofSpec s;
    s.kind = dopo::LofKind::plane_wave;
    s.theta = 0.5;
    const auto a = dopo::render_lof(s, ctx.sol);
    const auto b = dopo::lof_plane_wave(0.5, ctx.sol.grid);
    for (int j = 0; j < 128; ++j) REQUIRE(a.upper[j] == b.upper[j]);
  }

  SECTION("momentum is the default kind") {
    dopo::LofSpec s;
    REQUIRE(s.kind == dopo::LofKind::momentum_mode);
    const auto a = dopo::render_lof(s, ctx.sol);
    const auto b = dopo::lof_momentum(ctx.sol);
    for (int j = 0; j < 128; ++j) REQUIRE(a.upper[j] == b.upper[j]);
  }

  SECTION("Gauss-Hermite with explicit width and soliton-phase default") {
    dopo::LofSpec s;
    s.kind = dopo::LofKind::gauss_hermite;
    s.xi = 1.1;
    const auto a = dopo::render_lof(s, ctx.sol);
    const auto b =
        dopo::lof_gauss_hermite(1.1, 0.0, ctx.sol.phi, ctx.sol.grid);
    for (int j = 0; j < 128; ++j) REQUIRE(a.upper[j] == b.upper[j]);
  }

  SECTION("automatic width needs the eigensystem context") {
    dopo::LofSpec s;
    s.kind = dopo::LofKind::gauss_hermite;
    s.xi = 0.0;
    REQUIRE_THROWS_AS(dopo::render_lof(s, ctx.sol), dopo::invalid_argument);
    const auto a = dopo::render_lof(s, ctx.sol, &ctx.E, &ctx.Dm);
    const double xi = dopo::gh_best_width(ctx.sol, ctx.E, ctx.Dm);
    const auto b = dopo::lof_gauss_hermite(xi, 0.0, ctx.sol.phi, ctx.sol.grid);
    double dev = 0.0;
    for (int j = 0; j < 128; ++j)
      dev = std::max(dev, std::abs(a.upper[j] - b.upper[j]));
    REQUIRE(dev < 1e-12);
  }

  SECTION("mode-derived kinds need the eigensystem") {
    dopo::LofSpec s;
    s.kind = dopo::LofKind::hopf_single;
    REQUIRE_THROWS_AS(dopo::render_lof(s, ctx.sol), dopo::invalid_argument);
  }

  SECTION("physicality flag marks the Hopf kinds only") {
    REQUIRE(dopo::lof_is_physical(dopo::LofKind::plane_wave));
    REQUIRE(dopo::lof_is_physical(dopo::LofKind::gauss_hermite));
    REQUIRE(dopo::lof_is_physical(dopo::LofKind::momentum_mode));
    REQUIRE(dopo::lof_is_physical(dopo::LofKind::amplitude_frozen));
    REQUIRE(dopo::lof_is_physical(dopo::LofKind::soliton));
    REQUIRE_FALSE(dopo::lof_is_physical(dopo::LofKind::hopf_single));
    REQUIRE_FALSE(dopo::lof_is_physical(dopo::LofKind::hopf_sum));
  }
}
