// ============================================================================
// Bright-soliton construction: width/phase arithmetic, stationarity residual,
// profile symmetry, parameter-plane classification, and existence gates.
// ============================================================================

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "dopo/core.hpp"
#include "dopo/soliton.hpp"

using Catch::Approx;
using dopo::cplx;
using dopo::cvec;

namespace {

dopo::ModelParams params(double mu, double delta1) {
  dopo::ModelParams p;
  p.mu = mu;
  p.delta1 = delta1;
  return p;
}

}  // namespace

// ============================================================================
// width and phase arithmetic
// ============================================================================

TEST_CASE("soliton width follows beta^2 = delta1 + branch sqrt(mu^2-1)",
          "[soliton]") {
  const auto g = dopo::make_grid(256, 40.0);

  SECTION("at threshold the width is set by the detuning alone") {
    const auto sol = dopo::soliton_profile(params(1.0, 1.2), g);
    REQUIRE(sol.beta == Approx(std::sqrt(1.2)).epsilon(1e-14));
    // cos(2 phi) = 1/mu = 1 locks the phase to zero
    REQUIRE(sol.phi == Approx(0.0).margin(1e-14));
  }

  SECTION("generic interior point, plus branch") {
    const auto sol = dopo::soliton_profile(params(1.2, 1.2), g);
    REQUIRE(sol.beta * sol.beta ==
            Approx(1.2 + std::sqrt(1.2 * 1.2 - 1.0)).epsilon(1e-14));
    REQUIRE(std::cos(2.0 * sol.phi) == Approx(1.0 / 1.2).epsilon(1e-12));
  }

  SECTION("generic interior point, minus branch") {
    const auto sol = dopo::soliton_profile(params(1.2, 1.2), g, -1);
    REQUIRE(sol.branch == -1);
    REQUIRE(sol.beta * sol.beta ==
            Approx(1.2 - std::sqrt(1.2 * 1.2 - 1.0)).epsilon(1e-14));
  }

  SECTION("at the upper edge mu0 both branches give beta^2 = 2 delta1") {
    const double d1 = 1.2;
    const double mu0 = std::sqrt(1.0 + d1 * d1);
    const auto sol = dopo::soliton_profile(params(mu0, d1), g);
    REQUIRE(sol.beta * sol.beta == Approx(2.0 * d1).epsilon(1e-12));
  }
}

TEST_CASE("profile peak amplitude and evenness", "[soliton]") {
  const auto g = dopo::make_grid(256, 40.0);
  const auto sol = dopo::soliton_profile(params(1.2, 1.2), g);
  const int n = g.n_points;

  SECTION("peak value sqrt(2) beta e^{i phi} at x = 0") {
    // x = 0 sits at index n/2 on this grid
    const cplx peak = sol.psi_bar[n / 2];
    const cplx expect =
        std::sqrt(2.0) * sol.beta * std::exp(cplx(0.0, sol.phi));
    REQUIRE(std::abs(peak - expect) < 1e-13);
  }

  SECTION("even under the grid reflection j -> (n-j) mod n") {
    for (int j = 1; j < n; ++j)
      REQUIRE(std::abs(sol.psi_bar[j] - sol.psi_bar[n - j]) < 1e-13);
  }

  SECTION("derivative is odd and matches the closed form") {
    // psi' = -sqrt(2) beta^2 e^{i phi} sech(beta x) tanh(beta x)
    double dev = 0.0;
    for (int j = 0; j < n; ++j) {
      const double bx = sol.beta * g.x[j];
      const cplx exact = -std::sqrt(2.0) * sol.beta * sol.beta *
                         std::exp(cplx(0.0, sol.phi)) * std::tanh(bx) /
                         std::cosh(bx);
      dev = std::max(dev, std::abs(sol.dpsi_bar[j] - exact));
    }
    REQUIRE(dev < 1e-8);
  }
}

TEST_CASE("stored residual certifies stationarity", "[soliton]") {
  const auto g = dopo::make_grid(256, 40.0);
  const auto sol = dopo::soliton_profile(params(1.3, 1.5), g);

  // independently recompute mu psi* - (1 + i d1) psi + i psi'' + i |psi|^2 psi
  const cvec psixx = dopo::second_derivative_profile(sol.psi_bar, g);
  double res = 0.0;
  for (int j = 0; j < g.n_points; ++j) {
    const cplx psi = sol.psi_bar[j];
    const cplx r = 1.3 * std::conj(psi) - cplx(1.0, 1.5) * psi +
                   cplx(0.0, 1.0) * psixx[j] +
                   cplx(0.0, 1.0) * std::norm(psi) * psi;
    res = std::max(res, std::abs(r));
  }
  REQUIRE(res == Approx(sol.residual).margin(1e-12));
  REQUIRE(sol.residual < 1e-10);
}

TEST_CASE("phase sign is picked by the stationarity residual, not convention",
          "[soliton]") {
  const auto g = dopo::make_grid(256, 40.0);
  const auto plus = dopo::soliton_profile(params(1.2, 1.2), g, +1);
  const auto minus = dopo::soliton_profile(params(1.2, 1.2), g, -1);
  // the two branches lock to opposite sin(2 phi) signs
  const double s_plus = std::sin(2.0 * plus.phi);
  const double s_minus = std::sin(2.0 * minus.phi);
  REQUIRE(std::abs(s_plus) == Approx(std::abs(s_minus)).epsilon(1e-10));
  REQUIRE(s_plus * s_minus < 0.0);
  REQUIRE(plus.residual < 1e-10);
  REQUIRE(minus.residual < 1e-10);
}

// ============================================================================
// classification
// ============================================================================

TEST_CASE("parameter-plane classification covers every region",
          "[soliton][region]") {
  SECTION("existence-only classification") {
    REQUIRE(dopo::classify_region(params(0.9, 1.2)).classification ==
            dopo::RegionKind::no_soliton);
    REQUIRE(dopo::classify_region(params(1.2, -0.5)).classification ==
            dopo::RegionKind::no_soliton);
    REQUIRE(dopo::classify_region(params(1.2, 1.2)).classification ==
            dopo::RegionKind::bright_soliton_stable);
    REQUIRE(dopo::classify_region(params(1.6, 1.2)).classification ==
            dopo::RegionKind::above_mu0);
    REQUIRE(dopo::classify_region(params(1.2, 1.2)).mu0 ==
            Approx(std::sqrt(2.44)));
  }

  SECTION("defocusing sign never hosts the bright soliton") {
    dopo::ModelParams p = params(1.2, 1.2);
    p.sigma = -1;
    REQUIRE(dopo::classify_region(p).classification ==
            dopo::RegionKind::no_soliton);
  }

  SECTION("with a known Hopf threshold the unstable strip appears") {
    // at delta1 = 3 the threshold sits near mu = 1.65 and mu0 = sqrt(10)
    const double mu_hb = 1.65;
    REQUIRE(dopo::classify_region(params(1.4, 3.0), mu_hb).classification ==
            dopo::RegionKind::bright_soliton_stable);
    REQUIRE(dopo::classify_region(params(2.0, 3.0), mu_hb).classification ==
            dopo::RegionKind::bright_soliton_hopf_unstable);
    REQUIRE(dopo::classify_region(params(3.2, 3.0), mu_hb).classification ==
            dopo::RegionKind::above_mu0);
    REQUIRE(dopo::classify_region(params(0.95, 3.0), mu_hb).classification ==
            dopo::RegionKind::no_soliton);
  }

  SECTION("region names are kebab-case") {
    REQUIRE(std::string(dopo::to_string(dopo::RegionKind::no_soliton)) ==
            "no-soliton");
    REQUIRE(std::string(dopo::to_string(
                dopo::RegionKind::bright_soliton_stable)) ==
            "bright-soliton-stable");
    REQUIRE(std::string(dopo::to_string(
                dopo::RegionKind::bright_soliton_hopf_unstable)) ==
            "bright-soliton-hopf-unstable");
    REQUIRE(std::string(dopo::to_string(dopo::RegionKind::above_mu0)) ==
            "above-mu0");
  }
}

// ============================================================================
// existence gates
// ============================================================================

TEST_CASE("profile construction rejects out-of-region parameters",
          "[soliton][errors]") {
  const auto g = dopo::make_grid(256, 40.0);

  SECTION("below threshold") {
    REQUIRE_THROWS_AS(dopo::soliton_profile(params(0.5, 1.2), g),
                      dopo::existence_error);
    REQUIRE_THROWS_WITH(
        dopo::soliton_profile(params(0.5, 1.2), g),
        Catch::Matchers::ContainsSubstring("tangent bifurcation"));
  }

  SECTION("negative detuning") {
    REQUIRE_THROWS_AS(dopo::soliton_profile(params(1.2, -1.0), g),
                      dopo::existence_error);
  }

  SECTION("above the upper edge") {
    REQUIRE_THROWS_AS(dopo::soliton_profile(params(1.6, 1.2), g),
                      dopo::existence_error);
  }

  SECTION("defocusing sign") {
    dopo::ModelParams p = params(1.2, 1.2);
    p.sigma = -1;
    REQUIRE_THROWS_AS(dopo::soliton_profile(p, g), dopo::existence_error);
  }

  SECTION("invalid branch value") {
    REQUIRE_THROWS_AS(dopo::soliton_profile(params(1.2, 1.2), g, 0),
                      dopo::invalid_argument);
  }
}

TEST_CASE("a domain too small for the soliton tails is reported",
          "[soliton][errors]") {
  // L = 3 wraps the sech tails onto themselves: the periodic images overlap
  // and no phase candidate reaches the truncation-scaled residual gate
  const auto g = dopo::make_grid(256, 3.0);
  REQUIRE_THROWS_AS(dopo::soliton_profile(params(1.2, 1.2), g),
                    dopo::resolution_error);
}
