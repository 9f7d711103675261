#pragma once
// ============================================================================
// Command implementations behind the CLI front end.  Each command takes a
// validated RunConfig, writes CSV artifacts with the effective configuration
// echoed into the header, and returns a process exit code:
//   0 success, 2 parameter/existence error, 3 numerical failure.
// The argv-level wrapper lives in the tool's main; these functions are plain
// so tests can drive them directly.
// ============================================================================

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "dopo/config.hpp"
#include "dopo/csv.hpp"
#include "dopo/core.hpp"
#include "dopo/lof.hpp"
#include "dopo/linop.hpp"
#include "dopo/oracle.hpp"
#include "dopo/soliton.hpp"
#include "dopo/spectra.hpp"

namespace dopo {

// ============================================================================
// helpers
// ============================================================================

/// Parse the lof.kind configuration value.
inline LofKind parse_lof_kind(const std::string& s) {
  if (s == "plane-wave") return LofKind::plane_wave;
  if (s == "gh1") return LofKind::gauss_hermite;
  if (s == "momentum") return LofKind::momentum_mode;
  if (s == "w3") return LofKind::amplitude_frozen;
  if (s == "hopf-single") return LofKind::hopf_single;
  if (s == "hopf-sum") return LofKind::hopf_sum;
  if (s == "soliton") return LofKind::soliton;
  throw invalid_argument(
      "lof.kind must be one of plane-wave, gh1, momentum, w3, hopf-single, "
      "hopf-sum, soliton; got '" + s + "'");
}

namespace detail {

/// Analytic spectrum for any LOF kind on a given frequency axis.
inline SpectrumResult spectrum_for(LofKind kind, const FluctuationField& lof,
                                   const SolitonProfile& sol,
                                   const EigenSystem& E,
                                   const ModalDiffusionMatrix& Dm,
                                   const rvec& om, const DetectorWindow* win) {
  if (kind == LofKind::soliton) return intensity_spectrum(E, Dm, sol, om, win);
  if (!lof_is_physical(kind)) {
    if (win)
      throw invalid_argument(
          "detector window requires a physical local oscillator");
    return squeezing_spectrum_general(E, Dm, lof, om);
  }
  return win ? squeezing_spectrum_detector(E, Dm, lof, *win, om)
             : squeezing_spectrum(E, Dm, lof, om);
}

/// ||L v - lambda v||_2 / ||v||_2 for mode idx of the eigensystem.
inline double mode_residual(const LinearOperatorMatrix& L,
                            const EigenSystem& E, int idx) {
  const int dim = E.dim;
  cvec y(dim);
  const cplx one = 1.0, zero = 0.0;
  const int inc = 1;
  zgemv_("N", &dim, &dim, &one, L.matrix.data(), &dim,
         &E.right[static_cast<std::size_t>(idx) * dim], &inc, &zero, y.data(),
         &inc);
  double num = 0.0, den = 0.0;
  const cplx lam = E.eigenvalues[idx];
  for (int j = 0; j < dim; ++j) {
    num += std::norm(y[j] - lam * E.right[static_cast<std::size_t>(idx) * dim + j]);
    den += std::norm(E.right[static_cast<std::size_t>(idx) * dim + j]);
  }
  return std::sqrt(num / den);
}

inline std::string out_path(const RunConfig& cfg, const std::string& name) {
  const std::string dir = cfg.get("output.dir");
  std::filesystem::create_directories(dir);
  return dir + "/" + name;
}

}  // namespace detail

// ============================================================================
// eigs: soliton profile, eigenvalue table, tagged modes, optional dumps
// ============================================================================

inline int cmd_eigs(const RunConfig& cfg) {
  const ModelParams p = cfg.model();
  const Grid1D g = cfg.grid();
  const SolitonProfile sol = soliton_profile(p, g, cfg.branch());
  const auto [L, Ld] = build_operators(sol);
  const EigenSystem E = eigensystem(L, Ld);

  {
    CsvWriter w(detail::out_path(cfg, "profile.csv"));
    w.meta(cfg.values());
    w.meta("beta = " + format_full(sol.beta));
    w.meta("phi = " + format_full(sol.phi));
    w.columns({"x", "re_psi", "im_psi"});
    for (int j = 0; j < g.n_points; ++j)
      w.row({g.x[j], sol.psi_bar[j].real(), sol.psi_bar[j].imag()});
  }
  {
    CsvWriter w(detail::out_path(cfg, "eigenvalues.csv"));
    w.meta(cfg.values());
    w.columns({"index", "re_lambda", "im_lambda", "tag"});
    for (int i = 0; i < E.n_modes; ++i)
      w.row_raw({std::to_string(i), format_full(E.eigenvalues[i].real()),
                 format_full(E.eigenvalues[i].imag()), to_string(E.tags[i])});
  }

  const int gi = E.find_tag(ModeTag::goldstone);
  const int mi = E.find_tag(ModeTag::momentum);
  std::printf("goldstone residual = %.3e\n",
              gi >= 0 ? detail::mode_residual(L, E, gi) : -1.0);
  std::printf("momentum residual = %.3e\n",
              mi >= 0 ? detail::mode_residual(L, E, mi) : -1.0);

  // optional eigenvector dumps: indices or tag names
  for (const std::string& tok : cfg.get_list("eigs.modes")) {
    int idx = -1;
    if (!tok.empty() && (std::isdigit(static_cast<unsigned char>(tok[0])))) {
      idx = static_cast<int>(std::stol(tok));
      if (idx < 0 || idx >= E.n_modes)
        throw invalid_argument("eigs.modes index out of range: " + tok);
    } else {
      if (tok == "goldstone") idx = gi;
      else if (tok == "momentum") idx = mi;
      else if (tok == "bifurcating") idx = E.find_tag(ModeTag::bifurcating);
      else if (tok == "hopf") idx = E.find_tag(ModeTag::hopf_pair);
      else throw invalid_argument("eigs.modes: unknown mode token: " + tok);
      if (idx < 0)
        throw invalid_argument("eigs.modes: no mode tagged '" + tok + "'");
    }
    const FluctuationField v = E.right_mode(idx), w = E.left_mode(idx);
    const std::vector<std::pair<std::string, const FluctuationField*>> dumps =
        {{"right", &v}, {"left", &w}};
    for (const auto& [suffix, f] : dumps) {
      CsvWriter mw(detail::out_path(
          cfg, "mode_" + std::to_string(idx) + "_" + suffix + ".csv"));
      mw.meta(cfg.values());
      mw.meta("lambda = " + format_full(E.eigenvalues[idx].real()) + " " +
              format_full(E.eigenvalues[idx].imag()));
      mw.meta("tag = " + std::string(to_string(E.tags[idx])));
      mw.columns({"x", "re_upper", "im_upper", "re_lower", "im_lower"});
      for (int j = 0; j < g.n_points; ++j)
        mw.row({g.x[j], f->upper[j].real(), f->upper[j].imag(),
                f->lower[j].real(), f->lower[j].imag()});
    }
  }
  return 0;
}

// ============================================================================
// squeeze: spectra and parameter sweeps
// ============================================================================

namespace detail {

/// Everything a spectrum evaluation needs, rebuilt when model keys change.
struct SqueezeContext {
  SolitonProfile sol;
  EigenSystem E;
  ModalDiffusionMatrix Dm;

  SqueezeContext(const ModelParams& p, const Grid1D& g, int branch)
      : sol(soliton_profile(p, g, branch)),
        E(build_and_diagonalize(sol)),
        Dm(modal_diffusion(E, alpha0(sol))) {}

 private:
  static EigenSystem build_and_diagonalize(const SolitonProfile& s) {
    const auto [L, Ld] = build_operators(s);
    return eigensystem(L, Ld);
  }
};

}  // namespace detail

inline int cmd_squeeze(const RunConfig& cfg) {
  const ModelParams p = cfg.model();
  const Grid1D g = cfg.grid();
  const LofKind kind = parse_lof_kind(cfg.get("lof.kind"));
  const double om_eval = cfg.get_double("omega.eval");
  const bool optimize = cfg.get_bool("lof.optimize");
  const std::string sweep_key = cfg.get("sweep.key");

  LofSpec spec;
  spec.kind = kind;
  spec.theta = cfg.get_double("lof.theta");
  spec.xi = cfg.get_double("lof.xi");
  spec.x_shift = cfg.get_double("lof.x0");
  spec.phi = cfg.get_double("lof.phi");
  if (optimize && kind != LofKind::plane_wave)
    throw invalid_argument("lof.optimize applies to lof.kind=plane-wave only");

  auto window_of = [&](const SolitonProfile& sol, double sigma,
                       double x0) -> std::unique_ptr<DetectorWindow> {
    if (!(sigma > 0.0)) return nullptr;
    return std::make_unique<DetectorWindow>(
        make_detector_window(sigma, x0, sol));
  };

  if (sweep_key.empty()) {
    detail::SqueezeContext ctx(p, g, cfg.branch());
    auto win = window_of(ctx.sol, cfg.get_double("detector.sigma"),
                         cfg.get_double("detector.x0"));
    if (optimize)
      spec.theta =
          optimize_lof_phase(ctx.E, ctx.Dm, om_eval, win.get()).theta;
    if (kind == LofKind::gauss_hermite && !(spec.xi > 0.0))
      spec.xi = gh_best_width(ctx.sol, ctx.E, ctx.Dm, om_eval);
    const FluctuationField lof = render_lof(spec, ctx.sol, &ctx.E, &ctx.Dm);
    const rvec om = omega_axis(cfg.get_double("omega.max"),
                               static_cast<int>(cfg.get_int("omega.points")));
    const SpectrumResult S =
        detail::spectrum_for(kind, lof, ctx.sol, ctx.E, ctx.Dm, om, win.get());

    CsvWriter w(detail::out_path(cfg, "squeeze.csv"));
    auto kv = cfg.values();
    kv["lof.theta"] = format_full(spec.theta);
    kv["lof.xi"] = format_full(spec.xi);
    w.meta(kv);
    w.columns({"omega", "s"});
    for (std::size_t i = 0; i < om.size(); ++i) w.row({om[i], S.values[i]});

    if (cfg.get_bool("lof.dump")) {
      CsvWriter lw(detail::out_path(cfg, "lof.csv"));
      lw.meta(kv);
      lw.columns({"x", "re", "im"});
      for (int j = 0; j < g.n_points; ++j)
        lw.row({g.x[j], lof.upper[j].real(), lof.upper[j].imag()});
    }
    return 0;
  }

  // ---- parameter sweep: S(omega.eval) per point, fixed ordering ----
  static const std::set<std::string> sweepable = {
      "detector.x0", "detector.sigma", "lof.theta",
      "lof.xi",      "lof.x0",         "mu",
      "delta1"};
  if (!sweepable.count(sweep_key))
    throw invalid_argument("sweep.key not sweepable: " + sweep_key);
  const int n_pts = static_cast<int>(cfg.get_int("sweep.points"));
  if (n_pts < 1) throw invalid_argument("sweep.points must be >= 1");
  const double lo = cfg.get_double("sweep.from");
  const double hi = cfg.get_double("sweep.to");

  const bool model_sweep = (sweep_key == "mu" || sweep_key == "delta1");
  std::unique_ptr<detail::SqueezeContext> base;
  if (!model_sweep) {
    base = std::make_unique<detail::SqueezeContext>(p, g, cfg.branch());
    if (kind == LofKind::gauss_hermite && !(spec.xi > 0.0) &&
        sweep_key != "lof.xi")
      spec.xi = gh_best_width(base->sol, base->E, base->Dm, om_eval);
  }

  CsvWriter w(detail::out_path(cfg, "sweep.csv"));
  w.meta(cfg.values());
  w.columns({"value", "s", "theta"});
  const rvec om{om_eval};
  for (int i = 0; i < n_pts; ++i) {
    const double v =
        n_pts == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n_pts - 1);
    ModelParams pi = p;
    LofSpec si = spec;
    double det_sigma = cfg.get_double("detector.sigma");
    double det_x0 = cfg.get_double("detector.x0");
    if (sweep_key == "mu") pi.mu = v;
    else if (sweep_key == "delta1") pi.delta1 = v;
    else if (sweep_key == "detector.x0") det_x0 = v;
    else if (sweep_key == "detector.sigma") det_sigma = v;
    else if (sweep_key == "lof.theta") si.theta = v;
    else if (sweep_key == "lof.xi") si.xi = v;
    else if (sweep_key == "lof.x0") si.x_shift = v;

    std::unique_ptr<detail::SqueezeContext> local;
    const detail::SqueezeContext* ctx = base.get();
    if (model_sweep) {
      pi.validate();
      local = std::make_unique<detail::SqueezeContext>(pi, g, cfg.branch());
      ctx = local.get();
    }
    auto win = window_of(ctx->sol, det_sigma, det_x0);
    double s_val, theta_val = si.theta;
    if (optimize) {
      const PhaseOptimum po =
          optimize_lof_phase(ctx->E, ctx->Dm, om_eval, win.get());
      s_val = po.s_value;
      theta_val = po.theta;
    } else {
      const FluctuationField lof = render_lof(si, ctx->sol, &ctx->E, &ctx->Dm);
      s_val = detail::spectrum_for(kind, lof, ctx->sol, ctx->E, ctx->Dm, om,
                                   win.get())
                  .values[0];
    }
    w.row({v, s_val, theta_val});
  }
  return 0;
}

// ============================================================================
// oracle: stochastic cross-check with per-bin z-scores
// ============================================================================

inline int cmd_oracle(const RunConfig& cfg) {
  // production oracle runs happen on a coarse grid; honor an explicit choice
  const int n =
      cfg.is_set("grid.n") ? static_cast<int>(cfg.get_int("grid.n")) : 64;
  const Grid1D g = make_grid(n, cfg.get_double("grid.length"));
  const ModelParams p = cfg.model();
  const SolitonProfile sol = soliton_profile(p, g, cfg.branch());
  const auto [L, Ld] = build_operators(sol);
  const EigenSystem E = eigensystem(L, Ld);
  const Alpha0Field a0 = alpha0(sol);
  const ModalDiffusionMatrix Dm = modal_diffusion(E, a0);

  if (cfg.get_double("detector.sigma") > 0.0)
    throw invalid_argument("detector window is not supported in oracle runs");

  const LofKind kind = parse_lof_kind(cfg.get("lof.kind"));
  LofSpec spec;
  spec.kind = kind;
  spec.theta = cfg.get_double("lof.theta");
  spec.xi = cfg.get_double("lof.xi");
  spec.x_shift = cfg.get_double("lof.x0");
  spec.phi = cfg.get_double("lof.phi");
  if (cfg.get_bool("lof.optimize")) {
    if (kind != LofKind::plane_wave)
      throw invalid_argument("lof.optimize applies to lof.kind=plane-wave only");
    spec.theta =
        optimize_lof_phase(E, Dm, cfg.get_double("omega.eval"), nullptr).theta;
  }
  if (kind == LofKind::gauss_hermite && !(spec.xi > 0.0))
    spec.xi = gh_best_width(sol, E, Dm, cfg.get_double("omega.eval"));
  const FluctuationField lof = render_lof(spec, sol, &E, &Dm);

  SdeConfig scfg;
  scfg.dt = cfg.get_double("oracle.dt");
  scfg.t_total = cfg.get_double("oracle.t_total");
  scfg.n_traj = static_cast<int>(cfg.get_int("oracle.n_traj"));
  scfg.seed = cfg.get_seed("seed");
  scfg.sample_stride = static_cast<int>(cfg.get_int("oracle.stride"));

  const OracleRun run = run_grid_oracle(
      sol, E, scfg, {lof}, static_cast<int>(cfg.get_int("oracle.seg_len")),
      cfg.get_double("omega.max"));
  const SpectrumResult& est = run.spectra[0];
  const SpectrumResult ana =
      detail::spectrum_for(kind, lof, sol, E, Dm, est.omega, nullptr);

  auto kv = cfg.values();
  kv["grid.n"] = std::to_string(n);
  kv["lof.theta"] = format_full(spec.theta);
  kv["lof.xi"] = format_full(spec.xi);

  double max_z = 0.0;
  {
    CsvWriter w(detail::out_path(cfg, "oracle_compare.csv"));
    w.meta(kv);
    w.meta("n_segments = " + std::to_string(run.n_segments));
    w.columns({"omega", "s_analytic", "s_estimate", "std_error", "z"});
    for (std::size_t i = 0; i < est.omega.size(); ++i) {
      const double z =
          (est.values[i] - ana.values[i]) / std::max(est.std_error[i], 1e-300);
      max_z = std::max(max_z, std::abs(z));
      w.row({est.omega[i], ana.values[i], est.values[i], est.std_error[i], z});
    }
  }
  const double d_analytic = drift_diffusion(E, a0, p.kappa);
  {
    CsvWriter w(detail::out_path(cfg, "drift.csv"));
    w.meta(kv);
    w.meta("slope = " + format_full(run.drift.slope));
    w.meta("intercept = " + format_full(run.drift.intercept));
    w.meta("r_squared = " + format_full(run.drift.r_squared));
    w.meta("d_analytic = " + format_full(d_analytic));
    w.columns({"t", "var_x1"});
    for (std::size_t i = 0; i < run.var_time.size(); ++i)
      w.row({run.var_time[i], run.var_x1[i]});
  }
  std::printf("n_segments = %d\n", run.n_segments);
  std::printf("max |z| = %.3f\n", max_z);
  std::printf("drift slope = %.5f (analytic %.5f, ratio %.3f)\n",
              run.drift.slope, d_analytic, run.drift.slope / d_analytic);
  if (max_z >= 4.0) {
    std::fprintf(stderr,
                 "error: stochastic estimate deviates from the analytic "
                 "spectrum (max |z| = %.3f >= 4)\n",
                 max_z);
    return 3;
  }
  return 0;
}

// ============================================================================
// dispatch by name (argv-level wrapper adds option parsing on top)
// ============================================================================

inline int run_command(const std::string& name, const RunConfig& cfg) {
  try {
    if (name == "eigs") return cmd_eigs(cfg);
    if (name == "squeeze") return cmd_squeeze(cfg);
    if (name == "oracle") return cmd_oracle(cfg);
    throw invalid_argument("unknown command: " + name);
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace dopo
