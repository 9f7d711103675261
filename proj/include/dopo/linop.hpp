#pragma once
// ============================================================================
// Linearization of the parametrically driven NLS model about the bright
// soliton: operator assembly, biorthogonal eigensystem, mode tagging, the
// closed-form mode set at threshold, and the Hopf-instability threshold.
//
// The fluctuation drift operator and its adjoint act on stacked (a, a+)
// fields:
//     L    = [[L1 , A0 ], [A0*, L1*]]        L1 = -(1+i d1) + i dxx + 2 i s |psi|^2
//     Ldag = [[L1*, A0 ], [A0*, L1 ]]        A0 = diag(mu + i s psi^2)
// Right modes satisfy L v_i = lambda_i v_i, left modes Ldag w_i =
// conj(lambda_i) w_i, biorthonormalized to <w_i|v_j> = delta_ij.
//
// Eigensolver policy (all of it matters for reproducibility):
//   * the reflection x -> -x commutes with L exactly on the periodic grid
//     (index map j -> (n-j) mod n), so the problem splits into even/odd
//     parity sectors; solving the sectors separately lifts the +-k continuum
//     degeneracy and yields definite-parity eigenvectors;
//   * left modes are matched to right modes greedily by eigenvalue
//     (|lambda_left - conj(lambda_right)| minimal), then jointly
//     biorthonormalized inside clusters of near-degenerate eigenvalues;
//   * the swap-conjugation symmetry (swap upper/lower stacks, conjugate)
//     commutes with L; simple real modes are symmetrized under it and complex
//     conjugate pairs are rebuilt from one partner, which removes the
//     arbitrary phase of the dense eigensolver;
//   * the translation (goldstone) mode is rescaled to <w1|Gx> = 1 with
//     Gx = (d/dx psi, d/dx psi*), so the soliton position carries length
//     units and diffusion constants are normalization-free.
// ============================================================================

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "dopo/core.hpp"
#include "dopo/soliton.hpp"

namespace dopo {

// ============================================================================
// types
// ============================================================================

/// Parametric coupling field alpha0(x) = mu + i sigma psi(x)^2.
struct Alpha0Field {
  cvec values;
};

/// alpha0 evaluated on the profile's grid.
inline Alpha0Field alpha0(const SolitonProfile& sol) {
  Alpha0Field a;
  a.values.resize(sol.psi_bar.size());
  for (std::size_t j = 0; j < sol.psi_bar.size(); ++j)
    a.values[j] = sol.params.mu + cplx(0.0, static_cast<double>(sol.params.sigma)) *
                                      sol.psi_bar[j] * sol.psi_bar[j];
  return a;
}

enum class OperatorKind { direct, adjoint };

/// Dense 2n x 2n discretization (column-major) of the drift operator or its
/// adjoint, carrying the profile it was built from.
struct LinearOperatorMatrix {
  std::vector<cplx> matrix; ///< column-major, element (p,q) at p + q*dim
  int dim = 0;              ///< 2 * n_points
  OperatorKind kind = OperatorKind::direct;
  SolitonProfile profile;   ///< construction context
};

enum class ModeTag { goldstone, momentum, bifurcating, hopf_pair, generic };

inline const char* to_string(ModeTag t) {
  switch (t) {
    case ModeTag::goldstone: return "goldstone";
    case ModeTag::momentum: return "momentum";
    case ModeTag::bifurcating: return "bifurcating";
    case ModeTag::hopf_pair: return "hopf-pair";
    case ModeTag::generic: return "generic";
  }
  return "?";
}

/// Biorthogonal eigensystem of (L, Ldag).  Modes are sorted by descending
/// real part of the eigenvalue (stable order).
struct EigenSystem {
  std::vector<cplx> eigenvalues;
  std::vector<cplx> right; ///< column-major dim x n_modes
  std::vector<cplx> left;  ///< column-major dim x n_modes
  std::vector<ModeTag> tags;
  int dim = 0;
  int n_modes = 0;
  Grid1D grid;
  cvec psi_bar;
  cplx goldstone_scale = 0.0; ///< <w1|Gx> before renormalization (0 if absent)

  FluctuationField right_mode(int i) const { return unpack(right, i); }
  FluctuationField left_mode(int i) const { return unpack(left, i); }

  /// Index of the first mode carrying the tag, -1 if absent.
  int find_tag(ModeTag t) const {
    for (int i = 0; i < n_modes; ++i)
      if (tags[i] == t) return i;
    return -1;
  }

 private:
  FluctuationField unpack(const std::vector<cplx>& m, int i) const {
    if (i < 0 || i >= n_modes) throw invalid_argument("mode index out of range");
    const int n = dim / 2;
    FluctuationField f(n);
    for (int j = 0; j < n; ++j) {
      f.upper[j] = m[j + static_cast<std::size_t>(i) * dim];
      f.lower[j] = m[n + j + static_cast<std::size_t>(i) * dim];
    }
    return f;
  }
};

// ============================================================================
// operator assembly
// ============================================================================

namespace detail {

/// Circulant kernel of the spectral second derivative:
/// D2[p][q] = c[(p-q) mod n] with c[d] = -(1/n) sum_m k_m^2 cos(2 pi m d / n).
inline rvec d2_kernel(const Grid1D& g) {
  const int n = g.n_points;
  rvec c(n, 0.0);
  for (int d = 0; d < n; ++d) {
    double acc = 0.0;
    for (int m = 0; m < n; ++m)
      acc += g.k[m] * g.k[m] * std::cos(2.0 * M_PI * m * d / n);
    c[d] = -acc / n;
  }
  return c;
}

}  // namespace detail

/// Assemble the dense direct and adjoint operators for the given profile.
/// Throws resolution_error if the soliton core is sampled by fewer than
/// 8 points (core width taken as 10 / beta).
inline std::pair<LinearOperatorMatrix, LinearOperatorMatrix> build_operators(
    const SolitonProfile& sol) {
  const Grid1D& g = sol.grid;
  const int n = g.n_points;
  if (10.0 / (sol.beta * g.dx) < 8.0)
    throw resolution_error("fewer than 8 grid points across the soliton core");

  const rvec c = detail::d2_kernel(g);
  const Alpha0Field a0 = alpha0(sol);
  const cplx c1(-1.0, -sol.params.delta1);

  const int dim = 2 * n;
  LinearOperatorMatrix L, Ld;
  L.matrix.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  Ld.matrix.assign(static_cast<std::size_t>(dim) * dim, 0.0);
  L.dim = Ld.dim = dim;
  L.kind = OperatorKind::direct;
  Ld.kind = OperatorKind::adjoint;
  L.profile = Ld.profile = sol;

  auto at = [dim](std::vector<cplx>& m, int p, int q) -> cplx& {
    return m[p + static_cast<std::size_t>(q) * dim];
  };

  for (int q = 0; q < n; ++q) {
    for (int p = 0; p < n; ++p) {
      // L1[p][q] = c1 delta_pq + i D2[p][q] + 2 i s |psi_p|^2 delta_pq
      cplx l1 = cplx(0.0, 1.0) * c[(p - q + n) % n];
      if (p == q)
        l1 += c1 + cplx(0.0, 2.0 * sol.params.sigma) * std::norm(sol.psi_bar[p]);
      at(L.matrix, p, q) = l1;              // upper-left: L1
      at(L.matrix, n + p, n + q) = std::conj(l1);  // lower-right: L1*
      at(Ld.matrix, p, q) = std::conj(l1);  // adjoint swaps the diagonal blocks
      at(Ld.matrix, n + p, n + q) = l1;
    }
    at(L.matrix, q, n + q) = a0.values[q];             // upper-right: A0
    at(L.matrix, n + q, q) = std::conj(a0.values[q]);  // lower-left: A0*
    at(Ld.matrix, q, n + q) = a0.values[q];
    at(Ld.matrix, n + q, q) = std::conj(a0.values[q]);
  }
  return {std::move(L), std::move(Ld)};
}

// ============================================================================
// dense eigensolver plumbing
// ============================================================================

namespace detail {

/// Eigenvalues (and optionally right eigenvectors) of a dense complex matrix.
/// A is column-major M x M and is destroyed.
inline void dense_eig(std::vector<cplx>& A, int M, std::vector<cplx>& lam,
                      std::vector<cplx>* V) {
  lam.resize(M);
  if (V) V->assign(static_cast<std::size_t>(M) * M, 0.0);
  lapack_int info = LAPACKE_zgeev(
      LAPACK_COL_MAJOR, 'N', V ? 'V' : 'N', M,
      reinterpret_cast<lapack_complex_double*>(A.data()), M,
      reinterpret_cast<lapack_complex_double*>(lam.data()), nullptr, 1,
      V ? reinterpret_cast<lapack_complex_double*>(V->data()) : nullptr,
      V ? M : 1);
  if (info != 0)
    throw numerical_error("dense eigensolver failed (zgeev info=" +
                          std::to_string(info) + ")");
}

/// Invert a small dense complex matrix in place (column-major g x g).
inline void small_inverse(std::vector<cplx>& G, int g) {
  std::vector<lapack_int> piv(g);
  lapack_int info = LAPACKE_zgetrf(
      LAPACK_COL_MAJOR, g, g,
      reinterpret_cast<lapack_complex_double*>(G.data()), g, piv.data());
  if (info == 0)
    info = LAPACKE_zgetri(LAPACK_COL_MAJOR, g,
                          reinterpret_cast<lapack_complex_double*>(G.data()), g,
                          piv.data());
  if (info != 0)
    throw numerical_error("cluster Gram matrix is singular");
}

/// One parity-sector basis column of a single grid component: up to two
/// nonzero entries (index, weight).
struct BasisCol {
  int i1, i2;
  double w1, w2;
  int cnt;
};

/// Real orthonormal basis columns of the even or odd reflection sector.
/// The reflection is j -> (n - j) mod n; j = 0 and j = n/2 are fixed points.
inline std::vector<BasisCol> parity_columns(int n, bool even) {
  std::vector<BasisCol> cols;
  const double r = 1.0 / std::sqrt(2.0);
  if (even) {
    cols.push_back({0, 0, 1.0, 0.0, 1});
    cols.push_back({n / 2, 0, 1.0, 0.0, 1});
    for (int j = 1; j < n / 2; ++j) cols.push_back({j, n - j, r, r, 2});
  } else {
    for (int j = 1; j < n / 2; ++j) cols.push_back({j, n - j, r, -r, 2});
  }
  return cols;
}

/// Project a dense 2n x 2n operator onto one stacked parity sector.
/// Stacked basis column c < m acts on the upper component, c >= m on the
/// lower; the sector matrix is B^T A B (B real).
inline std::vector<cplx> sector_project(const std::vector<cplx>& A, int dim,
                                        const std::vector<BasisCol>& cols) {
  const int n = dim / 2;
  const int m = static_cast<int>(cols.size());
  const int M = 2 * m;
  std::vector<cplx> S(static_cast<std::size_t>(M) * M);
  auto full_index = [n, m, &cols](int c, int e) {
    const BasisCol& b = cols[c % m];
    const int off = (c < m) ? 0 : n;
    return off + (e == 0 ? b.i1 : b.i2);
  };
  auto weight = [m, &cols](int c, int e) {
    const BasisCol& b = cols[c % m];
    return e == 0 ? b.w1 : b.w2;
  };
  for (int q = 0; q < M; ++q) {
    const int qc = cols[q % m].cnt;
    for (int p = 0; p < M; ++p) {
      const int pc = cols[p % m].cnt;
      cplx acc = 0.0;
      for (int eq = 0; eq < qc; ++eq) {
        const int fq = full_index(q, eq);
        const double wq = weight(q, eq);
        const cplx* colA = &A[static_cast<std::size_t>(fq) * dim];
        for (int ep = 0; ep < pc; ++ep)
          acc += weight(p, ep) * wq * colA[full_index(p, ep)];
      }
      S[p + static_cast<std::size_t>(q) * M] = acc;
    }
  }
  return S;
}

/// Expand sector-space eigenvector columns back to the full space.
inline std::vector<cplx> sector_expand(const std::vector<cplx>& C, int M,
                                       int dim,
                                       const std::vector<BasisCol>& cols) {
  const int n = dim / 2;
  const int m = static_cast<int>(cols.size());
  std::vector<cplx> V(static_cast<std::size_t>(dim) * M, 0.0);
  for (int j = 0; j < M; ++j) {
    const cplx* cj = &C[static_cast<std::size_t>(j) * M];
    cplx* vj = &V[static_cast<std::size_t>(j) * dim];
    for (int c = 0; c < M; ++c) {
      const BasisCol& b = cols[c % m];
      const int off = (c < m) ? 0 : n;
      vj[off + b.i1] += b.w1 * cj[c];
      if (b.cnt == 2) vj[off + b.i2] += b.w2 * cj[c];
    }
  }
  return V;
}

/// Eigendecomposition of one sector: right and matched, jointly
/// biorthonormalized left eigenvectors in sector coordinates.
struct SectorEig {
  std::vector<cplx> lam;
  std::vector<cplx> C;  ///< right, column-major M x M
  std::vector<cplx> Cw; ///< left, column-major M x M, <w_i|v_j> = delta_ij
  int M = 0;
};

inline SectorEig sector_eig(std::vector<cplx> Ls, std::vector<cplx> Lds, int M,
                            double dx, double cluster_tol) {
  SectorEig out;
  out.M = M;
  std::vector<cplx> lam, C, lamd, Cd;
  dense_eig(Ls, M, lam, &C);
  dense_eig(Lds, M, lamd, &Cd);

  // sort right modes by descending real part (stable)
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&lam](int a, int b) {
    return lam[a].real() > lam[b].real();
  });
  out.lam.resize(M);
  out.C.resize(static_cast<std::size_t>(M) * M);
  for (int i = 0; i < M; ++i) {
    out.lam[i] = lam[order[i]];
    std::copy_n(&C[static_cast<std::size_t>(order[i]) * M], M,
                &out.C[static_cast<std::size_t>(i) * M]);
  }

  // greedy left-right pairing: adjoint eigenvalue nearest conj(lambda_i)
  std::vector<char> used(M, 0);
  out.Cw.assign(static_cast<std::size_t>(M) * M, 0.0);
  for (int i = 0; i < M; ++i) {
    const cplx target = std::conj(out.lam[i]);
    int best = -1;
    double bd = 0.0;
    for (int j = 0; j < M; ++j) {
      if (used[j]) continue;
      const double d = std::abs(lamd[j] - target);
      if (best < 0 || d < bd) {
        best = j;
        bd = d;
      }
    }
    used[best] = 1;
    std::copy_n(&Cd[static_cast<std::size_t>(best) * M], M,
                &out.Cw[static_cast<std::size_t>(i) * M]);
  }

  // union-find clusters of near-degenerate eigenvalues
  std::vector<int> parent(M);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&parent, &find](int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  for (int a = 0; a < M; ++a)
    for (int b = a + 1; b < M; ++b)
      if (std::abs(out.lam[a] - out.lam[b]) < cluster_tol) {
        const int ra = find(a), rb = find(b);
        if (ra != rb) parent[rb] = ra;
      }
  std::vector<std::vector<int>> groups(M);
  for (int i = 0; i < M; ++i) groups[find(i)].push_back(i);

  // joint biorthonormalization inside each cluster:
  // G = dx W^dag V, W <- W conj(inv(G))^T
  for (const auto& grp : groups) {
    if (grp.empty()) continue;
    const int g = static_cast<int>(grp.size());
    std::vector<cplx> G(static_cast<std::size_t>(g) * g);
    for (int b = 0; b < g; ++b)
      for (int a = 0; a < g; ++a) {
        const cplx* w = &out.Cw[static_cast<std::size_t>(grp[a]) * M];
        const cplx* v = &out.C[static_cast<std::size_t>(grp[b]) * M];
        cplx acc = 0.0;
        for (int p = 0; p < M; ++p) acc += std::conj(w[p]) * v[p];
        G[a + static_cast<std::size_t>(b) * g] = dx * acc;
      }
    small_inverse(G, g);
    std::vector<cplx> fresh(static_cast<std::size_t>(M) * g, 0.0);
    for (int a = 0; a < g; ++a) {
      cplx* dst = &fresh[static_cast<std::size_t>(a) * M];
      for (int b = 0; b < g; ++b) {
        const cplx coef =
            std::conj(G[a + static_cast<std::size_t>(b) * g]);
        const cplx* src = &out.Cw[static_cast<std::size_t>(grp[b]) * M];
        for (int p = 0; p < M; ++p) dst[p] += coef * src[p];
      }
    }
    for (int a = 0; a < g; ++a)
      std::copy_n(&fresh[static_cast<std::size_t>(a) * M], M,
                  &out.Cw[static_cast<std::size_t>(grp[a]) * M]);
  }
  return out;
}

/// Swap-conjugation canonicalization of full-space eigenvectors of one
/// sector, in place.  J exchanges the upper and lower stacks; J conj(.)
/// commutes with L.  Simple real modes are made J-conj-invariant (killing
/// the arbitrary eigensolver phase); conjugate pairs are rebuilt from the
/// positive-imaginary partner with the residual phase fixed by the peak
/// entry of the left vector.
inline void canonicalize(std::vector<cplx>& lam, std::vector<cplx>& V,
                         std::vector<cplx>& W, double dx, int n,
                         double tol_im = 1e-8, double tol_pair = 1e-6) {
  const int M = static_cast<int>(lam.size());
  const int dim = 2 * n;
  auto Jconj = [n, dim](const cplx* z, cvec& out) {
    out.resize(dim);
    for (int j = 0; j < n; ++j) {
      out[j] = std::conj(z[n + j]);
      out[n + j] = std::conj(z[j]);
    }
  };
  auto norm2 = [dim](const cplx* z) {
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += std::norm(z[j]);
    return std::sqrt(acc);
  };
  cvec tmp, u, uw;

  for (int i = 0; i < M; ++i) {
    if (std::abs(lam[i].imag()) > tol_im) continue;
    int close = 0;
    for (int j = 0; j < M; ++j)
      if (std::abs(lam[j] - lam[i]) < tol_pair) ++close;
    if (close != 1) continue;  // degenerate real cluster: keep joint set
    cplx* v = &V[static_cast<std::size_t>(i) * dim];
    cplx* w = &W[static_cast<std::size_t>(i) * dim];
    // u = v + conj(J v); fall back to the i*v combination if it cancels
    Jconj(v, tmp);
    u.resize(dim);
    for (int j = 0; j < dim; ++j) u[j] = v[j] + tmp[j];
    double un = 0.0, vn = norm2(v);
    for (const auto& z : u) un += std::norm(z);
    if (std::sqrt(un) < 0.5 * vn) {
      cvec iv(dim);
      for (int j = 0; j < dim; ++j) iv[j] = cplx(0.0, 1.0) * v[j];
      Jconj(iv.data(), tmp);
      for (int j = 0; j < dim; ++j) u[j] = iv[j] + tmp[j];
    }
    Jconj(w, tmp);
    uw.resize(dim);
    for (int j = 0; j < dim; ++j) uw[j] = w[j] + tmp[j];
    double uwn = 0.0;
    const double wn = norm2(w);
    for (const auto& z : uw) uwn += std::norm(z);
    if (std::sqrt(uwn) < 0.5 * wn) {
      cvec iw(dim);
      for (int j = 0; j < dim; ++j) iw[j] = cplx(0.0, 1.0) * w[j];
      Jconj(iw.data(), tmp);
      for (int j = 0; j < dim; ++j) uw[j] = iw[j] + tmp[j];
    }
    cplx s = 0.0;
    for (int j = 0; j < dim; ++j) s += std::conj(uw[j]) * u[j];
    s *= dx;  // real by construction
    if (std::abs(s) > 1e-10) {
      for (int j = 0; j < dim; ++j) {
        v[j] = u[j];
        w[j] = uw[j] / s.real();
      }
    }
  }

  // conjugate pairs: rebuild the negative-imaginary partner
  std::vector<char> used(M, 0);
  for (int i = 0; i < M; ++i) {
    if (used[i] || lam[i].imag() <= tol_im) continue;
    int best = -1;
    double bd = 0.0;
    for (int j = 0; j < M; ++j) {
      if (used[j] || j == i || lam[j].imag() >= -tol_im) continue;
      const double d = std::abs(lam[j] - std::conj(lam[i]));
      if (best < 0 || d < bd) {
        best = j;
        bd = d;
      }
    }
    if (best < 0 || bd > tol_pair) continue;
    used[i] = used[best] = 1;
    cplx* vi = &V[static_cast<std::size_t>(i) * dim];
    cplx* wi = &W[static_cast<std::size_t>(i) * dim];
    int p = 0;
    double pm = 0.0;
    for (int j = 0; j < n; ++j)
      if (std::abs(wi[j]) > pm) {
        pm = std::abs(wi[j]);
        p = j;
      }
    const cplx ph = std::exp(cplx(0.0, -std::arg(wi[p])));
    for (int j = 0; j < dim; ++j) {
      vi[j] *= ph;
      wi[j] *= ph;
    }
    cplx* vj = &V[static_cast<std::size_t>(best) * dim];
    cplx* wj = &W[static_cast<std::size_t>(best) * dim];
    Jconj(vi, tmp);
    std::copy(tmp.begin(), tmp.end(), vj);
    Jconj(wi, tmp);
    std::copy(tmp.begin(), tmp.end(), wj);
  }
}

}  // namespace detail

// ============================================================================
// eigensystem
// ============================================================================

/// Full biorthogonal eigensystem of the operator pair.  See the header
/// banner for the sector / pairing / canonicalization policy.
inline EigenSystem eigensystem(const LinearOperatorMatrix& L,
                               const LinearOperatorMatrix& Ldag,
                               double cluster_tol = 1e-6) {
  if (L.kind != OperatorKind::direct || Ldag.kind != OperatorKind::adjoint)
    throw invalid_argument("eigensystem expects (direct, adjoint) operators");
  if (L.dim != Ldag.dim || L.dim <= 0)
    throw invalid_argument("operator dimensions disagree");
  const int dim = L.dim;
  const int n = dim / 2;
  const Grid1D& grid = L.profile.grid;
  if (grid.n_points != n)
    throw invalid_argument("operator carries no valid grid context");

  EigenSystem E;
  E.dim = dim;
  E.n_modes = 0;
  E.grid = grid;
  E.psi_bar = L.profile.psi_bar;
  E.eigenvalues.reserve(dim);
  E.right.reserve(static_cast<std::size_t>(dim) * dim);
  E.left.reserve(static_cast<std::size_t>(dim) * dim);

  std::vector<cplx> lam_all;
  std::vector<cplx> V_all, W_all;
  for (int sector = 0; sector < 2; ++sector) {
    const auto cols = detail::parity_columns(n, sector == 0);
    const int M = 2 * static_cast<int>(cols.size());
    auto Ls = detail::sector_project(L.matrix, dim, cols);
    auto Lds = detail::sector_project(Ldag.matrix, dim, cols);
    auto se = detail::sector_eig(std::move(Ls), std::move(Lds), M, grid.dx,
                                 cluster_tol);
    auto Vf = detail::sector_expand(se.C, M, dim, cols);
    auto Wf = detail::sector_expand(se.Cw, M, dim, cols);
    detail::canonicalize(se.lam, Vf, Wf, grid.dx, n);
    lam_all.insert(lam_all.end(), se.lam.begin(), se.lam.end());
    V_all.insert(V_all.end(), Vf.begin(), Vf.end());
    W_all.insert(W_all.end(), Wf.begin(), Wf.end());
  }

  const int M = static_cast<int>(lam_all.size());
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&lam_all](int a, int b) {
    return lam_all[a].real() > lam_all[b].real();
  });
  E.n_modes = M;
  E.eigenvalues.resize(M);
  E.right.resize(static_cast<std::size_t>(dim) * M);
  E.left.resize(static_cast<std::size_t>(dim) * M);
  for (int i = 0; i < M; ++i) {
    E.eigenvalues[i] = lam_all[order[i]];
    std::copy_n(&V_all[static_cast<std::size_t>(order[i]) * dim], dim,
                &E.right[static_cast<std::size_t>(i) * dim]);
    std::copy_n(&W_all[static_cast<std::size_t>(order[i]) * dim], dim,
                &E.left[static_cast<std::size_t>(i) * dim]);
  }

  // ---- tagging --------------------------------------------------------
  // goldstone: right mode shaped like Gx = (psi', psi'*) near lambda = 0
  // momentum:  left mode shaped like (i psi', conj(i psi')) near lambda = -2
  // windows are generous (coarse grids shift the pair), threshold 0.9
  E.tags.assign(M, ModeTag::generic);
  const cvec dpsi = first_derivative_profile(E.psi_bar, grid);
  cvec gold(dim), mom(dim);
  for (int j = 0; j < n; ++j) {
    gold[j] = dpsi[j];
    gold[n + j] = std::conj(dpsi[j]);
    mom[j] = cplx(0.0, 1.0) * dpsi[j];
    mom[n + j] = std::conj(cplx(0.0, 1.0) * dpsi[j]);
  }
  auto overlap = [dim](const cvec& a, const cplx* b) {
    cplx acc = 0.0;
    double na = 0.0, nb = 0.0;
    for (int j = 0; j < dim; ++j) {
      acc += std::conj(a[j]) * b[j];
      na += std::norm(a[j]);
      nb += std::norm(b[j]);
    }
    return std::abs(acc) / std::sqrt(na * nb);
  };
  int best_g = -1, best_m = -1;
  double ov_g = 0.9, ov_m = 0.9;
  for (int i = 0; i < M; ++i) {
    if (std::abs(E.eigenvalues[i]) < 0.2) {
      const double o = overlap(gold, &E.right[static_cast<std::size_t>(i) * dim]);
      if (o > ov_g) {
        best_g = i;
        ov_g = o;
      }
    }
    if (std::abs(E.eigenvalues[i] + 2.0) < 0.2) {
      const double o = overlap(mom, &E.left[static_cast<std::size_t>(i) * dim]);
      if (o > ov_m) {
        best_m = i;
        ov_m = o;
      }
    }
  }
  if (best_g >= 0) E.tags[best_g] = ModeTag::goldstone;
  if (best_m >= 0) E.tags[best_m] = ModeTag::momentum;
  for (int i = 0; i < M; ++i) {
    if (E.tags[i] != ModeTag::generic) continue;
    if (std::abs(E.eigenvalues[i].real()) <= 1e-6)
      E.tags[i] = std::abs(E.eigenvalues[i].imag()) > 1e-6
                      ? ModeTag::hopf_pair
                      : ModeTag::bifurcating;
  }

  // ---- goldstone normalization: <w1|Gx> = 1 ---------------------------
  if (best_g >= 0) {
    cplx* v1 = &E.right[static_cast<std::size_t>(best_g) * dim];
    cplx* w1 = &E.left[static_cast<std::size_t>(best_g) * dim];
    cplx c = 0.0;
    for (int j = 0; j < dim; ++j) c += std::conj(w1[j]) * gold[j];
    c *= grid.dx;
    if (std::abs(c) < 1e-12)
      throw classification_error("goldstone mode has no overlap with Gx");
    E.goldstone_scale = c;
    for (int j = 0; j < dim; ++j) {
      v1[j] *= c;
      w1[j] /= std::conj(c);
    }
  }
  return E;
}

/// Max |dx W^dag V - I| over all entries (biorthonormality deviation).
inline double gram_deviation(const EigenSystem& E) {
  const int M = E.n_modes, dim = E.dim;
  double dev = 0.0;
  for (int i = 0; i < M; ++i) {
    const cplx* w = &E.left[static_cast<std::size_t>(i) * dim];
    for (int j = 0; j < M; ++j) {
      const cplx* v = &E.right[static_cast<std::size_t>(j) * dim];
      cplx acc = 0.0;
      for (int p = 0; p < dim; ++p) acc += std::conj(w[p]) * v[p];
      acc *= E.grid.dx;
      const double d = std::abs(acc - (i == j ? cplx(1.0) : cplx(0.0)));
      dev = std::max(dev, d);
    }
  }
  return dev;
}

/// Cross-check the adjoint-route left modes against the inverse-matrix route
/// W = (V^{-1})^dag / dx.  Returns the max entrywise deviation relative to
/// the largest left-mode entry.  Requires a complete eigensystem.
inline double verify_left_modes(const EigenSystem& E) {
  const int dim = E.dim;
  if (E.n_modes != dim)
    throw invalid_argument("left-mode cross-check needs a complete eigensystem");
  // solve V^T X = I  =>  X = (V^T)^{-1} = (V^{-1})^T, so X[j + i dim] =
  // inv(V)[i][j]; then W_inv[:, i] = conj(inv(V)[i, :]) / dx = conj(X[:, i])/dx
  std::vector<cplx> A(E.right);
  // transpose in place into column-major V^T
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j)
      std::swap(A[i + static_cast<std::size_t>(j) * dim],
                A[j + static_cast<std::size_t>(i) * dim]);
  std::vector<cplx> X(static_cast<std::size_t>(dim) * dim, 0.0);
  for (int i = 0; i < dim; ++i) X[i + static_cast<std::size_t>(i) * dim] = 1.0;
  std::vector<lapack_int> piv(dim);
  lapack_int info = LAPACKE_zgesv(
      LAPACK_COL_MAJOR, dim, dim,
      reinterpret_cast<lapack_complex_double*>(A.data()), dim, piv.data(),
      reinterpret_cast<lapack_complex_double*>(X.data()), dim);
  if (info != 0)
    throw numerical_error("right-eigenvector matrix is singular");
  double scale = 0.0;
  for (const auto& z : E.left) scale = std::max(scale, std::abs(z));
  double dev = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      const cplx w_inv =
          std::conj(X[j + static_cast<std::size_t>(i) * dim]) / E.grid.dx;
      dev = std::max(dev, std::abs(w_inv - E.left[j + static_cast<std::size_t>(i) *
                                                          dim]));
    }
  return dev / scale;
}

// ============================================================================
// closed-form mode set at threshold (mu = 1)
// ============================================================================

/// The four right/left mode pairs of the linearization at mu = 1 in closed
/// form (printed normalization; biorthonormal, but the goldstone pair is a
/// factor 2 sqrt(beta) away from the <w1|Gx> = 1 convention used by the
/// numerical eigensystem).  Eigenvalues are {0, -2, -2, 0} for modes
/// (translation, momentum-conjugate, amplitude, phase-like).
inline EigenSystem analytic_modes_mu1(const ModelParams& p, const Grid1D& grid) {
  p.validate();
  if (std::abs(p.mu - 1.0) > 1e-12)
    throw invalid_argument("closed-form mode set requires mu = 1");
  if (p.delta1 <= 0.0)
    throw existence_error("bright soliton requires delta1 > 0");
  const int n = grid.n_points;
  const int dim = 2 * n;
  const double beta = std::sqrt(p.delta1);
  const double sb = std::sqrt(beta);

  EigenSystem E;
  E.dim = dim;
  E.n_modes = 4;
  E.grid = grid;
  E.eigenvalues = {0.0, -2.0, -2.0, 0.0};
  E.right.assign(static_cast<std::size_t>(dim) * 4, 0.0);
  E.left.assign(static_cast<std::size_t>(dim) * 4, 0.0);
  E.tags = {ModeTag::goldstone, ModeTag::momentum, ModeTag::generic,
            ModeTag::bifurcating};

  cvec psi(n);
  for (int j = 0; j < n; ++j)
    psi[j] = std::sqrt(2.0) * beta / std::cosh(beta * grid.x[j]);
  E.psi_bar = psi;

  auto set = [&](std::vector<cplx>& m, int col, int j, cplx up, cplx lo) {
    m[j + static_cast<std::size_t>(col) * dim] = up;
    m[n + j + static_cast<std::size_t>(col) * dim] = lo;
  };
  const cplx I(0.0, 1.0);
  for (int j = 0; j < n; ++j) {
    const double x = grid.x[j];
    const double S = std::sqrt(beta / 2.0) / std::cosh(beta * x);
    const double T = beta * std::tanh(beta * x);
    const cplx q(beta * beta, x * T - 1.0);       // beta^2 + i (x T - 1)
    const cplx xiT(x, T);                         // x + i T
    // right modes
    set(E.right, 0, j, -S * T, -S * T);                       // translation
    set(E.right, 1, j, -I * sb * S * xiT, I * sb * S * std::conj(xiT));
    set(E.right, 2, j, I * beta * S, -I * beta * S);          // amplitude
    set(E.right, 3, j, I / sb * S * q, -I / sb * S * std::conj(q));
    // left modes
    set(E.left, 0, j, -S * xiT, -S * std::conj(xiT));
    set(E.left, 1, j, -I / sb * S * T, I / sb * S * T);
    set(E.left, 2, j, -1.0 / beta * S * q, -1.0 / beta * S * std::conj(q));
    set(E.left, 3, j, sb * S, sb * S);
  }
  return E;
}

// ============================================================================
// Hopf threshold
// ============================================================================

/// Result of the Hopf-threshold search.
struct HopfResult {
  double mu_hb = 0;    ///< pump value where max Re lambda of a complex pair crosses 0
  double omega_hb = 0; ///< |Im lambda| of the crossing pair at mu_hb
  int n_evaluations = 0;
};

namespace detail {

/// Largest real part among complex (|Im| > 1e-6) eigenvalues of L, and the
/// |Im| of the maximizing eigenvalue.  Eigenvalue-only solve, both sectors.
inline std::pair<double, double> max_complex_growth(const ModelParams& p,
                                                    const Grid1D& grid) {
  const SolitonProfile sol = soliton_profile(p, grid);
  auto ops = build_operators(sol);
  double best = -1e300, om = 0.0;
  for (int sector = 0; sector < 2; ++sector) {
    const auto cols = parity_columns(grid.n_points, sector == 0);
    const int M = 2 * static_cast<int>(cols.size());
    auto Ls = sector_project(ops.first.matrix, ops.first.dim, cols);
    std::vector<cplx> lam;
    dense_eig(Ls, M, lam, nullptr);
    for (const auto& l : lam) {
      if (std::abs(l.imag()) <= 1e-6) continue;
      if (l.real() > best) {
        best = l.real();
        om = std::abs(l.imag());
      }
    }
  }
  if (best == -1e300)
    throw classification_error("no complex eigenvalues found");
  return {best, om};
}

}  // namespace detail

/// Locate the Hopf threshold mu_HB inside [mu_lo, mu_hi] at fixed detuning by
/// bisection on the sign of the largest real part among complex-pair
/// eigenvalues; converged when |max Re lambda| < 1e-6 at the returned value.
inline HopfResult find_hopf_threshold(double delta1, double mu_lo, double mu_hi,
                                      const Grid1D& grid) {
  ModelParams p;
  p.delta1 = delta1;
  p.sigma = +1;
  p.kappa = 1.0;

  p.mu = mu_lo;
  auto [flo, om_lo] = detail::max_complex_growth(p, grid);
  p.mu = mu_hi;
  auto [fhi, om_hi] = detail::max_complex_growth(p, grid);
  HopfResult r;
  r.n_evaluations = 2;
  if (!(flo < 0.0 && fhi > 0.0))
    throw no_crossing_error("bracket does not straddle the Hopf crossing");

  double lo = mu_lo, hi = mu_hi;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    p.mu = mid;
    auto [fm, om] = detail::max_complex_growth(p, grid);
    ++r.n_evaluations;
    r.mu_hb = mid;
    r.omega_hb = om;
    if (std::abs(fm) < 1e-6) return r;
    if (fm > 0.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo < 1e-13)
      throw numerical_error("Hopf bisection stagnated before |Re lambda| < 1e-6");
  }
  throw numerical_error("Hopf bisection did not converge");
}

}  // namespace dopo
