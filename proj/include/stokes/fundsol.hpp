#pragma once
#include "stokes/stokesgraph.hpp"

namespace stokes {

// Correction series to the WKB exponent. The recessive solution of sector k
// behaves as w^{-1/4} exp(sigma_k lambda int sqrt(w) + int Z_k) with
//   Z_k = sum_{p >= 1} (-sigma_k / 2 lambda)^p X_p,
//   X_1 = w^{-1/4} (w^{-1/4})'',
//   X_p = w^{-1/2} [X_{p-1}' + sum_{j=1}^{p-2} X_j X_{p-1-j}]
//         - (1/2) w^{-3/2} w' X_{p-1}.
// The recursion closes over rational functions: X_p = N_p / w^{(3p+2)/2}
// with N_p polynomial,
//   N_1 = (5/16) w'^2 - (1/4) w w'',
//   N_p = w N_{p-1}' - (3p/2) w' N_{p-1} + sum_{j=1}^{p-2} N_j N_{p-1-j}.
// Even p are single-valued on the plane; odd p flip sign with sqrt(w).
struct SemiclassicalSeries {
  int order = 0;
  CutPlane cuts;
  Poly w, dw;
  std::vector<Poly> N; // N[p-1] = numerator of X_p

  // X_p on the cut sheet. Throws near-singular-evaluation within 1e-6 of a
  // turning point.
  cplx X(int p, cplx z) const;

  cplx Zplus(cplx z, cplx lambda, int pmax = -1) const;  // even-p part
  cplx Zminus(cplx z, cplx lambda, int pmax = -1) const; // odd-p part
  cplx Z(cplx z, cplx lambda, int sigma, int pmax = -1) const;
};

SemiclassicalSeries build_series(const RescaledPotential& pot,
                                 const CutPlane& cuts, int order);

// Radius where the far-field expansion seeds: far enough out that the
// subleading potential coefficients are dominated at this lambda.
double seed_radius(const RescaledPotential& pot,
                   const Tolerances& tol = Tolerances{});

// Far-field data for the recessive solution of sector k at a point z on the
// seed circle: psi = u e^{logscale}, psi' = du e^{logscale}. argw carries the
// continued argument of w at z, fixing the quarter-root phase.
struct Seed {
  int k = 0;
  int order = 0;
  double seed_radius = 0.0;
  cplx z{0.0, 0.0};
  cplx u{0.0, 0.0};
  cplx du{0.0, 0.0};
  double logscale = 0.0;
  double argw = 0.0;
};

// psi(z_inf) = w^{-1/4} exp(sigma_k lambda int_{z_k}^{z_inf} sqrt(w)
//              + int_{inf_k}^{z_inf} Z_k), truncated at order P, derivative
// from the analytic derivative of the exponent. The action is anchored at
// the sector's turning point; the Z tail integrates down the outgoing ray.
// Throws wrong-sector when z_inf is not a usable far point of sector k.
Seed wkb_seed(const StokesGraph& graph, const SemiclassicalSeries& series,
              int k, cplx z_inf, int P, const Tolerances& tol = Tolerances{});

struct TraceSample {
  cplx z{0.0, 0.0};
  cplx u{0.0, 0.0};   // psi  = u  e^{logscale}
  cplx du{0.0, 0.0};  // psi' = du e^{logscale}
  double logscale = 0.0;
  double argw = 0.0; // continued arg w along the path
};

struct SolutionTrace {
  int k = 0;
  int order = 0;
  double seed_radius = 0.0;
  ComplexPath path;
  std::vector<TraceSample> samples; // one per path vertex

  // sample at a path vertex; throws no-overlap when z is not one
  const TraceSample& find(cplx z) const;
};

// Integrate psi'' = lambda^2 w(z) psi along the polyline from the seed,
// local error per unit arclength <= tol.ode_rel, with a magnitude ledger
// keeping (u, du) bounded: growth moves into logscale. cuts only anchors the
// quarter-root phase convention; the ODE itself is cut-blind. Throws
// propagation-failure on step collapse or a pass within 1e-6 of a turning
// point.
SolutionTrace propagate(const Seed& seed, const RescaledPotential& pot,
                        const CutPlane& cuts, const ComplexPath& path,
                        const Tolerances& tol = Tolerances{});

// value = unit * e^{log}, |unit| = 1 (or 0 for an exact zero)
struct LogComplex {
  cplx unit{0.0, 0.0};
  double log = 0.0;
};

// psi_a psi_b' - psi_a' psi_b at a common sample point, ledgers combined
// exactly. Throws no-overlap when z is not a vertex of both traces.
LogComplex wronskian_log(const SolutionTrace& a, const SolutionTrace& b,
                         cplx z);
cplx wronskian(const SolutionTrace& a, const SolutionTrace& b, cplx z);

} // namespace stokes
