#pragma once
#include <optional>

#include "stokes/types.hpp"

namespace stokes {

enum class AlphaChoice { unity, rotated };

// Input problem: P(x) = sum_{k=1..n} a_k x^k with a_n != 0, energy E != 0,
// particle constants m and hbar. Stored exactly as given; all branch choices
// happen in rescale().
struct PhysicalProblem {
  int degree = 0;
  std::vector<cplx> a; // a[k-1] = a_k, k = 1..n
  cplx energy{0.0, 0.0};
  double mass = 1.0;
  double hbar = 1.0;
};

// Normal form w(z) = (-i a z)^n - 1 + sum_{k=1}^{n-1} b_{n-k} (-i a)^{2k/(n+2)}
// lambda^{-2k/(n+2)} (-i a z)^{n-k}, where a is the sector-alignment factor
// (1 or e^{-i pi/n}). lambda is fixed at construction, so the z-coefficients
// are precomputed once and evaluation is a Horner pass.
struct RescaledPotential {
  int n = 0;
  AlphaChoice alpha_choice = AlphaChoice::unity;
  cplx alpha{1.0, 0.0};
  cplx lambda{0.0, 0.0};
  std::vector<cplx> b;        // b[j] = b_{n-1-j}, j = 0..n-2, i.e. b_{n-1}..b_1
  std::string branch_note;    // which principal powers fixed the coefficients
  bool standard_mode = true;  // |arg lambda| < pi/n

  Poly w;   // w(z), degree n
  Poly dw;  // w'
  Poly d2w; // w''

  cplx W(cplx z) const { return w(z); }
  cplx dW(cplx z) const { return dw(z); }
  cplx d2W(cplx z) const { return d2w(z); }

  double abs_lambda() const { return std::abs(lambda); }
  double beta() const { return std::arg(lambda); }
  // integer and fractional split of |lambda|: |lambda| = [|lambda|] + Lambda
  double floor_abs() const;
  double Lambda() const;

  cplx eta() const; // lambda^{-2/(n+2)}, principal
  cplx b_prime(int nk) const; // b'_{n-k} given n-k, i.e. b_{n-k}(-i alpha)^{2k/(n+2)}

  // Build directly in normal form (the CLI path: --n/--alpha/--lambda/--b).
  static RescaledPotential standard(int n, AlphaChoice ac, std::vector<cplx> b,
                                    cplx lambda);
};

RescaledPotential rescale(const PhysicalProblem& p, AlphaChoice ac);

// Reconstructs lambda^2 * w(z) in the original variables and returns the
// relative mismatch against (2m/hbar^2)(P(c z) - E); used as the round-trip
// guarantee for the branch bookkeeping above.
double rescale_roundtrip_error(const PhysicalProblem& p,
                               const RescaledPotential& r);

struct TurningPoint {
  int label = 0;             // limit-root label k
  cplx limit{0.0, 0.0};      // root of (-i alpha z)^n = 1 with this label
  cplx z{0.0, 0.0};          // root of w at finite lambda
  std::optional<int> partner; // -k when the limit root is paired
};

// Label sets of the limit configuration. alpha=1: 0 at +i, +-1, ..., with a
// lone extra root n/2 at -i when n is even. alpha=e^{-i pi/n}: no axis root
// for even n (+-1 .. +-n/2, all paired); for odd n the root at -i is the
// lone one, labelled (n+1)/2. Positive labels sit in the left half-plane
// and z_k = -conj(z_{-k}).
std::vector<int> limit_labels(int n, AlphaChoice ac);
cplx limit_root(int n, AlphaChoice ac, int label);

struct PairSet {
  std::vector<std::pair<int, int>> pairs; // (k, -k), k > 0
  std::vector<int> unpaired;
};
PairSet limit_pairs(int n, AlphaChoice ac);

// All n roots of w, labelled by nearest limit root. Simultaneous iteration
// seeded at the limit roots; throws degenerate-turning-points when two roots
// come closer than tol.collision.
std::vector<TurningPoint> turning_points(const RescaledPotential& pot,
                                         const Tolerances& tol = {});

// First-order displacement of the limit root: z_k(lambda) ~ z_k - i b'_{n-1}
// /(n alpha) lambda^{-2/(n+2)}.
cplx drift_first_order(const RescaledPotential& pot, int label);

int tp_index(const std::vector<TurningPoint>& tps, int label);

} // namespace stokes
