#pragma once
#include <functional>
#include <optional>

#include "stokes/potential.hpp"

namespace stokes {

// One branch cut per turning point. Unpaired roots on the imaginary axis cut
// along it (the root near +i upward, the one near -i downward); every other
// root cuts horizontally away from the imaginary axis. The window fixes the
// argument range of z - z_k so that arg is continuous off the cut:
//   left:  (-pi, pi]        right: [0, 2 pi)
//   up:    (-3 pi/2, pi/2]  down:  (-pi/2, 3 pi/2]
enum class CutWindow { left, right, up, down };

struct CutRay {
  cplx anchor{0.0, 0.0};
  CutWindow window = CutWindow::left;
};

struct CutPlane {
  std::vector<TurningPoint> tps;
  std::vector<CutRay> cuts;
  cplx lead{1.0, 0.0}; // leading coefficient of w
  int anchor_sign = 1; // global sign of sqrt(w); fixed at build time

  static CutPlane build(const RescaledPotential& pot,
                        const std::vector<TurningPoint>& tps,
                        const Tolerances& tol = {});
};

double windowed_arg(cplx w, CutWindow window);

// Total phase arg(lead) + sum_k windowed_arg(z - z_k) (+ 2 pi if the anchor
// flipped the sheet). sqrt(w) and w^{-1/4} share it, so the quarter root
// squared times sqrt(w) is identically w^... i.e. the WKB factors glue.
double total_phase(const CutPlane& cp, cplx z);

cplx sqrt_w_cut(const CutPlane& cp, cplx z);    // principal sheet on C_cut
cplx quarter_w_cut(const CutPlane& cp, cplx z); // w^{-1/4}, same sheet

bool on_cut(const CutPlane& cp, cplx z, double tol = 1e-12);

struct Crossing {
  int cut = -1;
  double t = 0.0; // position along the segment, in (0,1)
  int delta = 0;  // windowed-arg jump in units of 2 pi: +1 or -1
};

// Cut crossings of segment [a, b], ordered by t. Endpoints sitting exactly on
// a cut are nudged toward the segment interior; collinear overlap does not
// cross.
std::vector<Crossing> cut_crossings(const CutPlane& cp, cplx a, cplx b,
                                    double nudge = 1e-12);

// sqrt(w) with explicit sheet tracking. sheet is relative to the C_cut
// principal sheet; a continuation hint transports the sheet across cuts by the
// discrete crossing count. Evaluating exactly on a cut without a hint throws
// ambiguous-branch.
struct BranchedValue {
  cplx value{0.0, 0.0};
  int sheet = 1;
};
BranchedValue sqrt_w(const CutPlane& cp, cplx z,
                     const std::optional<std::pair<cplx, BranchedValue>>& hint =
                         std::nullopt);

struct ActionResult {
  cplx value{0.0, 0.0};
  double err = 0.0;
  int sheet_end = 1;
  int crossings = 0;
};

// integral of sheet * sqrt(w) along the polyline, splitting segments at cut
// crossings (sheet flips there) and substituting y = z_t + t^2 (b - z_t) when
// an endpoint is a turning point. Throws quadrature-failure when the error
// estimate cannot be brought under tol.quad_tol.
ActionResult action_integral(const CutPlane& cp, const ComplexPath& path,
                             const Tolerances& tol = {}, int sheet0 = 1);

// Elementary integral between paired limit roots: (2 i / n) sin(theta_k)
// B(3/2, 1/n), theta_k = 2 k pi / n (alpha = 1) or (2k-1) pi / n (rotated).
cplx closed_form_action(int n, AlphaChoice ac, int k);

// Adaptive 7-15 Gauss-Kronrod quadrature of a complex integrand over [a, b];
// the error estimate is accumulated into *err when given.
cplx gk_integrate(const std::function<cplx(double)>& f, double a, double b,
                  double tol, double* err = nullptr);

// Polyline from turning point label_a to label_b over the interior arc at
// radius 0.9 (all cuts lie at radius >= 1 in the limit configuration, so the
// route crosses none of them). For pairs (k, -k) the sweep passes the top.
ComplexPath pair_path(const CutPlane& cp, int label_a, int label_b);

} // namespace stokes
