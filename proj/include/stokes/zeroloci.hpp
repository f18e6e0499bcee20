#pragma once
#include <functional>

#include "stokes/fundsol.hpp"

namespace stokes {

// Which stretch of the exceptional set a prediction sits on. Sector-boundary
// tags only occur for critical graphs with l = -k, where the two infinite
// lines bounding S_{-k} carry separate zero sequences.
enum class LineBranch { generic, inner, sector_upper, sector_lower };

// One asymptotic zero of the solution recessive in sector k, anchored at the
// turning point with label l. Zeros come in islands indexed q along the line;
// within an island the index r counts single zeros. composite = zeta0 +
// zeta1 / lambda (+ zeta2 / lambda^2 when the island sits at the turning
// point itself, i.e. q = 0).
struct ZeroPrediction {
  int k = 0;
  int l = 0;
  int q = 0;
  int r = 0;
  cplx zeta0{0.0, 0.0};
  cplx zeta1{0.0, 0.0};
  cplx zeta2{0.0, 0.0};
  cplx composite{0.0, 0.0};
  // direction of growth of Im(e^{i beta} * action) along the line, in the
  // line's own branch of sqrt(w); the target actions inherit it
  int sign = 1;
  double Lambda = 0.0; // fractional part of |lambda| the family is frozen at
  double R = 0.0;      // sequence offset, critical sector-line case only
  LineBranch branch = LineBranch::generic;
  // cos(R pi) small enough that the sequence formulas are near their
  // singular limit at this |lambda|
  bool low_confidence = false;
  int line_index = -1; // graph line the prediction lies on
};

// Regular-limit parameters. Either may be given; whichever is missing is
// derived from the graph's lambda (Lambda as the fractional part of
// |lambda|, R from lambda * I_k = -(s + R) i pi along the inner pair).
struct RegularParams {
  std::optional<double> Lambda;
  std::optional<double> R;
};

// A zero of the propagated solution, found by winding count and polished by
// Newton. residual is |psi / psi'| at the accepted iterate.
struct ZeroObservation {
  cplx location{0.0, 0.0};
  int multiplicity = 1;
  double residual = 0.0;
};

struct MatchedPair {
  int prediction = -1;
  int observation = -1;
  double residual = 0.0;
};

struct ComparisonReport {
  std::vector<ZeroPrediction> predictions;
  std::vector<ZeroObservation> observations;
  std::vector<MatchedPair> matched; // minimal total distance under the cap
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_observations;
  double max_residual = 0.0;
  double fitted_order = 0.0; // filled by fitted_order() across several runs
};

struct QuantizationResult {
  int s = 0;
  int k0 = 1;
  cplx lambda_leading{0.0, 0.0};
  cplx lambda_refined{0.0, 0.0};
  double residual = 0.0;      // normalized wronskian at lambda_refined
  cplx z_correction{0.0, 0.0}; // contour integral of Z over the pair loop
};

// Asymptotic zeros of solution k along the exceptional lines anchored at
// root l, for islands q = 0..q_max and the given window of r. The window is
// taken literally for q >= 1; for q = 0 the same width is used but the count
// starts just above the bound r > |lambda| I_l(eps) / pi, below which the
// island formulas are invalid (the zeros would collapse into the turning
// point). All action work happens in the traced line's own branch of
// sqrt(w), with the sign of the target chosen by the direction of growth of
// Im(e^{i beta} action) along the line; this reproduces the global-branch
// sign conventions without reconciling sheets.
// Throws island-out-of-range when an island falls beyond the line (for the
// inner line: q > |I_k| / pi), singular-limit when |R| = 1/2 is requested
// (the quantized case; use quantize), missing-root when l is not part of the
// exceptional set.
std::vector<ZeroPrediction> predict(const StokesGraph& graph,
                                    const SemiclassicalSeries& series,
                                    const ExceptionalSet& exc, int k, int l,
                                    int q_max,
                                    std::pair<int, int> r_window = {-5, 5},
                                    const RegularParams& params = {},
                                    const Tolerances& tol = Tolerances{},
                                    Exec exec = Exec::serial);

// Point evaluation of a propagated solution (or any test function exposed
// the same way). Must be pure and callable concurrently.
using FieldEval = std::function<TraceSample(cplx)>;

// Evaluator for the solution of sector k propagated along `trunk` from a
// far-field seed at trunk.pts.front(). Each evaluation re-launches the ODE
// from the nearest trunk vertex, so queries are expected to stay close to
// the trunk. The trunk trace's magnitude ledger is audited: if it rides more
// than `ridge_budget` e-folds above its final value, the recessive content
// at the end is already contaminated beyond use and trunk-conditioning is
// thrown.
FieldEval make_field(const StokesGraph& graph,
                     const SemiclassicalSeries& series, int k,
                     const ComplexPath& trunk, int P = 2,
                     const Tolerances& tol = Tolerances{},
                     double ridge_budget = 15.0);

// Trunk reaching graph.lines[line_index] for the solution of sector k:
// descends from the far field of S_k and walks the line's polyline between
// arclengths s_lo and s_hi, at distance >= join from every turning point.
// Routes either directly (line emerges from the sector's anchor root) or
// across an inner line of a critical graph to the line's origin; other
// targets throw trunk-routing. The returned path keeps the running exponent
// of the solution at or below its final level (up to a small turning-point
// rounding bump), which is what keeps zero searches along the line
// conditioned.
ComplexPath line_trunk(const StokesGraph& graph, int k, int line_index,
                       double join, double s_lo, double s_hi,
                       const Tolerances& tol = Tolerances{});

// All zeros of the field inside the axis-aligned rectangle spanned by a and
// b: boundary winding by adaptive argument sampling, quadrisection down to
// cells of unit winding, then Newton with the step u / du (the ledger
// cancels). Cells whose winding cannot be stabilized (a zero pinned to a
// boundary, or winding persisting >= 2 at the depth limit) throw
// unresolved-cell.
std::vector<ZeroObservation> find_zeros(const FieldEval& field, cplx a,
                                        cplx b,
                                        const Tolerances& tol = Tolerances{},
                                        Exec exec = Exec::serial,
                                        int max_depth = 9);

// Distance from z to the polyline through pts.
double dist_to_polyline(const std::vector<cplx>& pts, cplx z);

// Minimal-total-distance pairing of predictions with observations under the
// cap (unreachable pairs stay unmatched). Empty inputs give an empty report.
ComparisonReport match(const std::vector<ZeroPrediction>& predictions,
                       const std::vector<ZeroObservation>& observations,
                       double cap);

// Least-squares convergence order from (|lambda|, residual) pairs: the slope
// of -log residual against log |lambda|.
double fitted_order(const std::vector<std::pair<double, double>>& runs);

// Quantized lambda for the inner pair (k0, -k0) of the critical beta = 0
// configuration, s = s_lo..s_hi. Leading order solves sigma_k lambda I_k0 =
// -(s + 1/2) pi i with the pair action I_k0; the refinement drives the
// wronskian of the two subdominant solutions seeded in S_k0 and S_-k0 to
// zero by a complex Newton iteration in lambda (50 iterations allowed,
// otherwise quantization-failure). The wronskian is evaluated at a meet
// point pushed off the inner line, where eigenfunction zeros cannot sit.
std::vector<QuantizationResult> quantize(int n, AlphaChoice ac,
                                         const std::vector<cplx>& b, int k0,
                                         int s_lo, int s_hi, int P = 2,
                                         const Tolerances& tol = Tolerances{});

// Exceptional set of solution k at a quantized lambda. For |k| = |k0| the
// surviving lines are the intersection of the two pair members' sets (only
// lines both solutions share; in particular the infinite boundary lines of
// S_{-k0} drop out, in line with the zero counts there falling to zero at
// quantization). For any other k the set is returned unchanged. The graph
// must be built at result.lambda_refined, else not-quantized.
ExceptionalSet quantized_zero_redistribution(const StokesGraph& graph,
                                             const ExceptionalSet& base,
                                             const QuantizationResult& result,
                                             const Tolerances& tol =
                                                 Tolerances{});

} // namespace stokes
