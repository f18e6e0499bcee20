#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "stokes/zeroloci.hpp"

using namespace stokes;

namespace {

struct Setup {
  RescaledPotential pot;
  StokesGraph graph;
  SemiclassicalSeries series;
  ExceptionalSet exc;
};

Setup make(int n, AlphaChoice ac, cplx lambda, int k) {
  RescaledPotential pot = RescaledPotential::standard(n, ac, {}, lambda);
  StokesGraph g = build_graph(pot);
  SemiclassicalSeries s = build_series(pot, g.cuts, 2);
  ExceptionalSet e = exceptional_set(g, k, 0.25);
  return {pot, std::move(g), std::move(s), std::move(e)};
}

int inner_index(const StokesGraph& g) {
  const StokesLine* inn = g.inner_line(1, -1);
  if (!inn) inn = g.inner_line(-1, 1);
  REQUIRE(inn != nullptr);
  return int(inn - g.lines.data());
}

// exact product-rule evaluation of prod (z - r_j); the engine only sees the
// FieldEval surface, so explicit polynomials make the winding logic testable
// in isolation
FieldEval poly_field(std::vector<cplx> roots) {
  return [roots](cplx z) {
    cplx u = 1.0, du = 0.0;
    for (cplx r : roots) {
      du = du * (z - r) + u;
      u *= (z - r);
    }
    return TraceSample{z, u, du, 0.0, 0.0};
  };
}

ZeroPrediction at(cplx c) {
  ZeroPrediction p;
  p.composite = c;
  return p;
}

ZeroObservation seen(cplx c) { return {c, 1, 0.0}; }

} // namespace

TEST_CASE("order-zero island centers satisfy the defining action relation") {
  cplx lam = 20.0 * std::exp(cplx(0.0, 0.1));
  Setup st = make(3, AlphaChoice::unity, lam, 3);
  auto preds = predict(st.graph, st.series, st.exc, 3, 0, 2, {-2, 2});
  CHECK(preds.size() == 15);

  cplx zl = st.graph.tps.at(size_t(tp_index(st.graph.tps, 0))).z;
  cplx eib = lam / std::abs(lam);
  int relation_checked = 0;
  for (const auto& p : preds) {
    CHECK(std::abs(p.sign) == 1);
    if (p.q == 0) {
      // the center of a well island is the turning point itself; only the
      // displacement carries information
      CHECK(std::abs(p.zeta0 - zl) == 0.0);
      CHECK(std::abs(p.composite - p.zeta0) > 1e-4);
      continue;
    }
    if (p.r != 0) continue;
    ComplexPath chord;
    chord.pts = {zl, p.zeta0};
    ActionResult ar = action_integral(st.graph.cuts, chord, Tolerances{}, 1);
    cplx tw = eib * ar.value;
    CHECK(std::abs(tw.real()) < 1e-10);
    CHECK(std::abs(std::abs(tw.imag()) - p.q * pi) < 1e-10);
    const auto& ln = st.graph.lines.at(size_t(p.line_index));
    CHECK(dist_to_polyline(ln.z, p.zeta0) < 1e-4);
    ++relation_checked;
  }
  CHECK(relation_checked == 2);
}

TEST_CASE("well islands invert the closed-form action") {
  // for w = z^2 - 1 the line action from -1 has the classic primitive
  // x sqrt(1-x^2)/2 + asin(x)/2 + pi/4, so each island center is available
  // by bisection, completely outside the library's machinery
  double lam = 40.3;
  Setup st = make(2, AlphaChoice::rotated, cplx(lam, 0.0), 1);
  auto preds = predict(st.graph, st.series, st.exc, 1, 1, 0, {0, 12});
  REQUIRE(preds.size() == 13);
  CHECK(preds.front().r == 3); // the vicinity floor swallows r = 1, 2

  auto A = [](double x) {
    return x * std::sqrt(1.0 - x * x) / 2 + std::asin(x) / 2 + pi / 4;
  };
  for (const auto& p : preds) {
    double target = (p.r - 0.25) * pi / lam;
    double a = -1.0 + 1e-14, b = 1.0 - 1e-14;
    for (int it = 0; it < 200; ++it) {
      double m = 0.5 * (a + b);
      (A(m) < target ? a : b) = m;
    }
    cplx P = -1.0 + p.zeta1 / lam;
    CHECK(std::abs(P - 0.5 * (a + b)) < 1e-8);
  }
}

TEST_CASE("requests outside the catalog are refused with their own codes") {
  Setup st = make(2, AlphaChoice::rotated, cplx(7.0, 0.0), 1);

  auto q0 = predict(st.graph, st.series, st.exc, 1, 1, 0, {0, 10});
  CHECK(q0.size() == 2);

  // the inner segment carries total action pi/2, so every q >= 1 island
  // lies beyond its far end
  try {
    predict(st.graph, st.series, st.exc, 1, 1, 1, {0, 0});
    FAIL("q = 1 on the inner segment must be out of range");
  } catch (const Error& e) {
    CHECK(e.code() == "island-out-of-range");
  }
  try {
    predict(st.graph, st.series, st.exc, 1, 5, 0, {0, 0});
    FAIL("root 5 does not exist");
  } catch (const Error& e) {
    CHECK(e.code() == "missing-root");
  }
  try {
    predict(st.graph, st.series, st.exc, -1, 1, 0, {0, 0});
    FAIL("the set was built for k = 1");
  } catch (const Error& e) {
    CHECK(e.code() == "topology-error");
  }
}

TEST_CASE("a collinear ratio puts the corrected point back on the center") {
  cplx lam = 20.0 * std::exp(cplx(0.0, 0.1));
  Setup st = make(3, AlphaChoice::unity, lam, 3);

  // at Lambda = (r - 1/4) / q the displacement coefficient vanishes exactly
  RegularParams collinear;
  collinear.Lambda = 0.75;
  auto pc = predict(st.graph, st.series, st.exc, 3, 0, 1, {1, 1}, collinear);
  RegularParams lo;
  lo.Lambda = 0.3;
  RegularParams hi;
  hi.Lambda = 1.2;
  auto pl = predict(st.graph, st.series, st.exc, 3, 0, 1, {1, 1}, lo);
  auto ph = predict(st.graph, st.series, st.exc, 3, 0, 1, {1, 1}, hi);
  REQUIRE(pc.size() == pl.size());
  REQUIRE(pc.size() == ph.size());

  int checked = 0;
  for (size_t i = 0; i < pc.size(); ++i) {
    if (pc[i].q != 1) continue;
    ++checked;
    CHECK(std::abs(pc[i].composite - pc[i].zeta0) < 1e-12);
    // the center never depends on Lambda, and the displacement is linear
    // in it: offsets at 0.75 +- 0.45 are exact negatives
    CHECK(std::abs(pl[i].zeta0 - ph[i].zeta0) < 1e-14);
    cplx d1 = pl[i].composite - pl[i].zeta0;
    cplx d2 = ph[i].composite - ph[i].zeta0;
    CHECK(std::abs(d1 + d2) < 1e-12);
    CHECK(std::abs(d1) > 1e-4);
  }
  CHECK(checked >= 1);
}

TEST_CASE("the half-integer residue is refused as singular") {
  Setup st = make(2, AlphaChoice::rotated, cplx(50.0, 0.0), 1);
  for (double r : {0.5, -0.5}) {
    RegularParams rp;
    rp.R = r;
    try {
      predict(st.graph, st.series, st.exc, 1, -1, 1, {1, 1}, rp);
      FAIL("|R| = 1/2 must be rejected");
    } catch (const Error& e) {
      CHECK(e.code() == "singular-limit");
    }
  }
}

TEST_CASE("sector-boundary corrections split by log two at zero residue") {
  // |lambda| = 50 makes the pair action an exact multiple of pi, so the
  // residue vanishes and the two boundary sequences differ by the full
  // log 2 while everything else about them is mirror-symmetric
  Setup st = make(2, AlphaChoice::rotated, cplx(50.0, 0.0), 1);
  auto preds = predict(st.graph, st.series, st.exc, 1, -1, 1, {1, 1});
  REQUIRE(preds.size() == 2);

  double coef[2] = {0.0, 0.0}; // [upper, lower]
  for (const auto& p : preds) {
    CHECK(std::abs(p.R) < 1e-5);
    CHECK(p.Lambda == 0.0);
    CHECK(!p.low_confidence);
    bool up = p.branch == LineBranch::sector_upper;
    if (!up) CHECK(p.branch == LineBranch::sector_lower);
    CHECK((up ? 1.0 : -1.0) * p.zeta0.imag() > 0.0);
    coef[up ? 0 : 1] =
        std::abs(p.zeta1) * std::abs(sqrt_w_cut(st.graph.cuts, p.zeta0)) / pi;
  }
  CHECK(coef[0] == doctest::Approx(0.75 - std::log(2.0) / 2).epsilon(1e-4));
  CHECK(coef[1] - coef[0] == doctest::Approx(std::log(2.0)).epsilon(1e-7));

  // pushing the residue toward 1/2 degrades the log factor below the
  // resolution threshold and the predictions say so
  Setup st2 = make(2, AlphaChoice::rotated, cplx(50.98, 0.0), 1);
  auto p2 = predict(st2.graph, st2.series, st2.exc, 1, -1, 1, {1, 1});
  REQUIRE(p2.size() == 2);
  for (const auto& p : p2) {
    CHECK(p.R == doctest::Approx(0.49).epsilon(1e-3));
    CHECK(p.low_confidence);
  }
}

TEST_CASE("the winding engine resolves explicit polynomial zeros") {
  Tolerances tol;

  auto simple = find_zeros(poly_field({cplx(-0.1, 0), cplx(0.1, 0)}),
                           cplx(-0.5, -0.4), cplx(0.5, 0.4), tol);
  REQUIRE(simple.size() == 2);
  CHECK(std::abs(simple[0].location - cplx(-0.1, 0)) < 1e-10);
  CHECK(std::abs(simple[1].location - cplx(0.1, 0)) < 1e-10);
  CHECK(simple[0].multiplicity == 1);
  CHECK(simple[0].residual < 1e-12);

  // a double root never separates, so the drill-down must stop at the
  // depth floor and report the clustered multiplicity instead
  auto dbl = find_zeros(poly_field({0.0, 0.0, cplx(0.3, 0)}),
                        cplx(-0.5, -0.4), cplx(0.5, 0.4), tol);
  REQUIRE(dbl.size() == 2);
  CHECK(std::abs(dbl[0].location) < 1e-8);
  CHECK(dbl[0].multiplicity == 2);
  CHECK(std::abs(dbl[1].location - cplx(0.3, 0)) < 1e-10);
  CHECK(dbl[1].multiplicity == 1);

  CHECK(find_zeros(poly_field({cplx(2, 0), cplx(3, 0)}), cplx(-0.5, -0.4),
                   cplx(0.5, 0.4), tol)
            .empty());
  CHECK(find_zeros(poly_field({0.0}), cplx(0.2, 0.2), cplx(0.2, 0.2), tol)
            .empty());

  // the parallel sweep partitions the region differently but must land on
  // the same zeros
  FieldEval f = poly_field({cplx(-0.1, 0), cplx(0.1, 0), cplx(0.05, 0.2)});
  auto ser = find_zeros(f, cplx(-0.5, -0.4), cplx(0.5, 0.4), tol);
  auto par = find_zeros(f, cplx(-0.5, -0.4), cplx(0.5, 0.4), tol,
                        Exec::parallel);
  REQUIRE(ser.size() == 3);
  REQUIRE(par.size() == 3);
  for (size_t i = 0; i < 3; ++i)
    CHECK(std::abs(ser[i].location - par[i].location) < 1e-10);
}

TEST_CASE("a propagated eigenfunction vanishes on its real lattice") {
  // lambda = 7 is the third rung of the real quantization ladder; the
  // subdominant solution is then a hermite function whose zeros sit at
  // 0 and +- sqrt(3/14)
  Setup st = make(2, AlphaChoice::rotated, cplx(7.0, 0.0), 1);
  Tolerances tol;
  int inn = inner_index(st.graph);
  double len = st.graph.lines[size_t(inn)].length();
  ComplexPath trunk = line_trunk(st.graph, 1, inn, 0.12, 0.0, len);
  FieldEval field = make_field(st.graph, st.series, 1, trunk, 2, tol);

  const double x1 = std::sqrt(3.0 / 14.0);
  auto zs = find_zeros(field, cplx(-0.8, -0.25), cplx(0.8, 0.25), tol);
  REQUIRE(zs.size() == 3);
  CHECK(std::abs(zs[0].location - cplx(-x1, 0)) < 1e-8);
  CHECK(std::abs(zs[1].location) < 1e-9);
  CHECK(std::abs(zs[2].location - cplx(x1, 0)) < 1e-8);
  for (const auto& z : zs) {
    CHECK(z.multiplicity == 1);
    CHECK(z.residual < 1e-10);
  }

  auto zp = find_zeros(field, cplx(-0.8, -0.25), cplx(0.8, 0.25), tol,
                       Exec::parallel);
  REQUIRE(zp.size() == 3);
  for (size_t i = 0; i < 3; ++i)
    CHECK(std::abs(zs[i].location - zp[i].location) < 1e-10);

  // off the line the solution is single-mode and cannot vanish
  CHECK(find_zeros(field, cplx(-0.6, 0.06), cplx(0.6, 0.4), tol).empty());
  CHECK(find_zeros(field, cplx(0.55, -0.2), cplx(0.9, 0.2), tol).empty());

  // the same trunk under an impossibly tight ridge allowance must be
  // reported as unusable rather than silently fuzzy
  try {
    make_field(st.graph, st.series, 1, trunk, 2, tol, 0.01);
    FAIL("the turning-point detour always costs a visible bump");
  } catch (const Error& e) {
    CHECK(e.code() == "trunk-conditioning");
  }
}

TEST_CASE("predicted islands pair with observed zeros inside the cap") {
  Setup st = make(2, AlphaChoice::rotated, cplx(7.0, 0.0), 1);
  Tolerances tol;
  auto preds = predict(st.graph, st.series, st.exc, 1, 1, 0, {0, 10});
  REQUIRE(preds.size() == 2);

  int inn = inner_index(st.graph);
  ComplexPath trunk =
      line_trunk(st.graph, 1, inn, 0.12, 0.0,
                 st.graph.lines[size_t(inn)].length());
  FieldEval field = make_field(st.graph, st.series, 1, trunk, 2, tol);
  auto obs = find_zeros(field, cplx(-0.8, -0.25), cplx(0.8, 0.25), tol);
  REQUIRE(obs.size() == 3);

  ComparisonReport rep = match(preds, obs, 0.05);
  REQUIRE(rep.matched.size() == 2);
  CHECK(rep.matched[0].prediction == 0);
  CHECK(rep.matched[0].observation == 1);
  CHECK(rep.matched[1].prediction == 1);
  CHECK(rep.matched[1].observation == 2);
  CHECK(rep.unmatched_predictions.empty());
  // the leftmost zero has no partner: its island index falls below the
  // vicinity floor of the catalog
  REQUIRE(rep.unmatched_observations.size() == 1);
  CHECK(rep.unmatched_observations[0] == 0);
  // a real asymptotic gap, not a lucky hit: order 1/lambda^2
  CHECK(rep.max_residual < 5e-3);
  CHECK(rep.max_residual > 1e-4);
}

TEST_CASE("the pairing is minimal and respects the cap") {
  {
    std::vector<ZeroPrediction> p = {at(0.0), at(1.0), at(5.0)};
    std::vector<ZeroObservation> o = {seen(cplx(0.01, 0)),
                                      seen(cplx(1.02, 0)), seen(30.0)};
    ComparisonReport rep = match(p, o, 0.1);
    REQUIRE(rep.matched.size() == 2);
    CHECK(rep.matched[0].prediction == 0);
    CHECK(rep.matched[0].observation == 0);
    CHECK(rep.matched[1].prediction == 1);
    CHECK(rep.matched[1].observation == 1);
    CHECK(rep.unmatched_predictions == std::vector<int>{2});
    CHECK(rep.unmatched_observations == std::vector<int>{2});
    CHECK(rep.max_residual == doctest::Approx(0.02).epsilon(1e-9));
  }
  {
    // a greedy scan would hand the observation to the first prediction;
    // the optimal assignment gives it to the closer one
    std::vector<ZeroPrediction> p = {at(0.0), at(0.05)};
    std::vector<ZeroObservation> o = {seen(cplx(0.06, 0))};
    ComparisonReport rep = match(p, o, 0.1);
    REQUIRE(rep.matched.size() == 1);
    CHECK(rep.matched[0].prediction == 1);
    CHECK(rep.matched[0].observation == 0);
    CHECK(rep.unmatched_predictions == std::vector<int>{0});
  }
  {
    ComparisonReport rep = match({}, {}, 1.0);
    CHECK(rep.matched.empty());
    CHECK(rep.max_residual == 0.0);
  }
}

TEST_CASE("the fitted order recovers quadratic decay") {
  std::vector<std::pair<double, double>> clean = {
      {20.0, 3.2 / 400.0}, {40.0, 3.2 / 1600.0}, {80.0, 3.2 / 6400.0}};
  CHECK(fitted_order(clean) == doctest::Approx(2.0).epsilon(1e-9));

  std::vector<std::pair<double, double>> noisy = {
      {20.0, 0.0092}, {40.0, 0.00184}, {80.0, 0.000525}};
  CHECK(std::abs(fitted_order(noisy) - 2.0) < 0.2);

  CHECK(fitted_order({{20.0, 1.0}}) == 0.0);
}

TEST_CASE("real quantization lands on the odd integers") {
  auto qs = quantize(2, AlphaChoice::rotated, {}, 1, 0, 6);
  REQUIRE(qs.size() == 7);
  for (int s = 0; s <= 6; ++s) {
    const auto& q = qs[size_t(s)];
    CHECK(q.s == s);
    CHECK(q.k0 == 1);
    double truth = 2.0 * s + 1.0;
    CHECK(std::abs(q.lambda_leading - truth) < 1e-12);
    CHECK(std::abs(q.lambda_refined - truth) < 1e-10);
    CHECK(q.residual < 1e-10);
  }
}

TEST_CASE("quartic quantization matches the known spectrum") {
  // the refinement drives an exact wronskian, so the result must agree
  // with the standard quartic-oscillator eigenvalues through the scaling
  // lambda = E^(3/4), far beyond the leading order's reach
  const double E[2] = {1.060362090484, 3.799673029801};
  auto low = quantize(4, AlphaChoice::unity, {}, 1, 0, 1);
  REQUIRE(low.size() == 2);
  for (int s = 0; s <= 1; ++s) {
    CHECK(std::abs(low[size_t(s)].lambda_refined -
                   std::pow(E[s], 0.75)) < 1e-10);
    CHECK(low[size_t(s)].residual < 1e-10);
  }

  auto mid = quantize(4, AlphaChoice::unity, {}, 1, 5, 5);
  REQUIRE(mid.size() == 1);
  const auto& q = mid.front();
  CHECK(std::abs(q.lambda_refined.imag()) < 1e-9);
  double shift = std::abs(q.lambda_refined - q.lambda_leading);
  CHECK(shift < 0.01);
  CHECK(shift > 0.005);
  CHECK(q.residual < 1e-10);
  CHECK(std::abs(q.z_correction.real()) < 1e-10);
  CHECK(q.z_correction.imag() < -0.01);
  CHECK(q.z_correction.imag() > -0.05);
}

TEST_CASE("quantization empties the far boundary tubes") {
  Tolerances tol;
  QuantizationResult res =
      quantize(2, AlphaChoice::rotated, {}, 1, 3, 3).front();
  CHECK(std::abs(res.lambda_refined - 7.0) < 1e-10);

  RescaledPotential pot =
      RescaledPotential::standard(2, AlphaChoice::rotated, {},
                                  res.lambda_refined);
  StokesGraph g = build_graph(pot);
  SemiclassicalSeries ser = build_series(pot, g.cuts, 2);
  ExceptionalSet exc = exceptional_set(g, 1, 0.25);
  REQUIRE(exc.flat().size() == 4);

  // only the two finite records survive; the infinite boundary lines of
  // the opposite sector drop out and the vicinity list stays aligned
  ExceptionalSet red = quantized_zero_redistribution(g, exc, res, tol);
  REQUIRE(red.flat().size() == 2);
  for (int i : red.flat()) CHECK(!g.lines[size_t(i)].to_infinity);
  CHECK(red.vicinity.size() == 2);

  ExceptionalSet exc0 = exceptional_set(g, 0, 0.25);
  ExceptionalSet red0 = quantized_zero_redistribution(g, exc0, res, tol);
  CHECK(red0.flat() == exc0.flat());

  try {
    StokesGraph gb = build_graph(
        RescaledPotential::standard(2, AlphaChoice::rotated, {},
                                    cplx(7.05, 0.0)));
    quantized_zero_redistribution(gb, exceptional_set(gb, 1, 0.25), res, tol);
    FAIL("a graph off the quantized lambda must be rejected");
  } catch (const Error& e) {
    CHECK(e.code() == "not-quantized");
  }

  // a tube around the upper boundary line of the opposite sector holds no
  // zeros at the quantized lambda, while the inner segment carries all s
  int up = g.sector(-1).bounding.back();
  const StokesLine& ln = g.lines[size_t(up)];
  ComplexPath bt = line_trunk(g, 1, up, 0.12, 0.3, 2.3);
  FieldEval bf = make_field(g, ser, 1, bt, 2, tol);
  double xlo = 1e9, xhi = -1e9, ylo = 1e9, yhi = -1e9;
  for (size_t i = 0; i < ln.z.size(); ++i) {
    if (ln.s[i] < 0.3 || ln.s[i] > 2.3) continue;
    xlo = std::min(xlo, ln.z[i].real());
    xhi = std::max(xhi, ln.z[i].real());
    ylo = std::min(ylo, ln.z[i].imag());
    yhi = std::max(yhi, ln.z[i].imag());
  }
  CHECK(find_zeros(bf, cplx(xlo - 0.15, ylo - 0.15),
                   cplx(xhi + 0.15, yhi + 0.15), tol)
            .empty());

  int inn = inner_index(g);
  ComplexPath it = line_trunk(g, 1, inn, 0.12, 0.0,
                              g.lines[size_t(inn)].length());
  FieldEval nf = make_field(g, ser, 1, it, 2, tol);
  CHECK(find_zeros(nf, cplx(-0.8, -0.25), cplx(0.8, 0.25), tol).size() == 3);
}
