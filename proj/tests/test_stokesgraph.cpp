#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "stokes/stokesgraph.hpp"

using namespace stokes;

namespace {

RescaledPotential limit_pot(int n, AlphaChoice ac, double beta = 0.0,
                            double mod = 25.0) {
  return RescaledPotential::standard(n, ac, {}, std::polar(mod, beta));
}

double wrap(double a) {
  a = std::fmod(a, 2 * pi);
  return a < 0 ? a + 2 * pi : a;
}

// smallest absolute angular separation
double adist(double a, double b) {
  double d = wrap(a - b);
  return std::min(d, 2 * pi - d);
}

std::vector<int> cyclic_labels(const StokesGraph& g) {
  // sector labels ordered counterclockwise starting from the one whose lower
  // bound is closest past pi/2
  std::vector<const Sector*> s;
  for (auto& sec : g.sectors) s.push_back(&sec);
  std::sort(s.begin(), s.end(), [](auto* a, auto* b) {
    return wrap(a->lo - pi / 2 + 1e-9) < wrap(b->lo - pi / 2 + 1e-9);
  });
  std::vector<int> out;
  for (auto* p : s) out.push_back(p->label);
  return out;
}

} // namespace

TEST_CASE("emission directions are 2 pi / 3 apart") {
  auto pot = limit_pot(3, AlphaChoice::unity);
  for (auto& tp : turning_points(pot)) {
    auto th = emission_angles(pot, tp);
    CHECK(adist(th[1], th[0] + 2 * pi / 3) < 1e-12);
    CHECK(adist(th[2], th[1] + 2 * pi / 3) < 1e-12);
  }
}

TEST_CASE("emission rotates by -2 beta / 3") {
  // with b = 0 the potential has no lambda dependence at all, so the law
  // is exact, not asymptotic
  for (int n : {2, 3, 5}) {
    auto p0 = limit_pot(n, AlphaChoice::unity, 0.0);
    auto p1 = limit_pot(n, AlphaChoice::unity, 0.05);
    auto t0 = turning_points(p0);
    auto t1 = turning_points(p1);
    for (size_t i = 0; i < t0.size(); ++i) {
      auto a0 = emission_angles(p0, t0[i]);
      auto a1 = emission_angles(p1, t1[i]);
      for (int m = 0; m < 3; ++m)
        CHECK(adist(a1[m], a0[m] - 2 * 0.05 / 3) < 1e-12);
    }
  }
}

TEST_CASE("traced direction near the turning point follows the rotation") {
  // measure the line direction at distance ~1e-3 from the root instead of
  // using the analytic angle
  auto probe = [](double beta) {
    auto pot = limit_pot(3, AlphaChoice::unity, beta);
    auto ln = trace_line(pot, turning_points(pot), 0, 0);
    for (size_t i = 1; i < ln.z.size(); ++i)
      if (std::abs(ln.z[i] - ln.z[0]) >= 1e-3)
        return std::arg(ln.z[i] - ln.z[0]);
    return 0.0;
  };
  double d0 = probe(0.0), d1 = probe(0.05);
  CHECK(adist(d1, d0 - 2 * 0.05 / 3) < 1e-3);
}

TEST_CASE("emission index is checked") {
  auto pot = limit_pot(2, AlphaChoice::unity);
  auto tps = turning_points(pot);
  CHECK_THROWS_AS(trace_line(pot, tps, 0, 3), Error);
}

TEST_CASE("harmonic rotated graph") {
  auto g = build_graph(limit_pot(2, AlphaChoice::rotated));
  REQUIRE(g.sectors.size() == 4);
  CHECK(cyclic_labels(g) == std::vector<int>{1, 2, -1, 0});
  CHECK(g.critical);
  REQUIRE(g.inner_pairs.size() == 1);
  CHECK(g.inner_pairs[0] == std::pair<int, int>{1, -1});

  auto* inner = g.inner_line(1, -1);
  REQUIRE(inner != nullptr);
  CHECK(inner->length() == doctest::Approx(2.0).epsilon(1e-3));
  for (auto z : inner->z) CHECK(std::abs(z.imag()) < 1e-6); // [-1, 1]
  CHECK(g.inner_line(-1, 1) != nullptr);

  CHECK(g.is_inner_member(1));
  CHECK(g.is_inner_member(-1));
  CHECK(!g.is_inner_member(0));
  CHECK(!g.is_inner_member(2));

  // top and bottom sectors hold the decaying directions of exp(sigma
  // lambda I): up the axis the cut branch has Re I < 0, down the axis
  // Re I > 0, so the signs differ
  CHECK(g.sector(0).sigma == 1);
  CHECK(g.sector(2).sigma == -1);
  CHECK(g.sector(1).sigma == 1);
  CHECK(g.sector(-1).sigma == 1);
  for (auto& sec : g.sectors) CHECK(sec.contains_angle(sec.probe_angle));

  CHECK(g.sector_at(pi / 2).label == 0);
  CHECK(g.sector_at(pi).label == 1);
  CHECK_THROWS_AS(g.sector(7), Error);
}

TEST_CASE("cubic graph") {
  auto g = build_graph(limit_pot(3, AlphaChoice::unity));
  REQUIRE(g.sectors.size() == 5);
  CHECK(cyclic_labels(g) == std::vector<int>{3, 1, 2, -1, -3});
  CHECK(g.lines.size() == 9);
  CHECK(g.critical);
  REQUIRE(g.inner_pairs.size() == 1);
  CHECK(g.inner_pairs[0] == std::pair<int, int>{1, -1});

  // two records of the same inner line, one from each endpoint
  int inner_records = 0;
  for (auto& ln : g.lines) inner_records += !ln.to_infinity;
  CHECK(inner_records == 2);
  auto* inner = g.inner_line(1, -1);
  REQUIRE(inner != nullptr);
  // the limit roots sit 120 degrees apart on the unit circle; the line sags,
  // so its arclength slightly exceeds the sqrt(3) chord
  CHECK(inner->length() > 2 * std::sin(pi / 3));
  CHECK(inner->length() == doctest::Approx(1.7423).epsilon(1e-3));

  CHECK(g.sector(3).sigma == 1);
  CHECK(g.sector(1).sigma == -1);
  CHECK(g.sector(2).sigma == -1);
  CHECK(g.sector(-1).sigma == -1);
  CHECK(g.sector(-3).sigma == 1);

  CHECK(g.sector(3).anchor_root == 0);
  CHECK(g.sector(-3).anchor_root == 0);
  CHECK(g.sector(1).anchor_root == 1);
  CHECK(g.sector(2).anchor_root == 1);
  CHECK(g.sector(-1).anchor_root == -1);
}

TEST_CASE("quartic graph") {
  auto g = build_graph(limit_pot(4, AlphaChoice::unity));
  REQUIRE(g.sectors.size() == 6);
  CHECK(cyclic_labels(g) == std::vector<int>{3, 1, 2, -2, -1, -3});
  REQUIRE(g.inner_pairs.size() == 1);
  CHECK(g.inner_pairs[0] == std::pair<int, int>{1, -1});
  // the lone roots at +-i send everything to infinity
  for (auto& ln : g.lines)
    if (ln.origin == 0 || ln.origin == 2) CHECK(ln.to_infinity);
}

TEST_CASE("sector count and pairing across degrees") {
  for (int n = 2; n <= 7; ++n) {
    for (auto ac : {AlphaChoice::unity, AlphaChoice::rotated}) {
      for (double beta : {0.0, 0.9 * pi / n, -0.9 * pi / n}) {
        CAPTURE(n);
        CAPTURE(beta);
        auto g = build_graph(limit_pot(n, ac, beta), Tolerances{},
                             Exec::parallel);
        CHECK(g.lines.size() == size_t(3 * n));
        REQUIRE(g.sectors.size() == size_t(n + 2));

        std::set<int> labels;
        for (auto& sec : g.sectors) labels.insert(sec.label);
        auto table = sector_label_table(n, ac);
        CHECK(labels == std::set<int>(table.begin(), table.end()));

        // sectors cover the circle up to the thin strips between the
        // parallel boundary-line ends
        double total = 0.0;
        for (auto& sec : g.sectors) total += wrap(sec.hi - sec.lo);
        CHECK(total <= 2 * pi + 1e-9);
        CHECK(total > 2 * pi - 0.1);

        auto pairs = limit_pairs(n, ac).pairs;
        if (beta == 0.0) {
          // every symmetric pair is joined by an inner line
          CHECK(g.inner_pairs.size() == pairs.size());
          CHECK(g.critical == !pairs.empty());
          for (auto [a, b] : pairs) CHECK(g.inner_line(a, b) != nullptr);
        } else {
          CHECK(g.inner_pairs.empty());
          CHECK(!g.critical);
          for (auto& ln : g.lines) CHECK(ln.to_infinity);
        }
      }
    }
  }
}

TEST_CASE("conjugation symmetry of the traced lines") {
  // with real b and beta = 0 the configuration is invariant under
  // z -> -conj(z), which maps the line (k, m) system to the (-k, .) one
  auto g = build_graph(limit_pot(5, AlphaChoice::unity));
  for (auto& ln : g.lines) {
    if (!ln.to_infinity) continue;
    bool found = false;
    for (auto& mir : g.lines) {
      if (mir.origin != -ln.origin || !mir.to_infinity) continue;
      if (adist(mir.asym_angle, pi - ln.asym_angle) < 1e-6 &&
          std::abs(mir.length() - ln.length()) < 1e-6)
        found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("probe routing handles sectors fully swept by a cut") {
  // at this phase the horizontal cuts cover whole sectors at probe radii;
  // the decay probe has to exit elsewhere and return along the outer arc
  for (auto ac : {AlphaChoice::unity, AlphaChoice::rotated}) {
    auto g = build_graph(limit_pot(5, ac, 0.565));
    CHECK(g.sectors.size() == 7);
    for (auto& sec : g.sectors) CHECK(std::abs(sec.sigma) == 1);
  }
}

TEST_CASE("serial and parallel builds agree") {
  auto a = build_graph(limit_pot(3, AlphaChoice::unity), Tolerances{},
                       Exec::serial);
  auto b = build_graph(limit_pot(3, AlphaChoice::unity), Tolerances{},
                       Exec::parallel);
  REQUIRE(a.lines.size() == b.lines.size());
  for (size_t i = 0; i < a.lines.size(); ++i) {
    CHECK(a.lines[i].origin == b.lines[i].origin);
    CHECK(a.lines[i].emission == b.lines[i].emission);
    CHECK(a.lines[i].to_infinity == b.lines[i].to_infinity);
    CHECK(std::abs(a.lines[i].length() - b.lines[i].length()) < 1e-12);
  }
  for (size_t i = 0; i < a.sectors.size(); ++i) {
    CHECK(a.sectors[i].label == b.sectors[i].label);
    CHECK(a.sectors[i].sigma == b.sectors[i].sigma);
  }
}

TEST_CASE("exceptional set of the cubic top sector") {
  auto g = build_graph(limit_pot(3, AlphaChoice::unity));
  auto xs = exceptional_set(g, 3, 0.25);
  CHECK(!xs.opposite_excluded);
  REQUIRE(xs.lines_by_root.size() == 3);
  // one shielded line per root, all running to infinity away from the
  // top sector
  std::map<int, double> expect{{-1, 306.3}, {0, 18.1}, {1, 233.7}};
  for (auto& [r, v] : xs.lines_by_root) {
    REQUIRE(v.size() == 1);
    auto& ln = g.lines[v[0]];
    CHECK(ln.to_infinity);
    CHECK(adist(ln.asym_angle, expect.at(r) * pi / 180) < 0.01);
  }
  CHECK(xs.flat().size() == 3);
  REQUIRE(xs.vicinity.size() == 3);
  for (auto& poly : xs.vicinity) CHECK(poly.size() > 10);
}

TEST_CASE("exceptional set at a critical member") {
  auto g = build_graph(limit_pot(2, AlphaChoice::rotated));
  auto xs = exceptional_set(g, 1, 0.2);
  CHECK(xs.opposite_excluded);
  REQUIRE(xs.lines_by_root.at(1).size() == 1);
  CHECK(!g.lines[xs.lines_by_root.at(1)[0]].to_infinity);
  // the opposite root contributes all three of its lines
  CHECK(xs.lines_by_root.at(-1).size() == 3);

  // the non-critical sector 0 instead picks the two shielded bottom lines
  auto x0 = exceptional_set(g, 0, 0.2);
  CHECK(!x0.opposite_excluded);
  std::vector<double> asym;
  for (int idx : x0.flat()) {
    CHECK(g.lines[idx].to_infinity);
    asym.push_back(wrap(g.lines[idx].asym_angle) * 180 / pi);
  }
  std::sort(asym.begin(), asym.end());
  REQUIRE(asym.size() == 2);
  CHECK(asym[0] == doctest::Approx(223.5).epsilon(1e-2));
  CHECK(asym[1] == doctest::Approx(316.5).epsilon(1e-2));
}

TEST_CASE("vicinity radius is capped") {
  auto g = build_graph(limit_pot(3, AlphaChoice::unity));
  CHECK_THROWS_AS(exceptional_set(g, 3, 0.9), Error);
  try {
    exceptional_set(g, 3, 0.9);
  } catch (const Error& e) {
    CHECK(e.code() == "epsilon-too-large");
  }
}

TEST_CASE("critical phase") {
  // no subleading terms: beta = 0 is already critical
  CHECK(critical_phase(3, AlphaChoice::unity, {}, 100, 1) == 0.0);
  CHECK(critical_phase(3, AlphaChoice::unity, {cplx{0, 0}, cplx{0, 0}}, 100,
                       1) == 0.0);

  std::vector<cplx> b{0.5, 0.0}; // b_2 = 0.5
  double phi = critical_phase(3, AlphaChoice::unity, b, 100, 1);
  CHECK(phi != 0.0);

  // the refined phase really makes the pair action purely imaginary
  auto pot =
      RescaledPotential::standard(3, AlphaChoice::unity, b, std::polar(100.0, phi));
  auto tps = turning_points(pot);
  auto cp = CutPlane::build(pot, tps);
  auto act = action_integral(cp, pair_path(cp, 1, -1));
  CHECK(std::abs((pot.lambda * act.value).real()) < 1e-8 * 100);

  // and the graph built there is critical
  auto g = build_graph(pot);
  CHECK(g.critical);
  CHECK(g.inner_line(1, -1) != nullptr);

  // for this pair the first-order correction integral vanishes by the
  // reflection symmetry of the pair path, so the restoring phase decays
  // like |lambda|^{-4/(n+2)} rather than the generic -2/(n+2)
  double phi4 = critical_phase(3, AlphaChoice::unity, b, 400, 1);
  CHECK(std::abs(phi4) < std::abs(phi));
  CHECK(std::abs(phi4 / phi / std::pow(4.0, -0.8) - 1) < 0.05);

  // the second-order coefficient goes like b^2: rotating b by i flips it
  double phii =
      critical_phase(3, AlphaChoice::unity, {cplx{0, 0.5}, 0.0}, 100, 1);
  CHECK(phii * phi < 0);
  CHECK(std::abs(phii / phi + 1) < 0.05);

  CHECK_THROWS_AS(critical_phase(3, AlphaChoice::unity, b, 100, 2), Error);
}
