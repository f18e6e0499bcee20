#include "stokes/stokesgraph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <sstream>

#ifdef STOKES_HAVE_OPENMP
#include <omp.h>
#endif

namespace stokes {
namespace {

double wrap2pi(double a) {
  a = std::fmod(a, 2 * pi);
  if (a < 0) a += 2 * pi;
  return a;
}

// distance from a to b going counterclockwise
double ccw_dist(double a, double b) { return wrap2pi(b - a); }

double ang_dist(double a, double b) {
  double d = wrap2pi(a - b);
  return std::min(d, 2 * pi - d);
}

cplx match_branch(cplx s, cplx ref) {
  return std::abs(s - ref) <= std::abs(s + ref) ? s : -s;
}

double dist_seg(cplx a, cplx b, cplx p) {
  cplx d = b - a;
  double L2 = std::norm(d);
  if (L2 == 0.0) return std::abs(p - a);
  double t = std::clamp(((p - a) * std::conj(d)).real() / L2, 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

} // namespace

bool Sector::contains_angle(double theta) const {
  return ccw_dist(lo, theta) <= ccw_dist(lo, hi);
}

double Sector::mid() const { return wrap2pi(lo + 0.5 * ccw_dist(lo, hi)); }

const Sector& StokesGraph::sector(int label) const {
  for (auto& s : sectors)
    if (s.label == label) return s;
  throw Error("unknown-sector", "no sector with label " + std::to_string(label));
}

const Sector& StokesGraph::sector_at(double theta) const {
  for (auto& s : sectors)
    if (s.contains_angle(wrap2pi(theta))) return s;
  throw Error("unknown-sector", "no sector covers the given direction");
}

const StokesLine* StokesGraph::inner_line(int origin, int target) const {
  for (auto& ln : lines)
    if (!ln.to_infinity && ln.origin == origin && ln.target == target)
      return &ln;
  return nullptr;
}

bool StokesGraph::is_inner_member(int k) const {
  for (auto& pr : inner_pairs)
    if (pr.first == k || pr.second == k) return true;
  return false;
}

std::vector<int> ExceptionalSet::flat() const {
  std::vector<int> out;
  for (auto& [r, v] : lines_by_root) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::array<double, 3> emission_angles(const RescaledPotential& pot,
                                      const TurningPoint& tp) {
  double base = std::arg(pot.lambda) + 0.5 * std::arg(pot.dW(tp.z));
  std::array<double, 3> out;
  for (int m = 0; m < 3; ++m)
    out[m] = wrap2pi((pi / 2 - base + m * pi) * (2.0 / 3.0));
  return out;
}

StokesLine trace_line(const RescaledPotential& pot,
                      const std::vector<TurningPoint>& tps, int origin,
                      int emission, const Tolerances& tol) {
  if (emission < 0 || emission > 2)
    throw Error("invalid-emission", "emission index must be 0, 1 or 2");
  const TurningPoint& org = tps[tp_index(tps, origin)];
  cplx lam = pot.lambda;
  double theta = emission_angles(pot, org)[emission];
  cplx dir = std::exp(cplx{0.0, theta});

  StokesLine ln;
  ln.origin = origin;
  ln.emission = emission;
  ln.z.push_back(org.z);
  ln.action.push_back(0.0);
  ln.sqw.push_back(0.0);
  ln.s.push_back(0.0);

  double r0 = 1e-6;
  cplx z = org.z + r0 * dir;
  cplx v = std::sqrt(pot.W(z));
  cplx u = I * std::conj(lam * v) / std::abs(lam * v);
  if ((std::conj(u) * dir).real() < 0) {
    v = -v;
    u = -u;
  }
  cplx A = (2.0 / 3.0) * (z - org.z) * v;
  double s = r0;
  ln.z.push_back(z);
  ln.action.push_back(A);
  ln.sqw.push_back(v);
  ln.s.push_back(s);

  auto f = [&](cplx zz, cplx vref, cplx& v_out) {
    v_out = match_branch(std::sqrt(pot.W(zz)), vref);
    return I * std::conj(lam * v_out) / std::abs(lam * v_out);
  };

  while (true) {
    double kappa =
        std::abs(std::imag(u * pot.dW(z) / (2.0 * pot.W(z))));
    // the action integrand is a square root in the distance to any turning
    // point, including the origin; steps must shrink with that distance or
    // its quadrature error pushes the whole trace off the level line
    double d_min = 1e300;
    for (auto& tp : tps) d_min = std::min(d_min, std::abs(z - tp.z));
    double h = std::min(
        {0.04, 0.35 / std::max(kappa, 1e-12), std::max(0.30 * d_min, 1e-7)});

    cplx v1, v2, v3, v4;
    cplx k1 = f(z, v, v1);
    cplx a1 = v1 * k1;
    cplx k2 = f(z + 0.5 * h * k1, v, v2);
    cplx a2 = v2 * k2;
    cplx k3 = f(z + 0.5 * h * k2, v, v3);
    cplx a3 = v3 * k3;
    cplx k4 = f(z + h * k3, v, v4);
    cplx a4 = v4 * k4;
    cplx z_new = z + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    cplx A_new = A + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    cplx v_new = match_branch(std::sqrt(pot.W(z_new)), v);
    cplx u_new = I * std::conj(lam * v_new) / std::abs(lam * v_new);

    // pull the point back onto Re(lambda * action) = 0 along the normal
    double err = (lam * A_new).real();
    double delta = err / std::abs(lam * v_new);
    z_new += delta * (I * u_new);
    A_new += v_new * (I * u_new) * delta;
    v_new = match_branch(std::sqrt(pot.W(z_new)), v_new);
    u_new = I * std::conj(lam * v_new) / std::abs(lam * v_new);

    if (!std::isfinite(z_new.real()) || !std::isfinite(z_new.imag()))
      throw Error("tracing-stalled",
                  "non-finite state near " + std::to_string(z.real()) + "," +
                      std::to_string(z.imag()));

    // capture test against every other turning point
    for (auto& tp : tps) {
      if (tp.label == origin) continue;
      double d = dist_seg(z, z_new, tp.z);
      ln.min_clearance = std::min(ln.min_clearance, d);
      if (d <= tol.capture_radius) {
        cplx vm = match_branch(std::sqrt(pot.W(0.5 * (z + tp.z))), v);
        ln.z.push_back(tp.z);
        ln.action.push_back(A + vm * (tp.z - z));
        ln.sqw.push_back(match_branch(std::sqrt(pot.W(tp.z)), vm));
        ln.s.push_back(s + std::abs(tp.z - z));
        ln.to_infinity = false;
        ln.target = tp.label;
        return ln;
      }
    }

    if (std::abs(z_new) >= tol.r_max) {
      // land exactly on the exit circle
      cplx d = z_new - z;
      double a2q = std::norm(d);
      double bq = 2.0 * (std::conj(z) * d).real();
      double cq = std::norm(z) - tol.r_max * tol.r_max;
      double t = (-bq + std::sqrt(std::max(0.0, bq * bq - 4 * a2q * cq))) /
                 (2 * a2q);
      t = std::clamp(t, 0.0, 1.0);
      cplx z_exit = z + t * d;
      cplx A_exit = A + t * (A_new - A);
      ln.z.push_back(z_exit);
      ln.action.push_back(A_exit);
      ln.sqw.push_back(match_branch(std::sqrt(pot.W(z_exit)), v_new));
      ln.s.push_back(s + t * std::abs(d));
      ln.to_infinity = true;
      // slot assignment wants the tangent, interval ordering the position
      ln.asym_angle = std::arg(z_exit);
      ln.near_miss = ln.min_clearance < 10.0 * tol.capture_radius;
      return ln;
    }

    z = z_new;
    A = A_new;
    v = v_new;
    u = u_new;
    s += h;
    ln.z.push_back(z);
    ln.action.push_back(A);
    ln.sqw.push_back(v);
    ln.s.push_back(s);

    if (s > 80.0)
      throw Error("tracing-stalled", "arclength budget exhausted at " +
                                         std::to_string(z.real()) + "," +
                                         std::to_string(z.imag()));
  }
}

std::vector<int> sector_label_table(int n, AlphaChoice ac) {
  std::vector<int> L(n + 2, 0);
  std::vector<bool> set(n + 2, false);
  auto put = [&](int m, int lab) {
    if (set[m])
      throw Error("topology-error", "labeling table slot clash");
    L[m] = lab;
    set[m] = true;
  };
  if (ac == AlphaChoice::unity) {
    int top = (n % 2) ? (n + 3) / 2 : (n + 2) / 2;
    put(0, top);
    put(n + 1, -top);
    int K = (n % 2) ? (n - 1) / 2 : (n - 2) / 2;
    for (int k = 1; k <= K; ++k) {
      put(k, k);
      put(n + 1 - k, -k);
    }
    if (n % 2) {
      put((n + 1) / 2, (n + 1) / 2);
    } else {
      put(n / 2, n / 2);
      put(n / 2 + 1, -n / 2);
    }
  } else {
    put(n + 1, 0);
    int K = (n % 2) ? (n - 1) / 2 : n / 2;
    for (int k = 1; k <= K; ++k) {
      put(k - 1, k);
      put(n + 1 - k, -k);
    }
    if (n % 2) {
      put((n - 1) / 2, (n + 1) / 2);
      put((n + 1) / 2, -(n + 1) / 2);
    } else {
      put(n / 2, (n + 2) / 2);
    }
  }
  for (bool b : set)
    if (!b) throw Error("topology-error", "labeling table slot unfilled");
  return L;
}

namespace {

int anchor_for(int n, AlphaChoice ac, int label) {
  int a = std::abs(label);
  if (ac == AlphaChoice::unity) {
    int K = (n % 2) ? (n - 1) / 2 : (n - 2) / 2;
    if (a <= K) return label;
    if (n % 2 == 1 && label == (n + 1) / 2) return (n - 1) / 2;
    if (n % 2 == 0 && a == n / 2) return n / 2;
    return 0; // the +-(n+3)/2 or +-(n+2)/2 sectors hang off the root at i
  }
  int K = (n % 2) ? (n - 1) / 2 : n / 2;
  if (label == 0) return 1;
  if (a <= K) return label;
  if (n % 2 == 0) return n / 2;      // bottom sector of the last pair
  return (n + 1) / 2;                 // sectors beside the root at -i
}

cplx cut_dir(CutWindow w) {
  switch (w) {
    case CutWindow::up: return {0, 1};
    case CutWindow::down: return {0, -1};
    case CutWindow::left: return {-1, 0};
    default: return {1, 0};
  }
}

// does the arc of |z| = r from angle a to angle b (shorter sweep) meet a ray
bool arc_blocked(const CutPlane& cp, double r, double a, double b) {
  double sweep = wrap2pi(b - a);
  if (sweep > pi) sweep -= 2 * pi;
  double margin = 0.01;
  for (auto& cut : cp.cuts) {
    cplx d = cut_dir(cut.window);
    double ad = (std::conj(cut.anchor) * d).real();
    double disc = ad * ad + r * r - std::norm(cut.anchor);
    if (disc < 0) continue;
    for (double t : {-ad + std::sqrt(disc), -ad - std::sqrt(disc)}) {
      if (t < -1e-9) continue;
      double phi = std::arg(cut.anchor + t * d);
      double off = wrap2pi(phi - a);
      if (off > pi) off -= 2 * pi;
      if (sweep >= 0 ? (off > -margin && off < sweep + margin)
                     : (off < margin && off > sweep - margin))
        return true;
    }
  }
  return false;
}

// interior directions of the sector ranked by clearance from the bounding
// directions and the turning-point directions
std::vector<std::pair<double, double>> sector_targets(const StokesGraph& g,
                                                      const Sector& sec) {
  double width = ccw_dist(sec.lo, sec.hi);
  std::vector<std::pair<double, double>> targets;
  int N = 41;
  for (int i = 1; i < N; ++i) {
    double th = wrap2pi(sec.lo + width * i / N);
    double score = std::min(ccw_dist(sec.lo, th), ccw_dist(th, sec.hi));
    for (auto& tp : g.tps)
      score = std::min(score, ang_dist(th, std::arg(tp.z)));
    targets.push_back({score, th});
  }
  std::sort(targets.rbegin(), targets.rend());
  return targets;
}

// Decaying or growing along a route from the anchor root to a far point of
// the sector. The route stays off every cut so the integrand keeps one
// branch; sigma holds at the probe direction, which matters when a cut
// passes through the sector interior.
void sigma_for(const StokesGraph& g, Sector& sec, const Tolerances& tol) {
  double r_out = 6.0;
  auto targets = sector_targets(g, sec);
  for (int pass = 0; pass < 2; ++pass) {
    for (auto& [score, th] : targets) {
      auto route = sector_route(g, sec, r_out * std::exp(cplx{0.0, th}), tol,
                                pass == 1);
      if (!route) continue;
      sec.sigma = (g.pot.lambda * route->action).real() < 0 ? 1 : -1;
      sec.probe_angle = th;
      return;
    }
  }
  throw Error("topology-error", "no cut-free probe route into sector " +
                                    std::to_string(sec.label));
}

} // namespace

bool ray_blocked(const CutPlane& cp, double theta, double r_lo, double r_hi) {
  cplx e = std::exp(cplx{0.0, theta});
  for (auto& cut : cp.cuts) {
    cplx d = cut_dir(cut.window);
    // solve cut.anchor + t*d = r*e for (t, r)
    double det = d.real() * e.imag() - d.imag() * e.real();
    if (std::abs(det) < 1e-12) continue;
    double t =
        (-cut.anchor.real() * e.imag() + cut.anchor.imag() * e.real()) / det;
    double r =
        (d.real() * cut.anchor.imag() - d.imag() * cut.anchor.real()) / det;
    if (t >= -1e-9 && r >= r_lo * 0.9 && r <= r_hi * 1.02) return true;
  }
  return false;
}

std::optional<SectorRoute> sector_route(const StokesGraph& g, const Sector& sec,
                                        cplx z_to, const Tolerances& tol,
                                        bool allow_detour) {
  const auto& tps = g.tps;
  cplx za = tps[tp_index(tps, sec.anchor_root)].z;
  double r_min = 1e300;
  for (auto& tp : tps) r_min = std::min(r_min, std::abs(tp.z));
  double r_in = 0.85 * r_min;
  double r_t = std::abs(z_to);
  double th = wrap2pi(std::arg(z_to));
  double a0 = std::arg(za);
  if (r_t <= r_in) return std::nullopt;

  auto attempt = [&](double th_exit) -> std::optional<SectorRoute> {
    ComplexPath path;
    path.pts.push_back(za);
    path.pts.push_back(r_in * std::exp(cplx{0.0, a0}));
    double sweep = wrap2pi(th_exit - a0);
    if (sweep > pi) sweep -= 2 * pi;
    for (int s = 1; s <= 24; ++s)
      path.pts.push_back(r_in * std::exp(cplx{0.0, a0 + sweep * s / 24}));
    double osweep = wrap2pi(th - th_exit);
    if (osweep > pi) osweep -= 2 * pi;
    if (std::abs(osweep) > 1e-12) {
      path.pts.push_back(r_t * std::exp(cplx{0.0, th_exit}));
      for (int s = 1; s < 24; ++s)
        path.pts.push_back(
            r_t * std::exp(cplx{0.0, th_exit + osweep * s / 24}));
    }
    path.pts.push_back(z_to);
    auto act = action_integral(g.cuts, path, tol);
    if (act.crossings != 0) return std::nullopt;
    return SectorRoute{std::move(path), act.value};
  };

  // direct corridor first; a horizontal cut can sweep every direction in the
  // sector at these radii, so fall back to exiting through a clear direction
  // elsewhere and returning along the outer arc
  if (!ray_blocked(g.cuts, th, r_in, r_t))
    if (auto r = attempt(th)) return r;
  if (!allow_detour) return std::nullopt;
  for (int j = 1; j < 96; ++j) {
    double th_exit =
        wrap2pi(th + (j % 2 ? 1 : -1) * ((j + 1) / 2) * (2 * pi / 96));
    if (ray_blocked(g.cuts, th_exit, r_in, r_t)) continue;
    if (arc_blocked(g.cuts, r_t, th_exit, th)) continue;
    if (auto r = attempt(th_exit)) return r;
  }
  return std::nullopt;
}

cplx seed_point(const StokesGraph& g, int k, double r, const Tolerances& tol) {
  const Sector& sec = g.sector(k);
  std::vector<double> cand{sec.probe_angle};
  for (auto& [score, th] : sector_targets(g, sec)) cand.push_back(th);
  for (double th : cand) {
    if (ray_blocked(g.cuts, th, r, 1e9)) continue;
    auto route = sector_route(g, sec, r * std::exp(cplx{0.0, th}), tol, true);
    if (!route) continue;
    // the stored sigma describes the probe side of any in-sector cut; a
    // direction where it would grow sits on the other side
    if ((double(sec.sigma) * (g.pot.lambda * route->action)).real() >= 0.0)
      continue;
    return r * std::exp(cplx{0.0, th});
  }
  throw Error("topology-error",
              "no seedable direction in sector " + std::to_string(k));
}

StokesGraph build_graph(const RescaledPotential& pot, const Tolerances& tol,
                        Exec exec) {
  StokesGraph g;
  g.pot = pot;
  g.tps = turning_points(pot, tol);
  g.cuts = CutPlane::build(pot, g.tps, tol);
  int n = pot.n;
  g.lines.resize(3 * n);

  std::exception_ptr eptr = nullptr;
  if (exec == Exec::parallel) {
#ifdef STOKES_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < 3 * n; ++i) {
      try {
        g.lines[i] = trace_line(pot, g.tps, g.tps[i / 3].label, i % 3, tol);
      } catch (...) {
#ifdef STOKES_HAVE_OPENMP
#pragma omp critical
#endif
        if (!eptr) eptr = std::current_exception();
      }
    }
  } else {
    for (int i = 0; i < 3 * n; ++i) {
      try {
        g.lines[i] = trace_line(pot, g.tps, g.tps[i / 3].label, i % 3, tol);
      } catch (...) {
        if (!eptr) eptr = std::current_exception();
        break;
      }
    }
  }
  if (eptr) std::rethrow_exception(eptr);

  // inner pairs, deduplicated with the positive label first
  for (auto& ln : g.lines) {
    if (ln.to_infinity) continue;
    int a = ln.origin, b = ln.target;
    if (a < b) std::swap(a, b);
    bool seen = false;
    for (auto& pr : g.inner_pairs) seen = seen || (pr.first == a && pr.second == b);
    if (!seen) g.inner_pairs.push_back({a, b});
  }
  std::sort(g.inner_pairs.begin(), g.inner_pairs.end());
  g.critical = !g.inner_pairs.empty();

  // angular slots from the leading-order asymptotic directions
  double beta = pot.beta();
  double base = pi / 2 +
                (pot.alpha_choice == AlphaChoice::rotated ? pi / (n + 2) : 0.0) -
                2.0 * beta / (n + 2);
  double spacing = 2 * pi / (n + 2);
  std::vector<std::vector<std::pair<double, int>>> slots(n + 2);
  std::ostringstream dump;
  bool bad = false;
  for (size_t i = 0; i < g.lines.size(); ++i) {
    auto& ln = g.lines[i];
    if (!ln.to_infinity) continue;
    size_t m = ln.z.size();
    double tangent = std::arg(ln.z[m - 1] - ln.z[m - 2]);
    double rel = wrap2pi(tangent - base);
    int j = (int)std::lround(rel / spacing) % (n + 2);
    double miss = ang_dist(tangent, base + j * spacing);
    if (miss > 0.45 * spacing) {
      bad = true;
      dump << " line " << i << " tangent " << tangent << " misses slots;";
    }
    slots[j].push_back({wrap2pi(ln.asym_angle), (int)i});
  }
  for (int j = 0; j < n + 2; ++j)
    if (slots[j].empty()) {
      bad = true;
      dump << " slot " << j << " empty;";
    }
  if (bad)
    throw Error("topology-error", "sector assembly failed:" + dump.str());

  // order the ends of a slot by their offset across the common direction
  for (int j = 0; j < n + 2; ++j) {
    double ref = wrap2pi(base + j * spacing);
    std::sort(slots[j].begin(), slots[j].end(),
              [&](const auto& a, const auto& b) {
                double da = wrap2pi(a.first - ref + pi) - pi;
                double db = wrap2pi(b.first - ref + pi) - pi;
                return da < db;
              });
  }

  auto labels = sector_label_table(n, pot.alpha_choice);
  for (int j = 0; j < n + 2; ++j) {
    const auto& lo_end = slots[j].back();
    const auto& hi_end = slots[(j + 1) % (n + 2)].front();
    Sector sec;
    sec.label = labels[j];
    sec.lo = lo_end.first;
    sec.hi = hi_end.first;
    sec.bounding = {lo_end.second, hi_end.second};
    sec.anchor_root = anchor_for(n, pot.alpha_choice, sec.label);
    g.sectors.push_back(sec);
  }
  for (auto& sec : g.sectors) sigma_for(g, sec, tol);
  return g;
}

// ---------------------------------------------------------------------------
// faces of the plane cut along one connected component of the graph

namespace {

struct WebEdge {
  int rec;       // representative line record
  int va, vb;    // vertex ids; vb may be the infinity vertex
  double dep_a;  // departure angle at va
  double dep_b;  // departure angle at vb (at infinity: reversed, see below)
};

struct Faces {
  std::vector<WebEdge> edges;
  int nfaces = 0;
  std::vector<int> face_fwd;   // face left of a->b
  std::vector<int> face_rev;   // face left of b->a
  std::vector<std::pair<std::pair<double, double>, int>> sky; // interval->face
  std::vector<int> cost;

  int face_of_direction(double theta) const {
    for (auto& [iv, f] : sky)
      if (ccw_dist(iv.first, wrap2pi(theta)) <= ccw_dist(iv.first, iv.second))
        return f;
    return -1;
  }
};

// component of the graph containing `root`, as deduplicated edges
Faces build_faces(const StokesGraph& g, int root) {
  // collect component roots through inner links
  std::vector<int> comp = {root};
  bool grew = true;
  while (grew) {
    grew = false;
    for (auto& ln : g.lines) {
      if (ln.to_infinity) continue;
      bool ao = std::find(comp.begin(), comp.end(), ln.origin) != comp.end();
      bool bo = std::find(comp.begin(), comp.end(), ln.target) != comp.end();
      if (ao != bo) {
        comp.push_back(ao ? ln.target : ln.origin);
        grew = true;
      }
    }
  }
  std::sort(comp.begin(), comp.end());

  auto vid = [&](int label) {
    return (int)(std::find(comp.begin(), comp.end(), label) - comp.begin());
  };
  int INF = (int)comp.size();

  Faces F;
  for (size_t i = 0; i < g.lines.size(); ++i) {
    auto& ln = g.lines[i];
    if (std::find(comp.begin(), comp.end(), ln.origin) == comp.end()) continue;
    // inner lines carry two records; keep the one traced from the higher label
    if (!ln.to_infinity && ln.origin < ln.target &&
        g.inner_line(ln.target, ln.origin) != nullptr)
      continue;
    WebEdge e;
    e.rec = (int)i;
    e.va = vid(ln.origin);
    e.dep_a = std::arg(ln.z[1] - ln.z[0]);
    if (ln.to_infinity) {
      e.vb = INF;
      e.dep_b = wrap2pi(-ln.asym_angle); // orientation reverses at infinity
    } else {
      e.vb = vid(ln.target);
      size_t m = ln.z.size();
      e.dep_b = std::arg(ln.z[m - 2] - ln.z[m - 1]);
    }
    F.edges.push_back(e);
  }

  int E = (int)F.edges.size();
  // half-edge h: 2*e (a->b) and 2*e+1 (b->a); from-vertex and departure angle
  auto from_v = [&](int h) {
    return h % 2 == 0 ? F.edges[h / 2].va : F.edges[h / 2].vb;
  };
  auto dep = [&](int h) {
    return h % 2 == 0 ? F.edges[h / 2].dep_a : F.edges[h / 2].dep_b;
  };
  // rotation: per vertex, departing half-edges sorted counterclockwise
  std::vector<std::vector<int>> rot(INF + 1);
  for (int h = 0; h < 2 * E; ++h) rot[from_v(h)].push_back(h);
  for (auto& v : rot)
    std::sort(v.begin(), v.end(), [&](int a, int b) {
      return wrap2pi(dep(a)) < wrap2pi(dep(b));
    });
  // next half-edge of the face: rotation predecessor of the twin
  auto face_next = [&](int h) {
    int t = h ^ 1;
    auto& v = rot[from_v(t)];
    auto it = std::find(v.begin(), v.end(), t);
    return it == v.begin() ? v.back() : *(it - 1);
  };

  F.face_fwd.assign(E, -1);
  F.face_rev.assign(E, -1);
  std::vector<int> face_of(2 * E, -1);
  for (int h0 = 0; h0 < 2 * E; ++h0) {
    if (face_of[h0] >= 0) continue;
    int f = F.nfaces++;
    int h = h0;
    do {
      face_of[h] = f;
      if (h % 2 == 0)
        F.face_fwd[h / 2] = f;
      else
        F.face_rev[h / 2] = f;
      // sky corner: consecutive infinity passage h (into INF) -> next (out)
      int nx = face_next(h);
      int into = h;
      if ((into % 2 == 0 ? F.edges[into / 2].vb : F.edges[into / 2].va) ==
              INF &&
          from_v(nx) == INF) {
        auto& e_in = F.edges[into / 2];
        auto& e_out = F.edges[nx / 2];
        auto& li = g.lines[e_in.rec];
        auto& lo = g.lines[e_out.rec];
        F.sky.push_back({{wrap2pi(li.asym_angle), wrap2pi(lo.asym_angle)}, f});
      }
      h = nx;
    } while (h != h0);
  }

  return F;
}

void bfs_costs(Faces& F, int home) {
  F.cost.assign(F.nfaces, -1);
  F.cost[home] = 0;
  std::vector<int> q = {home};
  for (size_t qi = 0; qi < q.size(); ++qi) {
    int f = q[qi];
    for (size_t e = 0; e < F.edges.size(); ++e) {
      int fa = F.face_fwd[e], fb = F.face_rev[e];
      int other = -1;
      if (fa == f) other = fb;
      else if (fb == f) other = fa;
      if (other >= 0 && F.cost[other] < 0) {
        F.cost[other] = F.cost[f] + 1;
        q.push_back(other);
      }
    }
  }
}

} // namespace

ExceptionalSet exceptional_set(const StokesGraph& graph, int k, double eps,
                               const Tolerances& tol) {
  double min_pair = 1e300;
  for (size_t i = 0; i < graph.tps.size(); ++i)
    for (size_t j = i + 1; j < graph.tps.size(); ++j)
      min_pair = std::min(min_pair,
                          std::abs(graph.tps[i].z - graph.tps[j].z));
  if (eps >= 0.5 * min_pair)
    throw Error("epsilon-too-large",
                "vicinity radius exceeds half the turning-point spacing");
  ExceptionalSet xs;
  xs.k = k;
  xs.eps = eps;
  double theta_k = graph.sector(k).mid();

  int opp = -k;
  bool critical_member = graph.is_inner_member(k);

  for (auto& tp : graph.tps) {
    int r = tp.label;
    std::vector<int> chosen;
    if (critical_member && r == opp) {
      for (size_t i = 0; i < graph.lines.size(); ++i)
        if (graph.lines[i].origin == r) chosen.push_back((int)i);
      xs.opposite_excluded = true;
    } else if (critical_member && r == k) {
      for (size_t i = 0; i < graph.lines.size(); ++i)
        if (graph.lines[i].origin == r && !graph.lines[i].to_infinity)
          chosen.push_back((int)i);
    } else {
      Faces F = build_faces(graph, r);
      int home = F.face_of_direction(theta_k);
      if (home < 0)
        throw Error("topology-error", "no face covers the home direction");
      bfs_costs(F, home);
      int best = -1, best_cost = 0;
      for (size_t e = 0; e < F.edges.size(); ++e) {
        auto& ln = graph.lines[F.edges[e].rec];
        if (ln.origin != r && !(!ln.to_infinity && ln.target == r)) continue;
        int c = std::min(F.cost[F.face_fwd[e]], F.cost[F.face_rev[e]]);
        if (c > best_cost ||
            (c == best_cost && best >= 0 &&
             F.cost[F.face_fwd[e]] + F.cost[F.face_rev[e]] >
                 F.cost[F.face_fwd[best]] + F.cost[F.face_rev[best]])) {
          best_cost = c;
          best = (int)e;
        }
      }
      if (best < 0 || best_cost < 1)
        throw Error("topology-error",
                    "no shielded line at root " + std::to_string(r));
      chosen.push_back(F.edges[best].rec);
    }
    xs.lines_by_root[r] = chosen;
  }

  // vicinity polygons, trimmed eps short of the turning points
  for (auto& [r, v] : xs.lines_by_root) {
    for (int idx : v) {
      auto& ln = graph.lines[idx];
      size_t lo = 0, hi = ln.z.size() - 1;
      while (lo < hi && std::abs(ln.z[lo] - ln.z.front()) < eps) ++lo;
      if (!ln.to_infinity)
        while (hi > lo && std::abs(ln.z[hi] - ln.z.back()) < eps) --hi;
      if (hi - lo < 2) {
        xs.vicinity.push_back({});
        continue;
      }
      std::vector<cplx> fwd, bwd;
      for (size_t i = lo; i <= hi; ++i) {
        cplx t = ln.z[std::min(i + 1, hi)] - ln.z[i == lo ? lo : i - 1];
        cplx nrm = I * t / std::abs(t);
        fwd.push_back(ln.z[i] + eps * nrm);
        bwd.push_back(ln.z[i] - eps * nrm);
      }
      std::reverse(bwd.begin(), bwd.end());
      fwd.insert(fwd.end(), bwd.begin(), bwd.end());
      xs.vicinity.push_back(fwd);
    }
  }
  return xs;
}

double critical_phase(int n, AlphaChoice ac, const std::vector<cplx>& b,
                      double abs_lambda, int k0, const Tolerances& tol) {
  cplx Ik = closed_form_action(n, ac, k0); // validates the pair
  if (std::abs(Ik) < 1e-12)
    throw Error("invalid-pair", "degenerate pair action");

  bool all_zero = true;
  for (auto& c : b) all_zero = all_zero && c == cplx{0.0, 0.0};
  if (b.empty() || all_zero) return 0.0;

  auto pot0 = RescaledPotential::standard(n, ac, b, abs_lambda);

  // leading order: the phase that cancels the real part the subleading
  // coefficient adds to the pair action
  double guess = 0.0;
  {
    auto lim = RescaledPotential::standard(n, ac, {}, abs_lambda);
    auto tps = turning_points(lim, tol);
    auto cp = CutPlane::build(lim, tps, tol);
    auto path = pair_path(cp, k0, -k0);
    // int y^{n-1} / sqrt(w); the route avoids every cut, so the principal
    // sheet applies pointwise. Square-root substitution tames the endpoints.
    cplx J = 0.0;
    for (size_t seg = 0; seg + 1 < path.pts.size(); ++seg) {
      cplx p = path.pts[seg], q = path.pts[seg + 1], d = q - p;
      bool rp = std::abs(lim.W(p)) < 1e-9, rq = std::abs(lim.W(q)) < 1e-9;
      auto val = [&](double t) {
        cplx y = p + t * d;
        return std::pow(y, n - 1) / sqrt_w_cut(cp, y) * d;
      };
      int N = 600;
      cplx acc = 0.0;
      for (int i = 0; i < N; ++i) {
        double um = (i + 0.5) / N, du = 1.0 / N;
        double t, wgt;
        if (rp && !rq) {
          t = um * um;
          wgt = du * 2 * um;
        } else if (rq && !rp) {
          t = 1 - um * um;
          wgt = du * 2 * um;
        } else {
          t = um;
          wgt = du;
        }
        acc += val(t) * wgt;
      }
      J += acc;
    }
    cplx bp = pot0.b_prime(n - 1);
    cplx mi = std::exp(cplx{0.0, -pi / 2}) * pot0.alpha; // -i alpha
    cplx fac = bp * std::pow(mi, n - 2) * J;
    guess = -(fac.real()) / (2.0 * n * (I * Ik).real()) *
            std::pow(abs_lambda, -2.0 / (n + 2));
  }

  // refine so the actual pair action is purely imaginary
  auto residual = [&](double beta) {
    cplx lam = abs_lambda * std::exp(cplx{0.0, beta});
    auto pot = RescaledPotential::standard(n, ac, b, lam);
    auto tps = turning_points(pot, tol);
    auto cp = CutPlane::build(pot, tps, tol);
    auto act = action_integral(cp, pair_path(cp, k0, -k0), tol);
    return (lam * act.value).real();
  };

  double b0 = guess, b1 = guess + std::max(1e-3 * std::abs(guess), 1e-6);
  double f0 = residual(b0), f1 = residual(b1);
  for (int it = 0; it < 40 && std::abs(f1) > 1e-10 * abs_lambda; ++it) {
    if (f1 == f0) break;
    double b2 = b1 - f1 * (b1 - b0) / (f1 - f0);
    b0 = b1;
    f0 = f1;
    b1 = b2;
    f1 = residual(b1);
  }
  if (std::abs(f1) > 1e-6)
    throw Error("invalid-pair", "critical phase refinement did not converge");
  return b1;
}

} // namespace stokes
