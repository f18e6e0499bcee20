#include "stokes/branchcut.hpp"

#include <algorithm>
#include <cmath>

namespace stokes {

namespace {

// 7-15 Gauss-Kronrod abscissae and weights (positive half).
const double xgk[8] = {0.991455371120813, 0.949107912342759, 0.864864423359769,
                       0.741531185599394, 0.586087235467691, 0.405845151377397,
                       0.207784955007898, 0.000000000000000};
const double wgk[8] = {0.022935322010529, 0.063092092629979, 0.104790010322250,
                       0.140653259715525, 0.169004726639267, 0.190350578064785,
                       0.204432940075298, 0.209482141084728};
const double wg[4] = {0.129484966168870, 0.279705391489277, 0.381830050505119,
                      0.417959183673469};

template <class F>
void gk15(const F& f, double a, double b, cplx& kval, double& err) {
  double c = 0.5 * (a + b), h = 0.5 * (b - a);
  cplx fc = f(c);
  cplx kacc = wgk[7] * fc;
  cplx gacc = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    cplx f1 = f(c - h * xgk[j]);
    cplx f2 = f(c + h * xgk[j]);
    kacc += wgk[j] * (f1 + f2);
    if (j % 2 == 1) gacc += wg[j / 2] * (f1 + f2);
  }
  kval = kacc * h;
  err = std::abs(kacc - gacc) * std::abs(h);
}

template <class F>
cplx adaptive(const F& f, double a, double b, double tol, double& err_out,
              int depth = 0) {
  cplx v;
  double e;
  gk15(f, a, b, v, e);
  // the estimate cannot drop below rounding noise of the panel value, so a
  // tolerance under that floor would otherwise recurse without bound
  if (e <= tol || e <= 1e-14 * std::abs(v) || depth >= 30) {
    err_out += e;
    return v;
  }
  double m = 0.5 * (a + b);
  return adaptive(f, a, m, 0.5 * tol, err_out, depth + 1) +
         adaptive(f, m, b, 0.5 * tol, err_out, depth + 1);
}

int side_sign(const CutRay& cut, cplx z) {
  double s = (cut.window == CutWindow::up || cut.window == CutWindow::down)
                 ? (z - cut.anchor).real()
                 : (z - cut.anchor).imag();
  return (s > 0) - (s < 0);
}

bool beyond_anchor(const CutRay& cut, cplx p) {
  cplx d = p - cut.anchor;
  switch (cut.window) {
    case CutWindow::left: return d.real() < 0;
    case CutWindow::right: return d.real() > 0;
    case CutWindow::up: return d.imag() > 0;
    case CutWindow::down: return d.imag() < 0;
  }
  return false;
}

} // namespace

double windowed_arg(cplx w, CutWindow window) {
  double a = std::arg(w); // (-pi, pi]
  switch (window) {
    case CutWindow::left: return a;
    case CutWindow::right: return a < 0 ? a + 2 * pi : a;
    case CutWindow::up: return a > pi / 2 ? a - 2 * pi : a;
    case CutWindow::down: return a <= -pi / 2 ? a + 2 * pi : a;
  }
  return a;
}

CutPlane CutPlane::build(const RescaledPotential& pot,
                         const std::vector<TurningPoint>& tps,
                         const Tolerances& tol) {
  CutPlane cp;
  cp.tps = tps;
  cp.lead = pot.w.c[pot.n];
  cp.cuts.resize(tps.size());
  for (size_t i = 0; i < tps.size(); ++i) {
    cp.cuts[i].anchor = tps[i].z;
    cplx lim = tps[i].limit;
    if (std::abs(lim - I) < 1e-9)
      cp.cuts[i].window = CutWindow::up;
    else if (std::abs(lim + I) < 1e-9)
      cp.cuts[i].window = CutWindow::down;
    else
      cp.cuts[i].window =
          lim.real() < 0.0 ? CutWindow::left : CutWindow::right;
  }

  // Global sign: the action from z_1 to z_{-1} over the interior arc has
  // positive imaginary part (matching the elementary pair integral). Without
  // pairs, sqrt(w)(0) is taken in the upper half plane.
  cp.anchor_sign = 1;
  auto pairs = limit_pairs(pot.n, pot.alpha_choice);
  if (!pairs.pairs.empty()) {
    auto path = pair_path(cp, pairs.pairs[0].first, pairs.pairs[0].second);
    Tolerances loose = tol;
    loose.quad_tol = 1e-8;
    auto act = action_integral(cp, path, loose);
    if (act.value.imag() < 0) cp.anchor_sign = -1;
  } else {
    if (sqrt_w_cut(cp, cplx{0.0, 0.0}).imag() < 0) cp.anchor_sign = -1;
  }
  return cp;
}

ComplexPath pair_path(const CutPlane& cp, int label_a, int label_b) {
  cplx za = cp.tps[tp_index(cp.tps, label_a)].z;
  cplx zb = cp.tps[tp_index(cp.tps, label_b)].z;
  double ta = std::arg(za);
  while (ta < pi / 2) ta += 2 * pi;
  double tb = std::arg(zb);
  while (tb > ta) tb -= 2 * pi;
  while (tb + 2 * pi < ta) tb += 2 * pi; // shortest decreasing sweep
  ComplexPath path;
  path.pts.push_back(za);
  const int m = 25;
  for (int j = 1; j < m; ++j) {
    double th = ta + (tb - ta) * j / m;
    path.pts.push_back(0.9 * std::exp(cplx{0.0, th}));
  }
  path.pts.push_back(zb);
  return path;
}

double total_phase(const CutPlane& cp, cplx z) {
  double th = std::arg(cp.lead);
  for (size_t i = 0; i < cp.tps.size(); ++i)
    th += windowed_arg(z - cp.tps[i].z, cp.cuts[i].window);
  if (cp.anchor_sign < 0) th += 2 * pi;
  return th;
}

cplx sqrt_w_cut(const CutPlane& cp, cplx z) {
  double logm = 0.5 * std::log(std::abs(cp.lead));
  for (size_t i = 0; i < cp.tps.size(); ++i)
    logm += 0.5 * std::log(std::abs(z - cp.tps[i].z));
  return std::exp(cplx{logm, 0.5 * total_phase(cp, z)});
}

cplx quarter_w_cut(const CutPlane& cp, cplx z) {
  double logm = -0.25 * std::log(std::abs(cp.lead));
  for (size_t i = 0; i < cp.tps.size(); ++i)
    logm -= 0.25 * std::log(std::abs(z - cp.tps[i].z));
  return std::exp(cplx{logm, -0.25 * total_phase(cp, z)});
}

bool on_cut(const CutPlane& cp, cplx z, double tol) {
  double scale = tol * (1.0 + std::abs(z));
  for (size_t i = 0; i < cp.cuts.size(); ++i) {
    const auto& cut = cp.cuts[i];
    cplx d = z - cut.anchor;
    bool vertical =
        cut.window == CutWindow::up || cut.window == CutWindow::down;
    double off = vertical ? std::abs(d.real()) : std::abs(d.imag());
    double along = vertical ? d.imag() : d.real();
    if (cut.window == CutWindow::left || cut.window == CutWindow::down)
      along = -along;
    if (off < scale && along > -scale) return true;
  }
  return false;
}

std::vector<Crossing> cut_crossings(const CutPlane& cp, cplx a, cplx b,
                                    double nudge) {
  std::vector<Crossing> out;
  cplx dir = b - a;
  double len = std::abs(dir);
  if (len == 0.0) return out;
  cplx u = dir / len;
  for (size_t i = 0; i < cp.cuts.size(); ++i) {
    const auto& cut = cp.cuts[i];
    cplx aa = a, bb = b;
    int sa = side_sign(cut, aa);
    if (sa == 0) {
      aa = a + nudge * u;
      sa = side_sign(cut, aa);
    }
    int sb = side_sign(cut, bb);
    if (sb == 0) {
      bb = b - nudge * u;
      sb = side_sign(cut, bb);
    }
    if (sa == 0 || sb == 0 || sa == sb) continue; // collinear or same side
    bool vertical =
        cut.window == CutWindow::up || cut.window == CutWindow::down;
    double fa = vertical ? (aa - cut.anchor).real() : (aa - cut.anchor).imag();
    double fb = vertical ? (bb - cut.anchor).real() : (bb - cut.anchor).imag();
    double t = fa / (fa - fb);
    cplx p = a + t * (b - a);
    if (!beyond_anchor(cut, p)) continue;
    Crossing c;
    c.cut = (int)i;
    c.t = std::clamp(t, 0.0, 1.0);
    // windowed-arg jump by window and approach side; verified in tests
    switch (cut.window) {
      case CutWindow::left: c.delta = sa > 0 ? -1 : 1; break;
      case CutWindow::right: c.delta = sa > 0 ? 1 : -1; break;
      case CutWindow::up: c.delta = sa > 0 ? -1 : 1; break;
      case CutWindow::down: c.delta = sa > 0 ? 1 : -1; break;
    }
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const Crossing& x, const Crossing& y) { return x.t < y.t; });
  return out;
}

BranchedValue sqrt_w(const CutPlane& cp, cplx z,
                     const std::optional<std::pair<cplx, BranchedValue>>& hint) {
  if (!hint) {
    if (on_cut(cp, z))
      throw Error("ambiguous-branch",
                  "evaluation on a cut requires a continuation hint");
    return {sqrt_w_cut(cp, z), 1};
  }
  auto cross = cut_crossings(cp, hint->first, z);
  int sheet = hint->second.sheet;
  if (cross.size() % 2 == 1) sheet = -sheet;
  return {double(sheet) * sqrt_w_cut(cp, z), sheet};
}

namespace {

int nearest_tp(const CutPlane& cp, cplx z, double tol) {
  for (size_t i = 0; i < cp.tps.size(); ++i)
    if (std::abs(z - cp.tps[i].z) < tol) return (int)i;
  return -1;
}

// One straight piece [p, q] with constant-sheet sub-intervals delimited by
// the crossing positions; reg_p / reg_q request the t^2 endpoint substitution.
cplx segment_integral(const CutPlane& cp, cplx p, cplx q, bool reg_p,
                      bool reg_q, int& sheet, double tol_seg, double& err) {
  if (reg_p && reg_q) {
    cplx m = 0.5 * (p + q);
    cplx v1 = segment_integral(cp, p, m, true, false, sheet, tol_seg / 2, err);
    cplx v2 = segment_integral(cp, m, q, false, true, sheet, tol_seg / 2, err);
    return v1 + v2;
  }
  auto cross = cut_crossings(cp, p, q);
  std::vector<double> ts;
  ts.push_back(0.0);
  for (auto& c : cross) {
    if (c.t <= 1e-14)
      sheet = -sheet; // crossing right at the start: flip before integrating
    else if (c.t < 1.0 - 1e-14)
      ts.push_back(c.t);
  }
  ts.push_back(1.0);

  cplx d = q - p;
  cplx total{0.0, 0.0};
  double tol_sub = tol_seg / (double)(ts.size() - 1);
  for (size_t i = 0; i + 1 < ts.size(); ++i) {
    double t0 = ts[i], t1 = ts[i + 1];
    cplx val;
    if (reg_p) {
      auto f = [&](double tau) {
        cplx y = p + tau * tau * d;
        return 2.0 * tau * d * sqrt_w_cut(cp, y);
      };
      val = adaptive(f, std::sqrt(t0), std::sqrt(t1), tol_sub, err);
    } else if (reg_q) {
      auto f = [&](double tau) {
        cplx y = q - tau * tau * d;
        return 2.0 * tau * d * sqrt_w_cut(cp, y);
      };
      val = adaptive(f, std::sqrt(1.0 - t1), std::sqrt(1.0 - t0), tol_sub, err);
    } else {
      auto f = [&](double t) { return d * sqrt_w_cut(cp, p + t * d); };
      val = adaptive(f, t0, t1, tol_sub, err);
    }
    total += double(sheet) * val;
    if (i + 2 < ts.size()) sheet = -sheet;
  }
  // a crossing at the far end flips the outgoing sheet only
  for (auto& c : cross)
    if (c.t >= 1.0 - 1e-14) sheet = -sheet;
  return total;
}

} // namespace

ActionResult action_integral(const CutPlane& cp, const ComplexPath& path,
                             const Tolerances& tol, int sheet0) {
  if (path.pts.size() < 2)
    throw Error("invalid-path", "need at least two path points");
  ActionResult res;
  res.sheet_end = sheet0;
  int nseg = (int)path.pts.size() - 1;
  double tol_seg = tol.quad_tol / nseg;
  int sheet = sheet0;
  for (int i = 0; i < nseg; ++i) {
    cplx p = path.pts[i], q = path.pts[i + 1];
    bool rp = (i == 0) && nearest_tp(cp, p, 1e-9) >= 0;
    bool rq = (i == nseg - 1) && nearest_tp(cp, q, 1e-9) >= 0;
    res.crossings += (int)cut_crossings(cp, p, q).size();
    res.value += segment_integral(cp, p, q, rp, rq, sheet, tol_seg, res.err);
  }
  res.sheet_end = sheet;
  if (res.err > std::max(tol.quad_tol * 10.0, 1e-9))
    throw Error("quadrature-failure", "action integral did not converge");
  return res;
}

cplx gk_integrate(const std::function<cplx(double)>& f, double a, double b,
                  double tol, double* err) {
  double e = 0.0;
  cplx v = adaptive(f, a, b, tol, e);
  if (err) *err += e;
  return v;
}

cplx closed_form_action(int n, AlphaChoice ac, int k) {
  auto pairs = limit_pairs(n, ac);
  bool ok = false;
  for (auto& pr : pairs.pairs) ok = ok || pr.first == k;
  if (!ok) throw Error("invalid-pair", "no such turning-point pair");
  double theta = ac == AlphaChoice::unity ? 2.0 * k * pi / n : (2.0 * k - 1) * pi / n;
  double beta = std::tgamma(1.5) * std::tgamma(1.0 / n) / std::tgamma(1.5 + 1.0 / n);
  return cplx{0.0, 2.0 / n * std::sin(theta) * beta};
}

} // namespace stokes
