#include "stokes/zeroloci.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <tuple>

#ifdef STOKES_HAVE_OPENMP
#include <omp.h>
#endif

namespace stokes {

namespace {

cplx unitv(cplx z) {
  double a = std::abs(z);
  return a > 0.0 ? z / a : cplx{1.0, 0.0};
}

// ---------------------------------------------------------------------------
// Line frames. A traced line carries its own continuous branch of sqrt(w);
// everything here re-expresses that branch as a sheet chain over the cut
// plane, with the cumulative action re-integrated segment by segment to
// quadrature accuracy (the tracer's running action carries ODE-step error,
// which is too coarse for island targets).

struct LineFrame {
  const StokesGraph* g = nullptr;
  const StokesLine* ln = nullptr;
  int index = -1;
  cplx eib{1.0, 0.0}; // lambda / |lambda|
  int s_line = 1;     // sign of growth of Im(e^{i beta} action) along the line
  std::vector<cplx> A;    // refined cumulative action per sample
  std::vector<int> sheet; // sheet (vs the principal cut branch) per sample
};

LineFrame make_frame(const StokesGraph& g, int index, const Tolerances& tol) {
  LineFrame f;
  f.g = &g;
  f.ln = &g.lines.at(size_t(index));
  f.index = index;
  const StokesLine& ln = *f.ln;
  if (ln.z.size() < 3)
    throw Error("topology-error", "line " + std::to_string(index) +
                                      " has too few samples to frame");
  f.eib = unitv(g.pot.lambda);

  // the sheet leaving the turning point is fixed by matching the tracer's
  // own first action sample; both are small but far above quadrature noise
  ComplexPath first;
  first.pts = {ln.z[0], ln.z[1]};
  cplx t = action_integral(g.cuts, first, tol, 1).value;
  int sh = std::abs(t - ln.action[1]) <= std::abs(t + ln.action[1]) ? 1 : -1;

  f.A.resize(ln.z.size());
  f.sheet.resize(ln.z.size());
  f.A[0] = 0.0;
  f.sheet[0] = sh;
  for (size_t i = 0; i + 1 < ln.z.size(); ++i) {
    ComplexPath seg;
    seg.pts = {ln.z[i], ln.z[i + 1]};
    ActionResult r = action_integral(g.cuts, seg, tol, sh);
    f.A[i + 1] = f.A[i] + r.value;
    sh = r.sheet_end;
    f.sheet[i + 1] = sh;
  }
  f.s_line = (f.eib * f.A.back()).imag() >= 0.0 ? 1 : -1;
  return f;
}

// anchor sample for short-chord action evaluations: off every cut and away
// from the origin turning point, else fall back to the turning point itself
size_t usable_base(const LineFrame& f, size_t bi) {
  const StokesLine& ln = *f.ln;
  auto ok = [&](size_t j) {
    if (j < 1 || j >= ln.z.size()) return false;
    if (on_cut(f.g->cuts, ln.z[j], 1e-9)) return false;
    return std::abs(ln.sqw[j]) > 1e-8;
  };
  for (size_t d = 0; d < 8; ++d) {
    if (bi >= d && ok(bi - d)) return bi - d;
    if (ok(bi + d)) return bi + d;
  }
  return 0;
}

struct ActionAt {
  cplx A;
  cplx sqw; // line-branch sqrt(w) at the point
};

ActionAt line_action_at(const LineFrame& f, size_t base, cplx zeta,
                        const Tolerances& tol) {
  const StokesLine& ln = *f.ln;
  ComplexPath seg;
  seg.pts = {ln.z[base], zeta};
  ActionResult r = action_integral(f.g->cuts, seg, tol, f.sheet[base]);
  return {f.A[base] + r.value,
          double(r.sheet_end) * sqrt_w_cut(f.g->cuts, zeta)};
}

struct LinePoint {
  cplx z;
  cplx sqw;
  size_t base;
};

// Solve action(zeta) = target along the line: bracket on the refined
// cumulative action (Im(e^{i beta} A) is monotone along a level line), then
// complex Newton with derivative sqrt(w).
LinePoint invert_on_line(const LineFrame& f, cplx target,
                         const Tolerances& tol) {
  const StokesLine& ln = *f.ln;
  double gT = (f.eib * target).imag();
  size_t bi = ln.z.size();
  double gp = 0.0;
  for (size_t i = 1; i < ln.z.size(); ++i) {
    double gi = (f.eib * f.A[i]).imag();
    if ((gT - gp) * (gT - gi) <= 0.0) {
      bi = i - 1;
      break;
    }
    gp = gi;
  }
  if (bi == ln.z.size())
    throw Error("island-out-of-range",
                "target action " + std::to_string(gT) +
                    " beyond the traced range " +
                    std::to_string((f.eib * f.A.back()).imag()) + " of line " +
                    std::to_string(f.index));

  double ga = (f.eib * f.A[bi]).imag();
  double gb = (f.eib * f.A[bi + 1]).imag();
  double w = (gb != ga) ? (gT - ga) / (gb - ga) : 0.5;
  cplx zeta = ln.z[bi] + w * (ln.z[bi + 1] - ln.z[bi]);
  size_t base = usable_base(f, bi);

  for (int it = 0; it < 40; ++it) {
    ActionAt aa = line_action_at(f, base, zeta, tol);
    cplx res = aa.A - target;
    if (std::abs(res) <= 5e-12 * (1.0 + std::abs(target)))
      return {zeta, aa.sqw, base};
    if (std::abs(aa.sqw) < 1e-9)
      throw Error("inversion-failure", "sqrt(w) vanishes at the iterate");
    zeta -= res / aa.sqw;
  }
  throw Error("inversion-failure",
              "newton on the line action stalled on line " +
                  std::to_string(f.index));
}

// sup over directions of |int sqrt(w)| out to radius eps from the turning
// point; scaled by |lambda| / pi this bounds the r index below which the
// near-root island formulas degenerate
double vicinity_bound(const CutPlane& cp, cplx ztp, double eps,
                      const Tolerances& tol) {
  double best = 0.0;
  for (int j = 0; j < 64; ++j) {
    double phi = 2.0 * pi * double(j) / 64.0;
    ComplexPath p;
    p.pts = {ztp, ztp + eps * cplx(std::cos(phi), std::sin(phi))};
    best = std::max(best, std::abs(action_integral(cp, p, tol, 1).value));
  }
  return best;
}

// (1/8) closed contour of X_1 around the turning point through zeta, divided
// by the line-branch sqrt(w) there. The branch is chained around the circle;
// X_1 flips with sqrt(w), so the chained product is smooth and periodic and
// the trapezoid sum converges spectrally. Both the contour and the division
// flip together under a global branch swap, so the result is branch-free.
cplx zeta2_contour(const SemiclassicalSeries& series, const CutPlane& cp,
                   cplx ztp, cplx zeta, cplx sqw_at_zeta) {
  double rho = std::abs(zeta - ztp);
  double th0 = std::arg(zeta - ztp);
  const int M = 512;
  cplx cutv = sqrt_w_cut(cp, zeta);
  int c = std::abs(cutv - sqw_at_zeta) <= std::abs(cutv + sqw_at_zeta) ? 1 : -1;
  cplx prev = double(c) * cutv;
  cplx acc{0.0, 0.0};
  for (int j = 0; j < M; ++j) {
    double th = th0 + 2.0 * pi * double(j) / double(M);
    cplx z = ztp + rho * cplx(std::cos(th), std::sin(th));
    cplx pv = sqrt_w_cut(cp, z);
    if (std::abs(pv - prev) > std::abs(pv + prev)) c = -c;
    prev = double(c) * pv;
    cplx dz = I * (z - ztp) * (2.0 * pi / double(M));
    acc += double(c) * series.X(1, z) * dz;
  }
  return acc / (8.0 * sqw_at_zeta);
}

// ---------------------------------------------------------------------------
// Zero search engine

struct Escape {}; // newton iterate left its cell; caller splits further

// |psi'/psi| bounds |d arg psi / ds| in every direction, so an interval of
// length h can only alias a full turn if h * rate is order one; requiring
// h * rate small makes the principal-value reading trustworthy
double phase_rate(const TraceSample& s) {
  double au = std::abs(s.u);
  return au > 0.0 ? std::abs(s.du) / au : 1e300;
}

double edge_sweep(const FieldEval& f, cplx za, const TraceSample& sa, cplx zb,
                  const TraceSample& sb, int depth) {
  if (std::abs(sa.u) == 0.0 || std::abs(sb.u) == 0.0)
    throw Error("unresolved-cell", "zero sits on a cell edge");
  double h = std::abs(zb - za);
  double d = std::arg(sb.u / sa.u);
  if (std::abs(d) <= 0.5 * pi &&
      h * std::max(phase_rate(sa), phase_rate(sb)) <= 1.2)
    return d;
  if (depth >= 40)
    throw Error("unresolved-cell", "edge argument did not settle");
  cplx zm = 0.5 * (za + zb);
  TraceSample sm = f(zm);
  return edge_sweep(f, za, sa, zm, sm, depth + 1) +
         edge_sweep(f, zm, sm, zb, sb, depth + 1);
}

int cell_winding(const FieldEval& f, cplx lo, cplx hi) {
  cplx c[5] = {lo, cplx(hi.real(), lo.imag()), hi, cplx(lo.real(), hi.imag()),
               lo};
  TraceSample u[5];
  for (int j = 0; j < 4; ++j) u[j] = f(c[j]);
  u[4] = u[0];
  double tot = 0.0;
  for (int j = 0; j < 4; ++j)
    tot += edge_sweep(f, c[j], u[j], c[j + 1], u[j + 1], 0);
  double w = tot / (2.0 * pi);
  long wi = std::lround(w);
  if (std::abs(w - double(wi)) > 1e-3 || wi < 0)
    throw Error("unresolved-cell", "boundary winding is not a clean integer");
  return int(wi);
}

ZeroObservation polish(const FieldEval& f, cplx z0, cplx lo, cplx hi, int mult,
                       const Tolerances& tol) {
  cplx z = z0;
  double diam = std::abs(hi - lo);
  double mx = 0.3 * (hi.real() - lo.real());
  double my = 0.3 * (hi.imag() - lo.imag());
  for (int it = 0; it < 60; ++it) {
    TraceSample s = f(z);
    if (std::abs(s.du) == 0.0)
      throw Error("unresolved-cell", "derivative vanished while polishing");
    cplx step = double(mult) * s.u / s.du;
    if (std::abs(step) > 0.5 * diam) step *= 0.5 * diam / std::abs(step);
    z -= step;
    if (z.real() < lo.real() - mx || z.real() > hi.real() + mx ||
        z.imag() < lo.imag() - my || z.imag() > hi.imag() + my)
      throw Escape{};
    if (std::abs(step) <= 0.5 * tol.newton_tol) {
      // only a zero strictly inside this cell may be claimed by it; one that
      // converged just outside belongs to a neighbour, so split instead
      if (z.real() < lo.real() || z.real() > hi.real() ||
          z.imag() < lo.imag() || z.imag() > hi.imag())
        throw Escape{};
      TraceSample v = f(z);
      double res =
          std::abs(v.du) > 0.0 ? std::abs(v.u / v.du) : std::abs(v.u);
      return {z, mult, res};
    }
  }
  throw Error("unresolved-cell", "newton did not converge in a unit cell");
}

void collect(const FieldEval& f, cplx lo, cplx hi, int depth, int max_depth,
             const Tolerances& tol, std::vector<ZeroObservation>& out) {
  int w = cell_winding(f, lo, hi);
  if (w == 0) return;
  cplx ctr = 0.5 * (lo + hi);
  if (w == 1 || depth >= max_depth) {
    try {
      out.push_back(polish(f, ctr, lo, hi, w, tol));
      return;
    } catch (const Escape&) {
      if (depth >= max_depth)
        throw Error("unresolved-cell", "zero escaped its cell at the depth limit");
      // fall through and split
    }
  }
  // quadrisect; a split line through a zero shows up as a child failure or a
  // winding mismatch, both retried with a nudged split point
  const double frs[3] = {0.5, 0.53, 0.47};
  std::string why = "cell did not split cleanly";
  for (double fr : frs) {
    cplx mid(lo.real() + fr * (hi.real() - lo.real()),
             lo.imag() + fr * (hi.imag() - lo.imag()));
    std::vector<ZeroObservation> tmp;
    try {
      collect(f, lo, mid, depth + 1, max_depth, tol, tmp);
      collect(f, cplx(mid.real(), lo.imag()), cplx(hi.real(), mid.imag()),
              depth + 1, max_depth, tol, tmp);
      collect(f, cplx(lo.real(), mid.imag()), cplx(mid.real(), hi.imag()),
              depth + 1, max_depth, tol, tmp);
      collect(f, mid, hi, depth + 1, max_depth, tol, tmp);
    } catch (const Error& e) {
      if (std::string(e.code()) != "unresolved-cell") throw;
      why = e.what();
      continue;
    }
    int total = 0;
    for (auto& o : tmp) total += o.multiplicity;
    if (total != w) {
      why = "children lost a zero against the parent winding";
      continue;
    }
    for (auto& o : tmp) out.push_back(o);
    return;
  }
  throw Error("unresolved-cell", why);
}

// ---------------------------------------------------------------------------
// Trunk geometry helpers

void append_pt(std::vector<cplx>& pts, cplx p) {
  if (pts.empty() || std::abs(pts.back() - p) > 1e-12) pts.push_back(p);
}

// chords at constant radius from angle a to angle b the short way
void append_rotation(std::vector<cplx>& pts, double r, double a, double b) {
  double d = std::remainder(b - a, 2.0 * pi);
  int m = std::max(1, int(std::ceil(std::abs(d) / 0.5)));
  for (int j = 1; j <= m; ++j) {
    double th = a + d * double(j) / double(m);
    append_pt(pts, r * cplx(std::cos(th), std::sin(th)));
  }
}

// small arc around a turning point, short way round
void append_dodge(std::vector<cplx>& pts, cplx tp, double r, double a,
                  double b) {
  double d = std::remainder(b - a, 2.0 * pi);
  int m = std::max(1, int(std::ceil(std::abs(d) / 0.35)));
  for (int j = 0; j <= m; ++j) {
    double th = a + d * double(j) / double(m);
    append_pt(pts, tp + r * cplx(std::cos(th), std::sin(th)));
  }
}

// walk line samples between indices (either direction), thinned to a minimum
// spacing; always includes both endpoints
void append_walk(std::vector<cplx>& pts, const StokesLine& ln, size_t i_from,
                 size_t i_to, double spacing) {
  long step = (i_to >= i_from) ? 1 : -1;
  cplx last = ln.z[i_from];
  append_pt(pts, last);
  for (long i = long(i_from) + step;; i += step) {
    cplx p = ln.z[size_t(i)];
    if (size_t(i) == i_to || std::abs(p - last) >= spacing) {
      append_pt(pts, p);
      last = p;
    }
    if (size_t(i) == i_to) break;
  }
}

size_t index_at_s(const StokesLine& ln, double s) {
  size_t best = 0;
  double bd = 1e300;
  for (size_t i = 0; i < ln.s.size(); ++i) {
    double d = std::abs(ln.s[i] - s);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

size_t first_index_clear(const StokesLine& ln, cplx tp, double r) {
  for (size_t i = 0; i < ln.z.size(); ++i)
    if (std::abs(ln.z[i] - tp) >= r) return i;
  return ln.z.size() - 1;
}

} // namespace

// ---------------------------------------------------------------------------

std::vector<ZeroPrediction> predict(const StokesGraph& graph,
                                    const SemiclassicalSeries& series,
                                    const ExceptionalSet& exc, int k, int l,
                                    int q_max, std::pair<int, int> r_window,
                                    const RegularParams& params,
                                    const Tolerances& tol, Exec exec) {
  if (exc.k != k)
    throw Error("topology-error",
                "exceptional set belongs to solution " + std::to_string(exc.k));
  auto itr = exc.lines_by_root.find(l);
  if (itr == exc.lines_by_root.end() || itr->second.empty()) {
    std::ostringstream os;
    os << "root " << l << " not part of the exceptional set; have";
    for (auto& kv : exc.lines_by_root) os << ' ' << kv.first;
    throw Error("missing-root", os.str());
  }
  if (q_max < 0 || r_window.second < r_window.first)
    throw Error("island-out-of-range", "empty island request");

  const cplx lambda = graph.pot.lambda;
  const double absl = std::abs(lambda);
  const cplx eib = unitv(lambda);
  const cplx emib = std::conj(eib);

  double Lambda = params.Lambda ? *params.Lambda : absl - std::floor(absl);
  const double lam_eff_abs = absl; // [|lambda|] + Lambda by construction
  const double floor_l = absl - Lambda;
  const cplx lam_eff = lam_eff_abs * eib;

  const bool seq_case =
      graph.critical && graph.is_inner_member(k) && l == -k;

  // sequence bookkeeping for the boundary lines of S_{-k}
  double Rv = 0.0, cosR = 1.0;
  bool low_conf = false;
  int upper_idx = -1, lower_idx = -1;
  if (seq_case) {
    const StokesLine* inn = graph.inner_line(k, l);
    if (!inn) inn = graph.inner_line(l, k);
    if (!inn)
      throw Error("topology-error", "no inner line for the requested pair");
    double absI = std::abs(inn->action.back());
    if (params.R) {
      Rv = *params.R;
    } else {
      double x = absl * absI / pi;
      Rv = x - std::round(x);
    }
    if (std::abs(Rv) >= 0.5 - 1e-9)
      throw Error("singular-limit",
                  "R = " + std::to_string(Rv) +
                      " is the quantized limit; use quantize instead");
    cosR = std::cos(Rv * pi);
    low_conf = cosR < tol.lambda_threshold / absl;
    const Sector& som = graph.sector(-k);
    if (som.bounding.size() >= 2) {
      lower_idx = som.bounding.front();
      upper_idx = som.bounding.back();
    }
  }

  // per-line frames; sequence zeros live only on the infinite lines
  std::vector<LineFrame> frames;
  for (int idx : itr->second) {
    if (seq_case && !graph.lines[size_t(idx)].to_infinity) continue;
    frames.push_back(make_frame(graph, idx, tol));
  }
  if (frames.empty())
    throw Error("missing-root", "no usable lines under the requested root");

  const cplx z_l = graph.tps.at(size_t(tp_index(graph.tps, l))).z;

  struct Job {
    size_t frame;
    int q;
    int r_lo;
    int count;
    size_t offset;
  };
  std::vector<Job> jobs;
  size_t total = 0;

  const int q_lo = seq_case ? 1 : 0;
  const int width = r_window.second - r_window.first;

  for (size_t fi = 0; fi < frames.size(); ++fi) {
    const LineFrame& f = frames[fi];
    double g_end = std::abs((f.eib * f.A.back()).imag());
    for (int q = q_lo; q <= q_max; ++q) {
      if (q == 0) {
        // island at the root itself: r starts above the vicinity bound
        double m0 =
            lam_eff_abs * vicinity_bound(graph.cuts, z_l, exc.eps, tol) / pi;
        int r0 = int(std::ceil(m0)) + 1;
        int cnt = 0;
        for (int r = r0; r <= r0 + width; ++r) {
          if ((double(r) - 0.25) * pi / lam_eff_abs > g_end) break;
          ++cnt;
        }
        if (cnt > 0) {
          jobs.push_back({fi, 0, r0, cnt, total});
          total += size_t(cnt);
        }
      } else {
        if (double(q) * pi > g_end) {
          std::ostringstream os;
          os << "island q = " << q << " beyond line " << f.index;
          if (!f.ln->to_infinity)
            os << " (inner line allows q <= " << g_end / pi << ")";
          throw Error("island-out-of-range", os.str());
        }
        jobs.push_back({fi, q, r_window.first, width + 1, total});
        total += size_t(width) + 1;
      }
    }
  }

  std::vector<ZeroPrediction> out(total);
  std::vector<std::exception_ptr> errs(jobs.size());

  auto run_job = [&](size_t ji) {
    const Job& jb = jobs[ji];
    const LineFrame& f = frames[jb.frame];
    LineBranch branch = LineBranch::generic;
    bool upper = false;
    if (!f.ln->to_infinity) branch = LineBranch::inner;
    if (seq_case) {
      if (f.index == upper_idx) {
        branch = LineBranch::sector_upper;
        upper = true;
      } else if (f.index == lower_idx) {
        branch = LineBranch::sector_lower;
      }
    }
    double s = double(f.s_line);

    if (jb.q >= 1) {
      cplx target0 = s * double(jb.q) * pi * I * emib;
      LinePoint p0 = invert_on_line(f, target0, tol);
      for (int j = 0; j < jb.count; ++j) {
        int r = jb.r_lo + j;
        double coef = double(r) - double(jb.q) * Lambda - 0.25;
        if (seq_case) {
          coef += 0.5 * Rv +
                  (upper ? -0.5 : 0.5) * std::log(2.0 * cosR);
        }
        cplx zeta1 = s * coef * pi * I * emib / p0.sqw;
        ZeroPrediction zp;
        zp.k = k;
        zp.l = l;
        zp.q = jb.q;
        zp.r = r;
        zp.zeta0 = p0.z;
        zp.zeta1 = zeta1;
        zp.zeta2 = 0.0;
        zp.composite = p0.z + zeta1 / lam_eff;
        zp.sign = f.s_line;
        zp.Lambda = Lambda;
        zp.R = seq_case ? Rv : 0.0;
        zp.branch = branch;
        zp.low_confidence = seq_case && low_conf;
        zp.line_index = f.index;
        out[jb.offset + size_t(j)] = zp;
      }
    } else {
      for (int j = 0; j < jb.count; ++j) {
        int r = jb.r_lo + j;
        cplx target = s * (double(r) - 0.25) * pi * I * emib / lam_eff_abs;
        LinePoint pr = invert_on_line(f, target, tol);
        cplx zeta1 = (pr.z - z_l) * lam_eff;
        cplx zeta2 =
            zeta2_contour(series, graph.cuts, z_l, pr.z, pr.sqw);
        ZeroPrediction zp;
        zp.k = k;
        zp.l = l;
        zp.q = 0;
        zp.r = r;
        zp.zeta0 = z_l;
        zp.zeta1 = zeta1;
        zp.zeta2 = zeta2;
        zp.composite = pr.z + zeta2 / (lam_eff * lam_eff);
        zp.sign = f.s_line;
        zp.Lambda = Lambda;
        zp.R = seq_case ? Rv : 0.0;
        zp.branch = branch;
        zp.low_confidence = seq_case && low_conf;
        zp.line_index = f.index;
        out[jb.offset + size_t(j)] = zp;
      }
    }
  };

#ifdef STOKES_HAVE_OPENMP
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic)
    for (long ji = 0; ji < long(jobs.size()); ++ji) {
      try {
        run_job(size_t(ji));
      } catch (...) {
        errs[size_t(ji)] = std::current_exception();
      }
    }
  } else
#endif
  {
    for (size_t ji = 0; ji < jobs.size(); ++ji) {
      try {
        run_job(ji);
      } catch (...) {
        errs[ji] = std::current_exception();
      }
    }
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------

FieldEval make_field(const StokesGraph& graph,
                     const SemiclassicalSeries& series, int k,
                     const ComplexPath& trunk, int P, const Tolerances& tol,
                     double ridge_budget) {
  if (trunk.pts.size() < 2)
    throw Error("trunk-routing", "trunk needs at least two vertices");
  Seed s0 = wkb_seed(graph, series, k, trunk.pts.front(), P, tol);
  auto trace = std::make_shared<SolutionTrace>(
      propagate(s0, graph.pot, graph.cuts, trunk, tol));

  // ledger audit: if the running exponent rode far above its final level,
  // whatever is recessive at the end was drowned along the way and the
  // values near the line cannot be trusted
  const auto& smp = trace->samples;
  auto level = [](const TraceSample& t) {
    double m = std::max(std::abs(t.u), std::abs(t.du));
    return m > 0.0 ? t.logscale + std::log(m) : -1e300;
  };
  double endphi = level(smp.back());
  double peak = -1e300;
  for (auto& t : smp) peak = std::max(peak, level(t));
  if (peak > endphi + ridge_budget) {
    std::ostringstream os;
    os << "trunk rides " << peak - endphi
       << " e-folds above its endpoint (budget " << ridge_budget << ")";
    throw Error("trunk-conditioning", os.str());
  }

  RescaledPotential pot = graph.pot;
  CutPlane cuts = graph.cuts;
  Tolerances tl = tol;
  return [trace, pot, cuts, tl](cplx z) -> TraceSample {
    const auto& ss = trace->samples;
    size_t bi = 0;
    double bd = 1e300;
    for (size_t i = 0; i < ss.size(); ++i) {
      double d = std::abs(z - ss[i].z);
      if (d < bd) {
        bd = d;
        bi = i;
      }
    }
    const TraceSample& at = ss[bi];
    if (bd <= 1e-12) return at;
    Seed hop;
    hop.k = trace->k;
    hop.order = trace->order;
    hop.seed_radius = trace->seed_radius;
    hop.z = at.z;
    hop.u = at.u;
    hop.du = at.du;
    hop.logscale = at.logscale;
    hop.argw = at.argw;
    ComplexPath leg;
    leg.pts = {at.z, z};
    SolutionTrace t2 = propagate(hop, pot, cuts, leg, tl);
    return t2.samples.back();
  };
}

ComplexPath line_trunk(const StokesGraph& graph, int k, int line_index,
                       double join, double s_lo, double s_hi,
                       const Tolerances& tol) {
  if (line_index < 0 || size_t(line_index) >= graph.lines.size())
    throw Error("trunk-routing", "no such line");
  const StokesLine& ln = graph.lines[size_t(line_index)];
  const Sector& sec = graph.sector(k);
  const int a0 = sec.anchor_root;
  const cplx zA = graph.tps.at(size_t(tp_index(graph.tps, a0))).z;

  double rdg = std::clamp(join, 0.06, 0.3);
  double spacing = 0.05;
  double rs = seed_radius(graph.pot, tol);
  cplx seed = seed_point(graph, k, rs, tol);

  if (s_hi <= s_lo)
    throw Error("trunk-routing", "empty walk window");
  s_hi = std::min(s_hi, ln.length());

  std::vector<cplx> pts;
  append_pt(pts, seed);

  if (ln.origin == a0 && ln.to_infinity) {
    // line hangs off the sector's own root: descend inside the sector wedge
    // and enter at the outer end of the walk window
    size_t i_hi = index_at_s(ln, s_hi);
    size_t i_lo = std::max(index_at_s(ln, std::max(s_lo, 1.05 * rdg)),
                           first_index_clear(ln, zA, rdg));
    if (i_hi <= i_lo)
      throw Error("trunk-routing", "walk window collapsed");
    cplx entry = ln.z[i_hi];
    double re = std::max(std::abs(entry), 2.0);
    append_pt(pts, re * unitv(seed));
    append_rotation(pts, re, std::arg(seed), std::arg(entry));
    append_pt(pts, entry);
    append_walk(pts, ln, i_hi, i_lo, spacing);
  } else {
    // anything else rides the critical skeleton: descend to the anchor,
    // dodge it, follow the inner line over, dodge the far root, then walk
    const StokesLine* inn = nullptr;
    bool inner_forward = true; // anchor end is the record's start
    if (!ln.to_infinity) {
      if (ln.origin == a0) {
        inn = nullptr; // the walked line is itself anchored here
      } else if (ln.target == a0) {
        inn = nullptr;
      } else {
        throw Error("trunk-routing",
                    "inner line does not touch the sector's root");
      }
    }
    if (ln.to_infinity) {
      if (!graph.critical)
        throw Error("trunk-routing",
                    "line is not reachable from sector " + std::to_string(k));
      inn = graph.inner_line(a0, ln.origin);
      if (inn) {
        inner_forward = true;
      } else {
        inn = graph.inner_line(ln.origin, a0);
        inner_forward = false;
      }
      if (!inn)
        throw Error("trunk-routing",
                    "no inner line from the sector's root to the target root");
    }

    // descend to the anchor vicinity
    cplx p1 = 2.4 * unitv(seed);
    append_pt(pts, p1);
    cplx p2 = zA + rdg * unitv(p1 - zA);
    append_pt(pts, p2);

    const StokesLine* walkee = inn ? inn : &ln;
    // orient the walked-from-anchor stretch
    bool fwd = inn ? inner_forward : (ln.origin == a0);
    size_t w_from, w_to;
    if (inn) {
      // full crossing, trimmed clear of both roots
      size_t ia = first_index_clear(*inn, zA, rdg);
      cplx zO = graph.tps.at(size_t(tp_index(graph.tps, ln.origin))).z;
      size_t ib = inn->z.size() - 1;
      while (ib > 0 && std::abs(inn->z[ib] - zO) < rdg) --ib;
      if (fwd) {
        w_from = ia;
        w_to = ib;
      } else {
        // record runs from the far root toward the anchor
        ia = first_index_clear(*inn, zO, rdg);
        ib = inn->z.size() - 1;
        while (ib > 0 && std::abs(inn->z[ib] - zA) < rdg) --ib;
        w_from = ib;
        w_to = ia;
      }
    } else if (fwd) {
      // inner record starts at the anchor; walk outward
      w_from = std::max(index_at_s(ln, std::max(s_lo, 1.05 * rdg)),
                        first_index_clear(ln, zA, rdg));
      w_to = index_at_s(ln, std::min(s_hi, ln.length() - 1.05 * rdg));
      if (w_to <= w_from)
        throw Error("trunk-routing", "walk window collapsed");
    } else {
      // inner record ends at the anchor; enter at the high-arclength end
      cplx zO = graph.tps.at(size_t(tp_index(graph.tps, ln.origin))).z;
      size_t ihigh = index_at_s(ln, std::min(s_hi, ln.length()));
      while (ihigh > 0 && std::abs(ln.z[ihigh] - zA) < rdg) --ihigh;
      size_t ilow = std::max(index_at_s(ln, std::max(s_lo, 0.0)),
                             first_index_clear(ln, zO, rdg));
      if (ihigh <= ilow)
        throw Error("trunk-routing", "walk window collapsed");
      w_from = ihigh;
      w_to = ilow;
    }

    cplx first_walk = walkee->z[w_from];
    append_dodge(pts, zA, rdg, std::arg(p2 - zA), std::arg(first_walk - zA));
    append_walk(pts, *walkee, w_from, w_to, spacing);

    if (inn) {
      // hand over from the inner line to the target line around its origin
      cplx zO = graph.tps.at(size_t(tp_index(graph.tps, ln.origin))).z;
      size_t t_lo = std::max(index_at_s(ln, std::max(s_lo, 1.05 * rdg)),
                             first_index_clear(ln, zO, rdg));
      size_t t_hi = index_at_s(ln, s_hi);
      if (t_hi <= t_lo)
        throw Error("trunk-routing", "walk window collapsed");
      cplx arr = pts.back();
      append_dodge(pts, zO, rdg, std::arg(arr - zO),
                   std::arg(ln.z[t_lo] - zO));
      append_walk(pts, ln, t_lo, t_hi, spacing);
    }
  }

  ComplexPath path;
  path.pts = std::move(pts);
  return path;
}

std::vector<ZeroObservation> find_zeros(const FieldEval& field, cplx a, cplx b,
                                        const Tolerances& tol, Exec exec,
                                        int max_depth) {
  cplx lo(std::min(a.real(), b.real()), std::min(a.imag(), b.imag()));
  cplx hi(std::max(a.real(), b.real()), std::max(a.imag(), b.imag()));
  std::vector<ZeroObservation> out;
  if (hi.real() - lo.real() <= 0.0 || hi.imag() - lo.imag() <= 0.0) return out;

#ifdef STOKES_HAVE_OPENMP
  if (exec == Exec::parallel) {
    cplx mid = 0.5 * (lo + hi);
    struct Cell {
      cplx lo, hi;
    } cells[4] = {{lo, mid},
                  {cplx(mid.real(), lo.imag()), cplx(hi.real(), mid.imag())},
                  {cplx(lo.real(), mid.imag()), cplx(mid.real(), hi.imag())},
                  {mid, hi}};
    std::vector<ZeroObservation> parts[4];
    std::exception_ptr errs[4] = {};
    bool bad = false;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < 4; ++i) {
      try {
        collect(field, cells[i].lo, cells[i].hi, 1, max_depth, tol, parts[i]);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
    for (int i = 0; i < 4; ++i)
      if (errs[i]) bad = true;
    if (!bad) {
      for (int i = 0; i < 4; ++i)
        for (auto& o : parts[i]) out.push_back(o);
    } else {
      // a zero may straddle the parallel split; the serial walk renudges
      out.clear();
      collect(field, lo, hi, 0, max_depth, tol, out);
    }
  } else
#endif
  {
    collect(field, lo, hi, 0, max_depth, tol, out);
  }

  std::sort(out.begin(), out.end(), [](const ZeroObservation& x,
                                       const ZeroObservation& y) {
    if (x.location.real() != y.location.real())
      return x.location.real() < y.location.real();
    return x.location.imag() < y.location.imag();
  });
  return out;
}

double dist_to_polyline(const std::vector<cplx>& pts, cplx z) {
  if (pts.empty()) return 1e300;
  double best = std::abs(z - pts.front());
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    cplx a = pts[i], b = pts[i + 1];
    cplx d = b - a;
    double L2 = std::norm(d);
    double t = L2 > 0.0
                   ? std::clamp(((z - a) * std::conj(d)).real() / L2, 0.0, 1.0)
                   : 0.0;
    best = std::min(best, std::abs(z - (a + t * d)));
  }
  return best;
}

ComparisonReport match(const std::vector<ZeroPrediction>& predictions,
                       const std::vector<ZeroObservation>& observations,
                       double cap) {
  ComparisonReport rep;
  rep.predictions = predictions;
  rep.observations = observations;
  const int P = int(predictions.size());
  const int O = int(observations.size());
  const double INF = 1e100;

  std::vector<std::vector<double>> c(size_t(P), std::vector<double>(size_t(O), INF));
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < O; ++j) {
      double d = std::abs(predictions[size_t(i)].composite -
                          observations[size_t(j)].location);
      if (d <= cap) c[size_t(i)][size_t(j)] = d;
    }

  std::vector<int> pm(size_t(P), -1), om(size_t(O), -1);
  // successive shortest augmenting paths; sizes are tiny so plain
  // Bellman-Ford relaxation is plenty
  for (;;) {
    std::vector<double> dp(size_t(P), INF), dob(size_t(O), INF);
    std::vector<int> par_p(size_t(P), -2), par_o(size_t(O), -2);
    for (int i = 0; i < P; ++i)
      if (pm[size_t(i)] < 0) {
        dp[size_t(i)] = 0.0;
        par_p[size_t(i)] = -1;
      }
    for (int round = 0; round < P + O + 1; ++round) {
      bool changed = false;
      for (int i = 0; i < P; ++i) {
        if (dp[size_t(i)] >= INF) continue;
        for (int j = 0; j < O; ++j) {
          if (c[size_t(i)][size_t(j)] >= INF) continue;
          if (pm[size_t(i)] == j) continue;
          double cand = dp[size_t(i)] + c[size_t(i)][size_t(j)];
          if (cand + 1e-15 < dob[size_t(j)]) {
            dob[size_t(j)] = cand;
            par_o[size_t(j)] = i;
            changed = true;
          }
        }
      }
      for (int j = 0; j < O; ++j) {
        if (dob[size_t(j)] >= INF || om[size_t(j)] < 0) continue;
        int i = om[size_t(j)];
        double cand = dob[size_t(j)] - c[size_t(i)][size_t(j)];
        if (cand + 1e-15 < dp[size_t(i)]) {
          dp[size_t(i)] = cand;
          par_p[size_t(i)] = j;
          changed = true;
        }
      }
      if (!changed) break;
    }
    int jstar = -1;
    double bd = INF;
    for (int j = 0; j < O; ++j)
      if (om[size_t(j)] < 0 && dob[size_t(j)] < bd) {
        bd = dob[size_t(j)];
        jstar = j;
      }
    if (jstar < 0) break;
    int j = jstar;
    for (;;) {
      int i = par_o[size_t(j)];
      int pj = par_p[size_t(i)];
      pm[size_t(i)] = j;
      om[size_t(j)] = i;
      if (pj < 0) break;
      j = pj;
    }
  }

  for (int i = 0; i < P; ++i) {
    if (pm[size_t(i)] >= 0) {
      double d = c[size_t(i)][size_t(pm[size_t(i)])];
      rep.matched.push_back({i, pm[size_t(i)], d});
      rep.max_residual = std::max(rep.max_residual, d);
    } else {
      rep.unmatched_predictions.push_back(i);
    }
  }
  for (int j = 0; j < O; ++j)
    if (om[size_t(j)] < 0) rep.unmatched_observations.push_back(j);
  return rep;
}

double fitted_order(const std::vector<std::pair<double, double>>& runs) {
  int m = 0;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (auto& [L, r] : runs) {
    if (L <= 0.0 || r <= 0.0) continue;
    double x = std::log(L), y = -std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return 0.0;
  double det = double(m) * sxx - sx * sx;
  if (std::abs(det) < 1e-30) return 0.0;
  return (double(m) * sxy - sx * sy) / det;
}

// ---------------------------------------------------------------------------

std::vector<QuantizationResult> quantize(int n, AlphaChoice ac,
                                         const std::vector<cplx>& b, int k0,
                                         int s_lo, int s_hi, int P,
                                         const Tolerances& tol) {
  if (s_lo < 0 || s_hi < s_lo)
    throw Error("quantization-failure", "bad s range");
  const cplx I0 = closed_form_action(n, ac, k0);
  const double absI = std::abs(I0);
  if (absI < 1e-12)
    throw Error("quantization-failure", "degenerate pair action");
  auto lam_lead = [&](int s) { return (double(s) + 0.5) * pi / absI; };

  const bool fixed_shape = b.empty();
  StokesGraph gbase = build_graph(
      RescaledPotential::standard(n, ac, b, cplx(lam_lead(s_lo), 0.0)), tol);
  if (!gbase.critical || !gbase.is_inner_member(k0))
    throw Error("quantization-failure",
                "pair " + std::to_string(k0) + " is not connected at beta = 0");
  const int Pz = std::max(P, 1);
  SemiclassicalSeries ser = build_series(gbase.pot, gbase.cuts, Pz);

  const StokesLine* inn = gbase.inner_line(k0, -k0);
  if (!inn) inn = gbase.inner_line(-k0, k0);
  if (!inn) throw Error("quantization-failure", "inner line missing");

  // meet point pushed off the inner segment: eigenfunction zeros sit on the
  // segment itself, so the wronskian cannot degenerate from a zero landing
  // on the evaluation point
  size_t im = index_at_s(*inn, 0.37 * inn->length());
  if (im + 1 >= inn->z.size()) im = inn->z.size() - 2;
  cplx that = unitv(inn->z[im + 1] - inn->z[im]);
  const cplx zm = inn->z[im] + 0.15 * (I * that);

  struct Ev {
    cplx unit;
    double lg = 0.0;
    double denom = 0.0;
  };
  auto evalF = [&](cplx lam) -> Ev {
    RescaledPotential pw = RescaledPotential::standard(n, ac, b, lam);
    StokesGraph g2;
    SemiclassicalSeries s2;
    const StokesGraph* G = nullptr;
    const SemiclassicalSeries* S = nullptr;
    if (fixed_shape) {
      g2 = gbase;
      g2.pot = pw;
      G = &g2;
      S = &ser;
    } else {
      g2 = build_graph(pw, tol);
      s2 = build_series(g2.pot, g2.cuts, Pz);
      G = &g2;
      S = &s2;
    }
    double rs = seed_radius(G->pot, tol);
    cplx za = seed_point(*G, k0, rs, tol);
    cplx zb = seed_point(*G, -k0, rs, tol);
    Seed sa = wkb_seed(*G, *S, k0, za, Pz, tol);
    Seed sb = wkb_seed(*G, *S, -k0, zb, Pz, tol);
    ComplexPath pa, pb;
    pa.pts = {za, zm};
    pb.pts = {zb, zm};
    SolutionTrace ta = propagate(sa, G->pot, G->cuts, pa, tol);
    SolutionTrace tb = propagate(sb, G->pot, G->cuts, pb, tol);
    LogComplex wl = wronskian_log(ta, tb, zm);
    const TraceSample& ea = ta.samples.back();
    const TraceSample& eb = tb.samples.back();
    double mix = std::abs(ea.u) * std::abs(eb.du) +
                 std::abs(ea.du) * std::abs(eb.u);
    Ev e;
    e.unit = wl.unit;
    e.lg = wl.log;
    e.denom = ea.logscale + eb.logscale + std::log(std::max(mix, 1e-300));
    return e;
  };

  std::vector<QuantizationResult> results;
  const double leash = 0.35 * pi / absI;

  for (int s = s_lo; s <= s_hi; ++s) {
    cplx lam(lam_lead(s), 0.0);
    QuantizationResult qr;
    qr.s = s;
    qr.k0 = k0;
    qr.lambda_leading = lam;
    bool done = false;
    double resid = 0.0;
    for (int it = 0; it < 50 && !done; ++it) {
      Ev e0 = evalF(lam);
      double n0 = std::abs(e0.unit) * std::exp(e0.lg - e0.denom);
      if (n0 <= 1e-10) {
        done = true;
        resid = n0;
        break;
      }
      double h = 1e-6 * std::max(1.0, std::abs(lam));
      Ev ep = evalF(lam + h);
      Ev em = evalF(lam - h);
      cplx g0 = e0.unit;
      cplx gp = ep.unit * std::exp(ep.lg - e0.lg);
      cplx gm = em.unit * std::exp(em.lg - e0.lg);
      cplx dg = (gp - gm) / (2.0 * h);
      if (std::abs(dg) == 0.0)
        throw Error("quantization-failure", "flat wronskian in lambda");
      cplx step = -g0 / dg;
      if (std::abs(step) > leash) step *= leash / std::abs(step);
      lam += step;
      if (std::abs(step) <= 1e-10 * std::max(1.0, std::abs(lam))) {
        Ev ef = evalF(lam);
        resid = std::abs(ef.unit) * std::exp(ef.lg - ef.denom);
        done = resid <= 1e-8;
      }
    }
    if (!done) {
      std::ostringstream os;
      os << "s = " << s << " did not converge; lambda = " << lam.real()
         << "+" << lam.imag() << "i, residual " << resid;
      throw Error("quantization-failure", os.str());
    }
    qr.lambda_refined = lam;
    qr.residual = resid;

    // correction exponent: closed contour of Z around both roots of the
    // pair. Z's odd part flips with the branch, and the chained sign flips
    // with it, so the loop integral is single-valued.
    {
      RescaledPotential pw = RescaledPotential::standard(n, ac, b, lam);
      StokesGraph g2;
      const StokesGraph* G = nullptr;
      const SemiclassicalSeries* S = nullptr;
      SemiclassicalSeries s2;
      if (fixed_shape) {
        g2 = gbase;
        g2.pot = pw;
        G = &g2;
        S = &ser;
      } else {
        g2 = build_graph(pw, tol);
        s2 = build_series(g2.pot, g2.cuts, Pz);
        G = &g2;
        S = &s2;
      }
      int sig = G->sector(k0).sigma;
      cplx zp = G->tps.at(size_t(tp_index(G->tps, k0))).z;
      cplx zq = G->tps.at(size_t(tp_index(G->tps, -k0))).z;
      cplx t = unitv(zq - zp), nn = I * t;
      double cl = 0.35;
      std::vector<cplx> loop = {zp - cl * t + cl * nn, zq + cl * t + cl * nn,
                                zq + cl * t - cl * nn, zp - cl * t - cl * nn,
                                zp - cl * t + cl * nn};
      cplx acc{0.0, 0.0};
      cplx prev = sqrt_w_cut(G->cuts, loop[0]);
      int csign = 1;
      for (size_t leg = 0; leg + 1 < loop.size(); ++leg) {
        const int M = 200;
        cplx a = loop[leg], d = loop[leg + 1] - loop[leg];
        cplx sum{0.0, 0.0};
        for (int j = 0; j <= M; ++j) {
          cplx z = a + d * (double(j) / double(M));
          cplx pv = sqrt_w_cut(G->cuts, z);
          if (std::abs(pv - prev) > std::abs(pv + prev)) csign = -csign;
          prev = pv;
          cplx zc = S->Zplus(z, lam) -
                    double(sig) * double(csign) * S->Zminus(z, lam);
          double wsimp = (j == 0 || j == M) ? 1.0 : (j % 2 ? 4.0 : 2.0);
          sum += wsimp * zc;
        }
        acc += sum * (d / double(M)) / 3.0;
      }
      qr.z_correction = acc;
    }
    results.push_back(qr);
  }
  return results;
}

ExceptionalSet quantized_zero_redistribution(const StokesGraph& graph,
                                             const ExceptionalSet& base,
                                             const QuantizationResult& result,
                                             const Tolerances& tol) {
  if (std::abs(graph.pot.lambda - result.lambda_refined) >
      1e-6 * std::max(1.0, std::abs(result.lambda_refined)))
    throw Error("not-quantized",
                "graph is not built at the quantized lambda");
  if (std::abs(base.k) != std::abs(result.k0)) return base;

  ExceptionalSet other = exceptional_set(graph, -base.k, base.eps, tol);
  auto key = [&](int idx) {
    const StokesLine& ln = graph.lines[size_t(idx)];
    if (ln.to_infinity) return std::tuple<int, int, int>{1, ln.origin, ln.emission};
    return std::tuple<int, int, int>{0, std::min(ln.origin, ln.target),
                                     std::max(ln.origin, ln.target)};
  };
  std::set<std::tuple<int, int, int>> keep;
  for (int idx : other.flat()) keep.insert(key(idx));

  // mask in flat() order so the vicinity polygons stay aligned
  std::vector<int> base_flat = base.flat();
  std::vector<bool> mask(base_flat.size(), false);
  for (size_t i = 0; i < base_flat.size(); ++i)
    mask[i] = keep.count(key(base_flat[i])) > 0;

  ExceptionalSet outp;
  outp.k = base.k;
  outp.eps = base.eps;
  outp.opposite_excluded = base.opposite_excluded;
  size_t pos = 0;
  for (auto& kv : base.lines_by_root) {
    std::vector<int> kept;
    for (int idx : kv.second) {
      if (mask[pos]) {
        kept.push_back(idx);
        outp.vicinity.push_back(base.vicinity[pos]);
      }
      ++pos;
    }
    if (!kept.empty()) outp.lines_by_root[kv.first] = kept;
  }
  return outp;
}

} // namespace stokes
