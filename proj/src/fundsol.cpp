#include "stokes/fundsol.hpp"

#include <algorithm>
#include <cmath>

namespace stokes {

namespace {

// binary exponentiation; a handful of rounding steps, unlike exp(e log b)
cplx ipow(cplx b, int e) {
  cplx r{1.0, 0.0};
  while (e) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

} // namespace

cplx SemiclassicalSeries::X(int p, cplx z) const {
  if (p < 1 || p > order)
    throw Error("invalid-order",
                "X_" + std::to_string(p) + " beyond series order");
  for (auto& tp : cuts.tps)
    if (std::abs(z - tp.z) < 1e-6)
      throw Error("near-singular-evaluation",
                  "series evaluated within 1e-6 of a turning point");
  cplx s = sqrt_w_cut(cuts, z);
  const Poly& Np = N[p - 1];
  if (std::abs(z) < 2.0) return Np(z) / ipow(s, 3 * p + 2);
  // far out both numerator and w-power overflow long before their ratio
  // does; fold the magnitudes together before exponentiating
  cplx iz = 1.0 / z;
  cplx racc{0.0, 0.0};
  for (int j = 0; j <= Np.degree(); ++j) racc = racc * iz + Np.c[j];
  cplx expo = double(Np.degree()) * std::log(z) -
              double(3 * p + 2) * std::log(s);
  return racc * std::exp(expo);
}

cplx SemiclassicalSeries::Zplus(cplx z, cplx lambda, int pmax) const {
  if (pmax < 0 || pmax > order) pmax = order;
  cplx t = 1.0 / (2.0 * lambda), acc{0.0, 0.0};
  for (int p = 2; p <= pmax; p += 2) acc += ipow(t, p) * X(p, z);
  return acc;
}

cplx SemiclassicalSeries::Zminus(cplx z, cplx lambda, int pmax) const {
  if (pmax < 0 || pmax > order) pmax = order;
  cplx t = 1.0 / (2.0 * lambda), acc{0.0, 0.0};
  for (int p = 1; p <= pmax; p += 2) acc += ipow(t, p) * X(p, z);
  return acc;
}

cplx SemiclassicalSeries::Z(cplx z, cplx lambda, int sigma, int pmax) const {
  return Zplus(z, lambda, pmax) - double(sigma) * Zminus(z, lambda, pmax);
}

SemiclassicalSeries build_series(const RescaledPotential& pot,
                                 const CutPlane& cuts, int order) {
  if (order < 1) throw Error("invalid-order", "series order must be >= 1");
  SemiclassicalSeries S;
  S.order = order;
  S.cuts = cuts;
  S.w = pot.w;
  S.dw = pot.dw;
  S.N.reserve(order);
  S.N.push_back((pot.dw * pot.dw).scaled(cplx{5.0 / 16.0, 0.0}) +
                (pot.w * pot.d2w).scaled(cplx{-0.25, 0.0}));
  for (int p = 2; p <= order; ++p) {
    Poly acc = pot.w * S.N[p - 2].derivative() +
               (pot.dw * S.N[p - 2]).scaled(cplx{-1.5 * p, 0.0});
    for (int j = 1; j <= p - 2; ++j) acc = acc + S.N[j - 1] * S.N[p - 2 - j];
    S.N.push_back(acc);
  }
  return S;
}

double seed_radius(const RescaledPotential& pot, const Tolerances& tol) {
  return std::max(tol.r_max,
                  2.0 * std::pow(pot.abs_lambda(), 2.0 / (pot.n + 2)));
}

Seed wkb_seed(const StokesGraph& g, const SemiclassicalSeries& series, int k,
              cplx z_inf, int P, const Tolerances& tol) {
  const Sector& sec = g.sector(k);
  if (P < 0 || (P > series.order))
    throw Error("invalid-order", "truncation order exceeds the series");
  double th = std::arg(z_inf);
  double S = std::abs(z_inf);
  if (!sec.contains_angle(th) || S < tol.r_max)
    throw Error("wrong-sector", "seed point is not a far point of sector " +
                                    std::to_string(k));
  auto route = sector_route(g, sec, z_inf, tol, true);
  if (!route)
    throw Error("topology-error", "no cut-free route to the seed point");
  cplx A = double(sec.sigma) * g.pot.lambda * route->action;
  // sigma describes the probe side of any cut through the sector; on the
  // other side the same exponent grows and the seed formula would not be
  // the recessive solution
  if (A.real() >= 0.0)
    throw Error("wrong-sector",
                "seed direction lies on the growing side of a cut");

  cplx T{0.0, 0.0};
  if (P >= 1) {
    if (ray_blocked(g.cuts, th, S, 1e9))
      throw Error("topology-error", "outgoing seed ray crosses a cut");
    cplx eith = std::exp(cplx{0.0, th});
    // int_inf^{z_inf} Z ds down the ray, s = S e^{i th} / t
    auto f = [&](double t) -> cplx {
      if (t < 1e-14) return {0.0, 0.0};
      return series.Z(S / t * eith, g.pot.lambda, sec.sigma, P) / (t * t);
    };
    T = -S * eith * gk_integrate(f, 0.0, 1.0, tol.quad_tol);
  }

  cplx q = quarter_w_cut(g.cuts, z_inf);
  cplx E = A + T;
  Seed sd;
  sd.k = k;
  sd.order = P;
  sd.seed_radius = S;
  sd.z = z_inf;
  sd.logscale = E.real() + std::log(std::abs(q));
  sd.u = (q / std::abs(q)) * std::exp(cplx{0.0, E.imag()});
  cplx dlog = -g.pot.dW(z_inf) / (4.0 * g.pot.W(z_inf)) +
              double(sec.sigma) * g.pot.lambda * sqrt_w_cut(g.cuts, z_inf);
  if (P >= 1) dlog += series.Z(z_inf, g.pot.lambda, sec.sigma, P);
  sd.du = sd.u * dlog;
  sd.argw = total_phase(g.cuts, z_inf);
  return sd;
}

const TraceSample& SolutionTrace::find(cplx z) const {
  double best = 1e300;
  size_t bi = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    double d = std::abs(samples[i].z - z);
    if (d < best) {
      best = d;
      bi = i;
    }
  }
  if (best > 1e-9)
    throw Error("no-overlap", "z is not a sample point of the trace");
  return samples[bi];
}

SolutionTrace propagate(const Seed& seed, const RescaledPotential& pot,
                        const CutPlane& cuts, const ComplexPath& path,
                        const Tolerances& tol) {
  if (path.pts.size() < 2)
    throw Error("path-mismatch", "propagation path needs at least two points");
  if (std::abs(path.pts.front() - seed.z) > 1e-9)
    throw Error("path-mismatch", "path does not start at the seed point");
  if (std::abs(std::remainder(seed.argw - total_phase(cuts, seed.z),
                              2 * pi)) > 1e-6)
    throw Error("path-mismatch", "seed phase and cut plane disagree");

  SolutionTrace tr;
  tr.k = seed.k;
  tr.order = seed.order;
  tr.seed_radius = seed.seed_radius;
  tr.path = path;
  cplx u = seed.u, du = seed.du;
  double ell = seed.logscale, argw = seed.argw;
  tr.samples.push_back({seed.z, u, du, ell, argw});

  const cplx lam2 = pot.lambda * pot.lambda;
  long steps = 0;
  double arclen = 0.0;
  for (size_t i = 0; i + 1 < path.pts.size(); ++i) {
    cplx z0 = path.pts[i], h = path.pts[i + 1] - path.pts[i];
    double hl = std::abs(h);
    if (hl < 1e-15) {
      tr.samples.push_back({path.pts[i + 1], u, du, ell, argw});
      continue;
    }
    for (auto& tp : cuts.tps) {
      double tc = std::clamp((std::conj(h) * (tp.z - z0)).real() / (hl * hl),
                             0.0, 1.0);
      if (std::abs(z0 + tc * h - tp.z) < tol.collision)
        throw Error("propagation-failure",
                    "path passes within collision distance of a turning "
                    "point near arclength " +
                        std::to_string(arclen + tc * hl));
    }

    auto fu = [&](cplx dd) { return h * dd; };
    auto fd = [&](double tt, cplx uu) {
      return h * lam2 * pot.w(z0 + tt * h) * uu;
    };
    double t = 0.0;
    double rate =
        hl * std::max(1.0, std::abs(pot.lambda) *
                               std::sqrt(std::abs(pot.w(z0))));
    double dt = std::min(1.0, 0.5 / rate);
    cplx wprev = pot.w(z0);
    while (t < 1.0) {
      dt = std::min(dt, 1.0 - t);
      if (++steps > 40000000)
        throw Error("propagation-failure", "step budget exhausted at "
                                           "arclength " +
                                               std::to_string(arclen + t * hl));
      cplx k1u = fu(du), k1d = fd(t, u);
      cplx k2u = fu(du + dt * (k1d / 5.0));
      cplx k2d = fd(t + dt / 5.0, u + dt * (k1u / 5.0));
      cplx k3u = fu(du + dt * (3.0 / 40.0 * k1d + 9.0 / 40.0 * k2d));
      cplx k3d = fd(t + 0.3 * dt, u + dt * (3.0 / 40.0 * k1u + 9.0 / 40.0 * k2u));
      cplx k4u = fu(du + dt * (44.0 / 45.0 * k1d - 56.0 / 15.0 * k2d +
                               32.0 / 9.0 * k3d));
      cplx k4d = fd(t + 0.8 * dt, u + dt * (44.0 / 45.0 * k1u -
                                            56.0 / 15.0 * k2u +
                                            32.0 / 9.0 * k3u));
      cplx k5u = fu(du + dt * (19372.0 / 6561.0 * k1d - 25360.0 / 2187.0 * k2d +
                               64448.0 / 6561.0 * k3d - 212.0 / 729.0 * k4d));
      cplx k5d = fd(t + 8.0 / 9.0 * dt,
                    u + dt * (19372.0 / 6561.0 * k1u - 25360.0 / 2187.0 * k2u +
                              64448.0 / 6561.0 * k3u - 212.0 / 729.0 * k4u));
      cplx k6u = fu(du + dt * (9017.0 / 3168.0 * k1d - 355.0 / 33.0 * k2d +
                               46732.0 / 5247.0 * k3d + 49.0 / 176.0 * k4d -
                               5103.0 / 18656.0 * k5d));
      cplx k6d = fd(t + dt,
                    u + dt * (9017.0 / 3168.0 * k1u - 355.0 / 33.0 * k2u +
                              46732.0 / 5247.0 * k3u + 49.0 / 176.0 * k4u -
                              5103.0 / 18656.0 * k5u));
      cplx u5 = u + dt * (35.0 / 384.0 * k1u + 500.0 / 1113.0 * k3u +
                          125.0 / 192.0 * k4u - 2187.0 / 6784.0 * k5u +
                          11.0 / 84.0 * k6u);
      cplx d5 = du + dt * (35.0 / 384.0 * k1d + 500.0 / 1113.0 * k3d +
                           125.0 / 192.0 * k4d - 2187.0 / 6784.0 * k5d +
                           11.0 / 84.0 * k6d);
      cplx k7u = fu(d5), k7d = fd(t + dt, u5);
      cplx eu = dt * (71.0 / 57600.0 * k1u - 71.0 / 16695.0 * k3u +
                      71.0 / 1920.0 * k4u - 17253.0 / 339200.0 * k5u +
                      22.0 / 525.0 * k6u - 1.0 / 40.0 * k7u);
      cplx ed = dt * (71.0 / 57600.0 * k1d - 71.0 / 16695.0 * k3d +
                      71.0 / 1920.0 * k4d - 17253.0 / 339200.0 * k5d +
                      22.0 / 525.0 * k6d - 1.0 / 40.0 * k7d);
      double sc = std::max({std::abs(u), std::abs(du), 1e-300});
      double errnorm = std::max(std::abs(eu), std::abs(ed)) / sc;
      double budget = tol.ode_rel * hl * dt;
      if (errnorm <= budget) {
        cplx wnew = pot.w(z0 + (t + dt) * h);
        double dphi = std::arg(wnew / wprev);
        // a step can be accurate for (u, du) yet stride over a large swing
        // of arg w; the continued phase needs the swing resolved
        if (std::abs(dphi) > 1.0 && dt > 1e-10) {
          dt *= 0.5;
          continue;
        }
        t += dt;
        u = u5;
        du = d5;
        argw += dphi;
        wprev = wnew;
        double m = std::max(std::abs(u), std::abs(du));
        if (m > 0.0 && (m > 1e10 || m < 1e-10)) {
          ell += std::log(m);
          u /= m;
          du /= m;
        }
        if (errnorm > 0.0)
          dt *= std::clamp(0.9 * std::pow(budget / errnorm, 0.25), 1.0, 5.0);
        else
          dt *= 5.0;
      } else {
        dt *= std::clamp(0.9 * std::pow(budget / errnorm, 0.25), 0.1, 0.9);
        if (dt < 1e-13)
          throw Error("propagation-failure",
                      "step collapse at arclength " +
                          std::to_string(arclen + t * hl));
      }
    }
    arclen += hl;
    tr.samples.push_back({path.pts[i + 1], u, du, ell, argw});
  }
  return tr;
}

LogComplex wronskian_log(const SolutionTrace& a, const SolutionTrace& b,
                         cplx z) {
  const TraceSample& sa = a.find(z);
  const TraceSample& sb = b.find(z);
  cplx wv = sa.u * sb.du - sa.du * sb.u;
  double m = std::abs(wv);
  if (m == 0.0) return {};
  return {wv / m, std::log(m) + sa.logscale + sb.logscale};
}

cplx wronskian(const SolutionTrace& a, const SolutionTrace& b, cplx z) {
  LogComplex lw = wronskian_log(a, b, z);
  if (lw.unit == cplx{0.0, 0.0}) return {0.0, 0.0};
  return lw.unit * std::exp(lw.log);
}

} // namespace stokes
