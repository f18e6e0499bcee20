#include "stokes/potential.hpp"

#include <algorithm>
#include <cmath>

namespace stokes {

namespace {

cplx principal_pow(cplx base, double expo) {
  // std::pow uses the principal log; spelled out so the branch convention is
  // in one place.
  return std::exp(expo * std::log(base));
}

cplx minus_i_alpha(const RescaledPotential& p) { return -I * p.alpha; }

void finish(RescaledPotential& p, std::vector<cplx> zc) {
  p.w.c = std::move(zc);
  p.dw = p.w.derivative();
  p.d2w = p.dw.derivative();
  p.standard_mode = std::abs(p.beta()) < pi / p.n;
}

cplx alpha_value(int n, AlphaChoice ac) {
  if (ac == AlphaChoice::unity) return cplx{1.0, 0.0};
  return std::exp(cplx{0.0, -pi / n});
}

} // namespace

double RescaledPotential::floor_abs() const { return std::floor(abs_lambda()); }
double RescaledPotential::Lambda() const { return abs_lambda() - floor_abs(); }

cplx RescaledPotential::eta() const {
  return principal_pow(lambda, -2.0 / (n + 2));
}

cplx RescaledPotential::b_prime(int nk) const {
  int k = n - nk;
  if (k < 1 || k > n - 1) throw Error("invalid-index", "b' index out of range");
  return b[k - 1] * principal_pow(minus_i_alpha(*this), 2.0 * k / (n + 2));
}

RescaledPotential RescaledPotential::standard(int n, AlphaChoice ac,
                                              std::vector<cplx> b,
                                              cplx lambda) {
  if (n < 2) throw Error("invalid-degree", "degree must be at least 2");
  if (lambda == cplx{0.0, 0.0})
    throw Error("degenerate-energy", "lambda must be nonzero");
  if ((int)b.size() != std::max(0, n - 1) && !b.empty())
    throw Error("invalid-coefficients", "need n-1 subleading coefficients");
  if (b.empty()) b.assign(std::max(0, n - 1), cplx{0.0, 0.0});

  RescaledPotential p;
  p.n = n;
  p.alpha_choice = ac;
  p.alpha = alpha_value(n, ac);
  p.lambda = lambda;
  p.b = std::move(b);
  p.branch_note = "eta = exp(-2/(n+2) Log lambda); (-i alpha)^q principal";

  cplx mia = minus_i_alpha(p);
  cplx eta = p.eta();
  std::vector<cplx> zc(n + 1, cplx{0.0, 0.0});
  zc[n] = principal_pow(mia, double(n));
  zc[0] = cplx{-1.0, 0.0};
  for (int k = 1; k <= n - 1; ++k) {
    // z-coefficient of z^{n-k}: b'_{n-k} eta^k (-i alpha)^{n-k}
    cplx bp = p.b[k - 1] * principal_pow(mia, 2.0 * k / (n + 2));
    zc[n - k] += bp * std::pow(eta, k) * principal_pow(mia, double(n - k));
  }
  finish(p, std::move(zc));
  return p;
}

RescaledPotential rescale(const PhysicalProblem& prob, AlphaChoice ac) {
  int n = prob.degree;
  if (n < 2) throw Error("invalid-degree", "degree must be at least 2");
  if ((int)prob.a.size() != n)
    throw Error("invalid-coefficients", "need coefficients a_1..a_n");
  if (prob.a.back() == cplx{0.0, 0.0})
    throw Error("invalid-leading-coefficient", "a_n must be nonzero");
  if (prob.energy == cplx{0.0, 0.0})
    throw Error("degenerate-energy", "E must be nonzero");
  if (prob.mass <= 0 || prob.hbar <= 0)
    throw Error("invalid-coefficients", "mass and hbar must be positive");

  RescaledPotential p;
  p.n = n;
  p.alpha_choice = ac;
  p.alpha = alpha_value(n, ac);

  double twom = 2.0 * prob.mass / (prob.hbar * prob.hbar);
  cplx an = prob.a.back();
  cplx E = prob.energy;

  // z -> -i alpha (E/a_n)^{1/n} z maps P - E onto E * w with
  // lambda^2 = -alpha^2 (2m/hbar^2) a_n^{-2/n} E^{(n+2)/n}.
  cplx lam2 = -p.alpha * p.alpha * twom * principal_pow(an, -2.0 / n) *
              principal_pow(E, double(n + 2) / n);
  p.lambda = std::sqrt(lam2);
  p.branch_note =
      "c = -i alpha (E/a_n)^{1/n}; lambda = principal sqrt of "
      "-alpha^2 (2m/hbar^2) a_n^{-2/n} E^{(n+2)/n}; all powers principal";

  cplx mia = minus_i_alpha(p);
  cplx c = mia * principal_pow(E / an, 1.0 / n);
  cplx eta = p.eta();

  // w's z-coefficients come straight from a_j c^j / E, so the round trip to
  // the physical polynomial is exact by construction. The b_{n-k} metadata is
  // recovered from them.
  std::vector<cplx> zc(n + 1, cplx{0.0, 0.0});
  zc[0] = cplx{-1.0, 0.0};
  for (int j = 1; j <= n; ++j) zc[j] = prob.a[j - 1] * std::pow(c, j) / E;

  p.b.assign(n - 1, cplx{0.0, 0.0});
  for (int k = 1; k <= n - 1; ++k) {
    cplx bp = zc[n - k] / (std::pow(eta, k) * principal_pow(mia, double(n - k)));
    p.b[k - 1] = bp / principal_pow(mia, 2.0 * k / (n + 2));
  }
  finish(p, std::move(zc));
  return p;
}

double rescale_roundtrip_error(const PhysicalProblem& prob,
                               const RescaledPotential& r) {
  double twom = 2.0 * prob.mass / (prob.hbar * prob.hbar);
  cplx c = (-I * r.alpha) *
           std::exp(std::log(prob.energy / prob.a.back()) / double(prob.degree));
  double worst = 0.0;
  for (int s = 0; s < 24; ++s) {
    double th = 2.0 * pi * s / 24.0;
    cplx z = (0.37 + 0.11 * s) * std::exp(cplx{0.0, th});
    cplx lhs = r.lambda * r.lambda * r.W(z);
    cplx px{0.0, 0.0};
    cplx zz = c * z;
    for (int j = prob.degree; j >= 1; --j) px = (px + prob.a[j - 1]) * zz;
    cplx rhs = twom * c * c * (px - prob.energy);
    double scale = std::max(1.0, std::abs(lhs));
    worst = std::max(worst, std::abs(lhs - rhs) / scale);
  }
  return worst;
}

std::vector<int> limit_labels(int n, AlphaChoice ac) {
  std::vector<int> out;
  if (ac == AlphaChoice::unity) {
    out.push_back(0);
    int kmax = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
    for (int k = 1; k <= kmax; ++k) {
      out.push_back(k);
      out.push_back(-k);
    }
    if (n % 2 == 0) out.push_back(n / 2);
  } else {
    for (int k = 1; k <= n / 2; ++k) {
      out.push_back(k);
      out.push_back(-k);
    }
    // odd degree: the rotated configuration has a single root at -i
    if (n % 2 == 1) out.push_back((n + 1) / 2);
  }
  return out;
}

cplx limit_root(int n, AlphaChoice ac, int label) {
  if (ac == AlphaChoice::unity)
    return I * std::exp(cplx{0.0, 2.0 * pi * label / n});
  int twok = label > 0 ? 2 * label - 1 : 2 * label + 1;
  return I * std::exp(cplx{0.0, pi * twok / n});
}

PairSet limit_pairs(int n, AlphaChoice ac) {
  PairSet ps;
  if (ac == AlphaChoice::unity) {
    int kmax = (n % 2 == 0) ? n / 2 - 1 : (n - 1) / 2;
    for (int k = 1; k <= kmax; ++k) ps.pairs.push_back({k, -k});
    ps.unpaired.push_back(0);
    if (n % 2 == 0) ps.unpaired.push_back(n / 2);
  } else {
    for (int k = 1; k <= n / 2; ++k) ps.pairs.push_back({k, -k});
    if (n % 2 == 1) ps.unpaired.push_back((n + 1) / 2);
  }
  return ps;
}

std::vector<TurningPoint> turning_points(const RescaledPotential& pot,
                                         const Tolerances& tol) {
  int n = pot.n;
  auto labels = limit_labels(n, pot.alpha_choice);
  std::vector<cplx> z(n);
  for (int i = 0; i < n; ++i) z[i] = limit_root(n, pot.alpha_choice, labels[i]);

  // Ehrlich-Aberth simultaneous iteration; the limit roots are excellent
  // starting points in the regime (|eta| < 1) the library targets.
  cplx lead = pot.w.c[n];
  for (int iter = 0; iter < 200; ++iter) {
    double moved = 0.0;
    for (int i = 0; i < n; ++i) {
      cplx p = pot.W(z[i]);
      cplx dp = pot.dW(z[i]);
      if (p == cplx{0.0, 0.0}) continue;
      cplx ratio = dp == cplx{0.0, 0.0} ? cplx{0.0, 0.0} : p / dp;
      cplx sum{0.0, 0.0};
      for (int j = 0; j < n; ++j)
        if (j != i) sum += 1.0 / (z[i] - z[j]);
      cplx denom = 1.0 - ratio * sum;
      cplx step = denom == cplx{0.0, 0.0} ? ratio : ratio / denom;
      z[i] -= step;
      moved = std::max(moved, std::abs(step));
    }
    if (moved < 1e-15) break;
  }
  for (int i = 0; i < n; ++i) {
    double res = std::abs(pot.W(z[i]));
    double scale = std::abs(lead) * std::max(1.0, std::pow(std::abs(z[i]), n));
    if (res > 1e-10 * std::max(1.0, scale))
      throw Error("root-refinement-failure", "turning point residual too large");
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (std::abs(z[i] - z[j]) < tol.collision)
        throw Error("degenerate-turning-points",
                    "turning points closer than collision tolerance");

  // Greedy nearest-limit assignment; collisions in the assignment mean the
  // drift is too large for labels to be meaningful.
  auto pairs = limit_pairs(n, pot.alpha_choice);
  std::vector<TurningPoint> out(n);
  std::vector<bool> used(n, false);
  for (int i = 0; i < n; ++i) {
    cplx lim = limit_root(n, pot.alpha_choice, labels[i]);
    int best = -1;
    double bd = 1e300;
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      double d = std::abs(z[j] - lim);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    used[best] = true;
    TurningPoint tp;
    tp.label = labels[i];
    tp.limit = lim;
    tp.z = z[best];
    for (auto& pr : pairs.pairs)
      if (pr.first == std::abs(tp.label) && tp.label != 0)
        tp.partner = -tp.label;
    out[i] = tp;
  }
  return out;
}

cplx drift_first_order(const RescaledPotential& pot, int label) {
  if (pot.n < 2 || pot.b.empty()) return limit_root(pot.n, pot.alpha_choice, label);
  cplx bp = pot.b_prime(pot.n - 1);
  cplx z0 = limit_root(pot.n, pot.alpha_choice, label);
  return z0 - I * bp / (double(pot.n) * pot.alpha) * pot.eta();
}

int tp_index(const std::vector<TurningPoint>& tps, int label) {
  for (size_t i = 0; i < tps.size(); ++i)
    if (tps[i].label == label) return (int)i;
  throw Error("invalid-index", "no turning point with requested label");
}

} // namespace stokes
