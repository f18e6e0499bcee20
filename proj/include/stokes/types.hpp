#pragma once
#include <complex>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace stokes {

using cplx = std::complex<double>;
inline constexpr double pi = 3.14159265358979323846;
inline const cplx I{0.0, 1.0};

// Every failure mode carries a stable code string so callers (and the CLI,
// which maps them to exit status 3) can dispatch without parsing prose.
class Error : public std::runtime_error {
public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

enum class Exec { serial, parallel };

// Numerical knobs. Defaults are chosen so the standard configurations
// (n <= ~12, |lambda| <= ~500) resolve without tuning; every field can be
// overridden through the environment (STOKES_<NAME>), which the CLI applies
// before a run.
struct Tolerances {
  double quad_tol = 1e-11;        // absolute target per action integral
  double trace_residual = 1e-10;  // Re(lambda*action) drift allowed on a line
  double capture_radius = 1e-4;   // turning-point capture while tracing
  double collision = 1e-6;        // min turning-point separation
  double r_max = 8.0;             // tracing stops at this radius
  double ode_rel = 1e-11;         // local relative error, solution transport
  double newton_tol = 1e-9;       // |psi| reduction target for zero refinement
  double lambda_threshold = 10.0; // below this the asymptotic regime is suspect
  double tie_nudge = 1e-12;       // cut-crossing tie breaking

  static Tolerances from_env();
};

inline double env_or(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  double x = std::strtod(v, &end);
  return end == v ? fallback : x;
}

inline Tolerances Tolerances::from_env() {
  Tolerances t;
  t.quad_tol = env_or("STOKES_QUAD_TOL", t.quad_tol);
  t.trace_residual = env_or("STOKES_TRACE_RESIDUAL", t.trace_residual);
  t.capture_radius = env_or("STOKES_CAPTURE_RADIUS", t.capture_radius);
  t.collision = env_or("STOKES_COLLISION", t.collision);
  t.r_max = env_or("STOKES_R_MAX", t.r_max);
  t.ode_rel = env_or("STOKES_ODE_REL", t.ode_rel);
  t.newton_tol = env_or("STOKES_NEWTON_TOL", t.newton_tol);
  t.lambda_threshold = env_or("STOKES_LAMBDA_THRESHOLD", t.lambda_threshold);
  t.tie_nudge = env_or("STOKES_TIE_NUDGE", t.tie_nudge);
  return t;
}

// Dense polynomial over C, coefficients ascending. Small degrees only, so
// plain Horner evaluation is exact enough and nothing fancier is warranted.
struct Poly {
  std::vector<cplx> c;

  int degree() const { return (int)c.size() - 1; }

  cplx operator()(cplx z) const {
    cplx acc{0.0, 0.0};
    for (size_t i = c.size(); i-- > 0;) acc = acc * z + c[i];
    return acc;
  }

  Poly derivative() const {
    Poly d;
    if (c.size() <= 1) {
      d.c = {cplx{0, 0}};
      return d;
    }
    d.c.resize(c.size() - 1);
    for (size_t i = 1; i < c.size(); ++i) d.c[i - 1] = double(i) * c[i];
    return d;
  }

  Poly operator*(const Poly& o) const {
    Poly r;
    r.c.assign(c.size() + o.c.size() - 1, cplx{0, 0});
    for (size_t i = 0; i < c.size(); ++i)
      for (size_t j = 0; j < o.c.size(); ++j) r.c[i + j] += c[i] * o.c[j];
    return r;
  }

  Poly operator+(const Poly& o) const {
    Poly r;
    r.c.assign(std::max(c.size(), o.c.size()), cplx{0, 0});
    for (size_t i = 0; i < c.size(); ++i) r.c[i] += c[i];
    for (size_t i = 0; i < o.c.size(); ++i) r.c[i] += o.c[i];
    return r;
  }

  Poly scaled(cplx s) const {
    Poly r = *this;
    for (auto& x : r.c) x *= s;
    return r;
  }
};

struct ComplexPath {
  std::vector<cplx> pts;
};

} // namespace stokes
