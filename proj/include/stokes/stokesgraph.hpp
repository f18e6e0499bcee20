#pragma once

#include <map>
#include <utility>
#include <vector>

#include "stokes/branchcut.hpp"
#include "stokes/potential.hpp"

namespace stokes {

// A single traced Stokes line Re(lambda * int sqrt(w)) = 0. Samples carry the
// running action (from the origin turning point, along the line's own
// continuous branch of sqrt(w)) and that branch's value; downstream code that
// needs a globally fixed branch must reconcile signs itself.
struct StokesLine {
  int origin = 0;   // turning point label
  int emission = 0; // 0, 1, 2 counterclockwise
  std::vector<cplx> z;
  std::vector<cplx> action;
  std::vector<cplx> sqw;
  std::vector<double> s; // arclength
  bool to_infinity = true;
  double asym_angle = 0.0; // angle at the R_max exit
  int target = 0;          // captured turning-point label when !to_infinity
  bool near_miss = false;
  double min_clearance = 1e300; // distance to nearest non-origin turning point

  double length() const { return s.empty() ? 0.0 : s.back(); }
};

struct Sector {
  int label = 0;
  double lo = 0.0, hi = 0.0; // angular interval at R_max, counterclockwise
  std::vector<int> bounding; // indices into StokesGraph::lines
  int sigma = 1;
  int anchor_root = 0; // turning point the sector's solution is anchored at
  // direction the decay probe ended at. sigma is the sign of the cut-branch
  // action THERE; the branch can flip across a cut inside the same sector,
  // so seeding must happen on this side
  double probe_angle = 0.0;

  bool contains_angle(double theta) const;
  double mid() const;
};

struct StokesGraph {
  RescaledPotential pot;
  CutPlane cuts;
  std::vector<TurningPoint> tps;
  std::vector<StokesLine> lines; // 3n records; an inner line appears twice
  std::vector<Sector> sectors;   // exactly n+2 once assembled
  bool critical = false;
  std::vector<std::pair<int, int>> inner_pairs; // (k, -k), k > 0

  const Sector& sector(int label) const;
  const Sector& sector_at(double theta) const;
  // the line record traced from `origin` that was captured by `target`
  const StokesLine* inner_line(int origin, int target) const;
  bool is_inner_member(int k) const;
};

struct ExceptionalSet {
  int k = 0;
  std::map<int, std::vector<int>> lines_by_root; // root label -> line indices
  double eps = 0.0;
  // one offset polygon per entry of `flat()`; trimmed eps short of the
  // turning points
  std::vector<std::vector<cplx>> vicinity;
  bool opposite_excluded = false;

  std::vector<int> flat() const; // all line indices, root order
};

// Emission tangent angles at a turning point: the three solutions of
// arg(lambda) + arg(W')/2 + 3 theta/2 = pi/2 (mod pi).
std::array<double, 3> emission_angles(const RescaledPotential& pot,
                                      const TurningPoint& tp);

StokesLine trace_line(const RescaledPotential& pot,
                      const std::vector<TurningPoint>& tps, int origin,
                      int emission, const Tolerances& tol = Tolerances{});

StokesGraph build_graph(const RescaledPotential& pot,
                        const Tolerances& tol = Tolerances{},
                        Exec exec = Exec::serial);

// Cut-free polyline from the sector's anchor turning point to z_to, with the
// action integral along it (sheet +1 throughout). The route runs radially
// inward from the anchor, around the inner circle below every cut anchor,
// out along a free direction, then along the circle |z| = |z_to| to the
// endpoint. allow_detour permits exiting through a direction outside the
// direct corridor when cuts sweep it. nullopt when every corridor is blocked.
struct SectorRoute {
  ComplexPath path;
  cplx action{0.0, 0.0};
};
std::optional<SectorRoute> sector_route(const StokesGraph& graph,
                                        const Sector& sec, cplx z_to,
                                        const Tolerances& tol = Tolerances{},
                                        bool allow_detour = true);

// Far point of sector k at radius r suited to seeding an asymptotic
// solution: reachable by sector_route, outgoing ray cut-free beyond r, and on
// the side of any in-sector cut where sec.sigma describes the decaying
// exponent.
cplx seed_point(const StokesGraph& graph, int k, double r,
                const Tolerances& tol = Tolerances{});

// Does the radial segment [r_lo, r_hi] e^{i theta} meet any cut ray.
bool ray_blocked(const CutPlane& cp, double theta, double r_lo, double r_hi);

ExceptionalSet exceptional_set(const StokesGraph& graph, int k, double eps,
                               const Tolerances& tol = Tolerances{});

// Phase that restores the inner line of the pair (k0, -k0) to leading order
// in 1/|lambda|, refined so the actual pair action is purely imaginary.
double critical_phase(int n, AlphaChoice ac, const std::vector<cplx>& b,
                      double abs_lambda, int k0,
                      const Tolerances& tol = Tolerances{});

// Label-to-angular-interval table for the limit configuration (beta = 0).
// Interval m is (boundary[m], boundary[m+1]) counterclockwise; the returned
// labels follow the enumeration scheme documented in docs/labeling.md.
std::vector<int> sector_label_table(int n, AlphaChoice ac);

} // namespace stokes
