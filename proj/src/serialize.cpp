#include "stokes/serialize.hpp"

namespace stokes {

json to_json(cplx z) { return json::array({z.real(), z.imag()}); }

json to_json(const ComplexPath& path) {
  json a = json::array();
  for (cplx z : path.pts) a.push_back(to_json(z));
  return a;
}

namespace {

json points_json(const std::vector<cplx>& pts) {
  json a = json::array();
  for (cplx z : pts) a.push_back(to_json(z));
  return a;
}

const char* window_name(CutWindow w) {
  switch (w) {
    case CutWindow::left: return "left";
    case CutWindow::right: return "right";
    case CutWindow::up: return "up";
    default: return "down";
  }
}

const char* branch_name(LineBranch b) {
  switch (b) {
    case LineBranch::generic: return "generic";
    case LineBranch::inner: return "inner";
    case LineBranch::sector_upper: return "sector_upper";
    default: return "sector_lower";
  }
}

} // namespace

json to_json(const RescaledPotential& pot) {
  json j;
  j["n"] = pot.n;
  j["alpha_choice"] =
      pot.alpha_choice == AlphaChoice::unity ? "unity" : "rotated";
  j["alpha"] = to_json(pot.alpha);
  j["lambda"] = to_json(pot.lambda);
  json bs = json::array();
  for (cplx b : pot.b) bs.push_back(to_json(b));
  j["b"] = bs;
  json ws = json::array();
  for (cplx c : pot.w.c) ws.push_back(to_json(c));
  j["w_coefficients"] = ws;
  j["branch_note"] = pot.branch_note;
  j["standard_mode"] = pot.standard_mode;
  return j;
}

json to_json(const TurningPoint& tp) {
  json j;
  j["label"] = tp.label;
  j["limit"] = to_json(tp.limit);
  j["z"] = to_json(tp.z);
  if (tp.partner) j["partner"] = *tp.partner;
  return j;
}

json to_json(const CutPlane& cuts) {
  json j;
  json rays = json::array();
  for (const CutRay& r : cuts.cuts) {
    json e;
    e["anchor"] = to_json(r.anchor);
    e["window"] = window_name(r.window);
    rays.push_back(e);
  }
  j["rays"] = rays;
  j["anchor_sign"] = cuts.anchor_sign;
  return j;
}

json to_json(const StokesLine& line) {
  json j;
  j["origin"] = line.origin;
  j["emission"] = line.emission;
  j["to_infinity"] = line.to_infinity;
  if (line.to_infinity)
    j["asym_angle"] = line.asym_angle;
  else
    j["target"] = line.target;
  j["near_miss"] = line.near_miss;
  j["length"] = line.length();
  j["points"] = points_json(line.z);
  return j;
}

json to_json(const Sector& sector) {
  json j;
  j["label"] = sector.label;
  j["lo"] = sector.lo;
  j["hi"] = sector.hi;
  j["sigma"] = sector.sigma;
  j["anchor_root"] = sector.anchor_root;
  j["bounding"] = sector.bounding;
  return j;
}

json to_json(const StokesGraph& graph) {
  json j;
  j["critical"] = graph.critical;
  json pairs = json::array();
  for (auto& p : graph.inner_pairs)
    pairs.push_back(json::array({p.first, p.second}));
  j["inner_pairs"] = pairs;
  json tps = json::array();
  for (const auto& tp : graph.tps) tps.push_back(to_json(tp));
  j["turning_points"] = tps;
  j["cuts"] = to_json(graph.cuts);
  json lines = json::array();
  for (const auto& ln : graph.lines) lines.push_back(to_json(ln));
  j["lines"] = lines;
  json sectors = json::array();
  for (const auto& s : graph.sectors) sectors.push_back(to_json(s));
  j["sectors"] = sectors;
  return j;
}

json to_json(const ExceptionalSet& exc) {
  json j;
  j["k"] = exc.k;
  j["eps"] = exc.eps;
  json roots;
  for (const auto& kv : exc.lines_by_root)
    roots[std::to_string(kv.first)] = kv.second;
  j["lines_by_root"] = roots;
  j["opposite_excluded"] = exc.opposite_excluded;
  return j;
}

json to_json(const ZeroPrediction& p) {
  json j;
  j["k"] = p.k;
  j["l"] = p.l;
  j["q"] = p.q;
  j["r"] = p.r;
  j["branch"] = branch_name(p.branch);
  j["sign"] = p.sign;
  j["Lambda"] = p.Lambda;
  j["R"] = p.R;
  j["low_confidence"] = p.low_confidence;
  j["line_index"] = p.line_index;
  j["zeta0"] = to_json(p.zeta0);
  j["zeta1"] = to_json(p.zeta1);
  j["zeta2"] = to_json(p.zeta2);
  j["composite"] = to_json(p.composite);
  return j;
}

json to_json(const ZeroObservation& o) {
  json j;
  j["location"] = to_json(o.location);
  j["multiplicity"] = o.multiplicity;
  j["residual"] = o.residual;
  return j;
}

json to_json(const ComparisonReport& r) {
  json j;
  json preds = json::array();
  for (const auto& p : r.predictions) preds.push_back(to_json(p));
  j["predictions"] = preds;
  json obs = json::array();
  for (const auto& o : r.observations) obs.push_back(to_json(o));
  j["observations"] = obs;
  json m = json::array();
  for (const auto& pair : r.matched) {
    json e;
    e["prediction"] = pair.prediction;
    e["observation"] = pair.observation;
    e["residual"] = pair.residual;
    m.push_back(e);
  }
  j["matched"] = m;
  j["unmatched_predictions"] = r.unmatched_predictions;
  j["unmatched_observations"] = r.unmatched_observations;
  j["max_residual"] = r.max_residual;
  j["fitted_order"] = r.fitted_order;
  return j;
}

json to_json(const QuantizationResult& q) {
  json j;
  j["s"] = q.s;
  j["k0"] = q.k0;
  j["lambda_leading"] = to_json(q.lambda_leading);
  j["lambda_refined"] = to_json(q.lambda_refined);
  j["residual"] = q.residual;
  j["z_correction"] = to_json(q.z_correction);
  return j;
}

std::string dump_artifact(const json& j) { return j.dump(2) + "\n"; }

} // namespace stokes
