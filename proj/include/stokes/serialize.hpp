#pragma once
#include <json.hpp>

#include "stokes/zeroloci.hpp"

namespace stokes {

// Insertion-ordered objects: artifacts read top-down in the order the code
// emits them, and the byte stream is reproducible for identical inputs.
using json = nlohmann::ordered_json;

json to_json(cplx z); // [re, im]
json to_json(const ComplexPath& path);

json to_json(const RescaledPotential& pot);
json to_json(const TurningPoint& tp);
json to_json(const CutPlane& cuts);
json to_json(const StokesLine& line);
json to_json(const Sector& sector);
json to_json(const StokesGraph& graph);
json to_json(const ExceptionalSet& exc);

json to_json(const ZeroPrediction& p);
json to_json(const ZeroObservation& o);
json to_json(const ComparisonReport& r);
json to_json(const QuantizationResult& q);

// dump(2) with a trailing newline; the single choke point for artifact
// formatting so identical values always produce identical bytes
std::string dump_artifact(const json& j);

} // namespace stokes
