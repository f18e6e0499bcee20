#pragma once
#include <string>

#include "stokes/zeroloci.hpp"

namespace stokes {

// Every styling constant of the figure output in one place. Exceptional
// lines are drawn bold on top of the ordinary ones, cuts as broken lines,
// predicted islands as open circles, observed zeros as crosses.
struct RenderStyle {
  double scale = 130.0;  // pixels per unit length
  double rclip = 3.1;    // half-width of the viewport in world units
  double margin = 26.0;  // pixels around the clip square

  const char* background = "#ffffff";

  const char* line_color = "#8a8a8a";
  double line_width = 1.1;

  const char* exceptional_color = "#16161d";
  double exceptional_width = 2.8;

  const char* cut_color = "#b4632d";
  double cut_width = 1.3;
  const char* cut_dash = "7 5";

  const char* tp_color = "#16161d";
  double tp_radius = 3.4;

  const char* label_color = "#3c3c46";
  double label_size = 15.0;

  const char* prediction_color = "#20599c";
  double prediction_radius = 5.0;
  double prediction_width = 1.6;

  const char* zero_color = "#b3232a";
  double zero_arm = 4.6;
  double zero_width = 1.7;
};

// SVG of the graph with optional overlays; any of the pointer layers may be
// null. When `exc` is given, its lines are the bold ones. The output is a
// pure function of the inputs (no timestamps), so repeated renders of the
// same data are byte-identical.
std::string render_svg(const StokesGraph& graph,
                       const ExceptionalSet* exc = nullptr,
                       const std::vector<ZeroPrediction>* predictions = nullptr,
                       const std::vector<ZeroObservation>* zeros = nullptr,
                       const RenderStyle& style = RenderStyle{});

} // namespace stokes
