#include "stokes/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <set>

namespace stokes {

namespace {

struct Canvas {
  std::string out;
  double scale, rclip, margin;

  double px(double x) const { return margin + (x + rclip) * scale; }
  double py(double y) const { return margin + (rclip - y) * scale; }
  double side() const { return 2 * rclip * scale + 2 * margin; }

  void add(const char* fmt, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    out += buf;
  }

  void polyline(const std::vector<cplx>& pts, const char* color, double width,
                const char* dash) {
    if (pts.size() < 2) return;
    out += "<polyline fill=\"none\" points=\"";
    char buf[64];
    for (cplx z : pts) {
      // clip softly: points far outside still serialize, the viewBox crops
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(z.real()), py(z.imag()));
      out += buf;
    }
    add("\" stroke=\"%s\" stroke-width=\"%.2f\"", color, width);
    if (dash) add(" stroke-dasharray=\"%s\"", dash);
    out += "/>\n";
  }
};

} // namespace

std::string render_svg(const StokesGraph& graph, const ExceptionalSet* exc,
                       const std::vector<ZeroPrediction>* predictions,
                       const std::vector<ZeroObservation>* zeros,
                       const RenderStyle& st) {
  Canvas c{std::string(), st.scale, st.rclip, st.margin};
  double side = c.side();
  c.add("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" "
        "height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
        side, side, side, side);
  c.add("<rect width=\"%.0f\" height=\"%.0f\" fill=\"%s\"/>\n", side, side,
        st.background);

  // cuts first so everything else draws over them
  for (const CutRay& r : graph.cuts.cuts) {
    cplx dir;
    switch (r.window) {
      case CutWindow::left: dir = {-1.0, 0.0}; break;
      case CutWindow::right: dir = {1.0, 0.0}; break;
      case CutWindow::up: dir = {0.0, 1.0}; break;
      default: dir = {0.0, -1.0}; break;
    }
    c.polyline({r.anchor, r.anchor + 3.0 * st.rclip * dir}, st.cut_color,
               st.cut_width, st.cut_dash);
  }

  std::set<int> bold;
  if (exc)
    for (int i : exc->flat()) bold.insert(i);
  for (size_t i = 0; i < graph.lines.size(); ++i)
    if (!bold.count(int(i)))
      c.polyline(graph.lines[i].z, st.line_color, st.line_width, nullptr);
  for (int i : bold)
    c.polyline(graph.lines[size_t(i)].z, st.exceptional_color,
               st.exceptional_width, nullptr);

  for (const TurningPoint& tp : graph.tps) {
    c.add("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"%s\"/>\n",
          c.px(tp.z.real()), c.py(tp.z.imag()), st.tp_radius, st.tp_color);
    c.add("<text x=\"%.2f\" y=\"%.2f\" font-size=\"%.1f\" fill=\"%s\" "
          "font-family=\"sans-serif\">%d</text>\n",
          c.px(tp.z.real()) + 6.0, c.py(tp.z.imag()) - 6.0, st.label_size,
          st.label_color, tp.label);
  }

  for (const Sector& s : graph.sectors) {
    double th = s.mid();
    double r = 0.93 * st.rclip;
    c.add("<text x=\"%.2f\" y=\"%.2f\" font-size=\"%.1f\" fill=\"%s\" "
          "font-family=\"sans-serif\" text-anchor=\"middle\">S%d</text>\n",
          c.px(r * std::cos(th)), c.py(r * std::sin(th)), st.label_size,
          st.label_color, s.label);
  }

  if (predictions)
    for (const ZeroPrediction& p : *predictions)
      c.add("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"none\" "
            "stroke=\"%s\" stroke-width=\"%.2f\"/>\n",
            c.px(p.composite.real()), c.py(p.composite.imag()),
            st.prediction_radius, st.prediction_color, st.prediction_width);

  if (zeros)
    for (const ZeroObservation& o : *zeros) {
      double x = c.px(o.location.real()), y = c.py(o.location.imag());
      double a = st.zero_arm;
      c.add("<path d=\"M%.2f %.2f L%.2f %.2f M%.2f %.2f L%.2f %.2f\" "
            "stroke=\"%s\" stroke-width=\"%.2f\"/>\n",
            x - a, y - a, x + a, y + a, x - a, y + a, x + a, y - a,
            st.zero_color, st.zero_width);
    }

  c.out += "</svg>\n";
  return c.out;
}

} // namespace stokes
