#pragma once

#include <string>
#include <utility>
#include <vector>

namespace actuate {

// Maps a data interval onto a pixel interval. Degenerate data ranges are
// widened by a hair so every finite value lands somewhere sensible.
struct LinearScale {
    double data_lo = 0.0;
    double data_hi = 1.0;
    double px_lo = 0.0;
    double px_hi = 1.0;

    LinearScale() = default;
    LinearScale(double d_lo, double d_hi, double p_lo, double p_hi);

    double operator()(double v) const;
};

// Deterministic SVG writer: fixed attribute order and shortest round-trip
// number formatting, so identical draw calls produce identical bytes.
class SvgCanvas {
public:
    SvgCanvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke,
              double stroke_width = 1.0, double opacity = 1.0);
    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke = "none", double stroke_width = 0.0,
              double opacity = 1.0);
    void circle(double cx, double cy, double r, const std::string& fill,
                double opacity = 1.0);
    // rotate_deg turns the ellipse counterclockwise about its own center.
    void ellipse(double cx, double cy, double rx, double ry, double rotate_deg,
                 const std::string& stroke, double stroke_width,
                 const std::string& fill = "none", double opacity = 1.0);
    void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
                 double opacity = 1.0);
    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                  double stroke_width = 1.0, double opacity = 1.0);
    // anchor is the SVG text-anchor value: start, middle, or end.
    void text(double x, double y, const std::string& s, double font_size,
              const std::string& anchor = "start", const std::string& fill = "#333");

    std::string str() const;
    void save(const std::string& path) const;

private:
    double width_;
    double height_;
    std::vector<std::string> body_;
};

}  // namespace actuate
