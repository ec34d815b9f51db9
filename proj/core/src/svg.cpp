#include "actuate/svg.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "actuate/errors.hpp"
#include "actuate/numkit.hpp"

namespace actuate {

LinearScale::LinearScale(double d_lo, double d_hi, double p_lo, double p_hi)
    : data_lo(d_lo), data_hi(d_hi), px_lo(p_lo), px_hi(p_hi) {
    if (data_hi <= data_lo) {
        const double pad = std::max(1e-9, std::abs(data_lo) * 1e-9);
        data_lo -= pad;
        data_hi = data_lo + 2 * pad;
    }
}

double LinearScale::operator()(double v) const {
    const double t = (v - data_lo) / (data_hi - data_lo);
    return px_lo + t * (px_hi - px_lo);
}

namespace {

std::string esc(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string num(double v) { return format_double(v); }

}  // namespace

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double stroke_width, double opacity) {
    std::ostringstream os;
    os << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2)
       << "\" y2=\"" << num(y2) << "\" stroke=\"" << esc(stroke) << "\" stroke-width=\""
       << num(stroke_width) << "\"";
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke, double stroke_width, double opacity) {
    std::ostringstream os;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w)
       << "\" height=\"" << num(h) << "\" fill=\"" << esc(fill) << "\"";
    if (stroke != "none") {
        os << " stroke=\"" << esc(stroke) << "\" stroke-width=\"" << num(stroke_width) << "\"";
    }
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill, double opacity) {
    std::ostringstream os;
    os << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" r=\"" << num(r)
       << "\" fill=\"" << esc(fill) << "\"";
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::ellipse(double cx, double cy, double rx, double ry, double rotate_deg,
                        const std::string& stroke, double stroke_width, const std::string& fill,
                        double opacity) {
    std::ostringstream os;
    os << "<ellipse cx=\"" << num(cx) << "\" cy=\"" << num(cy) << "\" rx=\"" << num(rx)
       << "\" ry=\"" << num(ry) << "\" fill=\"" << esc(fill) << "\" stroke=\"" << esc(stroke)
       << "\" stroke-width=\"" << num(stroke_width) << "\"";
    if (rotate_deg != 0.0) {
        os << " transform=\"rotate(" << num(rotate_deg) << " " << num(cx) << " " << num(cy)
           << ")\"";
    }
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::polygon(const std::vector<std::pair<double, double>>& pts,
                        const std::string& fill, double opacity) {
    std::ostringstream os;
    os << "<polygon points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) os << " ";
        os << num(pts[i].first) << "," << num(pts[i].second);
    }
    os << "\" fill=\"" << esc(fill) << "\"";
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& stroke, double stroke_width, double opacity) {
    std::ostringstream os;
    os << "<polyline points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i) os << " ";
        os << num(pts[i].first) << "," << num(pts[i].second);
    }
    os << "\" fill=\"none\" stroke=\"" << esc(stroke) << "\" stroke-width=\""
       << num(stroke_width) << "\"";
    if (opacity != 1.0) os << " opacity=\"" << num(opacity) << "\"";
    os << "/>";
    body_.push_back(os.str());
}

void SvgCanvas::text(double x, double y, const std::string& s, double font_size,
                     const std::string& anchor, const std::string& fill) {
    std::ostringstream os;
    os << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << num(font_size)
       << "\" font-family=\"sans-serif\" text-anchor=\"" << esc(anchor) << "\" fill=\""
       << esc(fill) << "\">" << esc(s) << "</text>";
    body_.push_back(os.str());
}

std::string SvgCanvas::str() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\""
       << num(height_) << "\" viewBox=\"0 0 " << num(width_) << " " << num(height_) << "\">\n";
    for (const std::string& el : body_) os << el << "\n";
    os << "</svg>\n";
    return os.str();
}

void SvgCanvas::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open SVG output: " + path);
    const std::string doc = str();
    f.write(doc.data(), static_cast<std::streamsize>(doc.size()));
    if (!f) throw ConfigError("failed writing SVG output: " + path);
}

}  // namespace actuate
