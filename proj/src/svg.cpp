#include "ssae/svg.hpp"

#include <fstream>
#include <sstream>

namespace ssae::report {

namespace {

constexpr int kSize = 480;
constexpr int kMargin = 48;

double px(double unit) {  // unit in [0,1] -> plot x
    return kMargin + unit * (kSize - 2 * kMargin);
}

double py(double unit) {  // unit in [0,1] -> plot y (flipped)
    return kSize - kMargin - unit * (kSize - 2 * kMargin);
}

}  // namespace

std::string pr_curve_svg(const metrics::PRCurve& curve, const std::string& title) {
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\""
        << kSize << "\" viewBox=\"0 0 " << kSize << " " << kSize << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "  <text x=\"" << kSize / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"14\">" << title
        << " (AUPRC=" << curve.auprc << ")</text>\n";
    // axes
    svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
        << py(0) << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
        << py(1) << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double u = t / 4.0;
        svg << "  <text x=\"" << px(u) << "\" y=\"" << py(0) + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << u
            << "</text>\n";
        svg << "  <text x=\"" << px(0) - 8 << "\" y=\"" << py(u) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << u
            << "</text>\n";
    }
    svg << "  <text x=\"" << px(0.5) << "\" y=\"" << kSize - 8
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">recall</text>\n";
    svg << "  <text x=\"14\" y=\"" << py(0.5)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << py(0.5) << ")\">precision</text>\n";

    // stepwise polyline: precision holds between recall cuts
    std::ostringstream pts;
    double prev_p = curve.points.empty() ? 1.0 : curve.points.front().precision;
    pts << px(0) << "," << py(prev_p);
    for (const metrics::PRPoint& pt : curve.points) {
        pts << " " << px(pt.recall) << "," << py(prev_p);
        pts << " " << px(pt.recall) << "," << py(pt.precision);
        prev_p = pt.precision;
    }
    svg << "  <polyline points=\"" << pts.str()
        << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n";
    svg << "</svg>\n";
    return svg.str();
}

void write_pr_curve_svg(const std::filesystem::path& path, const metrics::PRCurve& curve,
                        const std::string& title) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write SVG " + path.string());
    f << pr_curve_svg(curve, title);
}

}  // namespace ssae::report
