#include "gfcg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gfcg::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 300.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 34.0;
constexpr double kBottom = 46.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                               "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12) {
            lo -= 0.5;
            hi += 0.5;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

void draw_panel(std::ostringstream& os, const Panel& p, double y0) {
    Range rx;
    Range ry;
    for (const auto& s : p.series) {
        for (double v : s.x) rx.add(v);
        for (double v : s.y) ry.add(v);
    }
    rx.finish();
    ry.finish();
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * plot_w; };
    auto py = [&](double v) { return y0 + kTop + (1.0 - (v - ry.lo) / (ry.hi - ry.lo)) * plot_h; };

    os << "<text x=\"" << kLeft << "\" y=\"" << y0 + 20 << "\" font-size=\"14\">"
       << escape(p.title) << "</text>\n";
    os << "<rect x=\"" << kLeft << "\" y=\"" << y0 + kTop << "\" width=\"" << plot_w
       << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double vx = rx.lo + (rx.hi - rx.lo) * i / 4.0;
        const double vy = ry.lo + (ry.hi - ry.lo) * i / 4.0;
        os << "<text x=\"" << px(vx) << "\" y=\"" << y0 + kTop + plot_h + 16
           << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(vx) << "</text>\n";
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(vy) + 3
           << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(vy) << "</text>\n";
        os << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << py(vy)
           << "\" y2=\"" << py(vy) << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << y0 + kHeight - 8
       << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(p.x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << y0 + kTop + plot_h / 2
       << "\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
       << y0 + kTop + plot_h / 2 << ")\">" << escape(p.y_label) << "</text>\n";

    for (std::size_t s = 0; s < p.series.size(); ++s) {
        const auto& series = p.series[s];
        const char* color = kColors[s % std::size(kColors)];
        const std::size_t n = std::min(series.x.size(), series.y.size());
        if (series.markers) {
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(series.y[i]))
                    os << "<circle cx=\"" << px(series.x[i]) << "\" cy=\"" << py(series.y[i])
                       << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        } else {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < n; ++i)
                if (std::isfinite(series.y[i])) os << px(series.x[i]) << "," << py(series.y[i]) << " ";
            os << "\"/>\n";
        }
        const double ly = y0 + kTop + 14.0 * static_cast<double>(s) + 8;
        os << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly - 8
           << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << ly + 1 << "\" font-size=\"11\">"
           << escape(series.label) << "</text>\n";
    }
}

}  // namespace

std::string render(const std::vector<Panel>& panels) {
    std::ostringstream os;
    os.precision(6);
    const double total = kHeight * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << total
       << "\" font-family=\"sans-serif\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        draw_panel(os, panels[i], kHeight * static_cast<double>(i));
    os << "</svg>\n";
    return os.str();
}

}  // namespace gfcg::svg
