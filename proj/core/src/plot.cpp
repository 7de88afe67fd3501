#include "sama/plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sama/errors.hpp"

namespace sama {

std::vector<double> window_mean(std::span<const double> values, int window) {
    if (window < 1) throw ContractError("window_mean: window must be >= 1");
    std::vector<double> out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= static_cast<std::size_t>(window)) acc -= values[i - static_cast<std::size_t>(window)];
        const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

std::string render_loss_svg(const std::vector<PlotSeries>& series, const std::string& title) {
    if (series.empty()) throw ContractError("render_loss_svg: no series");
    for (const PlotSeries& s : series) {
        if (s.values.empty()) throw ContractError("render_loss_svg: empty series '" + s.label + "'");
    }
    const int width = 800, height = 480;
    const int ml = 70, mr = 20, mt = 40, mb = 40;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    double lo = series[0].values[0], hi = lo;
    std::size_t max_len = 0;
    for (const PlotSeries& s : series) {
        max_len = std::max(max_len, s.values.size());
        for (double v : s.values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi == lo) {
        hi += 0.5;
        lo -= 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    constexpr std::size_t kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
        << "  <rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n"
        << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"16\">"
        << title << "</text>\n"
        << "  <line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n"
        << "  <line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";

    auto fmt = [](double v) {
        std::ostringstream os;
        os.precision(4);
        os << v;
        return os.str();
    };
    svg << "  <text x=\"" << ml - 6 << "\" y=\"" << mt + 6
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt(hi)
        << "</text>\n"
        << "  <text x=\"" << ml - 6 << "\" y=\"" << height - mb
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt(lo)
        << "</text>\n"
        << "  <text x=\"" << width - mr << "\" y=\"" << height - mb + 16
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">step "
        << (max_len > 0 ? max_len - 1 : 0) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = kPalette[si % kPaletteSize];
        svg << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        const std::size_t n = s.values.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double fx = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
            const double fy = (s.values[i] - lo) / (hi - lo);
            const double x = ml + fx * plot_w;
            const double y = height - mb - fy * plot_h;
            svg << x << ',' << y << ' ';
        }
        svg << "\"/>\n";
        svg << "  <text x=\"" << ml + 10 << "\" y=\"" << mt + 16 + 16 * static_cast<int>(si)
            << "\" font-family=\"monospace\" font-size=\"12\" fill=\"" << color << "\">" << s.label
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace sama
