#include "ulm/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ulm {

ConfusionCounts confusion_counts(const BinaryImage& prediction, const BinaryImage& truth) {
    if (!prediction.same_shape(truth))
        throw ContractError("prediction " + std::to_string(prediction.rows) + "x" + std::to_string(prediction.cols) +
                            " vs truth " + std::to_string(truth.rows) + "x" + std::to_string(truth.cols));
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = prediction.data[i] != 0, t = truth.data[i] != 0;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricReport metrics(const ConfusionCounts& c, std::string provenance) {
    MetricReport m;
    m.counts = c;
    m.provenance = std::move(provenance);
    if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (2 * c.tp + c.fp + c.fn > 0) m.dice = 2.0 * static_cast<double>(c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return m;
}

double dice_score(const BinaryImage& a, const BinaryImage& b) {
    const auto d = metrics(confusion_counts(a, b)).dice;
    return d ? *d : 1.0;
}

BinaryImage ground_truth_angiogram(const std::vector<BinaryImage>& block_masks) {
    if (block_masks.empty()) throw ContractError("reference needs at least one block");
    BinaryImage out(block_masks.front().rows, block_masks.front().cols);
    for (const auto& m : block_masks) {
        if (!m.same_shape(out)) throw ContractError("block masks differ in shape");
        for (std::size_t i = 0; i < m.size(); ++i) out.data[i] |= m.data[i] ? 1 : 0;
    }
    return out;
}

BinaryImage ground_truth_angiogram(const std::vector<std::vector<Trajectory>>& block_trajectories,
                                   const BlockGeometry& geom, const Placement& placement, int r) {
    std::vector<BinaryImage> masks;
    masks.reserve(block_trajectories.size());
    for (const auto& t : block_trajectories) masks.push_back(rasterize_tracks(t, geom, placement, r));
    return ground_truth_angiogram(masks);
}

std::vector<FillingPoint> network_filling_curve(const std::vector<BinaryImage>& block_masks,
                                                const BinaryImage& reference, const std::vector<int>& checkpoints) {
    std::vector<int> cps = checkpoints;
    std::sort(cps.begin(), cps.end());
    BinaryImage acc(reference.rows, reference.cols);
    std::vector<FillingPoint> out;
    std::size_t used = 0;
    for (int n : cps) {
        if (n < 0 || static_cast<std::size_t>(n) > block_masks.size())
            throw ContractError("checkpoint " + std::to_string(n) + " exceeds the " +
                                std::to_string(block_masks.size()) + " available blocks");
        for (; used < static_cast<std::size_t>(n); ++used) {
            const auto& m = block_masks[used];
            if (!m.same_shape(acc)) throw ContractError("block mask does not match the reference shape");
            for (std::size_t i = 0; i < m.size(); ++i) acc.data[i] |= m.data[i] ? 1 : 0;
        }
        out.push_back({n, dice_score(acc, reference)});
    }
    return out;
}

std::vector<MethodRow> compare_methods(double density, const std::vector<NamedMask>& methods, const BinaryImage& reference) {
    std::vector<MethodRow> rows;
    for (const auto& m : methods) rows.push_back({density, m.method, metrics(confusion_counts(m.mask, reference))});
    return rows;
}

namespace {

std::string percent(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream s;
    s.precision(6);
    s << 100.0 * *v;
    return s.str();
}

}  // namespace

void write_report_csv(std::ostream& os, const std::vector<MethodRow>& rows) {
    os << "density,method,precision,recall,dice\n";
    for (const auto& r : rows)
        os << r.density << ',' << r.method << ',' << percent(r.report.precision) << ',' << percent(r.report.recall)
           << ',' << percent(r.report.dice) << '\n';
}

void write_filling_csv(std::ostream& os, const std::vector<FillingSeries>& series) {
    os << "blocks";
    for (const auto& s : series) os << ',' << s.label;
    os << '\n';
    if (series.empty()) return;
    for (std::size_t k = 0; k < series.front().points.size(); ++k) {
        os << series.front().points[k].blocks;
        for (const auto& s : series) os << ',' << (k < s.points.size() ? s.points[k].dice : std::nan(""));
        os << '\n';
    }
}

void write_line_profiles(std::ostream& os, const Image2D<int>& a, const Image2D<int>& b, int row,
                         const std::string& a_label, const std::string& b_label) {
    if (!a.same_shape(b)) throw ContractError("profile images differ in shape");
    if (row < 0 || row >= a.rows) throw ContractError("profile row outside the image");
    os << "row,column," << a_label << ',' << b_label << '\n';
    for (int j = 0; j < a.cols; ++j) os << row << ',' << j << ',' << a(row, j) << ',' << b(row, j) << '\n';
}

std::optional<double> fwhm(const std::vector<double>& profile) {
    if (profile.size() < 3) return std::nullopt;
    const auto peak_it = std::max_element(profile.begin(), profile.end());
    const double half = 0.5 * *peak_it;
    if (!(half > 0)) return std::nullopt;
    const std::ptrdiff_t p = peak_it - profile.begin();
    std::optional<double> left, right;
    for (std::ptrdiff_t i = p; i > 0; --i) {
        const double hi = profile[static_cast<std::size_t>(i)], lo = profile[static_cast<std::size_t>(i - 1)];
        if (lo < half) {
            left = static_cast<double>(i - 1) + (half - lo) / (hi - lo);
            break;
        }
    }
    for (std::size_t i = static_cast<std::size_t>(p); i + 1 < profile.size(); ++i) {
        const double hi = profile[i], lo = profile[i + 1];
        if (lo < half) {
            right = static_cast<double>(i) + (hi - half) / (hi - lo);
            break;
        }
    }
    if (!left || !right) return std::nullopt;
    return *right - *left;
}

namespace {

std::string xml_escape(const std::string& s) {
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

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series) {
    constexpr double W = 640, H = 420, L = 70, R = 150, T = 40, B = 55;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ContractError("plot series '" + s.label + "' has mismatched x and y");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    y0 = std::min(y0, 0.0);
    if (y1 <= y0) y1 = y0 + 1;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << xml_escape(y_label) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = colors[s % 6];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < series[s].x.size(); ++i)
            if (std::isfinite(series[s].x[i]) && std::isfinite(series[s].y[i]))
                os << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
        os << "\"/>\n";
        const double ly = T + 18.0 * static_cast<double>(s);
        os << "<line x1=\"" << W - R + 12 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 32 << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << W - R + 38 << "\" y=\"" << ly + 4 << "\">" << xml_escape(series[s].label) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace ulm
