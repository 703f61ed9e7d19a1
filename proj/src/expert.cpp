#include "ulm/expert.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace ulm {

std::vector<PixelIndex> detect_local_maxima(const Image2D<float>& mag, double threshold) {
    if (!(threshold > 0 && threshold < 1)) throw ContractError("detection threshold must lie in (0, 1)");
    std::vector<PixelIndex> peaks;
    for (int i = 1; i + 1 < mag.rows; ++i) {
        for (int j = 1; j + 1 < mag.cols; ++j) {
            const float v = mag(i, j);
            if (!(v > threshold)) continue;
            bool strict = true;
            for (int di = -1; di <= 1 && strict; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((di || dj) && !(v > mag(i + di, j + dj))) {
                        strict = false;
                        break;
                    }
                }
            if (strict) peaks.push_back({i, j});
        }
    }
    return peaks;
}

namespace {

// Vertex of the parabola through (-1, ln lo), (0, ln mid), (1, ln hi).
double log_parabola_vertex(double lo, double mid, double hi, bool& degenerate) {
    degenerate = false;
    if (!(lo > 0 && mid > 0 && hi > 0)) {
        degenerate = true;
        return 0.0;
    }
    const double a = std::log(lo), b = std::log(mid), c = std::log(hi);
    const double denom = 2.0 * (a - 2.0 * b + c);
    // A maximum needs negative curvature.
    if (!(denom < 0)) {
        degenerate = true;
        return 0.0;
    }
    const double limit = std::nextafter(0.5, 0.0);
    return std::clamp((a - c) / denom, -limit, limit);
}

}  // namespace

SubpixelOffset subpixel_offset(const Image2D<float>& mag, PixelIndex p) {
    if (p.z < 1 || p.x < 1 || p.z + 1 >= mag.rows || p.x + 1 >= mag.cols)
        throw ContractError("subpixel fit needs a peak away from the border");
    SubpixelOffset off;
    off.dz = log_parabola_vertex(mag(p.z - 1, p.x), mag(p.z, p.x), mag(p.z + 1, p.x), off.degenerate_z);
    off.dx = log_parabola_vertex(mag(p.z, p.x - 1), mag(p.z, p.x), mag(p.z, p.x + 1), off.degenerate_x);
    return off;
}

Image2D<float> magnitude(const ComplexFrame& frame) {
    Image2D<float> out(frame.rows, frame.cols);
    for (std::size_t k = 0; k < frame.size(); ++k) out.data[k] = std::abs(frame.data[k]);
    return out;
}

std::vector<Detection> localize_block(const CorrelationBlock& block, double threshold, double pitch_um) {
    std::vector<Detection> out;
    for (int t = 0; t < block.nt; ++t) {
        const Image2D<float> mag = magnitude(block.frame(t));
        for (const PixelIndex& p : detect_local_maxima(mag, threshold)) {
            const SubpixelOffset off = subpixel_offset(mag, p);
            out.push_back({t, (p.z + 0.5 + off.dz) * pitch_um, (p.x + 0.5 + off.dx) * pitch_um, mag(p.z, p.x)});
        }
    }
    return out;
}

BinaryImage BlockDensityMap::binary() const {
    BinaryImage b(counts.rows, counts.cols);
    for (std::size_t k = 0; k < counts.size(); ++k) b.data[k] = counts.data[k] >= 1 ? 1 : 0;
    return b;
}

BlockDensityMap accumulate_block(const std::vector<Detection>& detections, int nz, int nx, double pitch_um, int r) {
    BlockDensityMap map{Image2D<int>(nz * r, nx * r, 0)};
    const double fine = pitch_um / r;
    for (const Detection& d : detections) {
        const double u = std::floor(d.z_um / fine);
        const double v = std::floor(d.x_um / fine);
        if (u < 0 || v < 0 || u >= map.counts.rows || v >= map.counts.cols) continue;
        ++map.counts(static_cast<int>(u), static_cast<int>(v));
    }
    return map;
}

void write_detections(std::ostream& os, const std::vector<Detection>& detections) {
    os << "frame,z_um,x_um,magnitude\n";
    for (const Detection& d : detections) os << d.frame << ',' << d.z_um << ',' << d.x_um << ',' << d.magnitude << '\n';
}

}  // namespace ulm
