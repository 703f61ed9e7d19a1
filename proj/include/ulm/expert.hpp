#pragma once

// Conventional localization baseline: local maxima on |chi|, separable
// log-parabola (Gaussian) subpixel refinement, fine-grid accumulation.

#include <iosfwd>
#include <vector>

#include "ulm/common.hpp"
#include "ulm/preprocess.hpp"

namespace ulm {

struct PixelIndex {
    int z = 0;
    int x = 0;
    bool operator==(const PixelIndex&) const = default;
};

struct Detection {
    int frame = 0;
    double z_um = 0;  // relative to the block corner
    double x_um = 0;
    double magnitude = 0;
};

inline constexpr double kDefaultDetectionThreshold = 0.5;

// Strict maxima of their 3x3 neighborhood with value > threshold; border
// pixels are skipped.
std::vector<PixelIndex> detect_local_maxima(const Image2D<float>& magnitude, double threshold);

struct SubpixelOffset {
    double dz = 0;
    double dx = 0;
    bool degenerate_z = false;
    bool degenerate_x = false;
};

SubpixelOffset subpixel_offset(const Image2D<float>& magnitude, PixelIndex peak);

Image2D<float> magnitude(const ComplexFrame& frame);

std::vector<Detection> localize_block(const CorrelationBlock& block, double threshold, double pitch_um);

struct BlockDensityMap {
    Image2D<int> counts;
    BinaryImage binary() const;
};

// Bins are half-open [lo, hi) on the r-times finer grid.
BlockDensityMap accumulate_block(const std::vector<Detection>& detections, int nz, int nx, double pitch_um, int r);

void write_detections(std::ostream& os, const std::vector<Detection>& detections);

}  // namespace ulm
