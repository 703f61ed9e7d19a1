#pragma once

// Field-of-view inference: sliding windows with margin crop and OR merge,
// angiogram accumulation, rigid registration and density rendering.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "ulm/common.hpp"
#include "ulm/neural/model.hpp"
#include "ulm/preprocess.hpp"

namespace ulm {

struct WindowPlan {
    int window_z = 32;
    int window_x = 32;
    int stride = 16;       // input pixels, both directions
    int crop_margin = 32;  // output pixels removed on each side of a window

    static WindowPlan paper();  // stride 2 (94 % overlap)
    static WindowPlan desk();
    void validate(int r) const;
};

// Starts spaced by stride plus a final window flush with the far border.
std::vector<int> window_starts(int field, int window, int stride);

struct FieldMask {
    BinaryImage mask;         // r x field, OR of cropped window outputs
    Image2D<int> coverage;    // windows covering each fine pixel; 0 marks uncovered borders
};

// Maps one (nt, window_z, window_x) block to an (r window_z, r window_x) mask.
using WindowModel = std::function<BinaryImage(const CorrelationBlock&)>;

FieldMask sliding_window_infer(const CorrelationBlock& field, const WindowModel& model, const WindowPlan& plan, int r,
                               int threads = 1);
FieldMask sliding_window_infer(const CorrelationBlock& field, const nn::Network<float>& net, const WindowPlan& plan,
                               int threads = 1);

struct Angiogram {
    Image2D<int> counts;
    int blocks = 0;
};

void add_to_angiogram(Angiogram& angio, const BinaryImage& mask);
Angiogram accumulate_angiogram(const std::vector<BinaryImage>& masks);
BinaryImage binarize(const Angiogram& angio);

struct Registration {
    int dz = 0;
    int dx = 0;
    bool degenerate = false;
    Image2D<float> registered;  // moving shifted by (-dz, -dx), zero fill
};

// Integer phase correlation; (dz, dx) is the displacement of moving relative to reference.
Registration rigid_register(const Image2D<float>& reference, const Image2D<float>& moving);

Image2D<float> shift_image(const Image2D<float>& img, int dz, int dx);

// Intensity proportional to log(1 + count) (or count), scaled to 16 bits.
Image2D<std::uint16_t> render_density_image(const Angiogram& angio, bool log_compress = true);

void write_pgm16(const std::filesystem::path& path, const Image2D<std::uint16_t>& img);
Image2D<std::uint16_t> read_pgm16(const std::filesystem::path& path);

// Writes <path> as a 16-bit PGM and <path>.txt with shape, r, block count and pitch.
void save_angiogram(const std::filesystem::path& path, const Angiogram& angio, int r, double pixel_pitch_um);

}  // namespace ulm
