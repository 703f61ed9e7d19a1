#include "ulm/inference.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>

#include "ulm/dataset.hpp"
#include "ulm/neural/training.hpp"

namespace ulm {

WindowPlan WindowPlan::paper() {
    WindowPlan p;
    p.stride = 2;
    return p;
}

WindowPlan WindowPlan::desk() {
    WindowPlan p;
    p.window_z = 16;
    p.window_x = 16;
    p.stride = 8;
    p.crop_margin = 8;
    return p;
}

void WindowPlan::validate(int r) const {
    if (window_z < 1 || window_x < 1) throw ContractError("window must be nonempty");
    if (stride < 1) throw ContractError("stride must be at least 1");
    if (crop_margin < 0 || 2 * crop_margin >= r * std::min(window_z, window_x))
        throw ContractError("crop margin must be below half the output window side");
}

std::vector<int> window_starts(int field, int window, int stride) {
    if (field < window) throw ContractError("field of " + std::to_string(field) + " pixels is smaller than one window");
    std::vector<int> s;
    for (int p = 0; p + window <= field; p += stride) s.push_back(p);
    if (s.back() + window < field) s.push_back(field - window);
    return s;
}

FieldMask sliding_window_infer(const CorrelationBlock& field, const WindowModel& model, const WindowPlan& plan, int r,
                               int threads) {
    plan.validate(r);
    const auto zs = window_starts(field.nz, plan.window_z, plan.stride);
    const auto xs = window_starts(field.nx, plan.window_x, plan.stride);
    const int n = static_cast<int>(zs.size() * xs.size());
    std::vector<BinaryImage> outputs(static_cast<std::size_t>(n));
    parallel_for(n, threads, [&](int k) {
        const int z0 = zs[static_cast<std::size_t>(k) / xs.size()];
        const int x0 = xs[static_cast<std::size_t>(k) % xs.size()];
        CorrelationBlock win(field.nt, plan.window_z, plan.window_x);
        for (int t = 0; t < field.nt; ++t)
            for (int z = 0; z < plan.window_z; ++z)
                for (int x = 0; x < plan.window_x; ++x) win(t, z, x) = field(t, z0 + z, x0 + x);
        BinaryImage out = model(win);
        if (out.rows != r * plan.window_z || out.cols != r * plan.window_x)
            throw ContractError("window model returned a mask of the wrong shape");
        outputs[static_cast<std::size_t>(k)] = std::move(out);
    });
    FieldMask fm{BinaryImage(r * field.nz, r * field.nx), Image2D<int>(r * field.nz, r * field.nx, 0)};
    const int m = plan.crop_margin;
    for (int k = 0; k < n; ++k) {
        const int z0 = r * zs[static_cast<std::size_t>(k) / xs.size()];
        const int x0 = r * xs[static_cast<std::size_t>(k) % xs.size()];
        const BinaryImage& out = outputs[static_cast<std::size_t>(k)];
        for (int i = m; i < out.rows - m; ++i)
            for (int j = m; j < out.cols - m; ++j) {
                fm.mask(z0 + i, x0 + j) |= out(i, j);
                ++fm.coverage(z0 + i, x0 + j);
            }
    }
    return fm;
}

FieldMask sliding_window_infer(const CorrelationBlock& field, const nn::Network<float>& net, const WindowPlan& plan,
                               int threads) {
    const auto& c = net.config();
    if (c.nt != field.nt || c.nz != plan.window_z || c.nx != plan.window_x)
        throw ContractError("window plan does not match the model input shape");
    return sliding_window_infer(field, [&](const CorrelationBlock& b) { return nn::predict_mask(net, b); }, plan, c.r,
                                threads);
}

void add_to_angiogram(Angiogram& angio, const BinaryImage& mask) {
    if (angio.blocks == 0 && angio.counts.size() == 0) angio.counts = Image2D<int>(mask.rows, mask.cols, 0);
    if (angio.counts.rows != mask.rows || angio.counts.cols != mask.cols)
        throw ContractError("mask " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                            " does not match angiogram " + std::to_string(angio.counts.rows) + "x" +
                            std::to_string(angio.counts.cols));
    for (std::size_t i = 0; i < mask.size(); ++i) angio.counts.data[i] += mask.data[i] ? 1 : 0;
    ++angio.blocks;
}

Angiogram accumulate_angiogram(const std::vector<BinaryImage>& masks) {
    Angiogram a;
    for (const auto& m : masks) add_to_angiogram(a, m);
    return a;
}

BinaryImage binarize(const Angiogram& angio) {
    BinaryImage b(angio.counts.rows, angio.counts.cols);
    for (std::size_t i = 0; i < b.size(); ++i) b.data[i] = angio.counts.data[i] > 0 ? 1 : 0;
    return b;
}

Image2D<float> shift_image(const Image2D<float>& img, int dz, int dx) {
    Image2D<float> out(img.rows, img.cols, 0.0f);
    for (int i = 0; i < img.rows; ++i)
        for (int j = 0; j < img.cols; ++j) {
            const int si = i - dz, sj = j - dx;
            if (si >= 0 && sj >= 0 && si < img.rows && sj < img.cols) out(i, j) = img(si, sj);
        }
    return out;
}

namespace {

std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::vector<std::complex<double>> fft2(const Image2D<float>& img, int sign, const std::vector<std::complex<double>>* in = nullptr) {
    const int n = img.rows, m = img.cols;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n) * m);
    if (in) {
        buf = *in;
    } else {
        for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = img.data[i];
    }
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_2d(n, m, p, p, sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return buf;
}

bool all_zero(const Image2D<float>& img) {
    for (float v : img.data)
        if (v != 0.0f) return false;
    return true;
}

}  // namespace

Registration rigid_register(const Image2D<float>& reference, const Image2D<float>& moving) {
    if (!reference.same_shape(moving)) throw ContractError("registration needs equal image shapes");
    Registration out;
    if (reference.size() == 0 || all_zero(reference) || all_zero(moving)) {
        out.degenerate = true;
        out.registered = moving;
        return out;
    }
    const auto fr = fft2(reference, FFTW_FORWARD);
    const auto fm = fft2(moving, FFTW_FORWARD);
    std::vector<std::complex<double>> cross(fr.size());
    for (std::size_t i = 0; i < cross.size(); ++i) {
        const auto c = fm[i] * std::conj(fr[i]);
        const double a = std::abs(c);
        cross[i] = a > 1e-300 ? c / a : std::complex<double>{};
    }
    const auto corr = fft2(reference, FFTW_BACKWARD, &cross);
    std::size_t best = 0;
    for (std::size_t i = 1; i < corr.size(); ++i)
        if (corr[i].real() > corr[best].real()) best = i;
    int dz = static_cast<int>(best / static_cast<std::size_t>(reference.cols));
    int dx = static_cast<int>(best % static_cast<std::size_t>(reference.cols));
    if (dz > reference.rows / 2) dz -= reference.rows;
    if (dx > reference.cols / 2) dx -= reference.cols;
    out.dz = dz;
    out.dx = dx;
    out.registered = shift_image(moving, -dz, -dx);
    return out;
}

Image2D<std::uint16_t> render_density_image(const Angiogram& angio, bool log_compress) {
    Image2D<std::uint16_t> img(angio.counts.rows, angio.counts.cols, 0);
    int peak = 0;
    for (int c : angio.counts.data) {
        if (c < 0) throw ContractError("angiogram counts must be nonnegative");
        peak = std::max(peak, c);
    }
    if (peak == 0) return img;
    auto level = [&](int c) { return log_compress ? std::log1p(static_cast<double>(c)) : static_cast<double>(c); };
    const double top = level(peak);
    for (std::size_t i = 0; i < img.size(); ++i)
        img.data[i] = static_cast<std::uint16_t>(std::lround(65535.0 * level(angio.counts.data[i]) / top));
    return img;
}

void write_pgm16(const std::filesystem::path& path, const Image2D<std::uint16_t>& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "P5\n" << img.cols << ' ' << img.rows << "\n65535\n";
    for (std::uint16_t v : img.data) {
        const char b[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xFF)};
        os.write(b, 2);
    }
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Image2D<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::string magic;
    int cols = 0, rows = 0, maxval = 0;
    if (!(is >> magic >> cols >> rows >> maxval) || magic != "P5" || maxval != 65535 || rows < 0 || cols < 0)
        throw FormatError("not a 16-bit binary PGM: " + path.string());
    is.get();
    Image2D<std::uint16_t> img(rows, cols);
    for (auto& v : img.data) {
        unsigned char b[2];
        if (!is.read(reinterpret_cast<char*>(b), 2)) throw FormatError("truncated PGM: " + path.string());
        v = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    }
    return img;
}

void save_angiogram(const std::filesystem::path& path, const Angiogram& angio, int r, double pixel_pitch_um) {
    write_pgm16(path, render_density_image(angio));
    std::ofstream os(path.string() + ".txt");
    if (!os) throw std::runtime_error("cannot write sidecar for " + path.string());
    os << "shape " << angio.counts.rows << ' ' << angio.counts.cols << '\n'
       << "r " << r << '\n'
       << "blocks " << angio.blocks << '\n'
       << "pixel_pitch_um " << pixel_pitch_um << '\n';
}

}  // namespace ulm
