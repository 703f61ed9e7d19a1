#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ulm {

using cfloat = std::complex<float>;
using Rng = std::mt19937_64;

// Raised when a caller breaks an operation's precondition.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised on malformed or incompatible files.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Row-major 2D array. Rows run along depth (z), columns along the lateral axis (x).
template <typename T>
struct Image2D {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Image2D() = default;
    Image2D(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

    T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    bool same_shape(const Image2D& o) const { return rows == o.rows && cols == o.cols; }
    std::size_t size() const { return data.size(); }

    bool operator==(const Image2D&) const = default;
};

// Cine-loop stored t-major: index = (t * nz + z) * nx + x.
template <typename T>
struct Volume3D {
    int nt = 0;
    int nz = 0;
    int nx = 0;
    std::vector<T> data;

    Volume3D() = default;
    Volume3D(int t, int z, int x, T fill = T{})
        : nt(t), nz(z), nx(x), data(static_cast<std::size_t>(t) * z * x, fill) {}

    T& operator()(int t, int z, int x) { return data[(static_cast<std::size_t>(t) * nz + z) * nx + x]; }
    const T& operator()(int t, int z, int x) const { return data[(static_cast<std::size_t>(t) * nz + z) * nx + x]; }
    std::size_t frame_size() const { return static_cast<std::size_t>(nz) * nx; }

    Image2D<T> frame(int t) const {
        Image2D<T> out(nz, nx);
        std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(t * frame_size()), frame_size(), out.data.begin());
        return out;
    }
    void set_frame(int t, const Image2D<T>& f) {
        if (f.rows != nz || f.cols != nx) throw ContractError("frame shape mismatch");
        std::copy(f.data.begin(), f.data.end(), data.begin() + static_cast<std::ptrdiff_t>(t * frame_size()));
    }

    bool operator==(const Volume3D&) const = default;
};

using BinaryImage = Image2D<std::uint8_t>;
using ComplexFrame = Image2D<cfloat>;
using ComplexBlock = Volume3D<cfloat>;

// splitmix64 finalizer; used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace ulm
