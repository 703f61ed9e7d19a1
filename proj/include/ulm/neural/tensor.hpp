#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ulm/common.hpp"

namespace ulm::nn {

// Dense row-major array. Per-sample activations use (C, T, Z, X); 2D maps use T = 1.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T{}) : shape(std::move(s)), data(count(shape), fill) {}

    static std::size_t count(const std::vector<int>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1},
                               [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
    }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
    void zero() { std::fill(data.begin(), data.end(), T{}); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

inline std::string shape_string(const std::vector<int>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

// Shape of a per-sample activation.
struct Dims4 {
    int c, t, z, x;
};

template <typename T>
Dims4 dims4(const Tensor<T>& a) {
    if (a.rank() != 4) throw ContractError("expected a rank-4 activation, got " + shape_string(a.shape));
    return {a.dim(0), a.dim(1), a.dim(2), a.dim(3)};
}

}  // namespace ulm::nn
