#pragma once

// Per-sample layer kernels with hand-written adjoints. Activations are
// (C, T, Z, X); 2D maps carry T = 1. Instantiated for float and double.

#include <cstdint>
#include <vector>

#include "ulm/common.hpp"
#include "ulm/neural/tensor.hpp"

namespace ulm::nn {

// Zero-padded, stride-1 convolution with odd kernels.
// w: (Co, Ci, kt, kz, kx), b: (Co).
template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// Accumulates into gw and gb; overwrites *gx when gx is non-null.
template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>& gw,
                     Tensor<T>& gb);

struct PoolWindow {
    int t = 1;
    int z = 1;
    int x = 1;
};

// Non-overlapping windows; each extent must divide the input. Ties go to the
// first element in scan order.
template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, PoolWindow w, std::vector<std::uint32_t>& argmax);

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& gy, const std::vector<std::uint32_t>& argmax,
                           const std::vector<int>& input_shape);

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x, PoolWindow w);

template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& gy, PoolWindow w, const std::vector<int>& input_shape);

// Parametric rectifier with one slope per channel.
template <typename T>
Tensor<T> prelu_forward(const Tensor<T>& x, const Tensor<T>& slope);

// Accumulates into g_slope.
template <typename T>
Tensor<T> prelu_backward(const Tensor<T>& x, const Tensor<T>& slope, const Tensor<T>& gy, Tensor<T>& g_slope);

// Nearest-neighbor x2 along z and x.
template <typename T>
Tensor<T> resize2x_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> resize2x_backward(const Tensor<T>& gy);

template <typename T>
Tensor<T> concat_forward(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void concat_backward(const Tensor<T>& gy, int channels_a, Tensor<T>& ga, Tensor<T>& gb);

// Mean over T; output keeps T = 1.
template <typename T>
Tensor<T> temporal_mean_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> temporal_mean_backward(const Tensor<T>& gy, int t);

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy);

inline constexpr double kDiceSmoothing = 1.0;

// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps). Writes dL/dp when grad is non-null.
template <typename T>
T dice_loss(const Tensor<T>& p, const Tensor<T>& g, Tensor<T>* grad, T eps = T(kDiceSmoothing));

}  // namespace ulm::nn
