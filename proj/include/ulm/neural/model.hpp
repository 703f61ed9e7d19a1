#pragma once

// V-net-lite encoder/decoder with temporal collapse and log2(r) upsampling
// stages, mapping a (2, Nt, Nz, Nx) correlation block to an (r Nz, r Nx)
// probability map.

#include <cstdint>
#include <string>
#include <vector>

#include "ulm/common.hpp"
#include "ulm/neural/layers.hpp"
#include "ulm/neural/tensor.hpp"
#include "ulm/preprocess.hpp"

namespace ulm::nn {

struct ModelConfig {
    int in_channels = 2;  // real, imaginary
    int nt = 512;
    int nz = 32;
    int nx = 32;
    int r = 8;
    std::vector<int> encoder_widths{16, 32};  // one per down block
    std::vector<int> decoder_widths{16, 16};  // one per up block
    std::vector<int> upsampler_widths{8, 4, 1};  // log2(r) stages, last is 1
    int kernel_3d = 3;
    int kernel_2d = 3;
    int temporal_pool = 4;
    int spatial_pool = 2;
    int decoder_temporal_pool = 4;
    double threshold = 0.5;

    static ModelConfig paper();
    static ModelConfig desk();

    int down_blocks() const { return static_cast<int>(encoder_widths.size()); }
    int upsampler_stages() const { return static_cast<int>(upsampler_widths.size()); }
    // Temporal length entering the collapse.
    int collapsed_t() const;
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
};

// Foreground fraction the untrained head predicts everywhere.
inline constexpr double kOutputPrior = 0.05;

template <typename T>
class Network {
public:
    struct ConvIndex {
        int w = -1, b = -1, slope = -1;
    };

    struct EncoderCache {
        Tensor<T> input, pre, act;
        std::vector<std::uint32_t> argmax;
    };
    struct DecoderCache {
        Tensor<T> input, pooled, up, skip, cat, pre, act;
        std::vector<std::uint32_t> argmax;
    };
    struct UpsamplerCache {
        Tensor<T> input, up, pre, act;
    };
    struct Cache {
        std::vector<EncoderCache> enc;
        std::vector<DecoderCache> dec;
        Tensor<T> collapse_in;
        std::vector<UpsamplerCache> ups;
        Tensor<T> prob;
    };

    explicit Network(const ModelConfig& cfg);

    // Fan-in scaled uniform weights, slopes 0.25, zero biases except the
    // output head, which starts at the logit of kOutputPrior.
    void initialize(std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter<T>>& params() { return params_; }
    const std::vector<Parameter<T>>& params() const { return params_; }
    std::vector<Tensor<T>> zero_grads() const;

    // input: (in_channels, nt, nz, nx); returns (1, 1, r nz, r nx) probabilities.
    Tensor<T> forward(const Tensor<T>& input) const;
    Tensor<T> forward(const Tensor<T>& input, Cache& cache) const;
    // Accumulates parameter gradients (indexed like params()). Returns dL/dinput
    // when input_grad is set, otherwise an empty tensor.
    Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_prob, std::vector<Tensor<T>>& grads,
                       bool input_grad = false) const;

    template <typename U>
    Network<U> cast() const {
        Network<U> out(cfg_);
        for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i].value = params_[i].value.template cast<U>();
        return out;
    }

private:
    ConvIndex add_conv(const std::string& name, int cin, int cout, int kt, int k, bool activation);

    ModelConfig cfg_;
    std::vector<Parameter<T>> params_;
    std::vector<ConvIndex> enc_, dec_, ups_;
};

// (2, nt, nz, nx) real/imaginary channels.
template <typename T>
Tensor<T> block_to_input(const CorrelationBlock& chi);

// (1, 1, rows, cols) of 0/1.
template <typename T>
Tensor<T> mask_to_tensor(const BinaryImage& mask);

template <typename T>
Image2D<float> tensor_to_map(const Tensor<T>& prob);

// pixel = 1 iff probability > tau.
BinaryImage threshold_binarize(const Image2D<float>& prob, double tau = 0.5);

// Union of Euclidean disks of the given radius.
BinaryImage dilate_mask(const BinaryImage& mask, int radius);

}  // namespace ulm::nn
