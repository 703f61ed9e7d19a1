#include "ulm/neural/model.hpp"

#include <cmath>

namespace ulm::nn {

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::desk() {
    ModelConfig c;
    c.nt = 128;
    c.nz = 16;
    c.nx = 16;
    c.r = 4;
    c.encoder_widths = {8, 16};
    c.decoder_widths = {16, 8};
    c.upsampler_widths = {4, 1};
    c.decoder_temporal_pool = 2;
    return c;
}

namespace {

int ipow(int b, int e) {
    int v = 1;
    for (int i = 0; i < e; ++i) v *= b;
    return v;
}

}  // namespace

int ModelConfig::collapsed_t() const {
    return nt / ipow(temporal_pool * decoder_temporal_pool, down_blocks());
}

void ModelConfig::validate() const {
    const int d = down_blocks();
    if (in_channels < 1) throw ContractError("model needs at least one input channel");
    if (d < 1) throw ContractError("model needs at least one down block");
    if (static_cast<int>(decoder_widths.size()) != d) throw ContractError("up blocks must equal down blocks");
    if (r < 2 || (r & (r - 1)) != 0) throw ContractError("r must be a power of two >= 2");
    const int stages = static_cast<int>(std::lround(std::log2(r)));
    if (upsampler_stages() != stages)
        throw ContractError("upsampler needs log2(r) = " + std::to_string(stages) + " stages, got " +
                            std::to_string(upsampler_stages()));
    if (upsampler_widths.back() != 1) throw ContractError("last upsampler stage must output one channel");
    for (const auto* ws : {&encoder_widths, &decoder_widths, &upsampler_widths})
        for (int w : *ws)
            if (w < 1) throw ContractError("channel widths must be positive");
    if (kernel_3d < 1 || kernel_3d % 2 == 0 || kernel_2d < 1 || kernel_2d % 2 == 0)
        throw ContractError("kernel sizes must be odd");
    if (spatial_pool != 2) throw ContractError("spatial pool must be 2 to pair with the x2 decoder resize");
    if (temporal_pool < 1 || decoder_temporal_pool < 1) throw ContractError("temporal pool factors must be positive");
    const int tdiv = ipow(temporal_pool * decoder_temporal_pool, d);
    if (nt % tdiv != 0)
        throw ContractError("Nt = " + std::to_string(nt) + " is not divisible by " + std::to_string(tdiv));
    const int sdiv = ipow(spatial_pool, d);
    if (nz % sdiv != 0 || nx % sdiv != 0)
        throw ContractError("Nz and Nx must be divisible by " + std::to_string(sdiv));
    if (!(threshold > 0 && threshold < 1)) throw ContractError("output threshold must lie in (0, 1)");
}

template <typename T>
Network<T>::Network(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.down_blocks();
    const int k3 = cfg_.kernel_3d;
    for (int i = 0; i < d; ++i) {
        const int cin = i == 0 ? cfg_.in_channels : cfg_.encoder_widths[i - 1];
        enc_.push_back(add_conv("enc" + std::to_string(i), cin, cfg_.encoder_widths[i], k3, k3, true));
    }
    for (int k = 0; k < d; ++k) {
        const int cin = (k == 0 ? cfg_.encoder_widths.back() : cfg_.decoder_widths[k - 1]) + cfg_.encoder_widths[d - 1 - k];
        dec_.push_back(add_conv("dec" + std::to_string(k), cin, cfg_.decoder_widths[k], k3, k3, true));
    }
    const int s_n = cfg_.upsampler_stages();
    for (int s = 0; s < s_n; ++s) {
        const int cin = s == 0 ? cfg_.decoder_widths.back() : cfg_.upsampler_widths[s - 1];
        ups_.push_back(add_conv("up" + std::to_string(s), cin, cfg_.upsampler_widths[s], 1, cfg_.kernel_2d, s + 1 < s_n));
    }
}

template <typename T>
typename Network<T>::ConvIndex Network<T>::add_conv(const std::string& name, int cin, int cout, int kt, int k,
                                                    bool activation) {
    ConvIndex idx;
    idx.w = static_cast<int>(params_.size());
    params_.push_back({name + ".w", Tensor<T>({cout, cin, kt, k, k})});
    idx.b = static_cast<int>(params_.size());
    params_.push_back({name + ".b", Tensor<T>({cout})});
    if (activation) {
        idx.slope = static_cast<int>(params_.size());
        params_.push_back({name + ".slope", Tensor<T>({cout}, T(0.25))});
    }
    return idx;
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
    Rng rng(seed);
    auto init = [&](const std::vector<ConvIndex>& convs) {
        for (const ConvIndex& c : convs) {
            Tensor<T>& w = params_[static_cast<std::size_t>(c.w)].value;
            const double fan_in = static_cast<double>(w.size()) / w.dim(0);
            const double gain = c.slope >= 0 ? std::sqrt(2.0 / (1.0 + 0.25 * 0.25)) : 1.0;
            const double bound = gain * std::sqrt(3.0 / fan_in);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& v : w.data) v = static_cast<T>(u(rng));
            params_[static_cast<std::size_t>(c.b)].value.zero();
            if (c.slope >= 0) {
                auto& a = params_[static_cast<std::size_t>(c.slope)].value;
                std::fill(a.data.begin(), a.data.end(), T(0.25));
            }
        }
    };
    init(enc_);
    init(dec_);
    init(ups_);
    // Head bias at the logit of a sparse foreground prior, so the first dice
    // steps do not drive every pixel into the saturated tail of the sigmoid.
    auto& head = params_[static_cast<std::size_t>(ups_.back().b)].value;
    std::fill(head.data.begin(), head.data.end(), static_cast<T>(std::log(kOutputPrior / (1 - kOutputPrior))));
}

template <typename T>
std::vector<Tensor<T>> Network<T>::zero_grads() const {
    std::vector<Tensor<T>> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.shape);
    return g;
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input) const {
    Cache cache;
    return forward(input, cache);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& input, Cache& cache) const {
    const std::vector<int> expect{cfg_.in_channels, cfg_.nt, cfg_.nz, cfg_.nx};
    if (input.shape != expect)
        throw ContractError("model input " + shape_string(input.shape) + " does not match " + shape_string(expect));
    auto P = [&](int i) -> const Tensor<T>& { return params_[static_cast<std::size_t>(i)].value; };
    const int d = cfg_.down_blocks();
    cache.enc.assign(static_cast<std::size_t>(d), {});
    cache.dec.assign(static_cast<std::size_t>(d), {});
    cache.ups.assign(ups_.size(), {});

    Tensor<T> h = input;
    for (int i = 0; i < d; ++i) {
        auto& c = cache.enc[static_cast<std::size_t>(i)];
        const ConvIndex& ix = enc_[static_cast<std::size_t>(i)];
        c.input = std::move(h);
        c.pre = conv3d_forward(c.input, P(ix.w), P(ix.b));
        c.act = prelu_forward(c.pre, P(ix.slope));
        h = maxpool_forward(c.act, {cfg_.temporal_pool, cfg_.spatial_pool, cfg_.spatial_pool}, c.argmax);
    }
    for (int k = 0; k < d; ++k) {
        auto& c = cache.dec[static_cast<std::size_t>(k)];
        const ConvIndex& ix = dec_[static_cast<std::size_t>(k)];
        c.input = std::move(h);
        c.pooled = maxpool_forward(c.input, {cfg_.decoder_temporal_pool, 1, 1}, c.argmax);
        c.up = resize2x_forward(c.pooled);
        const Tensor<T>& src = cache.enc[static_cast<std::size_t>(d - 1 - k)].act;
        c.skip = avgpool_forward(src, {src.dim(1) / c.up.dim(1), 1, 1});
        c.cat = concat_forward(c.up, c.skip);
        c.pre = conv3d_forward(c.cat, P(ix.w), P(ix.b));
        c.act = prelu_forward(c.pre, P(ix.slope));
        h = c.act;
    }
    cache.collapse_in = h;
    h = temporal_mean_forward(h);
    for (std::size_t s = 0; s < ups_.size(); ++s) {
        auto& c = cache.ups[s];
        const ConvIndex& ix = ups_[s];
        c.input = std::move(h);
        c.up = resize2x_forward(c.input);
        c.pre = conv3d_forward(c.up, P(ix.w), P(ix.b));
        c.act = ix.slope >= 0 ? prelu_forward(c.pre, P(ix.slope)) : c.pre;
        h = c.act;
    }
    cache.prob = sigmoid_forward(h);
    return cache.prob;
}

template <typename T>
Tensor<T> Network<T>::backward(const Cache& cache, const Tensor<T>& grad_prob, std::vector<Tensor<T>>& grads,
                               bool input_grad) const {
    if (grads.size() != params_.size()) throw ContractError("gradient list does not match the parameter list");
    auto P = [&](int i) -> const Tensor<T>& { return params_[static_cast<std::size_t>(i)].value; };
    auto G = [&](int i) -> Tensor<T>& { return grads[static_cast<std::size_t>(i)]; };
    const int d = cfg_.down_blocks();

    Tensor<T> g = sigmoid_backward(cache.prob, grad_prob);
    for (std::size_t s = ups_.size(); s-- > 0;) {
        const auto& c = cache.ups[s];
        const ConvIndex& ix = ups_[s];
        if (ix.slope >= 0) g = prelu_backward(c.pre, P(ix.slope), g, G(ix.slope));
        Tensor<T> gx;
        conv3d_backward(c.up, P(ix.w), g, &gx, G(ix.w), G(ix.b));
        g = resize2x_backward(gx);
    }
    g = temporal_mean_backward(g, cache.collapse_in.dim(1));

    std::vector<Tensor<T>> gskip(static_cast<std::size_t>(d));
    for (int k = d; k-- > 0;) {
        const auto& c = cache.dec[static_cast<std::size_t>(k)];
        const ConvIndex& ix = dec_[static_cast<std::size_t>(k)];
        g = prelu_backward(c.pre, P(ix.slope), g, G(ix.slope));
        Tensor<T> gcat, gup, gsk;
        conv3d_backward(c.cat, P(ix.w), g, &gcat, G(ix.w), G(ix.b));
        concat_backward(gcat, c.up.dim(0), gup, gsk);
        const Tensor<T>& src = cache.enc[static_cast<std::size_t>(d - 1 - k)].act;
        gskip[static_cast<std::size_t>(d - 1 - k)] = avgpool_backward(gsk, {src.dim(1) / c.up.dim(1), 1, 1}, src.shape);
        g = resize2x_backward(gup);
        g = maxpool_backward(g, c.argmax, c.input.shape);
    }
    for (int i = d; i-- > 0;) {
        const auto& c = cache.enc[static_cast<std::size_t>(i)];
        const ConvIndex& ix = enc_[static_cast<std::size_t>(i)];
        g = maxpool_backward(g, c.argmax, c.act.shape);
        const Tensor<T>& gs = gskip[static_cast<std::size_t>(i)];
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += gs[j];
        g = prelu_backward(c.pre, P(ix.slope), g, G(ix.slope));
        const bool need = i > 0 || input_grad;
        Tensor<T> gx;
        conv3d_backward(c.input, P(ix.w), g, need ? &gx : nullptr, G(ix.w), G(ix.b));
        g = std::move(gx);
    }
    return g;
}

template class Network<float>;
template class Network<double>;

template <typename T>
Tensor<T> block_to_input(const CorrelationBlock& chi) {
    Tensor<T> out({2, chi.nt, chi.nz, chi.nx});
    const std::size_t n = chi.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<T>(chi.data[i].real());
        out[n + i] = static_cast<T>(chi.data[i].imag());
    }
    return out;
}

template <typename T>
Tensor<T> mask_to_tensor(const BinaryImage& mask) {
    Tensor<T> out({1, 1, mask.rows, mask.cols});
    for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask.data[i] ? T(1) : T(0);
    return out;
}

template <typename T>
Image2D<float> tensor_to_map(const Tensor<T>& prob) {
    const Dims4 d = dims4(prob);
    if (d.c != 1 || d.t != 1) throw ContractError("expected a single-channel 2D map, got " + shape_string(prob.shape));
    Image2D<float> out(d.z, d.x);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = static_cast<float>(prob[i]);
    return out;
}

template Tensor<float> block_to_input(const CorrelationBlock&);
template Tensor<double> block_to_input(const CorrelationBlock&);
template Tensor<float> mask_to_tensor(const BinaryImage&);
template Tensor<double> mask_to_tensor(const BinaryImage&);
template Image2D<float> tensor_to_map(const Tensor<float>&);
template Image2D<float> tensor_to_map(const Tensor<double>&);

BinaryImage threshold_binarize(const Image2D<float>& prob, double tau) {
    if (!(tau > 0 && tau < 1)) throw ContractError("threshold must lie in (0, 1)");
    BinaryImage out(prob.rows, prob.cols);
    for (std::size_t i = 0; i < prob.size(); ++i) out.data[i] = prob.data[i] > tau ? 1 : 0;
    return out;
}

BinaryImage dilate_mask(const BinaryImage& mask, int radius) {
    if (radius < 0) throw ContractError("dilation radius must be nonnegative");
    struct Offset {
        int dz, dx;
    };
    std::vector<Offset> disk;
    for (int dz = -radius; dz <= radius; ++dz)
        for (int dx = -radius; dx <= radius; ++dx)
            if (dz * dz + dx * dx <= radius * radius) disk.push_back({dz, dx});
    BinaryImage out(mask.rows, mask.cols);
    for (int i = 0; i < mask.rows; ++i)
        for (int j = 0; j < mask.cols; ++j) {
            if (!mask(i, j)) continue;
            for (const auto& o : disk) {
                const int a = i + o.dz, b = j + o.dx;
                if (a >= 0 && b >= 0 && a < mask.rows && b < mask.cols) out(a, b) = 1;
            }
        }
    return out;
}

}  // namespace ulm::nn
