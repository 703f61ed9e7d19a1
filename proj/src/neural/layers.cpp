#include "ulm/neural/layers.hpp"

#include <algorithm>
#include <cmath>

namespace ulm::nn {

namespace {

void require(bool ok, const std::string& what, const std::vector<int>& a, const std::vector<int>& b) {
    if (!ok) throw ContractError(what + ": " + shape_string(a) + " vs " + shape_string(b));
}

// Valid output range [lo, hi) for a tap at offset d - pad along an axis of length n.
struct Span {
    int lo, hi;
};

Span tap_span(int n, int d, int pad) {
    const int shift = d - pad;
    return {std::max(0, -shift), std::min(n, n - shift)};
}

}  // namespace

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const Dims4 d = dims4(x);
    require(w.rank() == 5 && w.dim(1) == d.c, "conv3d input/kernel mismatch", x.shape, w.shape);
    require(b.rank() == 1 && b.dim(0) == w.dim(0), "conv3d bias mismatch", w.shape, b.shape);
    const int co_n = w.dim(0), kt = w.dim(2), kz = w.dim(3), kx = w.dim(4);
    if (kt % 2 == 0 || kz % 2 == 0 || kx % 2 == 0) throw ContractError("conv3d kernels must be odd: " + shape_string(w.shape));
    const int pt = kt / 2, pz = kz / 2, px = kx / 2;
    Tensor<T> y({co_n, d.t, d.z, d.x});
    const std::size_t plane = static_cast<std::size_t>(d.z) * d.x;
    const std::size_t vol = plane * d.t;
    for (int co = 0; co < co_n; ++co) {
        T* yc = y.data.data() + co * vol;
        std::fill(yc, yc + vol, b[static_cast<std::size_t>(co)]);
        for (int ci = 0; ci < d.c; ++ci) {
            const T* xc = x.data.data() + ci * vol;
            const T* wk = w.data.data() + (static_cast<std::size_t>(co) * d.c + ci) * kt * kz * kx;
            for (int dt = 0; dt < kt; ++dt) {
                const Span st = tap_span(d.t, dt, pt);
                for (int dz = 0; dz < kz; ++dz) {
                    const Span sz = tap_span(d.z, dz, pz);
                    for (int dx = 0; dx < kx; ++dx) {
                        const Span sx = tap_span(d.x, dx, px);
                        const T wv = wk[(dt * kz + dz) * kx + dx];
                        const int shift = dx - px;
                        for (int t = st.lo; t < st.hi; ++t) {
                            for (int z = sz.lo; z < sz.hi; ++z) {
                                T* yr = yc + t * plane + static_cast<std::size_t>(z) * d.x;
                                const T* xr = xc + (t + dt - pt) * plane + static_cast<std::size_t>(z + dz - pz) * d.x + shift;
                                for (int i = sx.lo; i < sx.hi; ++i) yr[i] += wv * xr[i];
                            }
                        }
                    }
                }
            }
        }
    }
    return y;
}

template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, Tensor<T>* gx, Tensor<T>& gw,
                     Tensor<T>& gb) {
    const Dims4 d = dims4(x);
    const int co_n = w.dim(0), kt = w.dim(2), kz = w.dim(3), kx = w.dim(4);
    require(gy.shape == std::vector<int>{co_n, d.t, d.z, d.x}, "conv3d gradient mismatch", gy.shape, x.shape);
    require(gw.shape == w.shape, "conv3d weight-gradient mismatch", gw.shape, w.shape);
    const int pt = kt / 2, pz = kz / 2, px = kx / 2;
    if (gx) *gx = Tensor<T>(x.shape);
    const std::size_t plane = static_cast<std::size_t>(d.z) * d.x;
    const std::size_t vol = plane * d.t;
    for (int co = 0; co < co_n; ++co) {
        const T* gc = gy.data.data() + co * vol;
        T bsum = 0;
        for (std::size_t i = 0; i < vol; ++i) bsum += gc[i];
        gb[static_cast<std::size_t>(co)] += bsum;
        for (int ci = 0; ci < d.c; ++ci) {
            const T* xc = x.data.data() + ci * vol;
            T* gxc = gx ? gx->data.data() + ci * vol : nullptr;
            const std::size_t kbase = (static_cast<std::size_t>(co) * d.c + ci) * kt * kz * kx;
            for (int dt = 0; dt < kt; ++dt) {
                const Span st = tap_span(d.t, dt, pt);
                for (int dz = 0; dz < kz; ++dz) {
                    const Span sz = tap_span(d.z, dz, pz);
                    for (int dx = 0; dx < kx; ++dx) {
                        const Span sx = tap_span(d.x, dx, px);
                        const std::size_t k = kbase + static_cast<std::size_t>((dt * kz + dz) * kx + dx);
                        const T wv = w[k];
                        const int shift = dx - px;
                        T acc = 0;
                        for (int t = st.lo; t < st.hi; ++t) {
                            for (int z = sz.lo; z < sz.hi; ++z) {
                                const T* gr = gc + t * plane + static_cast<std::size_t>(z) * d.x;
                                const std::size_t off = (t + dt - pt) * plane + static_cast<std::size_t>(z + dz - pz) * d.x + shift;
                                const T* xr = xc + off;
                                for (int i = sx.lo; i < sx.hi; ++i) acc += gr[i] * xr[i];
                                if (gxc) {
                                    T* gxr = gxc + off;
                                    for (int i = sx.lo; i < sx.hi; ++i) gxr[i] += wv * gr[i];
                                }
                            }
                        }
                        gw[k] += acc;
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> maxpool_forward(const Tensor<T>& x, PoolWindow w, std::vector<std::uint32_t>& argmax) {
    const Dims4 d = dims4(x);
    if (w.t < 1 || w.z < 1 || w.x < 1 || d.t % w.t || d.z % w.z || d.x % w.x)
        throw ContractError("max-pool window (" + std::to_string(w.t) + "," + std::to_string(w.z) + "," +
                            std::to_string(w.x) + ") does not tile " + shape_string(x.shape));
    const int ot = d.t / w.t, oz = d.z / w.z, ox = d.x / w.x;
    Tensor<T> y({d.c, ot, oz, ox});
    argmax.assign(y.size(), 0);
    std::size_t o = 0;
    for (int c = 0; c < d.c; ++c)
        for (int t = 0; t < ot; ++t)
            for (int z = 0; z < oz; ++z)
                for (int xx = 0; xx < ox; ++xx, ++o) {
                    std::size_t best = 0;
                    T bv = 0;
                    bool first = true;
                    for (int a = 0; a < w.t; ++a)
                        for (int bz = 0; bz < w.z; ++bz)
                            for (int bx = 0; bx < w.x; ++bx) {
                                const std::size_t i =
                                    ((static_cast<std::size_t>(c) * d.t + t * w.t + a) * d.z + z * w.z + bz) * d.x + xx * w.x + bx;
                                if (first || x[i] > bv) {
                                    bv = x[i];
                                    best = i;
                                    first = false;
                                }
                            }
                    y[o] = bv;
                    argmax[o] = static_cast<std::uint32_t>(best);
                }
    return y;
}

template <typename T>
Tensor<T> maxpool_backward(const Tensor<T>& gy, const std::vector<std::uint32_t>& argmax,
                           const std::vector<int>& input_shape) {
    if (argmax.size() != gy.size()) throw ContractError("max-pool gradient does not match its forward pass");
    Tensor<T> gx(input_shape);
    for (std::size_t o = 0; o < gy.size(); ++o) gx[argmax[o]] += gy[o];
    return gx;
}

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x, PoolWindow w) {
    const Dims4 d = dims4(x);
    if (w.t < 1 || w.z < 1 || w.x < 1 || d.t % w.t || d.z % w.z || d.x % w.x)
        throw ContractError("average-pool window does not tile " + shape_string(x.shape));
    const int ot = d.t / w.t, oz = d.z / w.z, ox = d.x / w.x;
    Tensor<T> y({d.c, ot, oz, ox});
    const T scale = T(1) / T(w.t * w.z * w.x);
    for (int c = 0; c < d.c; ++c)
        for (int t = 0; t < d.t; ++t)
            for (int z = 0; z < d.z; ++z)
                for (int xx = 0; xx < d.x; ++xx)
                    y[((static_cast<std::size_t>(c) * ot + t / w.t) * oz + z / w.z) * ox + xx / w.x] +=
                        scale * x[((static_cast<std::size_t>(c) * d.t + t) * d.z + z) * d.x + xx];
    return y;
}

template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& gy, PoolWindow w, const std::vector<int>& input_shape) {
    Tensor<T> gx(input_shape);
    const Dims4 d = dims4(gx);
    const int ot = d.t / w.t, oz = d.z / w.z, ox = d.x / w.x;
    require(gy.shape == std::vector<int>{d.c, ot, oz, ox}, "average-pool gradient mismatch", gy.shape, input_shape);
    const T scale = T(1) / T(w.t * w.z * w.x);
    for (int c = 0; c < d.c; ++c)
        for (int t = 0; t < d.t; ++t)
            for (int z = 0; z < d.z; ++z)
                for (int xx = 0; xx < d.x; ++xx)
                    gx[((static_cast<std::size_t>(c) * d.t + t) * d.z + z) * d.x + xx] =
                        scale * gy[((static_cast<std::size_t>(c) * ot + t / w.t) * oz + z / w.z) * ox + xx / w.x];
    return gx;
}

template <typename T>
Tensor<T> prelu_forward(const Tensor<T>& x, const Tensor<T>& slope) {
    const Dims4 d = dims4(x);
    require(slope.rank() == 1 && slope.dim(0) == d.c, "PReLU slope mismatch", x.shape, slope.shape);
    Tensor<T> y(x.shape);
    const std::size_t vol = x.size() / static_cast<std::size_t>(d.c);
    for (int c = 0; c < d.c; ++c) {
        const T a = slope[static_cast<std::size_t>(c)];
        for (std::size_t i = c * vol; i < (c + 1) * vol; ++i) y[i] = x[i] > 0 ? x[i] : a * x[i];
    }
    return y;
}

template <typename T>
Tensor<T> prelu_backward(const Tensor<T>& x, const Tensor<T>& slope, const Tensor<T>& gy, Tensor<T>& g_slope) {
    const Dims4 d = dims4(x);
    require(gy.shape == x.shape, "PReLU gradient mismatch", gy.shape, x.shape);
    Tensor<T> gx(x.shape);
    const std::size_t vol = x.size() / static_cast<std::size_t>(d.c);
    for (int c = 0; c < d.c; ++c) {
        const T a = slope[static_cast<std::size_t>(c)];
        T ga = 0;
        for (std::size_t i = c * vol; i < (c + 1) * vol; ++i) {
            if (x[i] > 0) {
                gx[i] = gy[i];
            } else {
                gx[i] = a * gy[i];
                ga += x[i] * gy[i];
            }
        }
        g_slope[static_cast<std::size_t>(c)] += ga;
    }
    return gx;
}

template <typename T>
Tensor<T> resize2x_forward(const Tensor<T>& x) {
    const Dims4 d = dims4(x);
    Tensor<T> y({d.c, d.t, 2 * d.z, 2 * d.x});
    const int ox = 2 * d.x;
    for (int ct = 0; ct < d.c * d.t; ++ct)
        for (int z = 0; z < 2 * d.z; ++z) {
            const T* xr = x.data.data() + (static_cast<std::size_t>(ct) * d.z + z / 2) * d.x;
            T* yr = y.data.data() + (static_cast<std::size_t>(ct) * 2 * d.z + z) * ox;
            for (int i = 0; i < ox; ++i) yr[i] = xr[i / 2];
        }
    return y;
}

template <typename T>
Tensor<T> resize2x_backward(const Tensor<T>& gy) {
    const Dims4 d = dims4(gy);
    if (d.z % 2 || d.x % 2) throw ContractError("resize gradient must have even extents: " + shape_string(gy.shape));
    Tensor<T> gx({d.c, d.t, d.z / 2, d.x / 2});
    const int ix = d.x / 2;
    for (int ct = 0; ct < d.c * d.t; ++ct)
        for (int z = 0; z < d.z; ++z) {
            const T* gr = gy.data.data() + (static_cast<std::size_t>(ct) * d.z + z) * d.x;
            T* xr = gx.data.data() + (static_cast<std::size_t>(ct) * (d.z / 2) + z / 2) * ix;
            for (int i = 0; i < d.x; ++i) xr[i / 2] += gr[i];
        }
    return gx;
}

template <typename T>
Tensor<T> concat_forward(const Tensor<T>& a, const Tensor<T>& b) {
    const Dims4 da = dims4(a), db = dims4(b);
    require(da.t == db.t && da.z == db.z && da.x == db.x, "concat extent mismatch", a.shape, b.shape);
    Tensor<T> y({da.c + db.c, da.t, da.z, da.x});
    std::copy(a.data.begin(), a.data.end(), y.data.begin());
    std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return y;
}

template <typename T>
void concat_backward(const Tensor<T>& gy, int channels_a, Tensor<T>& ga, Tensor<T>& gb) {
    const Dims4 d = dims4(gy);
    if (channels_a < 0 || channels_a > d.c) throw ContractError("concat split outside " + shape_string(gy.shape));
    ga = Tensor<T>({channels_a, d.t, d.z, d.x});
    gb = Tensor<T>({d.c - channels_a, d.t, d.z, d.x});
    std::copy_n(gy.data.begin(), ga.size(), ga.data.begin());
    std::copy(gy.data.begin() + static_cast<std::ptrdiff_t>(ga.size()), gy.data.end(), gb.data.begin());
}

template <typename T>
Tensor<T> temporal_mean_forward(const Tensor<T>& x) {
    const Dims4 d = dims4(x);
    Tensor<T> y({d.c, 1, d.z, d.x});
    const std::size_t plane = static_cast<std::size_t>(d.z) * d.x;
    const T scale = T(1) / T(d.t);
    for (int c = 0; c < d.c; ++c)
        for (int t = 0; t < d.t; ++t)
            for (std::size_t i = 0; i < plane; ++i)
                y[c * plane + i] += scale * x[(static_cast<std::size_t>(c) * d.t + t) * plane + i];
    return y;
}

template <typename T>
Tensor<T> temporal_mean_backward(const Tensor<T>& gy, int t) {
    const Dims4 d = dims4(gy);
    if (d.t != 1 || t < 1) throw ContractError("temporal-mean gradient must have T = 1: " + shape_string(gy.shape));
    Tensor<T> gx({d.c, t, d.z, d.x});
    const std::size_t plane = static_cast<std::size_t>(d.z) * d.x;
    const T scale = T(1) / T(t);
    for (int c = 0; c < d.c; ++c)
        for (int k = 0; k < t; ++k)
            for (std::size_t i = 0; i < plane; ++i) gx[(static_cast<std::size_t>(c) * t + k) * plane + i] = scale * gy[c * plane + i];
    return gx;
}

template <typename T>
Tensor<T> sigmoid_forward(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T v = x[i];
        // Split by sign so exp never overflows.
        if (v >= 0) {
            y[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            y[i] = e / (T(1) + e);
        }
    }
    return y;
}

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& y, const Tensor<T>& gy) {
    require(y.shape == gy.shape, "sigmoid gradient mismatch", y.shape, gy.shape);
    Tensor<T> gx(y.shape);
    for (std::size_t i = 0; i < y.size(); ++i) gx[i] = gy[i] * y[i] * (T(1) - y[i]);
    return gx;
}

template <typename T>
T dice_loss(const Tensor<T>& p, const Tensor<T>& g, Tensor<T>* grad, T eps) {
    require(p.size() == g.size(), "dice operands differ", p.shape, g.shape);
    double inter = 0, sp = 0, sg = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += static_cast<double>(p[i]) * g[i];
        sp += p[i];
        sg += g[i];
    }
    const double den = sp + sg + eps;
    const double num = 2 * inter + eps;
    if (grad) {
        *grad = Tensor<T>(p.shape);
        for (std::size_t i = 0; i < p.size(); ++i) (*grad)[i] = static_cast<T>(-(2 * g[i] * den - num) / (den * den));
    }
    return static_cast<T>(1 - num / den);
}

#define ULM_INSTANTIATE_LAYERS(T)                                                                                      \
    template Tensor<T> conv3d_forward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                         \
    template void conv3d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>*, Tensor<T>&,       \
                                  Tensor<T>&);                                                                         \
    template Tensor<T> maxpool_forward(const Tensor<T>&, PoolWindow, std::vector<std::uint32_t>&);                   \
    template Tensor<T> maxpool_backward(const Tensor<T>&, const std::vector<std::uint32_t>&, const std::vector<int>&); \
    template Tensor<T> avgpool_forward(const Tensor<T>&, PoolWindow);                                                 \
    template Tensor<T> avgpool_backward(const Tensor<T>&, PoolWindow, const std::vector<int>&);                       \
    template Tensor<T> prelu_forward(const Tensor<T>&, const Tensor<T>&);                                             \
    template Tensor<T> prelu_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&);              \
    template Tensor<T> resize2x_forward(const Tensor<T>&);                                                            \
    template Tensor<T> resize2x_backward(const Tensor<T>&);                                                           \
    template Tensor<T> concat_forward(const Tensor<T>&, const Tensor<T>&);                                            \
    template void concat_backward(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);                                     \
    template Tensor<T> temporal_mean_forward(const Tensor<T>&);                                                       \
    template Tensor<T> temporal_mean_backward(const Tensor<T>&, int);                                                 \
    template Tensor<T> sigmoid_forward(const Tensor<T>&);                                                             \
    template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                                          \
    template T dice_loss(const Tensor<T>&, const Tensor<T>&, Tensor<T>*, T);

ULM_INSTANTIATE_LAYERS(float)
ULM_INSTANTIATE_LAYERS(double)

}  // namespace ulm::nn
