#include "eauwseg/nn.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include <Eigen/Core>

namespace eauwseg::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// Copies one image into a zero-bordered (C, H + 2 pad, W + 2 pad) buffer.
template <typename T>
void pad_image(const T* src, int channels, int h, int w, int pad, T* dst) {
    const int wp = w + 2 * pad, hp = h + 2 * pad;
    std::fill(dst, dst + static_cast<std::size_t>(channels) * hp * wp, T{});
    for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < h; ++y) {
            std::memcpy(dst + (static_cast<std::size_t>(c) * hp + y + pad) * wp + pad,
                        src + (static_cast<std::size_t>(c) * h + y) * w, sizeof(T) * static_cast<std::size_t>(w));
        }
    }
}

} // namespace

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, std::string name)
    : in_(in_channels), out_(out_channels), kernel_(kernel) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
        throw Error(ErrorCode::InvalidConfig, "Conv2d", "bad layer geometry for " + name);
    }
    const auto fan = static_cast<std::size_t>(in_channels) * kernel * kernel;
    weight_ = Param<T>{name + ".weight", std::vector<T>(fan * out_channels), std::vector<T>(fan * out_channels)};
    bias_ = Param<T>{name + ".bias", std::vector<T>(out_channels), std::vector<T>(out_channels)};
}

template <typename T>
void Conv2d<T>::init(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_) * kernel_ * kernel_;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (auto& v : weight_.value) v = static_cast<T>(dist(rng));
    std::fill(bias_.value.begin(), bias_.value.end(), T{});
}

// Each kernel tap is a GEMM between its (out x in) weight slice and the
// padded input shifted by a constant offset. Outputs are produced on the
// padded row pitch; the 2*pad extra columns per row are discarded.
template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x) {
    if (x.c() != in_) throw Error(ErrorCode::ShapeMismatch, weight_.name, "input channel mismatch");
    in_shape_ = x.shape;
    const int n = x.n(), h = x.h(), w = x.w(), k = kernel_, pad = k / 2;
    const int wp = w + 2 * pad;
    const Eigen::Index lp = static_cast<Eigen::Index>(h + 2 * pad) * wp;
    const Eigen::Index lo = static_cast<Eigen::Index>(h - 1) * wp + w;
    const auto plane = x.plane();

    taps_.assign(static_cast<std::size_t>(k * k) * out_ * in_, T{});
    for (int o = 0; o < out_; ++o) {
        for (int c = 0; c < in_; ++c) {
            for (int t = 0; t < k * k; ++t) {
                taps_[(static_cast<std::size_t>(t) * out_ + o) * in_ + c] =
                    weight_.value[(static_cast<std::size_t>(o) * in_ + c) * k * k + t];
            }
        }
    }

    Tensor<T> y(n, out_, h, w);
    padded_.resize(static_cast<std::size_t>(n));
    std::vector<T> acc(static_cast<std::size_t>(out_ * lo));
    for (int b = 0; b < n; ++b) {
        auto& pb = padded_[static_cast<std::size_t>(b)];
        pb.resize(static_cast<std::size_t>(in_ * lp));
        pad_image(x.data.data() + static_cast<std::size_t>(b) * in_ * plane, in_, h, w, pad, pb.data());
        ConstMapMat<T> pm(pb.data(), in_, lp);
        MapMat<T> am(acc.data(), out_, lo);
        am.setZero();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int t = ky * k + kx;
                ConstMapMat<T> wt(taps_.data() + static_cast<std::size_t>(t) * out_ * in_, out_, in_);
                am.noalias() += wt * pm.middleCols(static_cast<Eigen::Index>(ky) * wp + kx, lo);
            }
        }
        for (int o = 0; o < out_; ++o) {
            const T bias = bias_.value[static_cast<std::size_t>(o)];
            auto dst = y.channel(b, o);
            const T* src = acc.data() + static_cast<std::size_t>(o) * lo;
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) dst[static_cast<std::size_t>(yy * w + xx)] = src[yy * wp + xx] + bias;
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& dy) {
    const int n = dy.n(), h = dy.h(), w = dy.w(), k = kernel_, pad = k / 2;
    if (n != in_shape_[0] || h != in_shape_[2] || w != in_shape_[3] || dy.c() != out_) {
        throw Error(ErrorCode::ShapeMismatch, weight_.name, "gradient does not match the cached forward pass");
    }
    const int wp = w + 2 * pad, hp = h + 2 * pad;
    const Eigen::Index lp = static_cast<Eigen::Index>(hp) * wp;
    const Eigen::Index lo = static_cast<Eigen::Index>(h - 1) * wp + w;
    Tensor<T> dx(n, in_, h, w);
    std::vector<T> dacc(static_cast<std::size_t>(out_ * lo), T{});
    std::vector<T> dpad(static_cast<std::size_t>(in_ * lp));
    std::vector<T> dtaps(taps_.size(), T{});
    for (int b = 0; b < n; ++b) {
        for (int o = 0; o < out_; ++o) {
            const auto src = dy.channel(b, o);
            T* dst = dacc.data() + static_cast<std::size_t>(o) * lo;
            T bsum = 0;
            for (int yy = 0; yy < h; ++yy) {
                for (int xx = 0; xx < w; ++xx) {
                    const T v = src[static_cast<std::size_t>(yy * w + xx)];
                    dst[yy * wp + xx] = v;
                    bsum += v;
                }
            }
            bias_.grad[static_cast<std::size_t>(o)] += bsum;
        }
        ConstMapMat<T> da(dacc.data(), out_, lo);
        ConstMapMat<T> pm(padded_[static_cast<std::size_t>(b)].data(), in_, lp);
        MapMat<T> dp(dpad.data(), in_, lp);
        dp.setZero();
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int t = ky * k + kx;
                const Eigen::Index off = static_cast<Eigen::Index>(ky) * wp + kx;
                ConstMapMat<T> wt(taps_.data() + static_cast<std::size_t>(t) * out_ * in_, out_, in_);
                MapMat<T> gt(dtaps.data() + static_cast<std::size_t>(t) * out_ * in_, out_, in_);
                gt.noalias() += da * pm.middleCols(off, lo).transpose();
                dp.middleCols(off, lo).noalias() += wt.transpose() * da;
            }
        }
        for (int c = 0; c < in_; ++c) {
            auto dst = dx.channel(b, c);
            for (int yy = 0; yy < h; ++yy) {
                const T* src = dpad.data() + (static_cast<std::size_t>(c) * hp + yy + pad) * wp + pad;
                std::copy(src, src + w, dst.begin() + static_cast<std::ptrdiff_t>(yy * w));
            }
        }
    }
    for (int o = 0; o < out_; ++o) {
        for (int c = 0; c < in_; ++c) {
            for (int t = 0; t < k * k; ++t) {
                weight_.grad[(static_cast<std::size_t>(o) * in_ + c) * k * k + t] +=
                    dtaps[(static_cast<std::size_t>(t) * out_ + o) * in_ + c];
            }
        }
    }
    return dx;
}

template <typename T>
Tensor<T> Relu<T>::forward(Tensor<T> x) {
    active_.resize(x.size());
    T* v = x.data.data();
    std::uint8_t* a = active_.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        a[i] = v[i] > T{};
        v[i] = std::max(v[i], T{});
    }
    return x;
}

template <typename T>
Tensor<T> Relu<T>::backward(Tensor<T> dy) const {
    T* g = dy.data.data();
    const std::uint8_t* a = active_.data();
    for (std::size_t i = 0; i < dy.size(); ++i) g[i] = a[i] ? g[i] : T{};
    return dy;
}

template <typename T>
Tensor<T> MaxPool2<T>::forward(const Tensor<T>& x) {
    if (x.h() % 2 || x.w() % 2) throw Error(ErrorCode::ShapeMismatch, "MaxPool2", "odd spatial extent");
    in_shape_ = x.shape;
    const int oh = x.h() / 2, ow = x.w() / 2;
    Tensor<T> y(x.n(), x.c(), oh, ow);
    argmax_.resize(y.size());
    std::size_t k = 0;
    for (int b = 0; b < x.n(); ++b) {
        for (int c = 0; c < x.c(); ++c) {
            const auto in = x.channel(b, c);
            for (int yy = 0; yy < oh; ++yy) {
                for (int xx = 0; xx < ow; ++xx, ++k) {
                    std::uint32_t best = static_cast<std::uint32_t>((2 * yy) * x.w() + 2 * xx);
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const auto idx = static_cast<std::uint32_t>((2 * yy + dy) * x.w() + 2 * xx + dx);
                            if (in[idx] > in[best]) best = idx;
                        }
                    }
                    argmax_[k] = best;
                    y.data[k] = in[best];
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> MaxPool2<T>::backward(const Tensor<T>& dy) const {
    Tensor<T> dx(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
    std::size_t k = 0;
    for (int b = 0; b < dy.n(); ++b) {
        for (int c = 0; c < dy.c(); ++c) {
            auto out = dx.channel(b, c);
            for (std::size_t i = 0; i < dy.plane(); ++i, ++k) out[argmax_[k]] += dy.data[k];
        }
    }
    return dx;
}

template <typename T>
Tensor<T> upsample2(const Tensor<T>& x) {
    Tensor<T> y(x.n(), x.c(), x.h() * 2, x.w() * 2);
    for (int b = 0; b < x.n(); ++b) {
        for (int c = 0; c < x.c(); ++c) {
            const auto in = x.channel(b, c);
            auto out = y.channel(b, c);
            for (int yy = 0; yy < y.h(); ++yy) {
                for (int xx = 0; xx < y.w(); ++xx) {
                    out[static_cast<std::size_t>(yy * y.w() + xx)] = in[static_cast<std::size_t>((yy / 2) * x.w() + xx / 2)];
                }
            }
        }
    }
    return y;
}

template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.n(), dy.c(), dy.h() / 2, dy.w() / 2);
    for (int b = 0; b < dy.n(); ++b) {
        for (int c = 0; c < dy.c(); ++c) {
            const auto in = dy.channel(b, c);
            auto out = dx.channel(b, c);
            for (int yy = 0; yy < dy.h(); ++yy) {
                for (int xx = 0; xx < dy.w(); ++xx) {
                    out[static_cast<std::size_t>((yy / 2) * dx.w() + xx / 2)] += in[static_cast<std::size_t>(yy * dy.w() + xx)];
                }
            }
        }
    }
    return dx;
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
        throw Error(ErrorCode::ShapeMismatch, "concat_channels", "batch or spatial mismatch");
    }
    Tensor<T> y(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t sa = a.c() * a.plane(), sb = b.c() * b.plane();
    for (int i = 0; i < a.n(); ++i) {
        auto dst = y.data.begin() + static_cast<std::ptrdiff_t>(i * (sa + sb));
        std::copy_n(a.data.begin() + static_cast<std::ptrdiff_t>(i * sa), sa, dst);
        std::copy_n(b.data.begin() + static_cast<std::ptrdiff_t>(i * sb), sb, dst + static_cast<std::ptrdiff_t>(sa));
    }
    return y;
}

template <typename T>
void split_channels(const Tensor<T>& d, int channels_a, Tensor<T>& da, Tensor<T>& db) {
    da = Tensor<T>(d.n(), channels_a, d.h(), d.w());
    db = Tensor<T>(d.n(), d.c() - channels_a, d.h(), d.w());
    const std::size_t sa = da.c() * da.plane(), sb = db.c() * db.plane();
    for (int i = 0; i < d.n(); ++i) {
        auto src = d.data.begin() + static_cast<std::ptrdiff_t>(i * (sa + sb));
        std::copy_n(src, sa, da.data.begin() + static_cast<std::ptrdiff_t>(i * sa));
        std::copy_n(src + static_cast<std::ptrdiff_t>(sa), sb, db.data.begin() + static_cast<std::ptrdiff_t>(i * sb));
    }
}

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x) {
    if (acc.shape != x.shape) throw Error(ErrorCode::ShapeMismatch, "add_inplace", "shape mismatch");
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data[i] += x.data[i];
}

template <typename T>
Adam<T>::Adam(std::vector<Param<T>*> params, Options opt) : params_(std::move(params)), opt_(opt) {
    for (auto* p : params_) {
        m_.emplace_back(p->value.size(), 0.0);
        v_.emplace_back(p->value.size(), 0.0);
    }
}

template <typename T>
void Adam<T>::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i];
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = static_cast<double>(p.grad[j]);
            m[j] = opt_.beta1 * m[j] + (1.0 - opt_.beta1) * g;
            v[j] = opt_.beta2 * v[j] + (1.0 - opt_.beta2) * g * g;
            const double update = opt_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opt_.eps);
            p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
        }
    }
}

template <typename T>
void Adam<T>::zero_grad() {
    for (auto* p : params_) p->zero_grad();
}

#define EAUWSEG_INSTANTIATE(T)                                                              \
    template class Conv2d<T>;                                                               \
    template class Relu<T>;                                                                 \
    template class MaxPool2<T>;                                                             \
    template class Adam<T>;                                                                 \
    template Tensor<T> upsample2<T>(const Tensor<T>&);                                      \
    template Tensor<T> upsample2_backward<T>(const Tensor<T>&);                             \
    template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);              \
    template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);         \
    template void add_inplace<T>(Tensor<T>&, const Tensor<T>&);

EAUWSEG_INSTANTIATE(float)
EAUWSEG_INSTANTIATE(double)

#undef EAUWSEG_INSTANTIATE

} // namespace eauwseg::nn
