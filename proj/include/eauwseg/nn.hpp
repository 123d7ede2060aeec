#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "eauwseg/tensor.hpp"

namespace eauwseg::nn {

template <typename T>
struct Param {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;

    void zero_grad() { std::fill(grad.begin(), grad.end(), T{}); }
};

/// Square convolution with stride 1 and "same" zero padding. Kernel size
/// must be odd. Forward caches what backward needs.
template <typename T>
class Conv2d {
public:
    Conv2d(int in_channels, int out_channels, int kernel, std::string name);

    void init(std::mt19937_64& rng);
    Tensor<T> forward(const Tensor<T>& x);
    /// Accumulates parameter gradients and returns the input gradient.
    Tensor<T> backward(const Tensor<T>& dy);

    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    int in_, out_, kernel_;
    Param<T> weight_; // out x (in * k * k)
    Param<T> bias_;
    std::array<int, 4> in_shape_{};
    std::vector<std::vector<T>> padded_; // per-image zero-bordered input
    std::vector<T> taps_;                // weights regrouped as k*k slices of out x in
};

/// ReLU that remembers its activation pattern.
template <typename T>
class Relu {
public:
    Tensor<T> forward(Tensor<T> x);
    Tensor<T> backward(Tensor<T> dy) const;

private:
    std::vector<std::uint8_t> active_;
};

template <typename T>
class MaxPool2 {
public:
    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy) const;

private:
    std::array<int, 4> in_shape_{};
    std::vector<std::uint32_t> argmax_;
};

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2_backward(const Tensor<T>& dy);

/// Channel concatenation and its split.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
void split_channels(const Tensor<T>& d, int channels_a, Tensor<T>& da, Tensor<T>& db);

template <typename T>
void add_inplace(Tensor<T>& acc, const Tensor<T>& x);

/// Adam without weight decay.
template <typename T>
class Adam {
public:
    struct Options {
        double lr = 1e-4;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    Adam(std::vector<Param<T>*> params, Options opt);
    void step();
    void zero_grad();
    std::int64_t steps() const { return t_; }

private:
    std::vector<Param<T>*> params_;
    Options opt_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t t_ = 0;
};

} // namespace eauwseg::nn
