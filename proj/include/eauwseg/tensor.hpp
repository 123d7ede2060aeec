#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "eauwseg/error.hpp"

namespace eauwseg {

/// NCHW tensor with owned contiguous storage.
template <typename T>
struct Tensor {
    std::array<int, 4> shape{0, 0, 0, 0};
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n, int c, int h, int w, T fill = T{})
        : shape{n, c, h, w}, data(static_cast<std::size_t>(n) * c * h * w, fill) {}

    int n() const noexcept { return shape[0]; }
    int c() const noexcept { return shape[1]; }
    int h() const noexcept { return shape[2]; }
    int w() const noexcept { return shape[3]; }
    std::size_t size() const noexcept { return data.size(); }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(shape[2]) * shape[3]; }

    T& at(int b, int ch, int y, int x) {
        return data[((static_cast<std::size_t>(b) * shape[1] + ch) * shape[2] + y) * shape[3] + x];
    }
    T at(int b, int ch, int y, int x) const {
        return data[((static_cast<std::size_t>(b) * shape[1] + ch) * shape[2] + y) * shape[3] + x];
    }

    /// Contiguous H*W plane of image b, channel ch.
    std::span<T> channel(int b, int ch) {
        return {data.data() + (static_cast<std::size_t>(b) * shape[1] + ch) * plane(), plane()};
    }
    std::span<const T> channel(int b, int ch) const {
        return {data.data() + (static_cast<std::size_t>(b) * shape[1] + ch) * plane(), plane()};
    }

    void zero() { std::fill(data.begin(), data.end(), T{}); }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& t) {
    Tensor<To> out;
    out.shape = t.shape;
    out.data.assign(t.data.begin(), t.data.end());
    return out;
}

} // namespace eauwseg
