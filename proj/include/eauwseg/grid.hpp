#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "eauwseg/error.hpp"

namespace eauwseg {

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Dense row-major H x W grid.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int height, int width, T fill = T{})
        : height_(height), width_(width),
          data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
        if (height < 0 || width < 0) {
            throw Error(ErrorCode::InvalidParams, "Grid", "negative extent");
        }
    }

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }

    T& operator()(int x, int y) { return data_[index(x, y)]; }
    const T& operator()(int x, int y) const { return data_[index(x, y)]; }
    T& operator()(Point p) { return (*this)(p.x, p.y); }
    const T& operator()(Point p) const { return (*this)(p.x, p.y); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    bool same_shape(const auto& other) const noexcept {
        return height_ == other.height() && width_ == other.width();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<T> data_;
};

/// Values are kept in {0,1}.
using BinaryMask = Grid<std::uint8_t>;

inline std::size_t count_foreground(const BinaryMask& mask) {
    std::size_t n = 0;
    for (auto v : mask.values()) n += v != 0;
    return n;
}

/// True when every foreground pixel of `inner` is foreground in `outer`.
inline bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
    if (!inner.same_shape(outer)) return false;
    for (std::size_t i = 0; i < inner.size(); ++i) {
        if (inner[i] && !outer[i]) return false;
    }
    return true;
}

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] && b[i]) ? 1 : 0;
    return out;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
    BinaryMask out(a.height(), a.width());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
    return out;
}

inline void require_same_shape(const auto& a, const auto& b, const char* where) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::ShapeMismatch, where, "grids differ in shape");
    }
}

/// Checks the BinaryMask contract: values in {0,1} and both extents >= 8.
void validate_mask(const BinaryMask& mask, const char* where);

} // namespace eauwseg
