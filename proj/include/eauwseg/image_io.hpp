#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "eauwseg/grid.hpp"

namespace eauwseg {

/// Channel-first float image with values in [0,1].
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data; // C x H x W

    Image() = default;
    Image(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c * h * w), 0.0f) {}

    float& at(int c, int x, int y) { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
    float at(int c, int x, int y) const { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary netpbm: PPM (P6) for 8-bit RGB, PGM (P5) for 8-bit single channel.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const Grid<std::uint8_t>& gray);
Grid<std::uint8_t> read_pgm(const std::filesystem::path& path);

/// Masks are stored as 0/255 and read back with any nonzero value as 1.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
BinaryMask read_mask(const std::filesystem::path& path);

/// Rounds to the nearest 8-bit level.
std::uint8_t quantize(float v);

} // namespace eauwseg
