#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "eauwseg/dataset.hpp"
#include "eauwseg/grid.hpp"

namespace testutil {

using eauwseg::BinaryMask;

inline BinaryMask filled_disk(int h, int w, double cx, double cy, double r) {
    BinaryMask m(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) m(x, y) = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r ? 1 : 0;
    }
    return m;
}

inline BinaryMask rect_mask(int h, int w, int x0, int y0, int x1, int y1) {
    BinaryMask m(h, w);
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) m(x, y) = 1;
    }
    return m;
}

/// Lesion-like masks from the dataset generator, one per index.
inline BinaryMask random_blob(std::uint64_t seed, int size = 64) {
    eauwseg::SyntheticParams p;
    p.size = size;
    return eauwseg::generate_sample(p, seed * 7919 + 17, "t").mask;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("eauwseg_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Brute-force disk dilation: any foreground pixel within radius.
inline BinaryMask brute_dilate(const BinaryMask& m, int r) {
    BinaryMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            for (int v = 0; v < m.height() && !out(x, y); ++v) {
                for (int u = 0; u < m.width(); ++u) {
                    if (m(u, v) && (u - x) * (u - x) + (v - y) * (v - y) <= r * r) {
                        out(x, y) = 1;
                        break;
                    }
                }
            }
        }
    }
    return out;
}

/// Brute-force disk erosion: every pixel of the disk, including those
/// falling outside the image, must be foreground.
inline BinaryMask brute_erode(const BinaryMask& m, int r) {
    BinaryMask out(m.height(), m.width());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool all = true;
            for (int dy = -r; dy <= r && all; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx * dx + dy * dy > r * r) continue;
                    const int u = x + dx, v = y + dy;
                    if (u < 0 || v < 0 || u >= m.width() || v >= m.height() || !m(u, v)) {
                        all = false;
                        break;
                    }
                }
            }
            out(x, y) = all ? 1 : 0;
        }
    }
    return out;
}

} // namespace testutil
