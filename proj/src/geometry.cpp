#include "eauwseg/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <utility>

namespace eauwseg {

void validate_mask(const BinaryMask& mask, const char* where) {
    if (mask.height() < 8 || mask.width() < 8) {
        throw Error(ErrorCode::ShapeMismatch, where, "mask must be at least 8x8");
    }
    for (auto v : mask.values()) {
        if (v > 1) throw Error(ErrorCode::InvalidParams, where, "mask values must be 0 or 1");
    }
}

std::vector<Point> disk_offsets(int radius) {
    std::vector<Point> out;
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
        }
    }
    return out;
}

BinaryMask dilate(const BinaryMask& mask, int radius) {
    const auto kernel = disk_offsets(radius);
    BinaryMask out(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            for (auto o : kernel) {
                if (out.contains(x + o.x, y + o.y)) out(x + o.x, y + o.y) = 1;
            }
        }
    }
    return out;
}

BinaryMask erode(const BinaryMask& mask, int radius) {
    const auto kernel = disk_offsets(radius);
    BinaryMask out(mask.height(), mask.width());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            bool keep = true;
            for (auto o : kernel) {
                const int nx = x + o.x, ny = y + o.y;
                if (!mask.contains(nx, ny) || !mask(nx, ny)) {
                    keep = false;
                    break;
                }
            }
            out(x, y) = keep ? 1 : 0;
        }
    }
    return out;
}

MorphologyResult dilate_erode(const BinaryMask& mask, int radius) {
    if (radius < 1) throw Error(ErrorCode::InvalidParams, "dilate_erode", "radius must be >= 1");
    if (count_foreground(mask) == 0) {
        throw Error(ErrorCode::NoForeground, "dilate_erode", "mask has no foreground");
    }
    MorphologyResult r{dilate(mask, radius), erode(mask, radius)};
    if (count_foreground(r.eroded) == 0) {
        throw Error(ErrorCode::ErosionEmpty, "dilate_erode",
                    "erosion with radius " + std::to_string(radius) + " removed every pixel");
    }
    return r;
}

int label_components(const BinaryMask& mask, Grid<int>& labels) {
    labels = Grid<int>(mask.height(), mask.width(), 0);
    int next = 0;
    std::vector<Point> stack;
    constexpr std::array<Point, 4> nbrs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y) || labels(x, y)) continue;
            ++next;
            labels(x, y) = next;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                for (auto d : nbrs) {
                    const int nx = p.x + d.x, ny = p.y + d.y;
                    if (mask.contains(nx, ny) && mask(nx, ny) && !labels(nx, ny)) {
                        labels(nx, ny) = next;
                        stack.push_back({nx, ny});
                    }
                }
            }
        }
    }
    return next;
}

int count_components(const BinaryMask& mask) {
    Grid<int> labels;
    return label_components(mask, labels);
}

BinaryMask largest_component(const BinaryMask& mask) {
    Grid<int> labels;
    const int n = label_components(mask, labels);
    BinaryMask out(mask.height(), mask.width());
    if (n == 0) return out;
    std::vector<std::size_t> sizes(static_cast<std::size_t>(n) + 1, 0);
    for (auto l : labels.values()) ++sizes[static_cast<std::size_t>(l)];
    int best = 1;
    for (int l = 2; l <= n; ++l) {
        if (sizes[static_cast<std::size_t>(l)] > sizes[static_cast<std::size_t>(best)]) best = l;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = labels[i] == best ? 1 : 0;
    return out;
}

namespace {

// Clockwise in image coordinates (y grows downward), starting west.
constexpr std::array<Point, 8> kRing{{
    {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1},
}};

int ring_index(Point d) {
    for (int i = 0; i < 8; ++i) {
        if (kRing[static_cast<std::size_t>(i)] == d) return i;
    }
    return -1;
}

std::int64_t cross(Point o, Point a, Point b) {
    return static_cast<std::int64_t>(a.x - o.x) * (b.y - o.y) -
           static_cast<std::int64_t>(a.y - o.y) * (b.x - o.x);
}

bool on_segment(Point p, Point a, Point b) {
    if (cross(a, b, p) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

int sign(std::int64_t v) { return (v > 0) - (v < 0); }

bool segments_touch(Point a, Point b, Point c, Point d) {
    const int d1 = sign(cross(c, d, a));
    const int d2 = sign(cross(c, d, b));
    const int d3 = sign(cross(a, b, c));
    const int d4 = sign(cross(a, b, d));
    if (d1 * d2 < 0 && d3 * d4 < 0) return true;
    return on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b);
}

} // namespace

Polygon merge_collinear(const Polygon& poly) {
    std::vector<Point> v = poly.vertices;
    bool changed = true;
    while (changed && v.size() > 2) {
        changed = false;
        std::vector<Point> kept;
        kept.reserve(v.size());
        const std::size_t n = v.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point prev = kept.empty() ? v[(i + n - 1) % n] : kept.back();
            const Point cur = v[i];
            const Point next = v[(i + 1) % n];
            const std::int64_t c = cross(prev, cur, next);
            const std::int64_t dot = static_cast<std::int64_t>(cur.x - prev.x) * (next.x - cur.x) +
                                     static_cast<std::int64_t>(cur.y - prev.y) * (next.y - cur.y);
            if ((c == 0 && dot > 0) || cur == prev) {
                changed = true;
                continue;
            }
            kept.push_back(cur);
        }
        v = std::move(kept);
    }
    return Polygon{std::move(v)};
}

Polygon trace_contour(const BinaryMask& mask) {
    const int components = count_components(mask);
    if (components != 1) {
        throw Error(ErrorCode::MultiComponent, "trace_contour",
                    "expected exactly one 4-connected component, found " + std::to_string(components));
    }
    Point start{-1, -1};
    for (int y = 0; y < mask.height() && start.x < 0; ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y)) {
                start = {x, y};
                break;
            }
        }
    }
    auto fg = [&](Point p) { return mask.contains(p.x, p.y) && mask(p) != 0; };

    std::vector<Point> contour{start};
    Point cur = start;
    int back = 0; // west of the first raster pixel is background
    const std::size_t limit = 4 * mask.size() + 16;
    for (std::size_t iter = 0; iter < limit; ++iter) {
        int found = -1;
        for (int k = 1; k <= 8; ++k) {
            const int d = (back + k) % 8;
            const Point n{cur.x + kRing[static_cast<std::size_t>(d)].x, cur.y + kRing[static_cast<std::size_t>(d)].y};
            if (fg(n)) {
                found = d;
                break;
            }
        }
        if (found < 0) break; // isolated pixel
        const Point next{cur.x + kRing[static_cast<std::size_t>(found)].x, cur.y + kRing[static_cast<std::size_t>(found)].y};
        if (cur == start && contour.size() > 1 && next == contour[1]) {
            contour.pop_back(); // the closing copy of `start`
            break;
        }
        const auto& pd = kRing[static_cast<std::size_t>((found + 7) % 8)];
        const Point prev{cur.x + pd.x, cur.y + pd.y};
        back = ring_index({prev.x - next.x, prev.y - next.y});
        cur = next;
        contour.push_back(cur);
    }
    // A diagonal step cuts a concave corner; when the corner pixel on the
    // interior (right-hand) side is foreground, walk through it instead.
    std::vector<Point> walked;
    walked.reserve(contour.size() * 2);
    for (std::size_t i = 0; i < contour.size(); ++i) {
        const Point c = contour[i];
        const Point n = contour[(i + 1) % contour.size()];
        walked.push_back(c);
        const int dx = n.x - c.x, dy = n.y - c.y;
        if (dx != 0 && dy != 0 && contour.size() > 1) {
            const Point corner = dx * dy > 0 ? Point{c.x, c.y + dy} : Point{c.x + dx, c.y};
            if (fg(corner)) walked.push_back(corner);
        }
    }
    Polygon poly = merge_collinear(Polygon{std::move(walked)});
    if (poly.vertices.size() < 3) {
        throw Error(ErrorCode::Degenerate, "trace_contour", "contour has fewer than 3 distinct corners");
    }
    return poly;
}

double point_segment_distance(double px, double py, Point a, Point b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
    const double cx = a.x + t * dx - px, cy = a.y + t * dy - py;
    return std::sqrt(cx * cx + cy * cy);
}

Polygon douglas_peucker(const Polygon& poly, double epsilon) {
    if (epsilon < 0.0) throw Error(ErrorCode::InvalidParams, "douglas_peucker", "epsilon must be >= 0");
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) throw Error(ErrorCode::Degenerate, "douglas_peucker", "input has fewer than 3 vertices");
    if (epsilon == 0.0) return poly;

    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::hypot(v[i].x - v[0].x, v[i].y - v[0].y);
        if (d > far_d) {
            far_d = d;
            far = i;
        }
    }
    std::vector<char> keep(n, 0);
    keep[0] = keep[far] = 1;

    // Chains are index ranges on the cyclic sequence; `last == n` means vertex 0.
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, far}, {far, n}};
    while (!stack.empty()) {
        const auto [first, last] = stack.back();
        stack.pop_back();
        if (last - first < 2) continue;
        const Point a = v[first], b = v[last % n];
        double best = -1.0;
        std::size_t idx = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = point_segment_distance(v[i].x, v[i].y, a, b);
            if (d > best) {
                best = d;
                idx = i;
            }
        }
        if (best > epsilon) {
            keep[idx] = 1;
            stack.push_back({first, idx});
            stack.push_back({idx, last});
        }
    }
    Polygon out;
    for (std::size_t i = 0; i < n; ++i) {
        if (keep[i]) out.vertices.push_back(v[i]);
    }
    if (out.vertices.size() < 3) {
        throw Error(ErrorCode::Degenerate, "douglas_peucker", "simplification collapsed below 3 vertices");
    }
    return out;
}

BinaryMask rasterize(const Polygon& poly, int height, int width) {
    BinaryMask out(height, width);
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n == 0) return out;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const Point p{x, y};
            bool inside = false;
            bool edge = false;
            for (std::size_t i = 0; i < n && !edge; ++i) {
                const Point a = v[i], b = v[(i + 1) % n];
                if (on_segment(p, a, b)) {
                    edge = true;
                    break;
                }
                if ((a.y > y) != (b.y > y)) {
                    // x < intersection abscissa, without division
                    const std::int64_t lhs = static_cast<std::int64_t>(x - a.x) * (b.y - a.y);
                    const std::int64_t rhs = static_cast<std::int64_t>(y - a.y) * (b.x - a.x);
                    if ((b.y > a.y) ? lhs < rhs : lhs > rhs) inside = !inside;
                }
            }
            out(x, y) = (edge || inside) ? 1 : 0;
        }
    }
    return out;
}

bool is_simple(const Polygon& poly) {
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] == v[(i + 1) % n]) return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = v[i], b = v[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point c = v[j], d = v[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // shared vertex only: the far endpoints must not fold back onto the other edge
                const Point shared = (j == i + 1) ? b : a;
                const Point other_ab = (j == i + 1) ? a : b;
                const Point other_cd = (j == i + 1) ? d : c;
                if (cross(shared, other_ab, other_cd) == 0) {
                    const std::int64_t dot =
                        static_cast<std::int64_t>(other_ab.x - shared.x) * (other_cd.x - shared.x) +
                        static_cast<std::int64_t>(other_ab.y - shared.y) * (other_cd.y - shared.y);
                    if (dot > 0) return false;
                }
                continue;
            }
            if (segments_touch(a, b, c, d)) return false;
        }
    }
    return true;
}

BinaryMask inner_boundary(const BinaryMask& mask) {
    BinaryMask out(mask.height(), mask.width());
    constexpr std::array<Point, 4> nbrs{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            for (auto d : nbrs) {
                const int nx = x + d.x, ny = y + d.y;
                if (mask.contains(nx, ny) && !mask(nx, ny)) {
                    out(x, y) = 1;
                    break;
                }
            }
        }
    }
    return out;
}

} // namespace eauwseg
