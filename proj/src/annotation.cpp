#include "eauwseg/annotation.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <random>

namespace eauwseg {

std::size_t RegionPartition::count(Region r) const {
    return static_cast<std::size_t>(std::count(region.values().begin(), region.values().end(), r));
}

Polygon simplify_capped(const Polygon& poly, double epsilon, int vertex_cap) {
    if (vertex_cap < 3) throw Error(ErrorCode::InvalidParams, "simplify_capped", "vertex cap must be >= 3");
    double e = epsilon;
    for (;;) {
        Polygon out = douglas_peucker(poly, e);
        if (out.vertices.size() <= static_cast<std::size_t>(vertex_cap)) return out;
        e = e > 0.0 ? e * 1.25 : 0.5;
    }
}

namespace {

constexpr int kMaxRepairs = 64;

// Simplify the traced source; on a containment or simplicity failure shrink
// the source (inscribed) or grow it (envelope) and try again.
Polygon inscribed_polygon(const BinaryMask& gt, BinaryMask source, const BpannoParams& params) {
    for (int attempt = 0; attempt < kMaxRepairs; ++attempt) {
        const Polygon poly = simplify_capped(trace_contour(source), params.epsilon, params.vertex_cap);
        const BinaryMask raster = rasterize(poly, gt.height(), gt.width());
        if (is_subset(raster, gt) && is_simple(poly)) return poly;
        BinaryMask next = largest_component(mask_and(raster, source));
        if (next == source) next = largest_component(erode(source, 1));
        if (count_foreground(next) == 0) {
            throw Error(ErrorCode::ErosionEmpty, "make_bpanno", "inscribed region vanished during repair");
        }
        source = std::move(next);
    }
    throw Error(ErrorCode::Degenerate, "make_bpanno", "inscribed polygon repair did not converge");
}

Polygon envelope_polygon(const BinaryMask& gt, BinaryMask source, const BpannoParams& params) {
    for (int attempt = 0; attempt < kMaxRepairs; ++attempt) {
        const Polygon poly = simplify_capped(trace_contour(source), params.epsilon, params.vertex_cap);
        const BinaryMask raster = rasterize(poly, gt.height(), gt.width());
        if (is_subset(gt, raster) && is_simple(poly)) return poly;
        BinaryMask next = largest_component(mask_or(raster, source));
        if (next == source) next = dilate(source, 1);
        source = std::move(next);
    }
    throw Error(ErrorCode::Degenerate, "make_bpanno", "envelope polygon repair did not converge");
}

} // namespace

BoundedPolygonAnnotation make_bpanno(const BinaryMask& mask, const BpannoParams& params) {
    validate_mask(mask, "make_bpanno");
    if (params.radius < 1 || params.epsilon < 0.0) {
        throw Error(ErrorCode::InvalidParams, "make_bpanno", "radius must be >= 1 and epsilon >= 0");
    }
    const int components = count_components(mask);
    if (components == 0) throw Error(ErrorCode::NoForeground, "make_bpanno", "mask has no foreground");
    if (components > 1) {
        std::clog << "warning: make_bpanno: " << components
                  << " components in mask, keeping the largest\n";
    }
    const BinaryMask gt = largest_component(mask);
    const MorphologyResult morph = dilate_erode(gt, params.radius);

    BoundedPolygonAnnotation anno;
    anno.inscribed = inscribed_polygon(gt, largest_component(morph.eroded), params);
    anno.envelope = envelope_polygon(gt, largest_component(morph.dilated), params);
    anno.inscribed_mask = rasterize(anno.inscribed, gt.height(), gt.width());
    anno.envelope_mask = rasterize(anno.envelope, gt.height(), gt.width());
    if (anno.inscribed_mask == anno.envelope_mask) {
        throw Error(ErrorCode::Degenerate, "make_bpanno", "inscribed and envelope masks coincide");
    }
    return anno;
}

void validate_annotation(const BoundedPolygonAnnotation& anno) {
    const auto& in = anno.inscribed_mask;
    const auto& en = anno.envelope_mask;
    require_same_shape(in, en, "validate_annotation");
    if (count_foreground(in) == 0 || count_foreground(en) == 0) {
        throw Error(ErrorCode::InvalidParams, "validate_annotation", "empty inscribed or envelope mask");
    }
    if (!is_subset(in, en)) {
        throw Error(ErrorCode::InvalidParams, "validate_annotation", "inscribed mask is not inside the envelope");
    }
    if (count_foreground(en) == count_foreground(in)) {
        throw Error(ErrorCode::InvalidParams, "validate_annotation", "uncertain band is empty");
    }
}

RegionPartition make_partition(const BinaryMask& inscribed_mask, const BinaryMask& envelope_mask) {
    require_same_shape(inscribed_mask, envelope_mask, "make_partition");
    const int h = inscribed_mask.height(), w = inscribed_mask.width();
    RegionPartition part{Grid<Region>(h, w, Region::Outside), BinaryMask(h, w), Grid<std::uint8_t>(h, w, 0),
                         BinaryMask(h, w)};
    for (std::size_t i = 0; i < inscribed_mask.size(); ++i) {
        Region r = Region::Outside;
        if (inscribed_mask[i]) {
            r = Region::Inside;
        } else if (envelope_mask[i]) {
            r = Region::Band;
        }
        part.region[i] = r;
        part.uncertain[i] = r == Region::Band ? 1 : 0;
        part.class_label[i] = static_cast<std::uint8_t>(r);
        part.certain_foreground[i] = r == Region::Inside ? 1 : 0;
    }
    return part;
}

RegionPartition make_partition(const BoundedPolygonAnnotation& anno) {
    return make_partition(anno.inscribed_mask, anno.envelope_mask);
}

std::vector<Point> bresenham(Point a, Point b) {
    std::vector<Point> out;
    int x = a.x, y = a.y;
    const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
    const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
    int err = dx + dy;
    for (;;) {
        out.push_back({x, y});
        if (x == b.x && y == b.y) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
    return out;
}

namespace {

void draw_clipped(BinaryMask& canvas, const BinaryMask& region, std::uint8_t want, LineSegment line, int thickness) {
    const int lo = -(thickness - 1) / 2, hi = thickness / 2;
    for (auto p : bresenham(line.a, line.b)) {
        for (int dy = lo; dy <= hi; ++dy) {
            for (int dx = lo; dx <= hi; ++dx) {
                const int x = p.x + dx, y = p.y + dy;
                if (canvas.contains(x, y) && region(x, y) == want) canvas(x, y) = 1;
            }
        }
    }
}

std::vector<Point> pixels_with(const BinaryMask& mask, std::uint8_t value) {
    std::vector<Point> out;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask(x, y) == value) out.push_back({x, y});
        }
    }
    return out;
}

} // namespace

ScribbleAnnotation make_scribble(const BinaryMask& mask, const ScribbleParams& params, std::uint64_t seed) {
    if (params.n_lines < 1 || params.thickness < 1) {
        throw Error(ErrorCode::InvalidParams, "make_scribble", "n_lines and thickness must be >= 1");
    }
    const auto fg = pixels_with(mask, 1);
    if (fg.empty()) throw Error(ErrorCode::NoForeground, "make_scribble", "mask has no foreground");
    const auto bg = pixels_with(mask, 0);

    std::mt19937_64 rng(seed);
    ScribbleAnnotation out;
    out.thickness = params.thickness;
    out.foreground = BinaryMask(mask.height(), mask.width());
    out.background = BinaryMask(mask.height(), mask.width());
    auto pick = [&rng](const std::vector<Point>& pool) {
        std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
        return pool[d(rng)];
    };
    for (int i = 0; i < params.n_lines; ++i) {
        const Point a = pick(fg);
        const Point b = pick(fg);
        out.foreground_lines.push_back({a, b});
        draw_clipped(out.foreground, mask, 1, {a, b}, params.thickness);
    }
    if (!bg.empty()) {
        for (int i = 0; i < params.n_lines; ++i) {
            const Point a = pick(bg);
            const Point b = pick(bg);
            out.background_lines.push_back({a, b});
            draw_clipped(out.background, mask, 0, {a, b}, params.thickness);
        }
    }
    return out;
}

Box make_box(const BinaryMask& mask) {
    Box box{{mask.width(), mask.height()}, {-1, -1}};
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            box.min.x = std::min(box.min.x, x);
            box.min.y = std::min(box.min.y, y);
            box.max.x = std::max(box.max.x, x);
            box.max.y = std::max(box.max.y, y);
        }
    }
    if (box.max.x < 0) throw Error(ErrorCode::NoForeground, "make_box", "mask has no foreground");
    return box;
}

BinaryMask box_mask(const Box& box, int height, int width) {
    BinaryMask out(height, width);
    for (int y = std::max(0, box.min.y); y <= std::min(height - 1, box.max.y); ++y) {
        for (int x = std::max(0, box.min.x); x <= std::min(width - 1, box.max.x); ++x) out(x, y) = 1;
    }
    return out;
}

BinaryMask make_rectangle_mask(const BinaryMask& mask) {
    return box_mask(make_box(mask), mask.height(), mask.width());
}

} // namespace eauwseg
