#pragma once

#include <cstdint>
#include <vector>

#include "eauwseg/geometry.hpp"

namespace eauwseg {

/// Inscribed and envelope polygons together with their rasterizations
/// (y_in and y_en). inscribed_mask is a subset of envelope_mask and the
/// difference is never empty.
struct BoundedPolygonAnnotation {
    Polygon inscribed;
    Polygon envelope;
    BinaryMask inscribed_mask;
    BinaryMask envelope_mask;
};

enum class Region : std::uint8_t { Outside = 0, Band = 1, Inside = 2 };

/// Per-pixel region labels. class_label uses the 3-class convention
/// outside = 0, band = 1, inside = 2, which is the numeric value of Region.
struct RegionPartition {
    Grid<Region> region;
    BinaryMask uncertain;           // 1 exactly on the band
    Grid<std::uint8_t> class_label; // 0 / 1 / 2
    BinaryMask certain_foreground;  // 1 on Inside

    int height() const { return region.height(); }
    int width() const { return region.width(); }
    std::size_t count(Region r) const;
};

struct BpannoParams {
    int radius = 3;
    double epsilon = 2.0;
    int vertex_cap = 32;
};

/// Douglas-Peucker with the tolerance raised until the vertex cap is met.
Polygon simplify_capped(const Polygon& poly, double epsilon, int vertex_cap);

BoundedPolygonAnnotation make_bpanno(const BinaryMask& mask, const BpannoParams& params = {});

/// Throws InvalidParams when the annotation invariants do not hold.
void validate_annotation(const BoundedPolygonAnnotation& anno);

RegionPartition make_partition(const BinaryMask& inscribed_mask, const BinaryMask& envelope_mask);
RegionPartition make_partition(const BoundedPolygonAnnotation& anno);

struct LineSegment {
    Point a;
    Point b;
};

struct ScribbleParams {
    int n_lines = 1;
    int thickness = 2;
};

struct ScribbleAnnotation {
    std::vector<LineSegment> foreground_lines;
    std::vector<LineSegment> background_lines;
    int thickness = 1;
    BinaryMask foreground; // subset of the ground-truth foreground
    BinaryMask background; // subset of the ground-truth background
};

/// Random lines between two end points sampled from the same class, drawn
/// with a square brush and clipped to that class.
ScribbleAnnotation make_scribble(const BinaryMask& mask, const ScribbleParams& params, std::uint64_t seed);

/// Pixels of a Bresenham line from a to b, inclusive of both ends.
std::vector<Point> bresenham(Point a, Point b);

/// Tight axis-aligned bounding box, inclusive corners.
struct Box {
    Point min;
    Point max;
    friend bool operator==(const Box&, const Box&) = default;
};

Box make_box(const BinaryMask& mask);
BinaryMask box_mask(const Box& box, int height, int width);
BinaryMask make_rectangle_mask(const BinaryMask& mask);

} // namespace eauwseg
