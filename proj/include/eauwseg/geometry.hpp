#pragma once

#include <cstddef>
#include <vector>

#include "eauwseg/grid.hpp"

namespace eauwseg {

/// Closed polygon with vertices at pixel centers, in image coordinates.
struct Polygon {
    std::vector<Point> vertices;
    friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct MorphologyResult {
    BinaryMask dilated;
    BinaryMask eroded;
};

/// Offsets of a disk structuring element: all (dx, dy) with dx^2 + dy^2 <= r^2.
std::vector<Point> disk_offsets(int radius);

/// Pixels outside the image count as background for both operations.
BinaryMask dilate(const BinaryMask& mask, int radius);
BinaryMask erode(const BinaryMask& mask, int radius);

/// Dilation and erosion by a disk. Throws ErosionEmpty when nothing survives
/// the erosion.
MorphologyResult dilate_erode(const BinaryMask& mask, int radius);

/// Labels 4-connected components; returns the number of components and
/// writes labels 1..n into `labels` (0 is background).
int label_components(const BinaryMask& mask, Grid<int>& labels);
int count_components(const BinaryMask& mask);

/// Largest 4-connected component (first in raster order on ties). Returns an
/// empty mask if `mask` has no foreground.
BinaryMask largest_component(const BinaryMask& mask);

/// Outer boundary of a single 4-connected component, traced clockwise through
/// boundary pixel centers, with collinear runs merged. Rasterizing the result
/// reproduces a hole-free mask exactly.
Polygon trace_contour(const BinaryMask& mask);

/// Drops vertices that continue a straight run (keeps spikes).
Polygon merge_collinear(const Polygon& poly);

/// Closed-polygon Douglas-Peucker. Output vertices are a subsequence of the
/// input; every dropped vertex lies within `epsilon` of the segment that
/// replaced it. `epsilon == 0` returns the input unchanged.
Polygon douglas_peucker(const Polygon& poly, double epsilon);

double point_segment_distance(double px, double py, Point a, Point b);

/// Even-odd rasterization on pixel centers; centers on an edge count as inside.
BinaryMask rasterize(const Polygon& poly, int height, int width);

/// No two non-adjacent edges touch and no adjacent edges overlap.
bool is_simple(const Polygon& poly);

/// Foreground pixels with at least one 4-neighbour that is background
/// (pixels outside the image do not count).
BinaryMask inner_boundary(const BinaryMask& mask);

} // namespace eauwseg
