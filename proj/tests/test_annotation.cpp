#include "doctest.h"

#include "eauwseg/annotation.hpp"
#include "support.hpp"

using namespace eauwseg;

namespace {

void check_partition_oracle(const RegionPartition& part, const BinaryMask& in, const BinaryMask& en) {
    std::size_t counts[3] = {0, 0, 0};
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) {
            const Region expect = in(x, y) ? Region::Inside : (en(x, y) ? Region::Band : Region::Outside);
            CHECK(part.region(x, y) == expect);
            CHECK(part.uncertain(x, y) == en(x, y) - in(x, y));
            CHECK(part.class_label(x, y) == static_cast<int>(expect));
            CHECK(part.certain_foreground(x, y) == in(x, y));
            ++counts[static_cast<int>(expect)];
        }
    }
    CHECK(part.count(Region::Outside) == counts[0]);
    CHECK(part.count(Region::Band) == counts[1]);
    CHECK(part.count(Region::Inside) == counts[2]);
    CHECK(counts[0] + counts[1] + counts[2] == in.size());
}

template <typename F>
void expect_error(ErrorCode code, F&& f) {
    try {
        f();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

} // namespace

TEST_SUITE("annotation") {

TEST_CASE("bounded polygons on 100 random masks") {
    const BpannoParams params;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto gt = testutil::random_blob(s);
        const auto anno = make_bpanno(gt, params);
        CHECK(is_subset(anno.inscribed_mask, gt));
        CHECK(is_subset(gt, anno.envelope_mask));
        CHECK(count_foreground(anno.inscribed_mask) > 0);
        CHECK(count_foreground(anno.envelope_mask) > count_foreground(anno.inscribed_mask));
        CHECK(static_cast<int>(anno.inscribed.vertices.size()) <= params.vertex_cap);
        CHECK(static_cast<int>(anno.envelope.vertices.size()) <= params.vertex_cap);
        CHECK(anno.inscribed.vertices.size() >= 3);
        for (const auto* poly : {&anno.inscribed, &anno.envelope}) {
            CHECK(is_simple(*poly));
            for (const auto& v : poly->vertices) CHECK(gt.contains(v.x, v.y));
        }
        CHECK(rasterize(anno.inscribed, gt.height(), gt.width()) == anno.inscribed_mask);
        CHECK(rasterize(anno.envelope, gt.height(), gt.width()) == anno.envelope_mask);
        CHECK_NOTHROW(validate_annotation(anno));

        const auto part = make_partition(anno);
        check_partition_oracle(part, anno.inscribed_mask, anno.envelope_mask);
        const double band_frac =
            static_cast<double>(part.count(Region::Band)) / static_cast<double>(count_foreground(anno.envelope_mask));
        CHECK(band_frac >= 0.05);
        CHECK(band_frac <= 0.60);
    }
}

TEST_CASE("disk with explicit parameters keeps the containment chain") {
    const auto disk = testutil::filled_disk(64, 64, 30, 33, 10);
    const auto anno = make_bpanno(disk, BpannoParams{2, 1.5, 32});
    CHECK(is_subset(anno.inscribed_mask, disk));
    CHECK(is_subset(disk, anno.envelope_mask));
    CHECK(count_foreground(anno.envelope_mask) > count_foreground(anno.inscribed_mask));
}

TEST_CASE("single pixel mask cannot be annotated") {
    BinaryMask m(16, 16);
    m(4, 9) = 1;
    expect_error(ErrorCode::ErosionEmpty, [&] { make_bpanno(m); });
}

TEST_CASE("empty mask cannot be annotated") {
    expect_error(ErrorCode::NoForeground, [&] { make_bpanno(BinaryMask(16, 16)); });
}

TEST_CASE("multi-component masks use the largest component") {
    auto m = testutil::filled_disk(64, 64, 20, 20, 9);
    m = mask_or(m, testutil::rect_mask(64, 64, 50, 50, 52, 52));
    const auto anno = make_bpanno(m);
    const auto big = largest_component(m);
    CHECK(is_subset(anno.inscribed_mask, big));
    CHECK(is_subset(big, anno.envelope_mask));
}

TEST_CASE("annotation validation rejects broken invariants") {
    auto anno = make_bpanno(testutil::filled_disk(32, 32, 16, 16, 8));
    auto same = anno;
    same.envelope_mask = same.inscribed_mask;
    expect_error(ErrorCode::InvalidParams, [&] { validate_annotation(same); });
    auto crossed = anno;
    std::swap(crossed.inscribed_mask, crossed.envelope_mask);
    expect_error(ErrorCode::InvalidParams, [&] { validate_annotation(crossed); });
}

TEST_CASE("partition with a single band pixel") {
    const auto en = testutil::rect_mask(16, 16, 4, 4, 9, 9);
    auto in = en;
    in(6, 6) = 0;
    const auto part = make_partition(in, en);
    CHECK(part.count(Region::Band) == 1);
    CHECK(part.region(6, 6) == Region::Band);
    check_partition_oracle(part, in, en);
}

TEST_CASE("identical masks give an empty band through the direct call") {
    const auto m = testutil::rect_mask(16, 16, 4, 4, 9, 9);
    const auto part = make_partition(m, m);
    CHECK(part.count(Region::Band) == 0);
    CHECK(part.count(Region::Inside) + part.count(Region::Outside) == 256);
}

TEST_CASE("partition rejects mismatched shapes") {
    expect_error(ErrorCode::ShapeMismatch, [&] { make_partition(BinaryMask(16, 16), BinaryMask(16, 17)); });
}

TEST_CASE("simplify_capped honours the vertex cap") {
    const auto contour = trace_contour(testutil::random_blob(7));
    for (int cap : {4, 8, 16}) {
        const auto out = simplify_capped(contour, 0.5, cap);
        CHECK(static_cast<int>(out.vertices.size()) <= cap);
        CHECK(out.vertices.size() >= 3);
    }
}

TEST_CASE("scribbles stay inside their class on 100 random masks") {
    const ScribbleParams params;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto gt = testutil::random_blob(s);
        const auto sc = make_scribble(gt, params, s + 1);
        CHECK(count_foreground(sc.foreground) > 0);
        CHECK(count_foreground(sc.background) > 0);
        CHECK(sc.foreground_lines.size() == 1);
        CHECK(sc.background_lines.size() == 1);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (sc.foreground[i]) CHECK(gt[i] == 1);
            if (sc.background[i]) CHECK(gt[i] == 0);
        }
    }
}

TEST_CASE("scribbles are deterministic per seed") {
    const auto gt = testutil::random_blob(2);
    const auto a = make_scribble(gt, {2, 2}, 99);
    const auto b = make_scribble(gt, {2, 2}, 99);
    CHECK(a.foreground == b.foreground);
    CHECK(a.background == b.background);
    const auto c = make_scribble(gt, {2, 2}, 100);
    CHECK((c.foreground != a.foreground || c.background != a.background));
}

TEST_CASE("scribble errors") {
    expect_error(ErrorCode::NoForeground, [&] { make_scribble(BinaryMask(16, 16), {}, 1); });
    expect_error(ErrorCode::InvalidParams, [&] { make_scribble(testutil::random_blob(1), {0, 2}, 1); });
}

TEST_CASE("bresenham lines") {
    CHECK(bresenham({3, 3}, {3, 3}).size() == 1);
    const auto line = bresenham({0, 0}, {5, 2});
    CHECK(line.size() == 6);
    CHECK(line.front() == Point{0, 0});
    CHECK(line.back() == Point{5, 2});
    for (std::size_t i = 1; i < line.size(); ++i) {
        CHECK(std::abs(line[i].x - line[i - 1].x) <= 1);
        CHECK(std::abs(line[i].y - line[i - 1].y) <= 1);
    }
}

TEST_CASE("box of a single pixel") {
    BinaryMask m(16, 16);
    m(5, 7) = 1;
    const auto box = make_box(m);
    CHECK(box.min == Point{5, 7});
    CHECK(box.max == Point{5, 7});
}

TEST_CASE("rectangle mask is idempotent") {
    const auto rect = make_rectangle_mask(testutil::random_blob(4));
    CHECK(make_rectangle_mask(rect) == rect);
}

TEST_CASE("boxes are tight on random blobs") {
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto gt = testutil::random_blob(s);
        const auto box = make_box(gt);
        bool hit[4] = {false, false, false, false};
        for (int y = 0; y < gt.height(); ++y) {
            for (int x = 0; x < gt.width(); ++x) {
                if (!gt(x, y)) continue;
                CHECK(x >= box.min.x);
                CHECK(x <= box.max.x);
                CHECK(y >= box.min.y);
                CHECK(y <= box.max.y);
                hit[0] |= x == box.min.x;
                hit[1] |= x == box.max.x;
                hit[2] |= y == box.min.y;
                hit[3] |= y == box.max.y;
            }
        }
        // Shrinking any side by one would lose a foreground pixel.
        CHECK((hit[0] && hit[1] && hit[2] && hit[3]));
        const auto rect = make_rectangle_mask(gt);
        CHECK(is_subset(gt, rect));
        CHECK(rect == box_mask(box, gt.height(), gt.width()));
    }
    expect_error(ErrorCode::NoForeground, [&] { make_box(BinaryMask(16, 16)); });
}

}
