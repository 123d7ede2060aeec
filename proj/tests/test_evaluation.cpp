#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "eauwseg/evaluation.hpp"
#include "eauwseg/geometry.hpp"
#include "eauwseg/image_io.hpp"
#include "eauwseg/losses.hpp"
#include "support.hpp"

using namespace eauwseg;
namespace fs = std::filesystem;

namespace {

struct Counts {
    double tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts pixel_counts(const BinaryMask& p, const BinaryMask& g) {
    Counts c;
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            const bool a = p(x, y), b = g(x, y);
            c.tp += a && b;
            c.fp += a && !b;
            c.fn += !a && b;
            c.tn += !a && !b;
        }
    }
    return c;
}

// Exhaustive band: distance from every pixel to every edge pixel,
// where an edge pixel is foreground with an in-image 4-neighbour of background.
BinaryMask brute_band(const BinaryMask& g, int w) {
    std::vector<std::pair<int, int>> edge;
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            if (!g(x, y)) continue;
            const int nb[4][2] = {{x + 1, y}, {x - 1, y}, {x, y + 1}, {x, y - 1}};
            for (auto& n : nb) {
                if (n[0] >= 0 && n[1] >= 0 && n[0] < g.width() && n[1] < g.height() && !g(n[0], n[1])) {
                    edge.emplace_back(x, y);
                    break;
                }
            }
        }
    }
    BinaryMask out(g.height(), g.width());
    for (int y = 0; y < g.height(); ++y) {
        for (int x = 0; x < g.width(); ++x) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [ex, ey] : edge) best = std::min(best, std::hypot(x - ex, y - ey));
            out(x, y) = best <= w ? 1 : 0;
        }
    }
    return out;
}

BinaryMask noisy_copy(const BinaryMask& m, std::uint64_t seed, double flip) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(flip);
    BinaryMask out = m;
    for (auto& v : out.values()) {
        if (coin(rng)) v = v ? 0 : 1;
    }
    return out;
}

DatasetManifest annotated_set(const std::string& name) {
    SyntheticParams p;
    p.size = 48;
    p.n_train = 6;
    p.n_val = 2;
    p.n_test = 3;
    auto m = generate_synthetic(p, 3, testutil::temp_dir(name));
    return attach_annotations(m,
                              {AnnotationKind::Bpanno, AnnotationKind::Scribble, AnnotationKind::Box,
                               AnnotationKind::Rectangle},
                              {});
}

} // namespace

TEST_SUITE("evaluation") {

TEST_CASE("trivial metric cases") {
    const auto g = testutil::rect_mask(16, 16, 3, 3, 8, 8);
    const auto same = metrics(g, g);
    CHECK(same.dice == 1.0);
    CHECK(same.jaccard == 1.0);
    CHECK(same.accuracy == 1.0);
    CHECK(same.sensitivity == 1.0);
    const auto apart = metrics(testutil::rect_mask(16, 16, 10, 10, 12, 12), g);
    CHECK(apart.dice == 0.0);
    CHECK(apart.jaccard == 0.0);
    CHECK(apart.sensitivity == 0.0);
}

TEST_CASE("overlap of sixty and forty sharing thirty") {
    BinaryMask p(64, 64), g(64, 64);
    for (int i = 0; i < 60; ++i) p.values()[static_cast<std::size_t>(i)] = 1;
    for (int i = 30; i < 70; ++i) g.values()[static_cast<std::size_t>(i)] = 1;
    const auto c = pixel_counts(p, g);
    REQUIRE(c.tp == 30);
    const auto r = metrics(p, g);
    CHECK(r.dice == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.jaccard == doctest::Approx(30.0 / 70.0).epsilon(1e-12));
    CHECK(r.sensitivity == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(r.accuracy == doctest::Approx((c.tp + c.tn) / 4096.0).epsilon(1e-12));
    CHECK(r.accuracy == doctest::Approx(4056.0 / 4096.0).epsilon(1e-12));
}

TEST_CASE("empty set conventions") {
    BinaryMask empty(8, 8);
    const auto both = metrics(empty, empty);
    CHECK(both.dice == 1.0);
    CHECK(both.jaccard == 1.0);
    CHECK(both.sensitivity == 1.0);
    CHECK(both.sensitivity_defined);
    const auto spurious = metrics(testutil::rect_mask(8, 8, 1, 1, 2, 2), empty);
    CHECK(spurious.dice == 0.0);
    CHECK_FALSE(spurious.sensitivity_defined);
    const auto missed = metrics(empty, testutil::rect_mask(8, 8, 1, 1, 2, 2));
    CHECK(missed.sensitivity == 0.0);
    CHECK(missed.sensitivity_defined);

    auto good = metrics(testutil::rect_mask(8, 8, 1, 1, 2, 2), testutil::rect_mask(8, 8, 1, 1, 2, 3));
    const auto rep = summarize({good, spurious});
    CHECK(rep.n_images == 2);
    CHECK(rep.mean_sensitivity == doctest::Approx(good.sensitivity));
    CHECK(rep.mean_dice == doctest::Approx((good.dice + spurious.dice) / 2));
}

TEST_CASE("metric identities hold on random mask pairs") {
    for (int i = 0; i < 100; ++i) {
        const auto g = testutil::random_blob(static_cast<std::uint64_t>(i), 32);
        const auto p = noisy_copy(testutil::random_blob(static_cast<std::uint64_t>(i + 500), 32), i, 0.05);
        const auto r = metrics(p, g);
        const auto c = pixel_counts(p, g);
        CHECK(r.dice == doctest::Approx(2 * c.tp / (2 * c.tp + c.fp + c.fn)).epsilon(1e-12));
        CHECK(r.jaccard == doctest::Approx(c.tp / (c.tp + c.fp + c.fn)).epsilon(1e-12));
        CHECK(std::abs(r.jaccard - r.dice / (2 - r.dice)) <= 1e-9);
        CHECK(r.jaccard <= r.dice);
        for (double v : {r.dice, r.jaccard, r.accuracy, r.sensitivity}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("metrics reject misaligned masks") {
    try {
        metrics(BinaryMask(4, 4), BinaryMask(4, 5));
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("binarize thresholds at one half") {
    const std::vector<float> prob{0.49f, 0.5f, 0.51f, 0.0f};
    const auto m = binarize(prob, 2, 2);
    CHECK(m(0, 0) == 0);
    CHECK(m(1, 0) == 1);
    CHECK(m(0, 1) == 1);
    CHECK(m(1, 1) == 0);
}

TEST_CASE("hand built band on an eight by eight grid") {
    const auto g = testutil::rect_mask(8, 8, 2, 2, 4, 4);
    const auto w1 = boundary_band(g, 1);
    CHECK(w1 == brute_band(g, 1));
    CHECK(count_foreground(w1) == 21);
    CHECK(w1(3, 3) == 1);
    CHECK(w1(1, 1) == 0);
    CHECK(w1(5, 3) == 1);
    CHECK(count_foreground(boundary_band(g, 0)) == 8);
    for (int w : {2, 3, 5}) CHECK(boundary_band(g, w) == brute_band(g, w));
}

TEST_CASE("band agrees with exhaustive distances on random masks") {
    for (int i = 0; i < 20; ++i) {
        const auto g = testutil::random_blob(static_cast<std::uint64_t>(i + 40), 32);
        BinaryMask prev(32, 32);
        for (int w : kDefaultTrimapWidths) {
            const auto band = boundary_band(g, w);
            CHECK(band == brute_band(g, w));
            CHECK(is_subset(prev, band));
            prev = band;
        }
    }
}

TEST_CASE("trimap partition and deltas") {
    const auto g = testutil::random_blob(9, 32);
    const auto a = noisy_copy(g, 1, 0.02);
    const auto b = noisy_copy(g, 2, 0.08);
    const auto same = trimap_analysis(a, a, g);
    REQUIRE(same.rows.size() == kDefaultTrimapWidths.size());
    for (const auto& r : same.rows) {
        CHECK(r.delta_boundary_dice == 0.0);
        CHECK(r.delta_boundary_jaccard == 0.0);
        CHECK(r.delta_interior_dice == 0.0);
        CHECK(r.delta_interior_jaccard == 0.0);
    }

    const auto rep = trimap_analysis(a, b, g, {1, 3});
    for (const auto& r : rep.rows) {
        const auto band = boundary_band(g, r.width);
        BinaryMask inside_a(32, 32), inside_g(32, 32), outside_a(32, 32), outside_g(32, 32);
        for (int y = 0; y < 32; ++y) {
            for (int x = 0; x < 32; ++x) {
                const bool in = band(x, y);
                (in ? inside_a : outside_a)(x, y) = a(x, y);
                (in ? inside_g : outside_g)(x, y) = g(x, y);
            }
        }
        // Pixels outside a region are background in both restricted masks,
        // so they add nothing to Dice or Jaccard.
        CHECK(r.boundary_dice_a == doctest::Approx(metrics(inside_a, inside_g).dice));
        CHECK(r.boundary_jaccard_a == doctest::Approx(metrics(inside_a, inside_g).jaccard));
        CHECK(r.interior_dice_a == doctest::Approx(metrics(outside_a, outside_g).dice));
        CHECK(r.delta_boundary_jaccard == doctest::Approx(r.boundary_jaccard_a - r.boundary_jaccard_b));
        CHECK(r.delta_interior_dice == doctest::Approx(r.interior_dice_a - r.interior_dice_b));
    }
}

TEST_CASE("width beyond the diagonal leaves an empty interior") {
    const auto g = testutil::rect_mask(8, 8, 2, 2, 4, 4);
    const auto rep = trimap_analysis(g, testutil::rect_mask(8, 8, 2, 2, 5, 4), g, {12});
    REQUIRE(rep.rows.size() == 1);
    CHECK(count_foreground(boundary_band(g, 12)) == 64);
    CHECK(rep.rows[0].interior_dice_a == kEmptyRegion);
    CHECK(rep.rows[0].interior_jaccard_b == kEmptyRegion);
    CHECK(rep.rows[0].delta_interior_dice == 0.0);
    CHECK(rep.rows[0].boundary_dice_a == 1.0);
    CHECK(rep.rows[0].delta_boundary_dice > 0.0);
}

TEST_CASE("trimap rejects bad widths and shapes") {
    const auto g = testutil::rect_mask(8, 8, 2, 2, 4, 4);
    CHECK_THROWS_AS(trimap_analysis(g, g, g, {3, 2}), Error);
    CHECK_THROWS_AS(trimap_analysis(g, g, g, {0}), Error);
    try {
        trimap_analysis(g, BinaryMask(8, 9), g);
        FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShapeMismatch);
    }
}

TEST_CASE("set-level trimap averages per image") {
    std::vector<BinaryMask> gts, as, bs;
    for (int i = 0; i < 4; ++i) {
        gts.push_back(testutil::random_blob(static_cast<std::uint64_t>(i + 70), 32));
        as.push_back(noisy_copy(gts.back(), i, 0.03));
        bs.push_back(noisy_copy(gts.back(), i + 10, 0.06));
    }
    const auto rep = trimap_analysis(as, bs, gts, {2});
    CHECK(rep.n_images == 4);
    double sum = 0;
    for (int i = 0; i < 4; ++i) sum += trimap_analysis(as[i], bs[i], gts[i], {2}).rows[0].boundary_jaccard_a;
    CHECK(rep.rows[0].boundary_jaccard_a == doctest::Approx(sum / 4));
}

TEST_CASE("annotation cost proxies") {
    const auto m = annotated_set("eval_cost");
    const auto rows = annotation_cost_report(m);
    std::map<std::string, CostRow> by_kind;
    for (const auto& r : rows) by_kind[r.kind] = r;
    REQUIRE(by_kind.count("mask") == 1);
    REQUIRE(by_kind.count("bpanno") == 1);
    CHECK(by_kind["box"].mean_clicks == 2.0);
    CHECK(by_kind["rectangle"].mean_clicks == 2.0);
    CHECK(by_kind["mask"].ratio_vs_dense == 1.0);
    CHECK(by_kind["bpanno"].images == 6);
    CHECK(by_kind["bpanno"].mean_clicks <= 64.0);
    double dense = 0;
    for (const auto& rec : m.train) {
        dense += static_cast<double>(count_foreground(inner_boundary(read_mask(m.root / rec.mask))));
        const auto a = load_bpanno(m.root, rec.annotations.at("bpanno"));
        CHECK(a.inscribed.vertices.size() + a.envelope.vertices.size() <= 64);
    }
    CHECK(by_kind["mask"].mean_clicks == doctest::Approx(dense / 6));
    CHECK(by_kind["bpanno"].ratio_vs_dense == doctest::Approx(by_kind["bpanno"].mean_clicks / (dense / 6)));
    CHECK(by_kind["scribble"].mean_clicks >= 4.0);
}

TEST_CASE("ground truth scores perfectly through the split evaluator") {
    const auto m = annotated_set("eval_split");
    std::vector<BinaryMask> preds;
    for (const auto& rec : m.test) preds.push_back(read_mask(m.root / rec.mask));
    const auto rep = evaluate_predictions(preds, m, Split::Test, "oracle");
    CHECK(rep.n_images == 3);
    CHECK(rep.mean_dice == 1.0);
    CHECK(rep.rows[0].image_id == m.test[0].image_id);
    preds.pop_back();
    CHECK_THROWS_AS(evaluate_predictions(preds, m, Split::Test), Error);

    ModelConfig mc;
    mc.base_channels = 4;
    mc.depth = 2;
    Model model(mc);
    const auto out = predict_split(model, m, Split::Val, 1);
    CHECK(out.size() == 2);
    CHECK(out[0].height() == 48);
}

TEST_CASE("reports round trip and plots are written") {
    const auto dir = testutil::temp_dir("eval_reports");
    std::vector<MetricRow> rows;
    for (int i = 0; i < 3; ++i) {
        auto r = metrics(noisy_copy(testutil::random_blob(static_cast<std::uint64_t>(i), 32), i, 0.03),
                         testutil::random_blob(static_cast<std::uint64_t>(i), 32));
        r.image_id = "img" + std::to_string(i);
        rows.push_back(r);
    }
    const auto rep = summarize(rows, "unit test");
    write_metrics_csv(dir / "metrics.csv", rep);
    const auto back = read_metrics_csv(dir / "metrics.csv");
    REQUIRE(back.rows.size() == 3);
    CHECK(back.n_images == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.rows[i].image_id == rows[i].image_id);
        CHECK(back.rows[i].dice == doctest::Approx(rows[i].dice).epsilon(1e-12));
        CHECK(back.rows[i].sensitivity == doctest::Approx(rows[i].sensitivity).epsilon(1e-12));
    }
    CHECK(back.mean_jaccard == doctest::Approx(rep.mean_jaccard).epsilon(1e-12));

    const auto g = testutil::random_blob(5, 32);
    const auto tri = trimap_analysis(noisy_copy(g, 1, 0.02), noisy_copy(g, 2, 0.04), g);
    emit_trimap_report(dir, tri);
    CHECK(fs::exists(dir / "trimap_jaccard.svg"));
    const auto tri_back = read_trimap_csv(dir / "trimap.csv");
    REQUIRE(tri_back.rows.size() == tri.rows.size());
    for (std::size_t i = 0; i < tri.rows.size(); ++i) {
        CHECK(tri_back.rows[i].width == tri.rows[i].width);
        CHECK(tri_back.rows[i].delta_boundary_jaccard ==
              doctest::Approx(tri.rows[i].delta_boundary_jaccard).epsilon(1e-12));
        CHECK(tri_back.rows[i].interior_dice_b == doctest::Approx(tri.rows[i].interior_dice_b).epsilon(1e-12));
    }

    write_cost_csv(dir / "cost.csv", {{"mask", 2, 100, 1}, {"box", 2, 2, 0.02}});
    std::ifstream cost(dir / "cost.csv");
    std::string header, line;
    std::getline(cost, header);
    std::getline(cost, line);
    CHECK(line.rfind("mask,", 0) == 0);

    {
        std::ofstream log(dir / "loss_log.csv");
        write_loss_log_header(log);
        for (int s = 0; s < 4; ++s) {
            LossLogRow row;
            row.step = s;
            row.loss.l_c = 1.0 / (s + 1);
            row.loss.total = row.loss.l_c;
            write_loss_log_row(log, row);
        }
    }
    plot_loss_log(dir / "loss_log.csv", dir / "loss_curve.svg");
    std::ifstream svg(dir / "loss_curve.svg");
    std::stringstream ss;
    ss << svg.rdbuf();
    CHECK(ss.str().find("<svg") != std::string::npos);
    CHECK(ss.str().find("</svg>") != std::string::npos);
}

}
