#include "eauwseg/evaluation.hpp"

#include <cmath>
#include <limits>

#include "eauwseg/geometry.hpp"

namespace eauwseg {

MetricRow metrics(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_shape(pred, gt, "metrics");
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool p = pred[i] != 0, g = gt[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    const auto n = static_cast<double>(gt.size());
    const auto tn = n - static_cast<double>(tp + fp + fn);
    MetricRow r;
    const double sum = static_cast<double>(2 * tp + fp + fn);
    const double uni = static_cast<double>(tp + fp + fn);
    r.dice = sum == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / sum;
    r.jaccard = uni == 0 ? 1.0 : static_cast<double>(tp) / uni;
    r.accuracy = n == 0 ? 1.0 : (static_cast<double>(tp) + tn) / n;
    if (tp + fn == 0) {
        r.sensitivity = 1.0;
        r.sensitivity_defined = fp == 0;
    } else {
        r.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    return r;
}

MetricsReport summarize(std::vector<MetricRow> rows, std::string provenance) {
    MetricsReport rep;
    rep.rows = std::move(rows);
    rep.provenance = std::move(provenance);
    rep.n_images = static_cast<int>(rep.rows.size());
    int n_sens = 0;
    for (const auto& r : rep.rows) {
        rep.mean_dice += r.dice;
        rep.mean_jaccard += r.jaccard;
        rep.mean_accuracy += r.accuracy;
        if (r.sensitivity_defined) {
            rep.mean_sensitivity += r.sensitivity;
            ++n_sens;
        }
    }
    if (rep.n_images > 0) {
        rep.mean_dice /= rep.n_images;
        rep.mean_jaccard /= rep.n_images;
        rep.mean_accuracy /= rep.n_images;
    }
    rep.mean_sensitivity = n_sens > 0 ? rep.mean_sensitivity / n_sens : 0.0;
    return rep;
}

BinaryMask binarize(std::span<const float> prob, int height, int width) {
    BinaryMask m(height, width);
    if (prob.size() != m.size()) throw Error(ErrorCode::ShapeMismatch, "binarize", "probability map size");
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = prob[i] >= kPredictionThreshold ? 1 : 0;
    return m;
}

std::vector<BinaryMask> predict_split(Model& model, const DatasetManifest& manifest, Split split, int batch_size) {
    const int n = static_cast<int>(manifest.split(split).size());
    std::vector<BinaryMask> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int start = 0; start < n; start += batch_size) {
        std::vector<int> idx;
        for (int i = start; i < std::min(n, start + batch_size); ++i) idx.push_back(i);
        const Batch b = load_batch(manifest, split, idx, AnnotationKind::Mask);
        const Tensor<float> p = model.predict(b.images);
        for (int k = 0; k < p.n(); ++k) out.push_back(binarize(p.channel(k, 0), p.h(), p.w()));
    }
    return out;
}

MetricsReport evaluate_predictions(const std::vector<BinaryMask>& preds, const DatasetManifest& manifest, Split split,
                                   std::string provenance) {
    const auto& records = manifest.split(split);
    if (preds.size() != records.size()) {
        throw Error(ErrorCode::ShapeMismatch, "evaluate", "prediction count differs from split size");
    }
    std::vector<MetricRow> rows;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const BinaryMask gt = read_mask(manifest.root / records[i].mask);
        MetricRow r = metrics(preds[i], gt);
        r.image_id = records[i].image_id;
        rows.push_back(std::move(r));
    }
    return summarize(std::move(rows), std::move(provenance));
}

BinaryMask boundary_band(const BinaryMask& gt, int width) {
    if (width < 0) throw Error(ErrorCode::InvalidParams, "boundary_band", "width must be >= 0");
    const BinaryMask edge = inner_boundary(gt);
    std::vector<Point> pts;
    for (int y = 0; y < edge.height(); ++y) {
        for (int x = 0; x < edge.width(); ++x) {
            if (edge(x, y)) pts.push_back({x, y});
        }
    }
    BinaryMask band(gt.height(), gt.width());
    const long long w2 = static_cast<long long>(width) * width;
    for (int y = 0; y < gt.height(); ++y) {
        for (int x = 0; x < gt.width(); ++x) {
            for (const auto& p : pts) {
                const long long dx = x - p.x, dy = y - p.y;
                if (dx * dx + dy * dy <= w2) {
                    band(x, y) = 1;
                    break;
                }
            }
        }
    }
    return band;
}

namespace {

struct RegionScore {
    double dice = kEmptyRegion;
    double jaccard = kEmptyRegion;
};

RegionScore region_score(const BinaryMask& pred, const BinaryMask& gt, const BinaryMask& region, bool inside) {
    std::size_t tp = 0, fp = 0, fn = 0, n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if ((region[i] != 0) != inside) continue;
        ++n;
        const bool p = pred[i] != 0, g = gt[i] != 0;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
    }
    RegionScore s;
    if (n == 0) return s;
    const double sum = static_cast<double>(2 * tp + fp + fn);
    s.dice = sum == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / sum;
    s.jaccard = tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    return s;
}

void check_widths(const std::vector<int>& widths) {
    for (std::size_t i = 0; i < widths.size(); ++i) {
        if (widths[i] < 1 || (i > 0 && widths[i] <= widths[i - 1])) {
            throw Error(ErrorCode::InvalidParams, "trimap_analysis", "widths must be positive and ascending");
        }
    }
}

struct Accum {
    double sum = 0;
    int n = 0;
    void add(double v) {
        if (v == kEmptyRegion) return;
        sum += v;
        ++n;
    }
    double mean() const { return n == 0 ? kEmptyRegion : sum / n; }
};

double delta(double a, double b) { return a == kEmptyRegion || b == kEmptyRegion ? 0.0 : a - b; }

} // namespace

TrimapReport trimap_analysis(const std::vector<BinaryMask>& pred_a, const std::vector<BinaryMask>& pred_b,
                             const std::vector<BinaryMask>& gt, const std::vector<int>& widths) {
    check_widths(widths);
    if (pred_a.size() != gt.size() || pred_b.size() != gt.size()) {
        throw Error(ErrorCode::ShapeMismatch, "trimap_analysis", "prediction and ground-truth counts differ");
    }
    TrimapReport rep;
    rep.n_images = static_cast<int>(gt.size());
    for (int w : widths) {
        Accum bda, bja, bdb, bjb, ida, ija, idb, ijb;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            require_same_shape(pred_a[i], gt[i], "trimap_analysis");
            require_same_shape(pred_b[i], gt[i], "trimap_analysis");
            const BinaryMask band = boundary_band(gt[i], w);
            const auto ba = region_score(pred_a[i], gt[i], band, true);
            const auto bb = region_score(pred_b[i], gt[i], band, true);
            const auto ia = region_score(pred_a[i], gt[i], band, false);
            const auto ib = region_score(pred_b[i], gt[i], band, false);
            bda.add(ba.dice);
            bja.add(ba.jaccard);
            bdb.add(bb.dice);
            bjb.add(bb.jaccard);
            ida.add(ia.dice);
            ija.add(ia.jaccard);
            idb.add(ib.dice);
            ijb.add(ib.jaccard);
        }
        TrimapRow r;
        r.width = w;
        r.boundary_dice_a = bda.mean();
        r.boundary_jaccard_a = bja.mean();
        r.boundary_dice_b = bdb.mean();
        r.boundary_jaccard_b = bjb.mean();
        r.interior_dice_a = ida.mean();
        r.interior_jaccard_a = ija.mean();
        r.interior_dice_b = idb.mean();
        r.interior_jaccard_b = ijb.mean();
        r.delta_boundary_dice = delta(r.boundary_dice_a, r.boundary_dice_b);
        r.delta_boundary_jaccard = delta(r.boundary_jaccard_a, r.boundary_jaccard_b);
        r.delta_interior_dice = delta(r.interior_dice_a, r.interior_dice_b);
        r.delta_interior_jaccard = delta(r.interior_jaccard_a, r.interior_jaccard_b);
        rep.rows.push_back(r);
    }
    return rep;
}

TrimapReport trimap_analysis(const BinaryMask& pred_a, const BinaryMask& pred_b, const BinaryMask& gt,
                             const std::vector<int>& widths) {
    return trimap_analysis(std::vector<BinaryMask>{pred_a}, std::vector<BinaryMask>{pred_b},
                           std::vector<BinaryMask>{gt}, widths);
}

std::vector<CostRow> annotation_cost_report(const DatasetManifest& manifest) {
    std::map<std::string, std::pair<double, int>> clicks;
    double dense = 0;
    int n_dense = 0;
    for (const auto& rec : manifest.train) {
        const BinaryMask gt = read_mask(manifest.root / rec.mask);
        dense += static_cast<double>(count_foreground(inner_boundary(gt)));
        ++n_dense;
        for (const auto& [kind, file] : rec.annotations) {
            double c = 0;
            switch (parse_annotation_kind(kind)) {
            case AnnotationKind::Mask:
                continue;
            case AnnotationKind::Bpanno: {
                const auto a = load_bpanno(manifest.root, file);
                c = static_cast<double>(a.inscribed.vertices.size() + a.envelope.vertices.size());
                break;
            }
            case AnnotationKind::Scribble: {
                const auto s = load_scribble(manifest.root, file);
                c = 2.0 * static_cast<double>(s.foreground_lines.size() + s.background_lines.size());
                break;
            }
            case AnnotationKind::Box:
            case AnnotationKind::Rectangle:
                c = 2.0;
                break;
            }
            auto& slot = clicks[kind];
            slot.first += c;
            slot.second += 1;
        }
    }
    std::vector<CostRow> rows;
    const double dense_mean = n_dense > 0 ? dense / n_dense : 0.0;
    rows.push_back({"mask", n_dense, dense_mean, n_dense > 0 ? 1.0 : 0.0});
    for (const auto& [kind, v] : clicks) {
        CostRow r;
        r.kind = kind;
        r.images = v.second;
        r.mean_clicks = v.first / v.second;
        r.ratio_vs_dense = dense_mean > 0 ? r.mean_clicks / dense_mean : 0.0;
        rows.push_back(r);
    }
    return rows;
}

} // namespace eauwseg
