#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "eauwseg/dataset.hpp"
#include "eauwseg/model.hpp"

namespace eauwseg {

struct MetricRow {
    std::string image_id;
    double dice = 0;
    double jaccard = 0;
    double accuracy = 0;
    double sensitivity = 0;
    bool sensitivity_defined = true; // false when the ground truth is empty but the prediction is not
};

/// Empty prediction and empty ground truth score 1 everywhere.
MetricRow metrics(const BinaryMask& pred, const BinaryMask& gt);

struct MetricsReport {
    std::vector<MetricRow> rows;
    double mean_dice = 0;
    double mean_jaccard = 0;
    double mean_accuracy = 0;
    double mean_sensitivity = 0;
    int n_images = 0;
    std::string provenance; // free text, e.g. checkpoint and split
};

MetricsReport summarize(std::vector<MetricRow> rows, std::string provenance = {});

inline constexpr double kPredictionThreshold = 0.5;

BinaryMask binarize(std::span<const float> prob, int height, int width);

/// Runs the segmentation path over a whole split.
std::vector<BinaryMask> predict_split(Model& model, const DatasetManifest& manifest, Split split, int batch_size = 16);
MetricsReport evaluate_predictions(const std::vector<BinaryMask>& preds, const DatasetManifest& manifest, Split split,
                                   std::string provenance = {});

inline const std::vector<int> kDefaultTrimapWidths = {1, 2, 3, 5, 7, 9};
/// Metric value used when a trimap region holds no pixels.
inline constexpr double kEmptyRegion = -1.0;

/// Pixels whose centre lies within `width` (Euclidean) of a ground-truth
/// boundary pixel.
BinaryMask boundary_band(const BinaryMask& gt, int width);

struct TrimapRow {
    int width = 0;
    double boundary_dice_a = 0, boundary_jaccard_a = 0;
    double boundary_dice_b = 0, boundary_jaccard_b = 0;
    double interior_dice_a = 0, interior_jaccard_a = 0;
    double interior_dice_b = 0, interior_jaccard_b = 0;
    double delta_boundary_dice = 0, delta_boundary_jaccard = 0;
    double delta_interior_dice = 0, delta_interior_jaccard = 0;
};

struct TrimapReport {
    std::vector<TrimapRow> rows;
    int n_images = 0;
};

/// Single image. Deltas are a - b.
TrimapReport trimap_analysis(const BinaryMask& pred_a, const BinaryMask& pred_b, const BinaryMask& gt,
                             const std::vector<int>& widths = kDefaultTrimapWidths);
/// Image-averaged over a set; empty regions are left out of the averages.
TrimapReport trimap_analysis(const std::vector<BinaryMask>& pred_a, const std::vector<BinaryMask>& pred_b,
                             const std::vector<BinaryMask>& gt, const std::vector<int>& widths = kDefaultTrimapWidths);

struct CostRow {
    std::string kind;
    int images = 0;
    double mean_clicks = 0;
    double ratio_vs_dense = 0;
};

/// Click proxy per annotation kind over the train split. The dense mask
/// proxy counts ground-truth boundary pixels.
std::vector<CostRow> annotation_cost_report(const DatasetManifest& manifest);

// Reports and plots.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_metrics_csv(const std::filesystem::path& path);
void write_trimap_csv(const std::filesystem::path& path, const TrimapReport& report);
TrimapReport read_trimap_csv(const std::filesystem::path& path);
void write_cost_csv(const std::filesystem::path& path, const std::vector<CostRow>& rows);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal SVG line chart.
void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<Series>& series);

/// trimap.csv plus trimap_jaccard.svg in `out_dir`.
void emit_trimap_report(const std::filesystem::path& out_dir, const TrimapReport& report);
/// Plots l_c and total from a loss log CSV into loss_curve.svg next to it.
void plot_loss_log(const std::filesystem::path& loss_csv, const std::filesystem::path& svg);

} // namespace eauwseg
