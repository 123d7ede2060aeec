#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>

#include "eauwseg/annotation.hpp"
#include "eauwseg/losses.hpp"

namespace eauwseg {

using SignedMap = Grid<std::int8_t>;

inline const double kDefaultEntropyThreshold = 0.7 * std::log(2.0);

struct ConfidenceMaps {
    Grid<double> entropy;
    SignedMap u_entropy; // {-1, 0}
    SignedMap u_class;   // {-1, 0, 1}
    SignedMap fused;     // {-1, 0, 1}, zero off the band
    SignedMap pseudo_label;
};

/// Binary predictive entropy -sum_k P_k log(P_k + eps) with P = {p, 1-p}.
Grid<double> entropy_map(const ProbMap& p, double eps);

/// -1 where entropy >= mu, else 0. Computed over the whole image.
SignedMap entropy_uncertainty(const Grid<double>& entropy, double mu);

/// On band pixels: -1 when the band class wins the argmax, else 1 when the
/// inside class beats the outside class, else 0. Zero off the band.
SignedMap class_uncertainty(const ClassProbMap& q, const BinaryMask& uncertain);

/// Band labels read from the segmentation prediction (1 where p >= 0.5).
/// Stand-in for class_uncertainty when the 3-class head is disabled.
SignedMap prediction_uncertainty(const ProbMap& p, const BinaryMask& uncertain);

/// max(u_class + 2 u_entropy, -1) on the band, 0 elsewhere.
SignedMap fuse_confidence(const SignedMap& u_class, const SignedMap& u_entropy, const BinaryMask& uncertain);

/// y_certain * (1 - M_u) + U.
SignedMap pseudo_labels(const BinaryMask& certain_foreground, const SignedMap& fused, const BinaryMask& uncertain);

/// Full chain for one image. With `cls` null the band labels come from the
/// segmentation prediction instead of the 3-class head.
ConfidenceMaps compute_confidence(const ProbMap& p, const ClassProbMap* cls, const RegionPartition& partition,
                                  double mu, double eps);

struct SampleCaps {
    int anchors = 256;
    int positives = 256;
    int negatives = 512;
};

struct SelectionOptions {
    SampleCaps caps;
    bool hard_anchors = true;
};

struct SelectionStats {
    int band_anchors = 0;
    int hard_anchors = 0;
    bool empty_pool[2] = {false, false}; // class has no certain pixels
};

/// Anchors are confident band pixels plus misclassified certain pixels,
/// subsampled to the anchor cap. Pools hold certain pixels only.
ContrastiveSample select_samples(const ProbMap& p, const RegionPartition& partition, const SignedMap& pseudo_label,
                                 const SelectionOptions& options, std::uint64_t seed, SelectionStats* stats = nullptr);

/// Per-epoch share of band pixels labelled -1 / 0 / 1.
struct BandLabelTally {
    std::int64_t counts[3] = {0, 0, 0};

    void add(const SignedMap& fused, const BinaryMask& uncertain);
    double fraction(int label) const;
};

void write_band_tally_header(std::ostream& os);
void write_band_tally_row(std::ostream& os, int epoch, const BandLabelTally& tally);

} // namespace eauwseg
