#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

#include "eauwseg/grid.hpp"
#include "eauwseg/tensor.hpp"

namespace eauwseg {

using ProbMap = Grid<double>;
using ClassProbMap = std::array<Grid<double>, 3>;

/// Gradient outputs are optional. When given they must already have the
/// input's shape; `weight * d(loss)/d(input)` is added to them.

inline constexpr double kDiceSmooth = 1e-6;

/// 1 - (2 sum(p y) + s) / (sum(p^2) + sum(y^2) + s) for one image.
double dice_loss(const ProbMap& p, const BinaryMask& y, ProbMap* grad = nullptr, double weight = 1.0);

struct CertainLoss {
    double l_c = 0;
    double l_in = 0;
    double l_en = 0;
};

/// Dice against the inscribed mask plus dice against the envelope mask.
CertainLoss certain_loss(const ProbMap& p, const BinaryMask& inscribed, const BinaryMask& envelope,
                         ProbMap* grad = nullptr, double weight = 1.0);

/// Binary cross-entropy averaged over labelled pixels; labels equal to
/// `ignore` are skipped. Returns 0 when nothing is labelled.
double partial_ce(const ProbMap& p, const Grid<std::uint8_t>& labels, double eps, std::uint8_t ignore = 255,
                  ProbMap* grad = nullptr, double weight = 1.0);

/// Mean over all pixels of -log(q[label] + eps).
double classification_loss(const ClassProbMap& q, const Grid<std::uint8_t>& labels, double eps,
                           ClassProbMap* grad = nullptr, double weight = 1.0);

/// Pixel indices are row-major offsets into one image. Pools are indexed by
/// anchor label: an anchor of class c is pulled towards positives[c] and
/// pushed from negatives[c].
struct ContrastiveSample {
    std::vector<int> anchors;
    std::vector<std::uint8_t> anchor_labels;
    std::array<std::vector<int>, 2> positives;
    std::array<std::vector<int>, 2> negatives;
};

struct ContrastiveResult {
    double loss = 0;
    int anchors_used = 0;
    int anchors_skipped = 0;
    bool degenerate = false; // no anchor survived
};

/// Contrastive loss on unit embeddings stored as a (1,E,H,W) tensor.
/// An anchor never counts as its own positive; anchors left without a
/// positive or a negative are skipped. The loss is the mean over used
/// anchors, or 0 when none remain.
ContrastiveResult pixel_contrastive_loss(const Tensor<double>& embed, const ContrastiveSample& sample, double tau,
                                         Tensor<double>* grad = nullptr, double weight = 1.0);

struct LossWeights {
    double lambda1 = 0.3;
    double lambda2 = 0.5;
    double tau = 0.1;
    double eps = 1e-6;
};

void validate(const LossWeights& w);

struct LossBundle {
    double l_c = 0;
    double l_in = 0;
    double l_en = 0;
    double l_ce = 0;
    double l_pcl = 0;
    double total = 0;
    bool auxiliary_active = false;
};

/// Applies the warmup gate: before `warmup_epochs` the auxiliary terms are
/// zeroed and total = l_c.
LossBundle total_loss(const CertainLoss& certain, double l_ce, double l_pcl, const LossWeights& weights, int epoch,
                      int warmup_epochs);

struct LossLogRow {
    std::int64_t step = 0;
    int epoch = 0;
    LossBundle loss;
    int anchors_used = 0;
    int anchors_skipped = 0;
};

void write_loss_log_header(std::ostream& os);
void write_loss_log_row(std::ostream& os, const LossLogRow& row);

} // namespace eauwseg
