#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "eauwseg/config.hpp"
#include "eauwseg/evaluation.hpp"

namespace eauwseg {

struct EpochSummary {
    int epoch = 0;
    double mean_total = 0;
    double val_dice = 0;
    BandLabelTally band; // eauwseg mode only
};

struct TrainResult {
    double best_val_dice = -1;
    int best_epoch = -1;
    std::filesystem::path checkpoint;
    std::vector<LossLogRow> log;
    std::vector<EpochSummary> epochs;
};

/// Called after every epoch with the live model.
using EpochCallback = std::function<void(const EpochSummary&, Model&)>;

/// Trains from scratch and writes config.txt, loss_log.csv, epochs.csv,
/// band_labels.csv (eauwseg) and checkpoint.bin (best validation Dice)
/// into `out_dir`.
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const EpochCallback& on_epoch = {});

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    double best_val_dice = 0;
    MetricsReport test;
    std::filesystem::path run_dir;
};

struct AblationVariant {
    std::string name;
    TrainConfig config;
};

/// baseline (certain loss only), +CCL (contrastive learner, no 3-class
/// head), +CCL+CCG (full objective), optionally followed by the full-mask
/// reference. Base config supplies the shared hyper-parameters.
std::vector<AblationVariant> ablation_variants(const TrainConfig& base, bool with_full_mask);

/// Trains every variant for every seed and evaluates the best checkpoint on
/// the test split. Writes ablation.csv and ablation_summary.csv.
std::vector<AblationRow> ablation_suite(const DatasetManifest& manifest, const TrainConfig& base,
                                        const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir,
                                        bool with_full_mask = false,
                                        const std::function<void(const AblationRow&)>& on_run = {});

struct AblationSummary {
    std::string variant;
    int runs = 0;
    double mean_dice = 0, std_dice = 0;
    double mean_jaccard = 0, std_jaccard = 0;
};

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows);

/// Builds a model from a checkpoint file and scores it on a split.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const DatasetManifest& manifest,
                                  Split split);

} // namespace eauwseg
