#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "eauwseg/confidence.hpp"
#include "eauwseg/dataset.hpp"
#include "eauwseg/losses.hpp"
#include "eauwseg/model.hpp"

namespace eauwseg {

enum class SupervisionMode { FullMask, BpannoBaseline, Eauwseg, ScribblePce, Box, Rectangle };

std::string to_string(SupervisionMode mode);
SupervisionMode parse_supervision_mode(const std::string& name);
/// Annotation kind a mode trains from.
AnnotationKind required_annotation(SupervisionMode mode);

struct TrainConfig {
    SupervisionMode mode = SupervisionMode::Eauwseg;
    int epochs = 40;
    int warmup_epochs = -1; // negative: 20% of epochs
    int batch_size = 16;
    double learning_rate = 1e-4;
    LossWeights weights;
    double mu = kDefaultEntropyThreshold;
    SampleCaps caps;
    bool hard_anchors = true;
    bool use_ccg = true; // false: band labels from the seg prediction and no 3-class loss
    ModelConfig model;
    std::uint64_t seed = 0;

    /// Warmup length after applying the default rule.
    int resolved_warmup() const;
};

/// Throws InvalidConfig on violated invariants.
void validate(const TrainConfig& config);

/// Applies "key=value" to the config; unknown keys and bad values throw
/// InvalidConfig.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);
void apply_override(TrainConfig& config, const std::string& assignment);

/// Flat text: one key=value per line, '#' starts a comment.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

/// Every key with its resolved value; parse_config(to_text(c)) == c.
std::string to_text(const TrainConfig& config);

std::vector<std::string> config_keys();

} // namespace eauwseg
