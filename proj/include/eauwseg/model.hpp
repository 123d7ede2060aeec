#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eauwseg/nn.hpp"
#include "eauwseg/tensor.hpp"

namespace eauwseg {

struct ModelConfig {
    int in_channels = 3;
    int base_channels = 16;
    int depth = 3;
    int embed_dim = 32;
    std::uint64_t seed = 0;
};

void validate(const ModelConfig& config);

/// seg_prob is (B,1,H,W), cls_prob (B,3,H,W), embed (B,E,H,W) with unit
/// length per pixel. Heads that were not requested stay empty.
template <typename T>
struct ModelOutputs {
    Tensor<T> seg_prob;
    Tensor<T> cls_prob;
    Tensor<T> embed;
};

/// Gradients of a scalar loss with respect to each output. Empty tensors
/// mean "no contribution".
template <typename T>
using OutputGrads = ModelOutputs<T>;

struct HeadSelection {
    bool cls = true;
    bool embed = true;
};

/// U-shaped encoder-decoder with segmentation, 3-class and embedding heads
/// on a shared decoder feature.
template <typename T>
class UNet {
public:
    explicit UNet(const ModelConfig& config);

    const ModelConfig& config() const { return config_; }

    ModelOutputs<T> forward(const Tensor<T>& images, HeadSelection heads = {});
    /// Segmentation probability only; the auxiliary heads are never run.
    Tensor<T> predict(const Tensor<T>& images);
    /// Must follow a forward() call with the same head selection.
    void backward(const OutputGrads<T>& grads);

    std::vector<nn::Param<T>*> parameters();
    std::size_t parameter_count() const;
    void zero_grad();
    /// FNV-1a over the raw parameter bytes.
    std::uint64_t checksum() const;

private:
    struct Level {
        std::unique_ptr<nn::MaxPool2<T>> pool;
        std::vector<nn::Conv2d<T>> convs;
        std::vector<nn::Relu<T>> relus;
    };
    struct Up {
        int skip_channels = 0;
        std::unique_ptr<nn::Conv2d<T>> conv;
        nn::Relu<T> relu;
    };

    Tensor<T> trunk(const Tensor<T>& images);
    int channels_at(int level) const;

    ModelConfig config_;
    std::vector<Level> encoder_;
    std::vector<Up> decoder_; // decoder_[l] produces the level-l feature
    std::unique_ptr<nn::Conv2d<T>> refine_;
    nn::Relu<T> refine_relu_;
    std::unique_ptr<nn::Conv2d<T>> seg_head_, cls_head_, embed_head_;

    HeadSelection last_heads_;
    Tensor<T> seg_cache_, cls_cache_, embed_cache_, embed_norm_;
};

using Model = UNet<float>;

/// Binary checkpoint: magic, format version, model config, free-form run
/// config text, RNG state text, then every named parameter tensor.
struct Checkpoint {
    ModelConfig model;
    std::string run_config;
    std::string rng_state;
    std::vector<std::pair<std::string, std::vector<float>>> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, Model& model, const std::string& run_config,
                     const std::string& rng_state);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Builds a model from the checkpoint config and loads its parameters.
Model load_model(const Checkpoint& checkpoint);

} // namespace eauwseg
