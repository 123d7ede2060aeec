#include "eauwseg/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace eauwseg {

void validate(const ModelConfig& c) {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, "build_model", msg); };
    if (c.in_channels < 1) bad("in_channels must be >= 1");
    if (c.base_channels < 1) bad("base_channels must be >= 1");
    if (c.depth < 1 || c.depth > 6) bad("depth must be in [1, 6]");
    if (c.embed_dim < 1) bad("embed_dim must be >= 1");
}

template <typename T>
int UNet<T>::channels_at(int level) const {
    return level == 0 ? config_.base_channels : 2 * config_.base_channels;
}

template <typename T>
UNet<T>::UNet(const ModelConfig& config) : config_(config) {
    validate(config);
    const int d = config.depth;
    for (int l = 0; l <= d; ++l) {
        Level level;
        if (l > 0) level.pool = std::make_unique<nn::MaxPool2<T>>();
        const int in = l == 0 ? config.in_channels : channels_at(l - 1);
        const int ch = channels_at(l);
        const std::string name = "enc" + std::to_string(l);
        level.convs.emplace_back(in, ch, 3, name + ".conv0");
        level.convs.emplace_back(ch, ch, 3, name + ".conv1");
        level.relus.resize(2);
        encoder_.push_back(std::move(level));
    }
    decoder_.resize(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) {
        auto& up = decoder_[static_cast<std::size_t>(l)];
        up.skip_channels = channels_at(l);
        up.conv = std::make_unique<nn::Conv2d<T>>(channels_at(l + 1) + channels_at(l), channels_at(l), 3,
                                                  "dec" + std::to_string(l) + ".conv");
    }
    const int c = config.base_channels;
    refine_ = std::make_unique<nn::Conv2d<T>>(c, c, 3, "dec0.refine");
    seg_head_ = std::make_unique<nn::Conv2d<T>>(c, 2, 1, "head.seg");
    cls_head_ = std::make_unique<nn::Conv2d<T>>(c, 3, 1, "head.cls");
    embed_head_ = std::make_unique<nn::Conv2d<T>>(c, config.embed_dim, 1, "head.embed");

    std::mt19937_64 rng(config.seed);
    for (auto& level : encoder_) {
        for (auto& conv : level.convs) conv.init(rng);
    }
    for (auto& up : decoder_) up.conv->init(rng);
    refine_->init(rng);
    seg_head_->init(rng);
    cls_head_->init(rng);
    embed_head_->init(rng);
}

template <typename T>
Tensor<T> UNet<T>::trunk(const Tensor<T>& images) {
    const int d = config_.depth;
    if (images.c() != config_.in_channels) {
        throw Error(ErrorCode::ShapeMismatch, "forward", "expected " + std::to_string(config_.in_channels) + " channels");
    }
    const int div = 1 << d;
    if (images.n() < 1 || images.h() % div != 0 || images.w() % div != 0 || images.h() < div) {
        throw Error(ErrorCode::ShapeMismatch, "forward",
                    "spatial extent must be a positive multiple of " + std::to_string(div));
    }
    std::vector<Tensor<T>> skips;
    Tensor<T> x = images;
    for (int l = 0; l <= d; ++l) {
        auto& level = encoder_[static_cast<std::size_t>(l)];
        if (level.pool) x = level.pool->forward(x);
        for (std::size_t i = 0; i < level.convs.size(); ++i) {
            x = level.relus[i].forward(level.convs[i].forward(x));
        }
        if (l < d) skips.push_back(x);
    }
    for (int l = d - 1; l >= 0; --l) {
        auto& up = decoder_[static_cast<std::size_t>(l)];
        x = nn::concat_channels(nn::upsample2(x), skips[static_cast<std::size_t>(l)]);
        x = up.relu.forward(up.conv->forward(x));
    }
    return refine_relu_.forward(refine_->forward(x));
}

namespace {

template <typename T>
Tensor<T> seg_probability(const Tensor<T>& logits) {
    Tensor<T> p(logits.n(), 1, logits.h(), logits.w());
    for (int b = 0; b < logits.n(); ++b) {
        const auto z0 = logits.channel(b, 0);
        const auto z1 = logits.channel(b, 1);
        auto out = p.channel(b, 0);
        for (std::size_t i = 0; i < out.size(); ++i) {
            // two-way softmax, foreground channel
            out[i] = T(1) / (T(1) + std::exp(z0[i] - z1[i]));
        }
    }
    return p;
}

template <typename T>
Tensor<T> softmax_channels(Tensor<T> z) {
    const int k = z.c();
    for (int b = 0; b < z.n(); ++b) {
        for (std::size_t i = 0; i < z.plane(); ++i) {
            T m = z.channel(b, 0)[i];
            for (int c = 1; c < k; ++c) m = std::max(m, z.channel(b, c)[i]);
            T s = 0;
            for (int c = 0; c < k; ++c) {
                auto& v = z.channel(b, c)[i];
                v = std::exp(v - m);
                s += v;
            }
            for (int c = 0; c < k; ++c) z.channel(b, c)[i] /= s;
        }
    }
    return z;
}

template <typename T>
constexpr T kNormFloor = T(1e-12);

} // namespace

template <typename T>
ModelOutputs<T> UNet<T>::forward(const Tensor<T>& images, HeadSelection heads) {
    const Tensor<T> feat = trunk(images);
    last_heads_ = heads;
    ModelOutputs<T> out;
    out.seg_prob = seg_probability(seg_head_->forward(feat));
    seg_cache_ = out.seg_prob;
    if (heads.cls) {
        out.cls_prob = softmax_channels(cls_head_->forward(feat));
        cls_cache_ = out.cls_prob;
    }
    if (heads.embed) {
        Tensor<T> z = embed_head_->forward(feat);
        embed_norm_ = Tensor<T>(z.n(), 1, z.h(), z.w());
        for (int b = 0; b < z.n(); ++b) {
            auto norm = embed_norm_.channel(b, 0);
            for (int c = 0; c < z.c(); ++c) {
                const auto zc = z.channel(b, c);
                for (std::size_t i = 0; i < norm.size(); ++i) norm[i] += zc[i] * zc[i];
            }
            for (auto& v : norm) v = std::max(std::sqrt(v), kNormFloor<T>);
            for (int c = 0; c < z.c(); ++c) {
                auto zc = z.channel(b, c);
                for (std::size_t i = 0; i < norm.size(); ++i) zc[i] /= norm[i];
            }
        }
        out.embed = z;
        embed_cache_ = z;
    }
    return out;
}

template <typename T>
Tensor<T> UNet<T>::predict(const Tensor<T>& images) {
    return seg_probability(seg_head_->forward(trunk(images)));
}

template <typename T>
void UNet<T>::backward(const OutputGrads<T>& grads) {
    const auto& shape = seg_cache_.shape;
    Tensor<T> dfeat(shape[0], config_.base_channels, shape[2], shape[3]);

    if (!grads.seg_prob.data.empty()) {
        if (grads.seg_prob.shape != seg_cache_.shape) throw Error(ErrorCode::ShapeMismatch, "backward", "seg gradient");
        Tensor<T> dz(shape[0], 2, shape[2], shape[3]);
        for (int b = 0; b < shape[0]; ++b) {
            const auto p = seg_cache_.channel(b, 0);
            const auto g = grads.seg_prob.channel(b, 0);
            auto d0 = dz.channel(b, 0);
            auto d1 = dz.channel(b, 1);
            for (std::size_t i = 0; i < p.size(); ++i) {
                const T v = g[i] * p[i] * (T(1) - p[i]);
                d1[i] = v;
                d0[i] = -v;
            }
        }
        nn::add_inplace(dfeat, seg_head_->backward(dz));
    }
    if (!grads.cls_prob.data.empty()) {
        if (!last_heads_.cls || grads.cls_prob.shape != cls_cache_.shape) {
            throw Error(ErrorCode::ShapeMismatch, "backward", "class gradient without matching forward");
        }
        Tensor<T> dz(shape[0], 3, shape[2], shape[3]);
        for (int b = 0; b < shape[0]; ++b) {
            for (std::size_t i = 0; i < dz.plane(); ++i) {
                T dot = 0;
                for (int c = 0; c < 3; ++c) dot += cls_cache_.channel(b, c)[i] * grads.cls_prob.channel(b, c)[i];
                for (int c = 0; c < 3; ++c) {
                    dz.channel(b, c)[i] = cls_cache_.channel(b, c)[i] * (grads.cls_prob.channel(b, c)[i] - dot);
                }
            }
        }
        nn::add_inplace(dfeat, cls_head_->backward(dz));
    }
    if (!grads.embed.data.empty()) {
        if (!last_heads_.embed || grads.embed.shape != embed_cache_.shape) {
            throw Error(ErrorCode::ShapeMismatch, "backward", "embedding gradient without matching forward");
        }
        const int e = embed_cache_.c();
        Tensor<T> dz(shape[0], e, shape[2], shape[3]);
        for (int b = 0; b < shape[0]; ++b) {
            const auto norm = embed_norm_.channel(b, 0);
            for (std::size_t i = 0; i < dz.plane(); ++i) {
                T dot = 0;
                for (int c = 0; c < e; ++c) dot += embed_cache_.channel(b, c)[i] * grads.embed.channel(b, c)[i];
                for (int c = 0; c < e; ++c) {
                    dz.channel(b, c)[i] =
                        (grads.embed.channel(b, c)[i] - embed_cache_.channel(b, c)[i] * dot) / norm[i];
                }
            }
        }
        nn::add_inplace(dfeat, embed_head_->backward(dz));
    }

    const int d = config_.depth;
    Tensor<T> g = refine_->backward(refine_relu_.backward(std::move(dfeat)));
    std::vector<Tensor<T>> dskips(static_cast<std::size_t>(d));
    for (int l = 0; l < d; ++l) {
        auto& up = decoder_[static_cast<std::size_t>(l)];
        g = up.conv->backward(up.relu.backward(std::move(g)));
        Tensor<T> dup;
        nn::split_channels(g, channels_at(l + 1), dup, dskips[static_cast<std::size_t>(l)]);
        g = nn::upsample2_backward(dup);
    }
    for (int l = d; l >= 0; --l) {
        auto& level = encoder_[static_cast<std::size_t>(l)];
        if (l < d) nn::add_inplace(g, dskips[static_cast<std::size_t>(l)]);
        for (std::size_t i = level.convs.size(); i-- > 0;) {
            g = level.convs[i].backward(level.relus[i].backward(std::move(g)));
        }
        if (level.pool) g = level.pool->backward(g);
    }
}

template <typename T>
std::vector<nn::Param<T>*> UNet<T>::parameters() {
    std::vector<nn::Param<T>*> out;
    auto add = [&out](nn::Conv2d<T>& c) {
        out.push_back(&c.weight());
        out.push_back(&c.bias());
    };
    for (auto& level : encoder_) {
        for (auto& conv : level.convs) add(conv);
    }
    for (auto& up : decoder_) add(*up.conv);
    add(*refine_);
    add(*seg_head_);
    add(*cls_head_);
    add(*embed_head_);
    return out;
}

template <typename T>
std::size_t UNet<T>::parameter_count() const {
    std::size_t n = 0;
    for (auto* p : const_cast<UNet*>(this)->parameters()) n += p->value.size();
    return n;
}

template <typename T>
void UNet<T>::zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::uint64_t UNet<T>::checksum() const {
    std::uint64_t h = 1469598103934665603ull;
    for (auto* p : const_cast<UNet*>(this)->parameters()) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        for (std::size_t i = 0; i < p->value.size() * sizeof(T); ++i) {
            h ^= bytes[i];
            h *= 1099511628211ull;
        }
    }
    return h;
}

template class UNet<float>;
template class UNet<double>;

namespace {

constexpr char kMagic[8] = {'E', 'A', 'U', 'W', 'C', 'K', 'P', 'T'};

template <typename V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename V>
V get(std::istream& is) {
    V v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(V));
    if (!is) throw Error(ErrorCode::Io, "read_checkpoint", "truncated file");
    return v;
}

std::string get_string(std::istream& is) {
    const auto n = get<std::uint64_t>(is);
    if (n > (1ull << 32)) throw Error(ErrorCode::Io, "read_checkpoint", "corrupt string length");
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw Error(ErrorCode::Io, "read_checkpoint", "truncated file");
    return s;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, const std::string& run_config,
                     const std::string& rng_state) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "save_checkpoint", "cannot open " + path.string());
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, kCheckpointVersion);
    const auto& c = model.config();
    put<std::int32_t>(os, c.in_channels);
    put<std::int32_t>(os, c.base_channels);
    put<std::int32_t>(os, c.depth);
    put<std::int32_t>(os, c.embed_dim);
    put<std::uint64_t>(os, c.seed);
    put_string(os, run_config);
    put_string(os, rng_state);
    const auto params = model.parameters();
    put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (auto* p : params) {
        put_string(os, p->name);
        put<std::uint64_t>(os, p->value.size());
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(float)));
    }
    if (!os) throw Error(ErrorCode::Io, "save_checkpoint", "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::MissingFile, "read_checkpoint", path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::Io, "read_checkpoint", "not a checkpoint: " + path.string());
    }
    const auto version = get<std::uint32_t>(is);
    if (version != kCheckpointVersion) {
        throw Error(ErrorCode::Io, "read_checkpoint", "unsupported version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.model.in_channels = get<std::int32_t>(is);
    ck.model.base_channels = get<std::int32_t>(is);
    ck.model.depth = get<std::int32_t>(is);
    ck.model.embed_dim = get<std::int32_t>(is);
    ck.model.seed = get<std::uint64_t>(is);
    ck.run_config = get_string(is);
    ck.rng_state = get_string(is);
    const auto n = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto name = get_string(is);
        const auto count = get<std::uint64_t>(is);
        if (count > (1ull << 30)) throw Error(ErrorCode::Io, "read_checkpoint", "corrupt tensor size");
        std::vector<float> values(count);
        is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
        if (!is) throw Error(ErrorCode::Io, "read_checkpoint", "truncated tensor " + name);
        ck.params.emplace_back(std::move(name), std::move(values));
    }
    return ck;
}

Model load_model(const Checkpoint& ck) {
    Model model(ck.model);
    auto params = model.parameters();
    if (params.size() != ck.params.size()) {
        throw Error(ErrorCode::ShapeMismatch, "load_model", "parameter tensor count differs from the architecture");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i]->name != ck.params[i].first || params[i]->value.size() != ck.params[i].second.size()) {
            throw Error(ErrorCode::ShapeMismatch, "load_model", "unexpected tensor " + ck.params[i].first);
        }
        params[i]->value = ck.params[i].second;
    }
    return model;
}

} // namespace eauwseg
