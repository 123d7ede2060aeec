#include "eauwseg/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace eauwseg {

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Tensor<float> gather_images(const Tensor<float>& all, const std::vector<int>& idx) {
    Tensor<float> out(static_cast<int>(idx.size()), all.c(), all.h(), all.w());
    const std::size_t stride = static_cast<std::size_t>(all.c()) * all.plane();
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::copy_n(all.data.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(idx[k]) * stride), stride,
                    out.data.begin() + static_cast<std::ptrdiff_t>(k * stride));
    }
    return out;
}

ProbMap to_grid(std::span<const float> v, int h, int w) {
    ProbMap g(h, w);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = v[i];
    return g;
}

void check_finite(double v, const char* term, std::int64_t step) {
    if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteLoss, "train",
                    std::string(term) + " is not finite at step " + std::to_string(step));
    }
}

double validation_dice(Model& model, const Tensor<float>& images, const std::vector<BinaryMask>& masks) {
    if (masks.empty()) return 0.0;
    double sum = 0;
    const int n = images.n();
    for (int start = 0; start < n; start += 16) {
        std::vector<int> idx;
        for (int i = start; i < std::min(n, start + 16); ++i) idx.push_back(i);
        const Tensor<float> p = model.predict(gather_images(images, idx));
        for (int k = 0; k < p.n(); ++k) {
            sum += metrics(binarize(p.channel(k, 0), p.h(), p.w()), masks[static_cast<std::size_t>(start + k)]).dice;
        }
    }
    return sum / n;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "train", "cannot write " + path.string());
    os << text;
}

} // namespace

TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const fs::path& out_dir,
                  const EpochCallback& on_epoch) {
    validate(config);
    const AnnotationKind kind = required_annotation(config.mode);
    if (manifest.train.empty()) throw Error(ErrorCode::ConfigMismatch, "train", "train split is empty");
    if (kind != AnnotationKind::Mask) {
        for (const auto& rec : manifest.train) {
            if (!rec.annotations.count(to_string(kind))) {
                throw Error(ErrorCode::ConfigMismatch, "train",
                            to_string(config.mode) + " needs '" + to_string(kind) + "' annotations, missing for " +
                                rec.image_id);
            }
        }
    }
    fs::create_directories(out_dir);
    write_text(out_dir / "config.txt", to_text(config));

    const int n_train = static_cast<int>(manifest.train.size());
    std::vector<int> all(static_cast<std::size_t>(n_train));
    std::iota(all.begin(), all.end(), 0);
    const Batch data = load_batch(manifest, Split::Train, all, kind);
    std::vector<int> val_idx(manifest.val.size());
    std::iota(val_idx.begin(), val_idx.end(), 0);
    const Batch val = load_batch(manifest, Split::Val, val_idx, AnnotationKind::Mask);

    ModelConfig mc = config.model;
    mc.seed = mix(config.seed ^ 0x6d6f64656cULL);
    Model model(mc);
    nn::Adam<float>::Options opt;
    opt.lr = config.learning_rate;
    nn::Adam<float> adam(model.parameters(), opt);

    const int h = manifest.height, w = manifest.width;
    const int warmup = config.resolved_warmup();
    const auto& lw = config.weights;
    const bool eauwseg = config.mode == SupervisionMode::Eauwseg;
    SelectionOptions sel;
    sel.caps = config.caps;
    sel.hard_anchors = config.hard_anchors;

    std::ofstream log_os(out_dir / "loss_log.csv");
    if (!log_os) throw Error(ErrorCode::Io, "train", "cannot write loss log");
    write_loss_log_header(log_os);
    std::ofstream epoch_os(out_dir / "epochs.csv");
    epoch_os << "epoch,mean_total,val_dice\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    std::ofstream band_os;
    if (eauwseg) {
        band_os.open(out_dir / "band_labels.csv");
        write_band_tally_header(band_os);
    }

    TrainResult result;
    result.checkpoint = out_dir / "checkpoint.bin";
    std::mt19937_64 shuffle_rng(mix(config.seed ^ 0x73687566ULL));
    std::int64_t step = 0;
    std::vector<int> order = all;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const bool aux = eauwseg && epoch >= warmup;
        HeadSelection heads{aux && config.use_ccg, aux && lw.lambda1 > 0};
        EpochSummary summary;
        summary.epoch = epoch;
        double total_sum = 0;
        int steps_in_epoch = 0;

        for (int start = 0; start < n_train; start += config.batch_size) {
            const std::vector<int> idx(order.begin() + start, order.begin() + std::min(n_train, start + config.batch_size));
            const int bsz = static_cast<int>(idx.size());
            const Tensor<float> x = gather_images(data.images, idx);
            const ModelOutputs<float> out = model.forward(x, heads);

            OutputGrads<float> grads;
            grads.seg_prob = Tensor<float>(bsz, 1, h, w);
            if (heads.cls) grads.cls_prob = Tensor<float>(bsz, 3, h, w);
            std::vector<Tensor<double>> embed_grads;
            const double inv_b = 1.0 / bsz;
            CertainLoss certain;
            double l_ce = 0, l_pcl = 0;
            int pcl_images = 0, used = 0, skipped = 0;

            for (int b = 0; b < bsz; ++b) {
                const auto di = static_cast<std::size_t>(idx[static_cast<std::size_t>(b)]);
                const ProbMap p = to_grid(out.seg_prob.channel(b, 0), h, w);
                ProbMap dp(h, w);
                switch (config.mode) {
                case SupervisionMode::FullMask:
                case SupervisionMode::Box:
                case SupervisionMode::Rectangle:
                    certain.l_c += dice_loss(p, data.masks[di], &dp, inv_b) * inv_b;
                    break;
                case SupervisionMode::ScribblePce:
                    certain.l_c += partial_ce(p, data.scribble[di], lw.eps, kIgnoreLabel, &dp, inv_b) * inv_b;
                    break;
                case SupervisionMode::BpannoBaseline:
                case SupervisionMode::Eauwseg: {
                    const auto c = certain_loss(p, data.inscribed[di], data.envelope[di], &dp, inv_b);
                    certain.l_in += c.l_in * inv_b;
                    certain.l_en += c.l_en * inv_b;
                    certain.l_c += c.l_c * inv_b;
                    if (!aux) break;
                    const auto& part = data.partitions[di];
                    ClassProbMap q;
                    if (heads.cls) {
                        ClassProbMap dq;
                        for (int k = 0; k < 3; ++k) {
                            q[static_cast<std::size_t>(k)] = to_grid(out.cls_prob.channel(b, k), h, w);
                            dq[static_cast<std::size_t>(k)] = Grid<double>(h, w);
                        }
                        l_ce += classification_loss(q, part.class_label, lw.eps, &dq, lw.lambda2 * inv_b) * inv_b;
                        for (int k = 0; k < 3; ++k) {
                            auto dst = grads.cls_prob.channel(b, k);
                            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(dq[static_cast<std::size_t>(k)][i]);
                        }
                    }
                    const ConfidenceMaps maps = compute_confidence(p, heads.cls ? &q : nullptr, part, config.mu, lw.eps);
                    summary.band.add(maps.fused, part.uncertain);
                    if (heads.embed) {
                        const auto sample = select_samples(p, part, maps.pseudo_label, sel,
                                                           mix(config.seed ^ mix(static_cast<std::uint64_t>(step) * 131 + static_cast<std::uint64_t>(b))));
                        const int e = out.embed.c();
                        Tensor<double> f(1, e, h, w);
                        for (int k = 0; k < e; ++k) {
                            const auto src = out.embed.channel(b, k);
                            std::copy(src.begin(), src.end(), f.channel(0, k).begin());
                        }
                        Tensor<double> df(1, e, h, w);
                        const auto r = pixel_contrastive_loss(f, sample, lw.tau, &df, 1.0);
                        used += r.anchors_used;
                        skipped += r.anchors_skipped;
                        if (!r.degenerate) {
                            l_pcl += r.loss;
                            ++pcl_images;
                        } else {
                            df.zero();
                        }
                        embed_grads.push_back(std::move(df));
                    }
                    break;
                }
                }
                auto dst = grads.seg_prob.channel(b, 0);
                for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(dp[i]);
            }

            if (heads.embed) {
                grads.embed = Tensor<float>(bsz, out.embed.c(), h, w);
                if (pcl_images > 0) {
                    l_pcl /= pcl_images;
                    const double scale = lw.lambda1 / pcl_images;
                    for (int b = 0; b < bsz; ++b) {
                        for (int k = 0; k < out.embed.c(); ++k) {
                            const auto src = embed_grads[static_cast<std::size_t>(b)].channel(0, k);
                            auto dst = grads.embed.channel(b, k);
                            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(scale * src[i]);
                        }
                    }
                }
            }

            check_finite(certain.l_in, "l_in", step);
            check_finite(certain.l_en, "l_en", step);
            check_finite(certain.l_c, "l_c", step);
            check_finite(l_ce, "l_ce", step);
            check_finite(l_pcl, "l_pcl", step);
            const LossBundle bundle = total_loss(certain, l_ce, l_pcl, lw, eauwseg ? epoch : -1, eauwseg ? warmup : 0);
            check_finite(bundle.total, "total", step);

            model.zero_grad();
            model.backward(grads);
            adam.step();

            LossLogRow row{step, epoch, bundle, used, skipped};
            write_loss_log_row(log_os, row);
            result.log.push_back(row);
            total_sum += bundle.total;
            ++steps_in_epoch;
            ++step;
        }

        summary.mean_total = total_sum / std::max(1, steps_in_epoch);
        summary.val_dice = validation_dice(model, val.images, val.masks);
        epoch_os << epoch << ',' << summary.mean_total << ',' << summary.val_dice << '\n';
        if (eauwseg) write_band_tally_row(band_os, epoch, summary.band);
        if (summary.val_dice > result.best_val_dice) {
            result.best_val_dice = summary.val_dice;
            result.best_epoch = epoch;
            std::ostringstream rng_state;
            rng_state << shuffle_rng;
            save_checkpoint(result.checkpoint, model, to_text(config), rng_state.str());
        }
        result.epochs.push_back(summary);
        if (on_epoch) on_epoch(summary, model);
    }
    log_os.flush();
    if (!log_os) throw Error(ErrorCode::Io, "train", "loss log write failed");
    return result;
}

std::vector<AblationVariant> ablation_variants(const TrainConfig& base, bool with_full_mask) {
    std::vector<AblationVariant> v;
    TrainConfig c = base;
    c.mode = SupervisionMode::BpannoBaseline;
    v.push_back({"baseline", c});
    c = base;
    c.mode = SupervisionMode::Eauwseg;
    c.use_ccg = false;
    c.weights.lambda2 = 0;
    v.push_back({"+CCL", c});
    c = base;
    c.mode = SupervisionMode::Eauwseg;
    c.use_ccg = true;
    v.push_back({"+CCL+CCG", c});
    if (with_full_mask) {
        c = base;
        c.mode = SupervisionMode::FullMask;
        v.push_back({"full_mask", c});
    }
    return v;
}

MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const DatasetManifest& manifest, Split split) {
    const Checkpoint ck = read_checkpoint(checkpoint);
    Model model = load_model(ck);
    const auto preds = predict_split(model, manifest, split);
    return evaluate_predictions(preds, manifest, split, checkpoint.string() + " on " + to_string(split));
}

std::vector<AblationSummary> summarize_ablation(const std::vector<AblationRow>& rows) {
    std::vector<AblationSummary> out;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.variant == r.variant; });
        if (it == out.end()) {
            out.push_back({r.variant});
            it = out.end() - 1;
        }
        ++it->runs;
        it->mean_dice += r.test.mean_dice;
        it->mean_jaccard += r.test.mean_jaccard;
    }
    for (auto& s : out) {
        s.mean_dice /= s.runs;
        s.mean_jaccard /= s.runs;
        for (const auto& r : rows) {
            if (r.variant != s.variant) continue;
            s.std_dice += (r.test.mean_dice - s.mean_dice) * (r.test.mean_dice - s.mean_dice);
            s.std_jaccard += (r.test.mean_jaccard - s.mean_jaccard) * (r.test.mean_jaccard - s.mean_jaccard);
        }
        s.std_dice = s.runs > 1 ? std::sqrt(s.std_dice / (s.runs - 1)) : 0.0;
        s.std_jaccard = s.runs > 1 ? std::sqrt(s.std_jaccard / (s.runs - 1)) : 0.0;
    }
    return out;
}

std::vector<AblationRow> ablation_suite(const DatasetManifest& manifest, const TrainConfig& base,
                                        const std::vector<std::uint64_t>& seeds, const fs::path& out_dir,
                                        bool with_full_mask, const std::function<void(const AblationRow&)>& on_run) {
    if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "ablation_suite", "no seeds given");
    std::vector<AblationRow> rows;
    const auto variants = ablation_variants(base, with_full_mask);
    for (const auto& v : variants) {
        for (auto seed : seeds) {
            TrainConfig c = v.config;
            c.seed = seed;
            std::string dir = v.name;
            for (auto& ch : dir) {
                if (ch == '+') ch = '_';
            }
            AblationRow row;
            row.variant = v.name;
            row.seed = seed;
            row.run_dir = out_dir / (dir + "_seed" + std::to_string(seed));
            const auto res = train(manifest, c, row.run_dir);
            row.best_val_dice = res.best_val_dice;
            row.test = evaluate_checkpoint(res.checkpoint, manifest, Split::Test);
            write_metrics_csv(row.run_dir / "metrics.csv", row.test);
            rows.push_back(row);
            if (on_run) on_run(row);
        }
    }
    std::ofstream os(out_dir / "ablation.csv");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "variant,seed,best_val_dice,test_dice,test_jaccard,test_accuracy,test_sensitivity\n";
    for (const auto& r : rows) {
        os << r.variant << ',' << r.seed << ',' << r.best_val_dice << ',' << r.test.mean_dice << ','
           << r.test.mean_jaccard << ',' << r.test.mean_accuracy << ',' << r.test.mean_sensitivity << '\n';
    }
    std::ofstream ss(out_dir / "ablation_summary.csv");
    ss << std::setprecision(std::numeric_limits<double>::max_digits10);
    ss << "variant,runs,mean_dice,std_dice,mean_jaccard,std_jaccard\n";
    for (const auto& s : summarize_ablation(rows)) {
        ss << s.variant << ',' << s.runs << ',' << s.mean_dice << ',' << s.std_dice << ',' << s.mean_jaccard << ','
           << s.std_jaccard << '\n';
    }
    if (!os || !ss) throw Error(ErrorCode::Io, "ablation_suite", "cannot write summary tables");
    return rows;
}

} // namespace eauwseg
