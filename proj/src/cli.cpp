#include "eauwseg/cli.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "eauwseg/trainer.hpp"

namespace fs = std::filesystem;

namespace eauwseg {

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw UsageError("--out " + dir.string() + " is not a directory");
        if (!fs::is_empty(dir) && !force) {
            throw UsageError("output directory " + dir.string() + " is not empty (use --force)");
        }
    }
    fs::create_directories(dir);
}

/// Records the resolved invocation next to the run's outputs.
void write_snapshot(const fs::path& path, const std::string& subcommand,
                    const std::vector<std::pair<std::string, std::string>>& values) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::Io, "cli", "cannot write " + path.string());
    os << "subcommand=" << subcommand << '\n';
    for (const auto& [k, v] : values) os << k << '=' << v << '\n';
}

std::string join(const std::vector<std::string>& v, char sep = ',') {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + v[i];
    return s;
}

template <typename T>
std::string str(const T& v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Weakly-supervised lesion segmentation from bounded polygon annotations"};
    app.require_subcommand(1);
    bool force = false;

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic lesion dataset");
    SyntheticParams sp;
    std::uint64_t data_seed = 0;
    std::string data_out;
    gen->add_option("--n", sp.n_train, "Training images")->capture_default_str();
    gen->add_option("--n-val", sp.n_val, "Validation images")->capture_default_str();
    gen->add_option("--n-test", sp.n_test, "Test images")->capture_default_str();
    gen->add_option("--size", sp.size, "Image side length in pixels")->capture_default_str();
    gen->add_option("--seed", data_seed, "Generator seed")->capture_default_str();
    gen->add_option("--amplitude", sp.max_amplitude, "Largest radial perturbation amplitude")->capture_default_str();
    gen->add_option("--noise", sp.noise_sigma, "Additive noise standard deviation")->capture_default_str();
    gen->add_option("--out", data_out, "Output directory")->required();
    gen->add_flag("--force", force, "Allow a non-empty output directory");

    // gen-anno
    auto* anno = app.add_subcommand("gen-anno", "Attach weak annotations to the training split");
    std::string anno_manifest;
    std::vector<std::string> kinds{"bpanno"};
    AnnotationParams ap;
    anno->add_option("--manifest", anno_manifest, "Dataset directory or manifest.json")->required();
    anno->add_option("--kinds", kinds, "Annotation kinds: mask,bpanno,scribble,box,rectangle")
        ->delimiter(',')
        ->capture_default_str();
    anno->add_option("--radius", ap.bpanno.radius, "Dilation/erosion disk radius")->capture_default_str();
    anno->add_option("--epsilon", ap.bpanno.epsilon, "Polygon simplification tolerance")->capture_default_str();
    anno->add_option("--vertex-cap", ap.bpanno.vertex_cap, "Maximum vertices per polygon")->capture_default_str();
    anno->add_option("--scribble-lines", ap.scribble.n_lines, "Scribble lines per class")->capture_default_str();
    anno->add_option("--scribble-thickness", ap.scribble.thickness, "Scribble brush width")->capture_default_str();

    // train
    auto* tr = app.add_subcommand("train", "Train one model");
    std::string config_path, train_manifest, train_out;
    std::vector<std::string> overrides;
    tr->add_option("--config", config_path, "Flat key=value config file");
    tr->add_option("--manifest", train_manifest, "Dataset directory or manifest.json")->required();
    tr->add_option("--out", train_out, "Run directory")->required();
    tr->add_option("--set", overrides, "Config override key=value (repeatable)");
    tr->add_flag("--force", force, "Allow a non-empty output directory");

    // eval
    auto* ev = app.add_subcommand("eval", "Score a checkpoint against ground truth");
    std::string ev_ckpt, ev_manifest, ev_split = "test", ev_out;
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required();
    ev->add_option("--manifest", ev_manifest, "Dataset directory or manifest.json")->required();
    ev->add_option("--split", ev_split, "train, val or test")->capture_default_str();
    ev->add_option("--out", ev_out, "Output directory")->required();
    ev->add_flag("--force", force, "Allow a non-empty output directory");

    // trimap
    auto* tm = app.add_subcommand("trimap", "Boundary/interior comparison of two checkpoints");
    std::string ck_a, ck_b, tm_manifest, tm_split = "test", tm_out;
    std::vector<int> widths = kDefaultTrimapWidths;
    tm->add_option("--checkpoint-a", ck_a, "Checkpoint A")->required();
    tm->add_option("--checkpoint-b", ck_b, "Checkpoint B")->required();
    tm->add_option("--manifest", tm_manifest, "Dataset directory or manifest.json")->required();
    tm->add_option("--split", tm_split, "train, val or test")->capture_default_str();
    tm->add_option("--widths", widths, "Band widths in pixels")->delimiter(',')->capture_default_str();
    tm->add_option("--out", tm_out, "Output directory")->required();
    tm->add_flag("--force", force, "Allow a non-empty output directory");

    // cost-report
    auto* cr = app.add_subcommand("cost-report", "Annotation click-cost proxy per kind");
    std::string cr_manifest, cr_out;
    cr->add_option("--manifest", cr_manifest, "Dataset directory or manifest.json")->required();
    cr->add_option("--out", cr_out, "Output directory")->required();
    cr->add_flag("--force", force, "Allow a non-empty output directory");

    // ablation
    auto* ab = app.add_subcommand("ablation", "baseline / +CCL / +CCL+CCG over several seeds");
    std::string ab_config, ab_manifest, ab_out;
    std::vector<std::string> ab_overrides;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    bool with_full = false;
    ab->add_option("--config", ab_config, "Base config file");
    ab->add_option("--manifest", ab_manifest, "Dataset directory or manifest.json")->required();
    ab->add_option("--seeds", seeds, "Seeds")->delimiter(',')->capture_default_str();
    ab->add_option("--set", ab_overrides, "Config override key=value (repeatable)");
    ab->add_flag("--with-full-mask", with_full, "Also train the dense-mask reference");
    ab->add_option("--out", ab_out, "Output directory")->required();
    ab->add_flag("--force", force, "Allow a non-empty output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    try {
        if (gen->parsed()) {
            prepare_out_dir(data_out, force);
            const auto m = generate_synthetic(sp, data_seed, data_out);
            write_snapshot(fs::path(data_out) / "run_config.txt", "gen-data",
                           {{"n_train", str(sp.n_train)}, {"n_val", str(sp.n_val)}, {"n_test", str(sp.n_test)},
                            {"size", str(sp.size)}, {"seed", str(data_seed)}, {"amplitude", str(sp.max_amplitude)},
                            {"noise", str(sp.noise_sigma)}});
            out << "wrote " << m.train.size() + m.val.size() + m.test.size() << " samples to " << data_out << '\n';
        } else if (anno->parsed()) {
            std::set<AnnotationKind> ks;
            for (const auto& k : kinds) ks.insert(parse_annotation_kind(k));
            auto m = attach_annotations(load_manifest(anno_manifest), ks, ap);
            write_snapshot(m.root / "anno_config.txt", "gen-anno",
                           {{"kinds", join(kinds)}, {"radius", str(ap.bpanno.radius)},
                            {"epsilon", str(ap.bpanno.epsilon)}, {"vertex_cap", str(ap.bpanno.vertex_cap)},
                            {"scribble_lines", str(ap.scribble.n_lines)},
                            {"scribble_thickness", str(ap.scribble.thickness)}});
            out << "annotated " << m.train.size() << " training samples\n";
        } else if (tr->parsed()) {
            TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
            for (const auto& o : overrides) apply_override(cfg, o);
            validate(cfg);
            const auto m = load_manifest(train_manifest);
            prepare_out_dir(train_out, force);
            write_snapshot(fs::path(train_out) / "run_config.txt", "train",
                           {{"manifest", fs::absolute(m.root).string()}, {"config", config_path},
                            {"overrides", join(overrides, ';')}});
            const auto res = train(m, cfg, train_out, [&out](const EpochSummary& s, Model&) {
                out << "epoch " << s.epoch << "  loss " << std::fixed << std::setprecision(4) << s.mean_total
                    << "  val_dice " << s.val_dice << '\n';
                out.unsetf(std::ios::fixed);
            });
            plot_loss_log(fs::path(train_out) / "loss_log.csv", fs::path(train_out) / "loss_curve.svg");
            out << "best val dice " << res.best_val_dice << " at epoch " << res.best_epoch << " -> "
                << res.checkpoint.string() << '\n';
        } else if (ev->parsed()) {
            const auto m = load_manifest(ev_manifest);
            const Split split = parse_split(ev_split);
            prepare_out_dir(ev_out, force);
            write_snapshot(fs::path(ev_out) / "run_config.txt", "eval",
                           {{"checkpoint", ev_ckpt}, {"manifest", fs::absolute(m.root).string()}, {"split", ev_split}});
            const auto rep = evaluate_checkpoint(ev_ckpt, m, split);
            write_metrics_csv(fs::path(ev_out) / "metrics.csv", rep);
            out << "dice " << rep.mean_dice << "  jaccard " << rep.mean_jaccard << "  accuracy " << rep.mean_accuracy
                << "  sensitivity " << rep.mean_sensitivity << "  (" << rep.n_images << " images)\n";
        } else if (tm->parsed()) {
            const auto m = load_manifest(tm_manifest);
            const Split split = parse_split(tm_split);
            prepare_out_dir(tm_out, force);
            std::vector<std::string> ws;
            for (int w : widths) ws.push_back(std::to_string(w));
            write_snapshot(fs::path(tm_out) / "run_config.txt", "trimap",
                           {{"checkpoint_a", ck_a}, {"checkpoint_b", ck_b},
                            {"manifest", fs::absolute(m.root).string()}, {"split", tm_split}, {"widths", join(ws)}});
            Model a = load_model(read_checkpoint(ck_a));
            Model b = load_model(read_checkpoint(ck_b));
            const auto pa = predict_split(a, m, split);
            const auto pb = predict_split(b, m, split);
            std::vector<BinaryMask> gt;
            for (const auto& rec : m.split(split)) gt.push_back(read_mask(m.root / rec.mask));
            const auto rep = trimap_analysis(pa, pb, gt, widths);
            emit_trimap_report(tm_out, rep);
            for (const auto& r : rep.rows) {
                out << "width " << r.width << "  boundary jaccard delta " << r.delta_boundary_jaccard
                    << "  interior jaccard delta " << r.delta_interior_jaccard << '\n';
            }
        } else if (cr->parsed()) {
            const auto m = load_manifest(cr_manifest);
            prepare_out_dir(cr_out, force);
            write_snapshot(fs::path(cr_out) / "run_config.txt", "cost-report",
                           {{"manifest", fs::absolute(m.root).string()}});
            const auto rows = annotation_cost_report(m);
            write_cost_csv(fs::path(cr_out) / "cost.csv", rows);
            for (const auto& r : rows) {
                out << r.kind << "  clicks/image " << r.mean_clicks << "  ratio " << r.ratio_vs_dense << '\n';
            }
        } else if (ab->parsed()) {
            TrainConfig cfg = ab_config.empty() ? TrainConfig{} : load_config(ab_config);
            for (const auto& o : ab_overrides) apply_override(cfg, o);
            validate(cfg);
            const auto m = load_manifest(ab_manifest);
            prepare_out_dir(ab_out, force);
            std::vector<std::string> ss;
            for (auto s : seeds) ss.push_back(std::to_string(s));
            write_snapshot(fs::path(ab_out) / "run_config.txt", "ablation",
                           {{"manifest", fs::absolute(m.root).string()}, {"seeds", join(ss)},
                            {"with_full_mask", with_full ? "true" : "false"}});
            std::ofstream(fs::path(ab_out) / "base_config.txt") << to_text(cfg);
            const auto rows = ablation_suite(m, cfg, seeds, ab_out, with_full, [&out](const AblationRow& r) {
                out << r.variant << " seed " << r.seed << "  test dice " << r.test.mean_dice << '\n';
            });
            for (const auto& s : summarize_ablation(rows)) {
                out << std::left << std::setw(10) << s.variant << " dice " << s.mean_dice << " +- " << s.std_dice
                    << "  jaccard " << s.mean_jaccard << " +- " << s.std_jaccard << '\n';
            }
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace eauwseg
