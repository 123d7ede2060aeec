#include "eauwseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "json.hpp"

namespace eauwseg {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string to_string(AnnotationKind kind) {
    switch (kind) {
    case AnnotationKind::Mask: return "mask";
    case AnnotationKind::Bpanno: return "bpanno";
    case AnnotationKind::Scribble: return "scribble";
    case AnnotationKind::Box: return "box";
    case AnnotationKind::Rectangle: return "rectangle";
    }
    return "?";
}

AnnotationKind parse_annotation_kind(const std::string& name) {
    for (auto k : {AnnotationKind::Mask, AnnotationKind::Bpanno, AnnotationKind::Scribble, AnnotationKind::Box,
                   AnnotationKind::Rectangle}) {
        if (to_string(k) == name) return k;
    }
    throw Error(ErrorCode::InvalidParams, "parse_annotation_kind", "unknown annotation kind '" + name + "'");
}

std::string to_string(Split split) {
    switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw Error(ErrorCode::InvalidParams, "parse_split", "unknown split '" + name + "'");
}

const std::vector<SampleRecord>& DatasetManifest::split(Split s) const {
    switch (s) {
    case Split::Train: return train;
    case Split::Val: return val;
    case Split::Test: return test;
    }
    return train;
}

std::vector<SampleRecord>& DatasetManifest::split(Split s) {
    return const_cast<std::vector<SampleRecord>&>(static_cast<const DatasetManifest&>(*this).split(s));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_params(const SyntheticParams& p) {
    auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidParams, "generate_synthetic", msg); };
    if (p.size < 32) bad("size must be >= 32");
    if (p.n_train < 1 || p.n_val < 0 || p.n_test < 0) bad("split sizes must be >= 1 (train) and >= 0");
    if (!(p.min_radius_frac > 0.0) || p.max_radius_frac < p.min_radius_frac || p.max_radius_frac > 0.5)
        bad("radius fractions must satisfy 0 < min <= max <= 0.5");
    if (p.max_amplitude < 0.0 || p.max_amplitude > 0.35) bad("max_amplitude must lie in [0, 0.35]");
    if (p.noise_sigma < 0.0 || p.edge_softness <= 0.0) bad("noise_sigma must be >= 0 and edge_softness > 0");
    if (p.min_area_frac < 0.0 || p.max_area_frac <= p.min_area_frac || p.max_area_frac > 1.0)
        bad("area fractions must satisfy 0 <= min < max <= 1");
}

struct Blob {
    double cx, cy, r0;
    std::array<double, 4> amp;
    std::array<double, 4> phase;

    double radius(double theta) const {
        double r = 1.0;
        for (int k = 0; k < 4; ++k) r += amp[static_cast<std::size_t>(k)] * std::cos((k + 1) * theta + phase[static_cast<std::size_t>(k)]);
        return r0 * r;
    }
};

} // namespace

std::uint64_t sample_seed(std::uint64_t seed, Split split, int index) {
    return splitmix64(splitmix64(seed) ^ (static_cast<std::uint64_t>(split) << 40) ^ static_cast<std::uint64_t>(index));
}

SyntheticSample generate_sample(const SyntheticParams& params, std::uint64_t seed, std::string image_id) {
    check_params(params);
    const int n = params.size;
    const double two_pi = 2.0 * std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (int attempt = 0;; ++attempt) {
        Blob blob{};
        blob.r0 = n * (params.min_radius_frac + (params.max_radius_frac - params.min_radius_frac) * unit(rng));
        double reach = 1.0;
        for (std::size_t k = 0; k < 4; ++k) {
            blob.amp[k] = unit(rng) * params.max_amplitude / static_cast<double>(k + 1);
            blob.phase[k] = unit(rng) * two_pi;
            reach += blob.amp[k];
        }
        const double margin = std::min(blob.r0 * reach + 4.0, n / 2.0);
        blob.cx = margin + (n - 1 - 2.0 * margin) * unit(rng);
        blob.cy = margin + (n - 1 - 2.0 * margin) * unit(rng);

        SyntheticSample s{image_id, Image(3, n, n), BinaryMask(n, n)};
        Grid<double> signed_gap(n, n); // r(theta) - d, positive inside
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const double dx = x - blob.cx, dy = y - blob.cy;
                const double gap = blob.radius(std::atan2(dy, dx)) - std::hypot(dx, dy);
                signed_gap(x, y) = gap;
                s.mask(x, y) = gap >= 0.0 ? 1 : 0;
            }
        }
        s.mask = largest_component(s.mask);
        const double area = static_cast<double>(count_foreground(s.mask)) / (n * n);
        if ((area < params.min_area_frac || area > params.max_area_frac) && attempt < 100) continue;

        std::array<double, 3> bg{0.78 + 0.1 * (unit(rng) - 0.5), 0.60 + 0.1 * (unit(rng) - 0.5),
                                 0.50 + 0.1 * (unit(rng) - 0.5)};
        const double depth = params.contrast * (0.8 + 0.4 * unit(rng));
        const std::array<double, 3> tint{1.0, 1.25, 1.1};
        const double gx = 0.16 * (unit(rng) - 0.5), gy = 0.16 * (unit(rng) - 0.5);
        const double f1 = 3.0 + 5.0 * unit(rng), o1 = two_pi * unit(rng), p1 = two_pi * unit(rng);
        const double f2 = 4.0 + 6.0 * unit(rng), o2 = two_pi * unit(rng), p2 = two_pi * unit(rng);
        std::normal_distribution<double> noise(0.0, params.noise_sigma);

        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                const double u = static_cast<double>(x) / n, v = static_cast<double>(y) / n;
                const double shade = gx * (u - 0.5) + gy * (v - 0.5);
                const double bg_tex = 0.025 * std::sin(two_pi * f1 * (u * std::cos(o1) + v * std::sin(o1)) + p1);
                const double lesion_tex = 0.04 * std::sin(two_pi * f2 * (u * std::cos(o2) + v * std::sin(o2)) + p2);
                const double gap = signed_gap(x, y);
                const double alpha = std::clamp(0.5 + gap / (2.0 * params.edge_softness), 0.0, 1.0);
                const double core = std::clamp(gap / blob.r0, 0.0, 1.0);
                for (int c = 0; c < 3; ++c) {
                    const double back = bg[static_cast<std::size_t>(c)] + shade + bg_tex;
                    const double lesion = back - depth * tint[static_cast<std::size_t>(c)] * (1.0 + 0.3 * core) + lesion_tex;
                    const double value = (1.0 - alpha) * back + alpha * lesion + noise(rng);
                    s.image.at(c, x, y) = static_cast<float>(std::clamp(value, 0.0, 1.0));
                }
            }
        }
        return s;
    }
}

namespace {

json params_to_json(const SyntheticParams& p) {
    return json{{"size", p.size},
                {"n_train", p.n_train},
                {"n_val", p.n_val},
                {"n_test", p.n_test},
                {"min_radius_frac", p.min_radius_frac},
                {"max_radius_frac", p.max_radius_frac},
                {"max_amplitude", p.max_amplitude},
                {"contrast", p.contrast},
                {"noise_sigma", p.noise_sigma},
                {"edge_softness", p.edge_softness},
                {"min_area_frac", p.min_area_frac},
                {"max_area_frac", p.max_area_frac}};
}

SyntheticParams params_from_json(const json& j) {
    SyntheticParams p;
    p.size = j.at("size").get<int>();
    p.n_train = j.at("n_train").get<int>();
    p.n_val = j.at("n_val").get<int>();
    p.n_test = j.at("n_test").get<int>();
    p.min_radius_frac = j.at("min_radius_frac").get<double>();
    p.max_radius_frac = j.at("max_radius_frac").get<double>();
    p.max_amplitude = j.at("max_amplitude").get<double>();
    p.contrast = j.at("contrast").get<double>();
    p.noise_sigma = j.at("noise_sigma").get<double>();
    p.edge_softness = j.at("edge_softness").get<double>();
    p.min_area_frac = j.at("min_area_frac").get<double>();
    p.max_area_frac = j.at("max_area_frac").get<double>();
    return p;
}

json points_to_json(const std::vector<Point>& pts) {
    json arr = json::array();
    for (auto p : pts) arr.push_back({p.x, p.y});
    return arr;
}

std::vector<Point> points_from_json(const json& arr) {
    std::vector<Point> pts;
    for (const auto& p : arr) pts.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    return pts;
}

json lines_to_json(const std::vector<LineSegment>& lines) {
    json arr = json::array();
    for (const auto& l : lines) arr.push_back({{l.a.x, l.a.y}, {l.b.x, l.b.y}});
    return arr;
}

std::vector<LineSegment> lines_from_json(const json& arr) {
    std::vector<LineSegment> out;
    for (const auto& l : arr) {
        out.push_back({{l.at(0).at(0).get<int>(), l.at(0).at(1).get<int>()},
                       {l.at(1).at(0).get<int>(), l.at(1).at(1).get<int>()}});
    }
    return out;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::Io, "write_json", "cannot open " + path.string());
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingFile, "read_json", "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Io, "read_json", path.string() + ": " + e.what());
    }
}

std::string sample_id(Split split, int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%04d", to_string(split).c_str(), index);
    return buf;
}

} // namespace

DatasetManifest generate_synthetic(const SyntheticParams& params, std::uint64_t seed, const fs::path& out_dir) {
    check_params(params);
    DatasetManifest m;
    m.root = out_dir;
    m.height = m.width = params.size;
    m.generator_seed = seed;
    m.generator_params = params;
    const std::array<std::pair<Split, int>, 3> splits{{{Split::Train, params.n_train},
                                                      {Split::Val, params.n_val},
                                                      {Split::Test, params.n_test}}};
    for (auto [split, count] : splits) {
        for (int i = 0; i < count; ++i) {
            const std::string id = sample_id(split, i);
            const auto sample = generate_sample(params, sample_seed(seed, split, i), id);
            SampleRecord rec{id, to_string(split) + "/" + id + ".ppm", to_string(split) + "/" + id + "_mask.pgm", {}};
            write_ppm(out_dir / rec.image, sample.image);
            write_mask(out_dir / rec.mask, sample.mask);
            m.split(split).push_back(std::move(rec));
        }
    }
    save_manifest(m);
    return m;
}

void save_manifest(const DatasetManifest& m) {
    json splits = json::object();
    for (auto split : {Split::Train, Split::Val, Split::Test}) {
        json arr = json::array();
        for (const auto& r : m.split(split)) {
            json ann = json::object();
            for (const auto& [k, v] : r.annotations) ann[k] = v;
            arr.push_back({{"image_id", r.image_id}, {"image", r.image}, {"mask", r.mask}, {"annotations", ann}});
        }
        splits[to_string(split)] = arr;
    }
    const auto& ap = m.annotation_params;
    json j{{"format", "eauwseg-manifest"},
           {"version", 1},
           {"height", m.height},
           {"width", m.width},
           {"generator_seed", m.generator_seed},
           {"generator_params", params_to_json(m.generator_params)},
           {"annotation_params",
            {{"radius", ap.bpanno.radius},
             {"epsilon", ap.bpanno.epsilon},
             {"vertex_cap", ap.bpanno.vertex_cap},
             {"scribble_lines", ap.scribble.n_lines},
             {"scribble_thickness", ap.scribble.thickness}}},
           {"splits", splits}};
    write_json(m.root / "manifest.json", j);
}

DatasetManifest load_manifest(const fs::path& root_or_file) {
    const fs::path file = fs::is_directory(root_or_file) ? root_or_file / "manifest.json" : root_or_file;
    const json j = read_json(file);
    if (j.value("format", "") != "eauwseg-manifest" || j.value("version", 0) != 1) {
        throw Error(ErrorCode::InvalidParams, "load_manifest", "unsupported manifest format in " + file.string());
    }
    DatasetManifest m;
    m.root = file.parent_path();
    m.height = j.at("height").get<int>();
    m.width = j.at("width").get<int>();
    m.generator_seed = j.at("generator_seed").get<std::uint64_t>();
    m.generator_params = params_from_json(j.at("generator_params"));
    const auto& ap = j.at("annotation_params");
    m.annotation_params.bpanno.radius = ap.at("radius").get<int>();
    m.annotation_params.bpanno.epsilon = ap.at("epsilon").get<double>();
    m.annotation_params.bpanno.vertex_cap = ap.at("vertex_cap").get<int>();
    m.annotation_params.scribble.n_lines = ap.at("scribble_lines").get<int>();
    m.annotation_params.scribble.thickness = ap.at("scribble_thickness").get<int>();
    for (auto split : {Split::Train, Split::Val, Split::Test}) {
        for (const auto& r : j.at("splits").at(to_string(split))) {
            SampleRecord rec{r.at("image_id").get<std::string>(), r.at("image").get<std::string>(),
                             r.at("mask").get<std::string>(), {}};
            for (const auto& [k, v] : r.at("annotations").items()) rec.annotations[k] = v.get<std::string>();
            m.split(split).push_back(std::move(rec));
        }
    }
    return m;
}

void save_bpanno(const fs::path& root, const std::string& rel_json, const std::string& image_id,
                 const BoundedPolygonAnnotation& anno) {
    const std::string stem = rel_json.substr(0, rel_json.size() - std::string(".json").size());
    const std::string in_mask = stem + "_inscribed.pgm", en_mask = stem + "_envelope.pgm";
    write_mask(root / in_mask, anno.inscribed_mask);
    write_mask(root / en_mask, anno.envelope_mask);
    write_json(root / rel_json, json{{"image_id", image_id},
                                     {"height", anno.inscribed_mask.height()},
                                     {"width", anno.inscribed_mask.width()},
                                     {"inscribed", points_to_json(anno.inscribed.vertices)},
                                     {"envelope", points_to_json(anno.envelope.vertices)},
                                     {"inscribed_mask", in_mask},
                                     {"envelope_mask", en_mask}});
}

BoundedPolygonAnnotation load_bpanno(const fs::path& root, const std::string& rel_json) {
    const json j = read_json(root / rel_json);
    BoundedPolygonAnnotation a;
    a.inscribed.vertices = points_from_json(j.at("inscribed"));
    a.envelope.vertices = points_from_json(j.at("envelope"));
    a.inscribed_mask = read_mask(root / j.at("inscribed_mask").get<std::string>());
    a.envelope_mask = read_mask(root / j.at("envelope_mask").get<std::string>());
    if (a.inscribed_mask.height() != j.at("height").get<int>() || a.inscribed_mask.width() != j.at("width").get<int>()) {
        throw Error(ErrorCode::ShapeMismatch, "load_bpanno", "mask size disagrees with " + rel_json);
    }
    return a;
}

ScribbleAnnotation load_scribble(const fs::path& root, const std::string& rel_json) {
    const json j = read_json(root / rel_json);
    ScribbleAnnotation s;
    s.foreground_lines = lines_from_json(j.at("foreground_lines"));
    s.background_lines = lines_from_json(j.at("background_lines"));
    s.thickness = j.at("thickness").get<int>();
    s.foreground = read_mask(root / j.at("foreground_mask").get<std::string>());
    s.background = read_mask(root / j.at("background_mask").get<std::string>());
    return s;
}

Box load_box(const fs::path& root, const std::string& rel_json) {
    const json j = read_json(root / rel_json);
    const auto& b = j.at("box");
    return Box{{b.at(0).at(0).get<int>(), b.at(0).at(1).get<int>()}, {b.at(1).at(0).get<int>(), b.at(1).at(1).get<int>()}};
}

DatasetManifest attach_annotations(DatasetManifest m, const std::set<AnnotationKind>& kinds,
                                   const AnnotationParams& params) {
    m.annotation_params = params;
    for (std::size_t i = 0; i < m.train.size(); ++i) {
        auto& rec = m.train[i];
        const std::string base = "train/" + rec.image_id;
        BinaryMask gt;
        auto ground_truth = [&]() -> const BinaryMask& {
            if (gt.empty()) gt = read_mask(m.root / rec.mask);
            return gt;
        };
        try {
            for (auto kind : kinds) {
                switch (kind) {
                case AnnotationKind::Mask:
                    rec.annotations["mask"] = rec.mask;
                    break;
                case AnnotationKind::Bpanno: {
                    const auto anno = make_bpanno(ground_truth(), params.bpanno);
                    save_bpanno(m.root, base + "_bpanno.json", rec.image_id, anno);
                    rec.annotations["bpanno"] = base + "_bpanno.json";
                    break;
                }
                case AnnotationKind::Scribble: {
                    const auto seed = sample_seed(m.generator_seed ^ 0x5343524942424c45ULL, Split::Train, static_cast<int>(i));
                    const auto s = make_scribble(ground_truth(), params.scribble, seed);
                    write_mask(m.root / (base + "_scribble_fg.pgm"), s.foreground);
                    write_mask(m.root / (base + "_scribble_bg.pgm"), s.background);
                    write_json(m.root / (base + "_scribble.json"),
                               json{{"image_id", rec.image_id},
                                    {"height", gt.height()},
                                    {"width", gt.width()},
                                    {"thickness", s.thickness},
                                    {"foreground_lines", lines_to_json(s.foreground_lines)},
                                    {"background_lines", lines_to_json(s.background_lines)},
                                    {"foreground_mask", base + "_scribble_fg.pgm"},
                                    {"background_mask", base + "_scribble_bg.pgm"}});
                    rec.annotations["scribble"] = base + "_scribble.json";
                    break;
                }
                case AnnotationKind::Box:
                case AnnotationKind::Rectangle: {
                    const Box box = make_box(ground_truth());
                    const std::string name = to_string(kind);
                    json j{{"image_id", rec.image_id},
                           {"height", gt.height()},
                           {"width", gt.width()},
                           {"box", {{box.min.x, box.min.y}, {box.max.x, box.max.y}}}};
                    if (kind == AnnotationKind::Rectangle) {
                        write_mask(m.root / (base + "_rectangle.pgm"), box_mask(box, gt.height(), gt.width()));
                        j["mask"] = base + "_rectangle.pgm";
                    }
                    write_json(m.root / (base + "_" + name + ".json"), j);
                    rec.annotations[name] = base + "_" + name + ".json";
                    break;
                }
                }
            }
        } catch (const Error& e) {
            throw Error(e.code(), "attach_annotations", rec.image_id + ": " + e.what());
        }
    }
    save_manifest(m);
    return m;
}

Batch load_batch(const DatasetManifest& m, Split split, const std::vector<int>& indices, AnnotationKind kind) {
    const auto& records = m.split(split);
    Batch b;
    b.images = Tensor<float>(static_cast<int>(indices.size()), 3, m.height, m.width);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const int idx = indices[k];
        if (idx < 0 || static_cast<std::size_t>(idx) >= records.size()) {
            throw Error(ErrorCode::InvalidParams, "load_batch", "index " + std::to_string(idx) + " outside split");
        }
        const auto& rec = records[static_cast<std::size_t>(idx)];
        const Image img = read_ppm(m.root / rec.image);
        if (img.height != m.height || img.width != m.width) {
            throw Error(ErrorCode::ShapeMismatch, "load_batch", rec.image_id + " has unexpected size");
        }
        std::copy(img.data.begin(), img.data.end(), b.images.data.begin() + static_cast<std::ptrdiff_t>(k * img.data.size()));
        b.ids.push_back(rec.image_id);

        auto annotation = [&](const char* name) -> const std::string& {
            auto it = rec.annotations.find(name);
            if (it == rec.annotations.end()) {
                throw Error(ErrorCode::MissingFile, "load_batch", rec.image_id + " has no '" + name + "' annotation");
            }
            return it->second;
        };
        auto check = [&](const auto& grid) {
            if (grid.height() != m.height || grid.width() != m.width) {
                throw Error(ErrorCode::ShapeMismatch, "load_batch", rec.image_id + " annotation has unexpected size");
            }
        };
        switch (kind) {
        case AnnotationKind::Mask: {
            auto mask = read_mask(m.root / rec.mask);
            check(mask);
            b.masks.push_back(std::move(mask));
            break;
        }
        case AnnotationKind::Bpanno: {
            auto anno = load_bpanno(m.root, annotation("bpanno"));
            check(anno.inscribed_mask);
            validate_annotation(anno);
            b.partitions.push_back(make_partition(anno));
            b.inscribed.push_back(std::move(anno.inscribed_mask));
            b.envelope.push_back(std::move(anno.envelope_mask));
            break;
        }
        case AnnotationKind::Scribble: {
            const auto s = load_scribble(m.root, annotation("scribble"));
            check(s.foreground);
            Grid<std::uint8_t> labels(m.height, m.width, kIgnoreLabel);
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (s.background[i]) labels[i] = 0;
                if (s.foreground[i]) labels[i] = 1;
            }
            b.scribble.push_back(std::move(labels));
            break;
        }
        case AnnotationKind::Box:
            b.masks.push_back(box_mask(load_box(m.root, annotation("box")), m.height, m.width));
            break;
        case AnnotationKind::Rectangle: {
            const json j = read_json(m.root / annotation("rectangle"));
            auto mask = read_mask(m.root / j.at("mask").get<std::string>());
            check(mask);
            b.masks.push_back(std::move(mask));
            break;
        }
        }
    }
    return b;
}

} // namespace eauwseg
