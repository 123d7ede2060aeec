#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "eauwseg/annotation.hpp"
#include "eauwseg/image_io.hpp"
#include "eauwseg/tensor.hpp"

namespace eauwseg {

/// Lesion-like blob generator settings. The blob radius follows
/// r(theta) = r0 * (1 + sum_k a_k cos(k theta + phi_k)), k = 1..4.
struct SyntheticParams {
    int size = 64;
    int n_train = 200;
    int n_val = 50;
    int n_test = 50;
    double min_radius_frac = 0.25; // r0 range, as a fraction of size
    double max_radius_frac = 0.35;
    double max_amplitude = 0.35;   // a_k drawn from [0, max_amplitude / k]
    double contrast = 0.22;        // lesion darkening
    double noise_sigma = 0.07;
    double edge_softness = 1.2;    // pixels of colour ramp across the boundary
    double min_area_frac = 0.03;
    double max_area_frac = 0.45;
};

enum class AnnotationKind { Mask, Bpanno, Scribble, Box, Rectangle };

std::string to_string(AnnotationKind kind);
AnnotationKind parse_annotation_kind(const std::string& name);

struct AnnotationParams {
    BpannoParams bpanno;
    ScribbleParams scribble;
};

struct SampleRecord {
    std::string image_id;
    std::string image;                               // relative to the dataset root
    std::string mask;
    std::map<std::string, std::string> annotations;  // kind -> sidecar JSON
};

enum class Split { Train, Val, Test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct DatasetManifest {
    std::filesystem::path root; // directory holding manifest.json; not serialized
    int height = 0;
    int width = 0;
    std::uint64_t generator_seed = 0;
    SyntheticParams generator_params;
    AnnotationParams annotation_params;
    std::vector<SampleRecord> train;
    std::vector<SampleRecord> val;
    std::vector<SampleRecord> test;

    const std::vector<SampleRecord>& split(Split s) const;
    std::vector<SampleRecord>& split(Split s);
};

struct SyntheticSample {
    std::string image_id;
    Image image;
    BinaryMask mask;
};

/// Deterministic per (params, sample_seed).
SyntheticSample generate_sample(const SyntheticParams& params, std::uint64_t sample_seed, std::string image_id);

/// Derives the per-sample seed from the dataset seed, split and index.
std::uint64_t sample_seed(std::uint64_t seed, Split split, int index);

/// Generates every split and writes images, masks and manifest.json under
/// `out_dir`.
DatasetManifest generate_synthetic(const SyntheticParams& params, std::uint64_t seed,
                                   const std::filesystem::path& out_dir);

void save_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& root_or_file);

/// Adds the requested annotation kinds to every train sample and rewrites
/// the manifest. Val and test keep dense masks only.
DatasetManifest attach_annotations(DatasetManifest manifest, const std::set<AnnotationKind>& kinds,
                                   const AnnotationParams& params);

// Sidecar files.
void save_bpanno(const std::filesystem::path& root, const std::string& rel_json, const std::string& image_id,
                 const BoundedPolygonAnnotation& anno);
BoundedPolygonAnnotation load_bpanno(const std::filesystem::path& root, const std::string& rel_json);
ScribbleAnnotation load_scribble(const std::filesystem::path& root, const std::string& rel_json);
Box load_box(const std::filesystem::path& root, const std::string& rel_json);

/// Images are (B, 3, H, W); every mask-like vector holds B grids of H x W.
/// Only the fields for the requested supervision kind are filled.
struct Batch {
    std::vector<std::string> ids;
    Tensor<float> images;
    std::vector<BinaryMask> masks;            // Mask: ground truth; Box/Rectangle: filled box
    std::vector<BinaryMask> inscribed;        // Bpanno
    std::vector<BinaryMask> envelope;         // Bpanno
    std::vector<RegionPartition> partitions;  // Bpanno
    std::vector<Grid<std::uint8_t>> scribble; // Scribble: 0, 1 or kIgnoreLabel

    int size() const { return images.n(); }
};

inline constexpr std::uint8_t kIgnoreLabel = 255;

Batch load_batch(const DatasetManifest& manifest, Split split, const std::vector<int>& indices,
                 AnnotationKind kind);

} // namespace eauwseg
