#pragma once

#include "facecorr/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace facecorr {

/// One scan as listed in a dataset manifest. Paths are relative to the
/// manifest's directory.
struct ScanBundle {
    std::string geometry;            // .ply (cloud) or .obj (cloud)
    std::string landmarks;           // optional landmark file
    std::string ground_truth;        // corresponded .obj mesh; required for synthetic bundles
    std::string provenance = "synthetic";  // "synthetic" or "real"
    bool neutral = false;
    int subject = -1;
    double unit_scale_mm = 0.0;  // 0: no physical scale recorded
};

struct DatasetManifest {
    int format_version = 1;
    uint64_t seed = 0;
    std::string template_mesh;       // .obj
    std::string template_landmarks;  // index-form landmark file
    std::string template_mouth;      // index list
    std::vector<ScanBundle> bundles;
};

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// Load every bundle into memory. Real bundles without stored normals get
/// plane-fit normals oriented by the template. Enforces the manifest
/// invariants (synthetic bundles carry ground truth, files exist and parse).
Dataset load_dataset(const std::string& manifest_path);

FaceTemplate load_template(const std::string& mesh_path, const std::string& landmarks_path,
                           const std::string& mouth_path);

struct SynthSample;
struct ToyMorphable;

/// In-memory dataset from generated samples. Subjects are assigned to the
/// "real" (unsupervised) pool with probability real_fraction, whole subjects
/// at a time, deterministically under the seed. Real samples keep their
/// ground truth for evaluation but train unsupervised.
Dataset make_synthetic_dataset(const ToyMorphable& model, const std::vector<SynthSample>& samples,
                               double real_fraction, uint64_t seed);

/// Write a generated dataset as ordinary scan files plus a manifest. Only
/// synthetic bundles carry a ground-truth sidecar; the geometry files are
/// indistinguishable by provenance.
DatasetManifest write_synthetic_dataset(const std::string& dir, const ToyMorphable& model,
                                        const std::vector<SynthSample>& samples, double real_fraction,
                                        uint64_t seed);

}  // namespace facecorr
