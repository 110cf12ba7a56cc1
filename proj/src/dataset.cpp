#include "facecorr/dataset.hpp"

#include "facecorr/error.hpp"
#include "facecorr/mesh_io.hpp"
#include "facecorr/preprocess.hpp"
#include "facecorr/rng.hpp"
#include "facecorr/synthgen.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>

namespace facecorr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json bundle_to_json(const ScanBundle& b) {
    json j{{"geometry", b.geometry}, {"provenance", b.provenance}, {"neutral", b.neutral}, {"subject", b.subject}};
    if (!b.landmarks.empty()) j["landmarks"] = b.landmarks;
    if (!b.ground_truth.empty()) j["ground_truth"] = b.ground_truth;
    if (b.unit_scale_mm > 0.0) j["unit_scale_mm"] = b.unit_scale_mm;
    return j;
}

ScanBundle bundle_from_json(const json& j) {
    ScanBundle b;
    b.geometry = j.at("geometry").get<std::string>();
    b.provenance = j.at("provenance").get<std::string>();
    require(b.provenance == "synthetic" || b.provenance == "real", ErrorCode::Io,
            "bundle provenance must be 'synthetic' or 'real', got '" + b.provenance + "'");
    b.neutral = j.at("neutral").get<bool>();
    b.subject = j.at("subject").get<int>();
    if (j.contains("landmarks")) b.landmarks = j.at("landmarks").get<std::string>();
    if (j.contains("ground_truth")) b.ground_truth = j.at("ground_truth").get<std::string>();
    if (j.contains("unit_scale_mm")) b.unit_scale_mm = j.at("unit_scale_mm").get<double>();
    return b;
}

}  // namespace

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    json j;
    j["format_version"] = manifest.format_version;
    j["seed"] = manifest.seed;
    j["template_mesh"] = manifest.template_mesh;
    j["template_landmarks"] = manifest.template_landmarks;
    j["template_mouth"] = manifest.template_mouth;
    json bundles = json::array();
    for (const auto& b : manifest.bundles) bundles.push_back(bundle_to_json(b));
    j["bundles"] = bundles;

    std::ofstream out(path);
    if (!out) fail_io("cannot open '" + path + "' for writing");
    out << j.dump(2) << "\n";
    if (!out) fail_io("failed writing '" + path + "'");
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_io("cannot open manifest '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        fail_io("manifest '" + path + "' is not valid JSON: " + e.what());
    }
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    require(m.format_version == 1, ErrorCode::Io,
            "unsupported manifest format version " + std::to_string(m.format_version));
    m.seed = j.at("seed").get<uint64_t>();
    m.template_mesh = j.at("template_mesh").get<std::string>();
    m.template_landmarks = j.at("template_landmarks").get<std::string>();
    m.template_mouth = j.at("template_mouth").get<std::string>();
    for (const auto& b : j.at("bundles")) m.bundles.push_back(bundle_from_json(b));
    return m;
}

FaceTemplate load_template(const std::string& mesh_path, const std::string& landmarks_path,
                           const std::string& mouth_path) {
    FaceTemplate tpl;
    tpl.mesh = read_obj_mesh(mesh_path);
    tpl.landmarks = landmark_indices(read_landmark_file(landmarks_path));
    tpl.mouth_indices = read_index_list(mouth_path);
    validate(tpl);
    return tpl;
}

namespace {

PointCloud load_geometry(const std::string& path) {
    const auto ext = fs::path(path).extension().string();
    if (ext == ".ply") return read_ply(path);
    if (ext == ".obj") return read_obj_cloud(path);
    fail_io("unsupported geometry file type '" + ext + "' for '" + path + "'");
}

}  // namespace

Dataset load_dataset(const std::string& manifest_path) {
    const auto manifest = read_manifest(manifest_path);
    const fs::path root = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& rel) { return (root / rel).string(); };

    Dataset dataset;
    dataset.tpl = load_template(resolve(manifest.template_mesh), resolve(manifest.template_landmarks),
                                resolve(manifest.template_mouth));

    for (size_t i = 0; i < manifest.bundles.size(); ++i) {
        const auto& b = manifest.bundles[i];
        TrainSample sample;
        sample.input = load_geometry(resolve(b.geometry));
        sample.synthetic = b.provenance == "synthetic";
        sample.neutral = b.neutral;
        sample.subject = b.subject;
        if (sample.synthetic) {
            require(!b.ground_truth.empty(), ErrorCode::Io,
                    "synthetic bundle " + std::to_string(i) + " lacks a ground-truth file");
            const auto gt_mesh = read_obj_mesh(resolve(b.ground_truth));
            require(gt_mesh.vertex_count() == dataset.tpl.mesh.vertex_count(), ErrorCode::Io,
                    "ground truth of bundle " + std::to_string(i) + " does not match the template vertex count");
            sample.ground_truth = gt_mesh.vertices;
        } else if (!sample.input.has_normals()) {
            sample.input.normals = estimate_normals(sample.input, dataset.tpl.mesh);
        }
        dataset.samples.push_back(std::move(sample));
    }
    return dataset;
}

namespace {

bool subject_is_real(uint64_t seed, int subject, double real_fraction) {
    if (real_fraction <= 0.0) return false;
    if (real_fraction >= 1.0) return true;
    Rng rng(derive_seed(seed, "provenance", static_cast<uint64_t>(subject)));
    return rng.uniform() < real_fraction;
}

}  // namespace

Dataset make_synthetic_dataset(const ToyMorphable& model, const std::vector<SynthSample>& samples,
                               double real_fraction, uint64_t seed) {
    Dataset dataset;
    dataset.tpl = model.tpl;
    dataset.samples.reserve(samples.size());
    for (const auto& s : samples) {
        TrainSample t;
        t.input = s.input;
        t.ground_truth = s.ground_truth;
        t.synthetic = !subject_is_real(seed, s.subject, real_fraction);
        t.neutral = s.neutral;
        t.subject = s.subject;
        dataset.samples.push_back(std::move(t));
    }
    return dataset;
}

DatasetManifest write_synthetic_dataset(const std::string& dir, const ToyMorphable& model,
                                        const std::vector<SynthSample>& samples, double real_fraction,
                                        uint64_t seed) {
    fs::create_directories(dir);
    const fs::path root(dir);

    DatasetManifest manifest;
    manifest.seed = seed;
    manifest.template_mesh = "template.obj";
    manifest.template_landmarks = "template_landmarks.txt";
    manifest.template_mouth = "template_mouth.txt";
    write_obj((root / manifest.template_mesh).string(), model.tpl.mesh);
    write_landmark_indices((root / manifest.template_landmarks).string(), model.tpl.landmarks);
    write_index_list((root / manifest.template_mouth).string(), model.tpl.mouth_indices);

    for (size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        char name[64];
        std::snprintf(name, sizeof name, "scan_%04zu.ply", i);

        ScanBundle bundle;
        bundle.geometry = name;
        bundle.neutral = s.neutral;
        bundle.subject = s.subject;
        bundle.provenance = subject_is_real(seed, s.subject, real_fraction) ? "real" : "synthetic";
        write_ply((root / name).string(), s.input, /*binary=*/true);

        if (bundle.provenance == "synthetic") {
            char gt_name[64];
            std::snprintf(gt_name, sizeof gt_name, "scan_%04zu_gt.obj", i);
            bundle.ground_truth = gt_name;
            const TriMesh gt_mesh{s.ground_truth, model.tpl.mesh.faces};
            write_obj((root / gt_name).string(), gt_mesh);
        }
        manifest.bundles.push_back(std::move(bundle));
    }
    write_manifest((root / "manifest.json").string(), manifest);
    return manifest;
}

}  // namespace facecorr
