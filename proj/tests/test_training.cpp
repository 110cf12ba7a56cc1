#include "facecorr/training.hpp"

#include "facecorr/checkpoint.hpp"
#include "facecorr/dataset.hpp"
#include "facecorr/error.hpp"
#include "facecorr/runconfig.hpp"
#include "facecorr/synthgen.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <filesystem>
#include <fstream>

using namespace facecorr;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const char* tag) {
        path = std::filesystem::temp_directory_path() / (std::string("facecorr_train_") + tag);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Small but complete toy setup: 162-vertex template, a handful of subjects.
struct Toy {
    ToyMorphable model;
    Dataset dataset;
    TrainConfig config;

    explicit Toy(double real_fraction = 0.5, int subjects = 4, int expressions = 1) {
        model = build_toy_model(21, 162, 3, 2, 0.3);
        dataset = make_synthetic_dataset(model, sample_dataset(model, subjects, expressions, 33), real_fraction, 33);
        config.seed = 9;
        config.arch.points = 162;
        config.arch.latent_id = 6;
        config.arch.latent_exp = 6;
        config.arch.encoder_widths = {8, 8, 16};
        config.arch.decoder_hidden = 16;
        config.epochs_synthetic = 1;
        config.epochs_mixed = 1;
    }
};

std::vector<double> flatten_params(ShapeModel& model, const std::string& prefix) {
    std::vector<double> out;
    for (const auto& p : model.parameters())
        if (p.name.rfind(prefix, 0) == 0) out.insert(out.end(), p.value->data.begin(), p.value->data.end());
    return out;
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("learning rate follows the halving schedule exactly") {
    Toy toy;
    Trainer trainer(toy.dataset, toy.config);
    for (int e = 0; e < 23; ++e) {
        const double expected = 1e-4 * std::pow(0.5, e / 5);
        CHECK(trainer.learning_rate(e) == expected);
    }
}

TEST_CASE("phase 2 freezes the identity decoder bit-exactly") {
    Toy toy;
    Trainer trainer(toy.dataset, toy.config);
    trainer.run_phase(PhaseId::IdentityOnly);
    const auto before = flatten_params(trainer.model(), "dec_id.");
    const auto head_before = flatten_params(trainer.model(), "encoder.head_id");
    trainer.run_phase(PhaseId::ExpressionOnly);
    const auto after = flatten_params(trainer.model(), "dec_id.");
    const auto head_after = flatten_params(trainer.model(), "encoder.head_id");
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
    for (size_t i = 0; i < head_before.size(); ++i) CHECK(head_before[i] == head_after[i]);

    // And phase 2 does move the expression decoder.
    Trainer fresh(toy.dataset, toy.config);
    const auto exp_before = flatten_params(fresh.model(), "dec_exp.");
    fresh.run_phase(PhaseId::ExpressionOnly);
    const auto exp_after = flatten_params(fresh.model(), "dec_exp.");
    bool moved = false;
    for (size_t i = 0; i < exp_before.size(); ++i) moved = moved || exp_before[i] != exp_after[i];
    CHECK(moved);
}

TEST_CASE("training is deterministic under the seed") {
    Toy toy;
    auto run = [&]() {
        Trainer trainer(toy.dataset, toy.config);
        trainer.train_full();
        std::vector<double> log;
        for (const auto& e : trainer.log().epochs) log.push_back(e.mean_total);
        auto params = flatten_params(trainer.model(), "");
        log.insert(log.end(), params.begin(), params.end());
        return log;
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("phase filters reject impossible datasets") {
    // No expressive samples: phase 2 must fail.
    Toy neutral_only(0.0, 3, 0);
    Trainer trainer(neutral_only.dataset, neutral_only.config);
    CHECK_THROWS_AS(trainer.run_phase(PhaseId::ExpressionOnly), Error);

    // All-real data with a synthetic-only stage requested: phase 1 must fail.
    Toy all_real(1.0, 3, 1);
    Trainer real_trainer(all_real.dataset, all_real.config);
    CHECK_THROWS_AS(real_trainer.run_phase(PhaseId::IdentityOnly), Error);
}

TEST_CASE("counterpart mode switches at most once and is logged") {
    Toy toy(0.5, 3, 1);
    toy.config.epochs_synthetic = 2;
    toy.config.epochs_mixed = 10;
    toy.config.auto_switch = true;
    toy.config.switch_window = 2;
    toy.config.switch_patience = 2;
    // Absurdly demanding improvement threshold forces early saturation.
    toy.config.switch_min_improvement = 10.0;
    Trainer trainer(toy.dataset, toy.config);
    trainer.run_phase(PhaseId::IdentityOnly);
    CHECK(trainer.log().switch_count == 1);
    CHECK(trainer.counterpart_mode() == CounterpartMode::NormalRay);
    int switch_events = 0;
    for (const auto& e : trainer.log().epochs) switch_events += e.switched_here;
    CHECK(switch_events == 1);

    // More epochs never produce a second switch.
    trainer.run_phase(PhaseId::Joint);
    CHECK(trainer.log().switch_count == 1);
}

TEST_CASE("checkpoint round trip preserves behavior and bytes") {
    TempDir dir("ckpt");
    Toy toy;
    Trainer trainer(toy.dataset, toy.config);
    trainer.run_phase(PhaseId::IdentityOnly);

    CheckpointInfo info;
    info.arch = toy.config.arch;
    info.seed = toy.config.seed;
    info.phase = 1;
    info.epoch = 2;
    info.weights = toy.config.weights;
    const auto path = dir.file("model.ckpt");
    save_checkpoint(path, trainer.model(), info);

    CheckpointInfo loaded_info;
    auto loaded = load_checkpoint(path, &loaded_info);
    CHECK(loaded_info.arch == toy.config.arch);
    CHECK(loaded_info.phase == 1);
    CHECK(loaded_info.epoch == 2);

    // Identical loss on a fixed batch.
    const auto& sample = toy.dataset.samples.front();
    const auto ctx = LossContext::build(toy.dataset.tpl);
    SampleView view;
    view.supervised = true;
    view.ground_truth = &sample.ground_truth;
    auto eval = [&](ShapeModel& m) {
        Tape tape;
        const auto fwd = m.forward(tape, sample.input);
        return total_loss(tensor_to_vertices(tape.value_tensor(fwd.s_hat)), view, ctx, LossWeights{}).total;
    };
    CHECK(eval(trainer.model()) == eval(loaded));

    // Byte-identical save of a loaded checkpoint.
    const auto again = dir.file("model2.ckpt");
    save_checkpoint(again, loaded, loaded_info);
    CHECK(file_bytes(path) == file_bytes(again));

    // Tampered manifests are rejected.
    std::ofstream bad(dir.file("bad.ckpt"), std::ios::binary);
    bad << "NOT-A-CHECKPOINT";
    bad.close();
    CHECK_THROWS_AS(load_checkpoint(dir.file("bad.ckpt")), Error);
}

TEST_CASE("infer_correspondence contracts") {
    Toy toy;
    Trainer trainer(toy.dataset, toy.config);

    PointCloud cloud;
    cloud.points = toy.dataset.samples.front().input.points;
    const auto corr = infer_correspondence(trainer.model(), cloud, toy.dataset.tpl);
    CHECK(corr.mesh.vertex_count() == toy.dataset.tpl.mesh.vertex_count());
    CHECK(corr.mesh.faces == toy.dataset.tpl.mesh.faces);
    CHECK(corr.code.id.size() == toy.config.arch.latent_id);

    PointCloud outside = cloud;
    outside.points[0] = Vec3(2.0, 0, 0);
    CHECK_THROWS_AS(infer_correspondence(trainer.model(), outside, toy.dataset.tpl), Error);
}

TEST_CASE("run config round trip and schema enforcement") {
    TempDir dir("cfg");
    TrainConfig cfg;
    cfg.seed = 123;
    cfg.arch.points = 642;
    cfg.arch.latent_id = 8;
    cfg.arch.latent_exp = 8;
    cfg.weights.lambda_lap = 0.005;
    cfg.auto_switch = false;
    cfg.weights.counterpart_mode = CounterpartMode::NormalRay;
    const auto path = dir.file("run.cfg");
    write_run_config(path, cfg);
    const auto loaded = read_run_config(path);
    CHECK(loaded.seed == 123);
    CHECK(loaded.arch.points == 642);
    CHECK(loaded.arch.latent_id == 8);
    CHECK(loaded.weights.counterpart_mode == CounterpartMode::NormalRay);
    CHECK_FALSE(loaded.auto_switch);
    CHECK(loaded.lr_init == cfg.lr_init);

    // Unknown keys are hard errors.
    std::ofstream bad(dir.file("bad.cfg"));
    bad << "config_version 1\nlerning_rate 0.1\n";
    bad.close();
    CHECK_THROWS_AS(read_run_config(dir.file("bad.cfg")), Error);

    // Missing version record is a hard error.
    std::ofstream unversioned(dir.file("nover.cfg"));
    unversioned << "seed 4\n";
    unversioned.close();
    CHECK_THROWS_AS(read_run_config(dir.file("nover.cfg")), Error);

    // Defaults carry the standard hyperparameters.
    std::ofstream minimal(dir.file("minimal.cfg"));
    minimal << "config_version 1\n";
    minimal.close();
    const auto defaults = read_run_config(dir.file("minimal.cfg"));
    CHECK(defaults.lr_init == 1e-4);
    CHECK(defaults.lr_halve_every == 5);
    CHECK(defaults.batch_size == 1);
    CHECK(defaults.weights.lambda_normal == 1.6e-4);
    CHECK(defaults.weights.lambda_edge == 1.6e-4);
    CHECK(defaults.weights.epsilon == 0.001);
    CHECK(defaults.weights.lambda_lap == 0.005);
    CHECK(defaults.epochs_synthetic == 10);
    CHECK(defaults.epochs_mixed == 10);
}

TEST_CASE("dataset manifest round trip and invariants") {
    TempDir dir("manifest");
    const auto model = build_toy_model(5, 162, 3, 2, 0.2);
    const auto samples = sample_dataset(model, 3, 1, 44);
    const auto manifest = write_synthetic_dataset(dir.path.string(), model, samples, 0.4, 44);
    CHECK(manifest.bundles.size() == 6);

    const auto dataset = load_dataset(dir.file("manifest.json"));
    CHECK(dataset.samples.size() == 6);
    CHECK(dataset.tpl.mesh.vertex_count() == 162);
    int synthetic = 0;
    for (const auto& s : dataset.samples) {
        if (s.synthetic) {
            ++synthetic;
            CHECK(s.ground_truth.size() == 162);
        } else {
            CHECK(s.input.has_normals());
        }
    }
    CHECK(synthetic >= 1);

    // A synthetic bundle with its ground truth stripped must fail to load.
    auto broken = read_manifest(dir.file("manifest.json"));
    bool stripped = false;
    for (auto& b : broken.bundles)
        if (b.provenance == "synthetic" && !stripped) {
            b.ground_truth.clear();
            stripped = true;
        }
    REQUIRE(stripped);
    write_manifest(dir.file("broken.json"), broken);
    CHECK_THROWS_AS(load_dataset(dir.file("broken.json")), Error);
}

TEST_CASE("small full run logs every epoch with sane fields") {
    Toy toy(0.5, 4, 1);
    TempDir dir("run");
    toy.config.checkpoint_dir = dir.file("ckpts");
    Trainer trainer(toy.dataset, toy.config);
    trainer.train_full();

    const auto& log = trainer.log();
    CHECK(log.epochs.size() == 6);  // 3 phases x (1 synthetic + 1 mixed)
    for (const auto& e : log.epochs) {
        CHECK(e.samples > 0);
        CHECK(e.lr > 0.0);
        CHECK(std::isfinite(e.mean_total));
        CHECK((e.stage == "synthetic" || e.stage == "mixed"));
    }
    CHECK(std::filesystem::exists(dir.file("ckpts/final.ckpt")));
    CHECK(std::filesystem::exists(dir.file("ckpts/phase1_epoch00.ckpt")));
}
