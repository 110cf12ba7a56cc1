#include "facecorr/training.hpp"

#include "facecorr/checkpoint.hpp"
#include "facecorr/error.hpp"
#include "facecorr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace facecorr {

const char* to_string(PhaseId phase) {
    switch (phase) {
        case PhaseId::IdentityOnly: return "identity";
        case PhaseId::ExpressionOnly: return "expression";
        case PhaseId::Joint: return "joint";
    }
    return "?";
}

void validate(const TrainConfig& config) {
    require_data(config.batch_size >= 1, "batch size must be at least 1");
    require_data(config.lr_init > 0.0, "learning rate must be positive");
    require_data(config.lr_halve_every >= 1, "lr halving interval must be at least 1 epoch");
    require_data(config.epochs_synthetic >= 0 && config.epochs_mixed >= 0, "epoch budgets must be nonnegative");
    require_data(config.epochs_synthetic + config.epochs_mixed >= 1, "phase epoch budget is empty");
    validate(config.weights);
}

Trainer::Trainer(const Dataset& dataset, const TrainConfig& config)
    : dataset_(dataset),
      config_(config),
      ctx_(LossContext::build(dataset.tpl)),
      model_(config.arch, config.seed, config.template_bias_init ? &dataset.tpl.mesh.vertices : nullptr),
      mode_(config.weights.counterpart_mode) {
    validate(config_);
    require_data(config_.arch.points == dataset_.tpl.mesh.vertex_count(),
                 "model output size (" + std::to_string(config_.arch.points) + ") must match the template (" +
                     std::to_string(dataset_.tpl.mesh.vertex_count()) + " vertices)");
    require_data(!dataset_.samples.empty(), "dataset is empty");
    for (size_t i = 0; i < dataset_.samples.size(); ++i) {
        const auto& s = dataset_.samples[i];
        require_data(s.input.size() > 0, "sample " + std::to_string(i) + " has an empty input cloud");
        if (s.synthetic)
            require_data(static_cast<int>(s.ground_truth.size()) == config_.arch.points,
                         "synthetic sample " + std::to_string(i) + " lacks corresponded ground truth");
        else
            require_data(s.input.has_normals(),
                         "real sample " + std::to_string(i) + " has no normals (estimate them at load time)");
    }
}

double Trainer::learning_rate(int epoch_in_phase) const {
    return config_.lr_init * std::pow(0.5, epoch_in_phase / config_.lr_halve_every);
}

std::vector<bool> Trainer::trainable_mask(PhaseId phase) const {
    auto params = const_cast<ShapeModel&>(model_).parameters();
    std::vector<bool> mask(params.size(), true);
    auto starts_with = [](const std::string& s, const std::string& prefix) {
        return s.rfind(prefix, 0) == 0;
    };
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& name = params[i].name;
        switch (phase) {
            case PhaseId::IdentityOnly:
                mask[i] = starts_with(name, "encoder.trunk") || starts_with(name, "encoder.head_id") ||
                          starts_with(name, "dec_id.");
                break;
            case PhaseId::ExpressionOnly:
                mask[i] = starts_with(name, "encoder.trunk") || starts_with(name, "encoder.head_exp") ||
                          starts_with(name, "dec_exp.");
                break;
            case PhaseId::Joint:
                mask[i] = true;
                break;
        }
    }
    return mask;
}

std::vector<int> Trainer::phase_samples(PhaseId phase, bool synthetic_only) const {
    std::vector<int> out;
    for (size_t i = 0; i < dataset_.samples.size(); ++i) {
        const auto& s = dataset_.samples[i];
        if (phase == PhaseId::IdentityOnly && !s.neutral) continue;
        if (phase == PhaseId::ExpressionOnly && s.neutral) continue;
        if (synthetic_only && !s.synthetic) continue;
        out.push_back(static_cast<int>(i));
    }
    return out;
}

const ScanIndices& Trainer::scan_indices(int sample_index) {
    auto it = index_cache_.find(sample_index);
    if (it == index_cache_.end())
        it = index_cache_.emplace(sample_index, ScanIndices::build(dataset_.samples[sample_index].input, true)).first;
    return it->second;
}

void Trainer::update_saturation_monitor(double epoch_mean) {
    loss_history_.push_back(epoch_mean);
    if (!config_.auto_switch || switched_ || mode_ != CounterpartMode::ClosestVertex) return;

    const int w = config_.switch_window;
    const int t = static_cast<int>(loss_history_.size()) - 1;
    if (t < w + config_.switch_patience - 1) return;

    auto smoothed = [&](int idx) {
        const int lo = std::max(0, idx - w + 1);
        double sum = 0.0;
        for (int k = lo; k <= idx; ++k) sum += loss_history_[k];
        return sum / (idx - lo + 1);
    };
    for (int back = 0; back < config_.switch_patience; ++back) {
        const int idx = t - back;
        const double prev = smoothed(idx - 1);
        const double cur = smoothed(idx);
        const double improvement = (prev - cur) / std::max(std::abs(prev), 1e-12);
        if (improvement >= config_.switch_min_improvement) return;
    }
    switched_ = true;
    mode_ = CounterpartMode::NormalRay;
    ++log_.switch_count;
    log_.switch_global_epoch = t;
}

void Trainer::run_phase(PhaseId phase) {
    const auto synthetic_pool = phase_samples(phase, /*synthetic_only=*/true);
    const auto mixed_pool = phase_samples(phase, /*synthetic_only=*/false);
    require_data(!mixed_pool.empty(),
                 std::string("phase '") + to_string(phase) + "' has no samples after filtering");
    require_data(config_.epochs_synthetic == 0 || !synthetic_pool.empty(),
                 std::string("phase '") + to_string(phase) + "' has no synthetic samples for its first sub-stage");

    auto params = model_.parameters();
    const auto mask = trainable_mask(phase);
    Adam opt(params);

    const int total_epochs = config_.epochs_synthetic + config_.epochs_mixed;
    for (int epoch = 0; epoch < total_epochs; ++epoch) {
        const bool mixed_stage = epoch >= config_.epochs_synthetic;
        const auto& pool = mixed_stage ? mixed_pool : synthetic_pool;
        const double lr = learning_rate(epoch);

        std::vector<int> order = pool;
        Rng shuffle_rng(derive_seed(config_.seed, "epoch-shuffle",
                                    (static_cast<uint64_t>(phase) << 32) | static_cast<uint64_t>(epoch)));
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.index(static_cast<int>(i))]);

        EpochRecord rec;
        rec.phase = static_cast<int>(phase);
        rec.stage = mixed_stage ? "mixed" : "synthetic";
        rec.epoch = epoch;
        rec.lr = lr;
        rec.samples = static_cast<int>(order.size());
        rec.counterpart_mode = to_string(mode_);

        size_t cursor = 0;
        while (cursor < order.size()) {
            const size_t batch_end = std::min(order.size(), cursor + static_cast<size_t>(config_.batch_size));
            const double inv_batch = 1.0 / static_cast<double>(batch_end - cursor);
            model_.zero_grads();
            for (size_t k = cursor; k < batch_end; ++k) {
                const int si = order[k];
                const TrainSample& sample = dataset_.samples[si];

                Tape tape;
                const auto fwd = model_.forward(tape, sample.input, phase == PhaseId::IdentityOnly);
                const auto pred = tensor_to_vertices(tape.value_tensor(fwd.s_hat));

                SampleView view;
                view.supervised = sample.synthetic;
                view.ground_truth = sample.synthetic ? &sample.ground_truth : nullptr;
                view.raw = &sample.input;
                view.expressive = !sample.neutral;
                LossWeights weights = config_.weights;
                weights.counterpart_mode = mode_;

                const auto report =
                    total_loss(pred, view, ctx_, weights, sample.synthetic ? nullptr : &scan_indices(si));

                Tensor seed = vertices_to_tensor(report.grad);
                if (inv_batch != 1.0) seed.map() *= inv_batch;
                tape.backward(fwd.s_hat, seed);

                rec.mean_total += report.total;
                rec.mean_vertex += report.vertex_term;
                rec.mean_normal += report.normal_term;
                rec.mean_edge += report.edge_term;
                rec.mean_lap += report.lap_term;
            }
            opt.step(params, lr, &mask);
            cursor = batch_end;
        }

        const double denom = static_cast<double>(std::max<size_t>(1, order.size()));
        rec.mean_total /= denom;
        rec.mean_vertex /= denom;
        rec.mean_normal /= denom;
        rec.mean_edge /= denom;
        rec.mean_lap /= denom;

        const bool was_switched = switched_;
        update_saturation_monitor(rec.mean_total);
        rec.switched_here = !was_switched && switched_;
        log_.epochs.push_back(rec);
        ++global_epoch_;

        if (!config_.checkpoint_dir.empty()) {
            std::filesystem::create_directories(config_.checkpoint_dir);
            CheckpointInfo info;
            info.arch = config_.arch;
            info.seed = config_.seed;
            info.phase = static_cast<int>(phase);
            info.epoch = epoch;
            info.weights = config_.weights;
            info.weights.counterpart_mode = mode_;
            char name[64];
            std::snprintf(name, sizeof name, "phase%d_epoch%02d.ckpt", static_cast<int>(phase), epoch);
            save_checkpoint((std::filesystem::path(config_.checkpoint_dir) / name).string(), model_, info);
        }
    }
}

void Trainer::train_full() {
    run_phase(PhaseId::IdentityOnly);
    run_phase(PhaseId::ExpressionOnly);
    run_phase(PhaseId::Joint);
    if (!config_.checkpoint_dir.empty()) {
        CheckpointInfo info;
        info.arch = config_.arch;
        info.seed = config_.seed;
        info.phase = 3;
        info.epoch = config_.epochs_synthetic + config_.epochs_mixed;
        info.weights = config_.weights;
        info.weights.counterpart_mode = mode_;
        save_checkpoint((std::filesystem::path(config_.checkpoint_dir) / "final.ckpt").string(), model_, info);
    }
}

Correspondence infer_correspondence(const ShapeModel& model, const PointCloud& cloud, const FaceTemplate& tpl) {
    validate(cloud);
    require_data(cloud.size() > 0, "cannot correspond an empty cloud");
    for (const auto& p : cloud.points)
        require_data(p.norm() <= 1.0 + 1e-6,
                     "input cloud is not preprocessed (point outside the unit sphere)");
    require_data(model.arch().points == tpl.mesh.vertex_count(), "model and template vertex counts differ");

    Correspondence out;
    out.code = model.encode(cloud);
    const auto decoded = model.decode(out.code);
    out.mesh.vertices = decoded.s_hat;
    out.mesh.faces = tpl.mesh.faces;
    return out;
}

}  // namespace facecorr
