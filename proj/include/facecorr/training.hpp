#pragma once

#include "facecorr/losses.hpp"
#include "facecorr/network.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace facecorr {

struct TrainSample {
    PointCloud input;                // scan in the template frame
    std::vector<Vec3> ground_truth;  // corresponded vertices; empty for real scans
    bool synthetic = false;          // supervised when true
    bool neutral = false;
    int subject = -1;
};

struct Dataset {
    FaceTemplate tpl;
    std::vector<TrainSample> samples;
};

enum class PhaseId { IdentityOnly = 1, ExpressionOnly = 2, Joint = 3 };
const char* to_string(PhaseId phase);

struct TrainConfig {
    uint64_t seed = 7;
    ArchConfig arch;
    double lr_init = 1e-4;
    int lr_halve_every = 5;
    int batch_size = 1;
    int epochs_synthetic = 10;  // synthetic-only sub-stage length, per phase
    int epochs_mixed = 10;      // mixed sub-stage length, per phase
    LossWeights weights;
    bool auto_switch = true;  // counterpart-mode switch on loss saturation
    int switch_window = 5;
    int switch_patience = 3;
    double switch_min_improvement = 0.01;
    bool template_bias_init = true;
    std::string checkpoint_dir;  // empty: keep checkpoints off disk
};

void validate(const TrainConfig& config);

struct EpochRecord {
    int phase = 0;
    std::string stage;  // "synthetic" or "mixed"
    int epoch = 0;      // 0-based within the phase, spanning both stages
    double lr = 0.0;
    int samples = 0;
    double mean_total = 0.0;
    double mean_vertex = 0.0;
    double mean_normal = 0.0;
    double mean_edge = 0.0;
    double mean_lap = 0.0;
    std::string counterpart_mode;
    bool switched_here = false;
};

struct TrainingLog {
    std::vector<EpochRecord> epochs;
    int switch_count = 0;
    int switch_global_epoch = -1;
};

/// Three-phase trainer: identity (neutral scans), expression (identity
/// decoder frozen), then joint, each phase running a synthetic-only sub-stage
/// followed by a mixed sub-stage. Deterministic under the config seed.
class Trainer {
public:
    Trainer(const Dataset& dataset, const TrainConfig& config);

    void run_phase(PhaseId phase);
    void train_full();  // phases 1 -> 2 -> 3

    ShapeModel& model() { return model_; }
    const ShapeModel& model() const { return model_; }
    const TrainingLog& log() const { return log_; }
    const TrainConfig& config() const { return config_; }
    CounterpartMode counterpart_mode() const { return mode_; }

    /// Closed-form schedule: lr_init * 0.5^floor(e / halve_every).
    double learning_rate(int epoch_in_phase) const;

    std::vector<bool> trainable_mask(PhaseId phase) const;

private:
    std::vector<int> phase_samples(PhaseId phase, bool synthetic_only) const;
    const ScanIndices& scan_indices(int sample_index);
    void update_saturation_monitor(double epoch_mean);

    const Dataset& dataset_;
    TrainConfig config_;
    LossContext ctx_;
    ShapeModel model_;
    TrainingLog log_;
    CounterpartMode mode_;
    bool switched_ = false;
    int global_epoch_ = 0;
    std::vector<double> loss_history_;
    std::map<int, ScanIndices> index_cache_;
};

struct Correspondence {
    TriMesh mesh;  // template topology carrying the corresponded vertices
    LatentCode code;
};

/// Map a preprocessed scan (inside the unit sphere) to a corresponded mesh
/// with the template's topology.
Correspondence infer_correspondence(const ShapeModel& model, const PointCloud& cloud, const FaceTemplate& tpl);

}  // namespace facecorr
