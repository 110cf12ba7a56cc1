#pragma once

#include "facecorr/geometry.hpp"
#include "facecorr/spatial.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace facecorr {

enum class CounterpartMode { ClosestVertex, NormalRay };

const char* to_string(CounterpartMode mode);

struct LossWeights {
    double lambda_normal = 1.6e-4;  // weight of the normal term
    double lambda_edge = 1.6e-4;    // weight of the edge-length term
    double lambda_lap = 0.005;      // weight of the mouth Laplacian term
    double epsilon = 0.001;         // flying-vertex squared-distance cutoff
    CounterpartMode counterpart_mode = CounterpartMode::ClosestVertex;
    double cone_half_angle = 0.2617993877991494;  // 15 degrees
    double ray_max_t = 0.1;
};

void validate(const LossWeights& w);

/// Scalar term plus its gradient with respect to the predicted vertices.
struct TermValue {
    double value = 0.0;
    std::vector<Vec3> grad;
};

/// Sum of absolute coordinate differences (plain sum, not a mean).
TermValue l1_vertex(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt);

/// (1/n) sum of (1 - target_i . normal_i) over unit normal fields.
double normal_cosine_value(const std::vector<Vec3>& normals, const std::vector<Vec3>& targets);

/// Same, with normals derived from the predicted mesh so the gradient chains
/// through the vertex-normal computation.
TermValue normal_cosine(const TriMesh& pred_mesh, const std::vector<Vec3>& target_normals);

/// Mean absolute deviation of predicted/reference edge-length ratios from 1.
TermValue edge_ratio(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref, const EdgeList& edges);

/// Two-sided squared-distance Chamfer with the flying-vertex cutoff: any
/// directional term whose nearest squared distance exceeds epsilon is dropped
/// and counted instead. Counterpart maps are exposed for reuse and treated as
/// constants during differentiation.
struct ChamferResult {
    double value = 0.0;
    std::vector<Vec3> grad;
    std::vector<int> pred_counterpart;  // per pred vertex: raw index
    std::vector<double> pred_d2;
    std::vector<int> raw_counterpart;   // per raw point: pred index
    std::vector<double> raw_d2;
    int flying_pred = 0;
    int flying_raw = 0;
};

ChamferResult chamfer(const std::vector<Vec3>& pred, const PointCloud& raw, double epsilon,
                      const KdTree* raw_index = nullptr);

/// Cosine loss between predicted vertex normals and raw-scan normals at
/// counterpart points. Counterparts come from the Chamfer closest-vertex map
/// or, in ray mode, from the normal-ray query with closest-vertex fallback.
/// Pairs whose counterpart squared distance exceeds epsilon are excluded.
struct UnsupNormalResult {
    double value = 0.0;
    std::vector<Vec3> grad;
    std::vector<int> counterpart;  // raw point index used per pred vertex (-1 when excluded)
    int excluded = 0;
};

UnsupNormalResult unsup_normal(const TriMesh& pred_mesh, const PointCloud& raw, CounterpartMode mode, double epsilon,
                               const ChamferResult& closest, const Bvh* ray_index, double cone_half_angle,
                               double ray_max_t);

/// Euclidean norm of the stacked umbrella-Laplacian rows over the mouth
/// vertex set.
TermValue laplacian_reg(const std::vector<Vec3>& pred, const GraphLaplacian& mouth_lap);

/// Everything total_loss needs about the template, precomputed once.
struct LossContext {
    const FaceTemplate* tpl = nullptr;
    EdgeList edges;
    GraphLaplacian mouth_lap;

    static LossContext build(const FaceTemplate& tpl);
};

/// Per-scan acceleration caches (the raw scan is immutable across epochs).
struct ScanIndices {
    std::unique_ptr<KdTree> kd;
    std::unique_ptr<Bvh> rays;

    static ScanIndices build(const PointCloud& raw, bool with_rays);
};

/// One training sample as the loss suite sees it.
struct SampleView {
    const PointCloud* raw = nullptr;                  // input scan
    const std::vector<Vec3>* ground_truth = nullptr;  // corresponded vertices, when known
    bool supervised = false;
    bool expressive = false;
};

struct LossReport {
    bool supervised = false;
    bool lap_applied = false;
    double vertex_term = 0.0;  // L1 or Chamfer, unweighted
    double normal_term = 0.0;
    double edge_term = 0.0;
    double lap_term = 0.0;
    double total = 0.0;
    LossWeights weights;
    std::vector<Vec3> grad;        // d total / d pred vertices
    std::vector<int> counterpart;  // pred -> raw counterpart map (unsupervised)
    int flying_pred = 0;
    int flying_raw = 0;
    int normal_excluded = 0;
    uint64_t routing_hash = 0;  // hash of every argmin/sign/cutoff decision
};

/// Weighted composition: supervised samples use L1 + normal + edge against
/// the ground truth; unsupervised samples use Chamfer + normal-at-counterpart
/// + edge against the template, plus the mouth Laplacian for expressive
/// samples.
LossReport total_loss(const std::vector<Vec3>& pred, const SampleView& sample, const LossContext& ctx,
                      const LossWeights& weights, const ScanIndices* indices = nullptr);

}  // namespace facecorr
