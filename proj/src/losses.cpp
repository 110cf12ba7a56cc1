#include "facecorr/losses.hpp"

#include "facecorr/error.hpp"

#include <cmath>
#include <limits>

namespace facecorr {

namespace {

void hash_mix(uint64_t& h, uint64_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); }

void hash_sign(uint64_t& h, double v) { hash_mix(h, v > 0.0 ? 1 : (v < 0.0 ? 2 : 0)); }

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

const char* to_string(CounterpartMode mode) {
    return mode == CounterpartMode::ClosestVertex ? "closest_vertex" : "normal_ray";
}

void validate(const LossWeights& w) {
    require_data(w.lambda_normal >= 0.0 && w.lambda_edge >= 0.0 && w.lambda_lap >= 0.0,
                 "loss weights must be nonnegative");
    require_data(w.epsilon > 0.0, "flying-vertex cutoff must be positive");
    require_data(w.cone_half_angle > 0.0 && w.ray_max_t > 0.0, "ray counterpart parameters must be positive");
}

TermValue l1_vertex(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
    require_data(pred.size() == gt.size(), "l1_vertex shape mismatch: " + std::to_string(pred.size()) + " vs " +
                                               std::to_string(gt.size()) + " vertices");
    TermValue out;
    out.grad.assign(pred.size(), Vec3::Zero());
    for (size_t i = 0; i < pred.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = pred[i][c] - gt[i][c];
            out.value += std::abs(d);
            out.grad[i][c] = sgn(d);
        }
    return out;
}

double normal_cosine_value(const std::vector<Vec3>& normals, const std::vector<Vec3>& targets) {
    require_data(normals.size() == targets.size(), "normal field size mismatch");
    require_data(!normals.empty(), "normal fields are empty");
    double sum = 0.0;
    for (size_t i = 0; i < normals.size(); ++i) {
        require_data(targets[i].norm() > 1e-12, "zero-length target normal at vertex " + std::to_string(i));
        require_data(normals[i].norm() > 1e-12, "zero-length normal at vertex " + std::to_string(i));
        sum += 1.0 - targets[i].dot(normals[i]);
    }
    return sum / static_cast<double>(normals.size());
}

TermValue normal_cosine(const TriMesh& pred_mesh, const std::vector<Vec3>& target_normals) {
    const auto normals = vertex_normals(pred_mesh);
    TermValue out;
    out.value = normal_cosine_value(normals.normals, target_normals);

    const double n = static_cast<double>(target_normals.size());
    std::vector<Vec3> dnormal(target_normals.size());
    for (size_t i = 0; i < target_normals.size(); ++i) dnormal[i] = -target_normals[i] / n;
    out.grad.assign(pred_mesh.vertices.size(), Vec3::Zero());
    vertex_normals_backward(pred_mesh, dnormal, out.grad);
    return out;
}

TermValue edge_ratio(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref, const EdgeList& edges) {
    require_data(pred.size() == ref.size(), "edge_ratio shape mismatch");
    require_data(!edges.empty(), "edge_ratio requires a non-empty edge list");
    TermValue out;
    out.grad.assign(pred.size(), Vec3::Zero());
    const double scale = 1.0 / static_cast<double>(edges.size());
    for (const auto& [i, j] : edges) {
        const double ref_len = (ref[i] - ref[j]).norm();
        require_data(ref_len > 0.0,
                     "zero-length reference edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        const Vec3 d = pred[i] - pred[j];
        const double pred_len = d.norm();
        const double r = pred_len / ref_len;
        out.value += std::abs(r - 1.0) * scale;
        if (pred_len > 0.0) {
            const Vec3 g = (sgn(r - 1.0) * scale / (ref_len * pred_len)) * d;
            out.grad[i] += g;
            out.grad[j] -= g;
        }
    }
    return out;
}

ChamferResult chamfer(const std::vector<Vec3>& pred, const PointCloud& raw, double epsilon,
                      const KdTree* raw_index) {
    require_data(!pred.empty() && raw.size() > 0, "chamfer requires two non-empty point sets");
    require_data(epsilon > 0.0, "chamfer cutoff must be positive");

    std::unique_ptr<KdTree> local_raw;
    if (!raw_index) {
        local_raw = std::make_unique<KdTree>(raw.points);
        raw_index = local_raw.get();
    }
    const KdTree pred_index(pred);

    ChamferResult out;
    out.grad.assign(pred.size(), Vec3::Zero());
    out.pred_counterpart.resize(pred.size());
    out.pred_d2.resize(pred.size());
    out.raw_counterpart.resize(raw.size());
    out.raw_d2.resize(raw.size());

    for (size_t i = 0; i < pred.size(); ++i) {
        const auto hit = raw_index->nearest(pred[i]);
        out.pred_counterpart[i] = hit.index;
        out.pred_d2[i] = hit.d2;
        if (hit.d2 > epsilon) {
            ++out.flying_pred;
            continue;
        }
        out.value += hit.d2;
        out.grad[i] += 2.0 * (pred[i] - raw.points[hit.index]);
    }
    for (int j = 0; j < raw.size(); ++j) {
        const auto hit = pred_index.nearest(raw.points[j]);
        out.raw_counterpart[j] = hit.index;
        out.raw_d2[j] = hit.d2;
        if (hit.d2 > epsilon) {
            ++out.flying_raw;
            continue;
        }
        out.value += hit.d2;
        out.grad[hit.index] += 2.0 * (pred[hit.index] - raw.points[j]);
    }
    return out;
}

UnsupNormalResult unsup_normal(const TriMesh& pred_mesh, const PointCloud& raw, CounterpartMode mode, double epsilon,
                               const ChamferResult& closest, const Bvh* ray_index, double cone_half_angle,
                               double ray_max_t) {
    require_data(raw.has_normals(), "unsupervised normal loss requires raw-scan normals");
    const int n = pred_mesh.vertex_count();
    require_data(static_cast<int>(closest.pred_counterpart.size()) == n,
                 "closest-vertex counterpart map does not match the predicted mesh");

    const auto normals = vertex_normals(pred_mesh);

    UnsupNormalResult out;
    out.counterpart.assign(n, -1);
    std::vector<Vec3> dnormal(n, Vec3::Zero());
    const double inv_n = 1.0 / static_cast<double>(n);

    for (int i = 0; i < n; ++i) {
        int cp = closest.pred_counterpart[i];
        double d2 = closest.pred_d2[i];
        if (mode == CounterpartMode::NormalRay) {
            require_data(ray_index != nullptr, "normal-ray mode requires a ray index over the raw scan");
            const auto hit = ray_index->ray_counterpart(pred_mesh.vertices[i], normals.normals[i], cone_half_angle,
                                                        ray_max_t);
            if (hit) {
                cp = hit->index;
                d2 = hit->distance * hit->distance;
            }
        }
        if (d2 > epsilon) {
            ++out.excluded;
            continue;
        }
        out.counterpart[i] = cp;
        const Vec3& target = raw.normals[cp];
        out.value += (1.0 - target.dot(normals.normals[i])) * inv_n;
        dnormal[i] = -target * inv_n;
    }

    out.grad.assign(n, Vec3::Zero());
    vertex_normals_backward(pred_mesh, dnormal, out.grad);
    return out;
}

TermValue laplacian_reg(const std::vector<Vec3>& pred, const GraphLaplacian& mouth_lap) {
    const auto rows = mouth_lap.apply(pred);
    double ss = 0.0;
    for (const auto& row : rows) ss += row.squaredNorm();
    TermValue out;
    out.value = std::sqrt(ss);
    out.grad.assign(pred.size(), Vec3::Zero());
    if (out.value > 0.0) {
        for (size_t r = 0; r < rows.size(); ++r) {
            const Vec3 drow = rows[r] / out.value;
            out.grad[mouth_lap.rows[r]] += drow;
            const double w = 1.0 / static_cast<double>(mouth_lap.neighbors[r].size());
            for (int j : mouth_lap.neighbors[r]) out.grad[j] -= w * drow;
        }
    }
    return out;
}

LossContext LossContext::build(const FaceTemplate& tpl) {
    validate(tpl);
    LossContext ctx;
    ctx.tpl = &tpl;
    ctx.edges = edge_graph(tpl.mesh);
    ctx.mouth_lap = graph_laplacian(tpl.mesh, tpl.mouth_indices);
    return ctx;
}

ScanIndices ScanIndices::build(const PointCloud& raw, bool with_rays) {
    ScanIndices out;
    out.kd = std::make_unique<KdTree>(raw.points);
    if (with_rays) out.rays = std::make_unique<Bvh>(Bvh::over_points(raw.points));
    return out;
}

LossReport total_loss(const std::vector<Vec3>& pred, const SampleView& sample, const LossContext& ctx,
                      const LossWeights& weights, const ScanIndices* indices) {
    validate(weights);
    require(ctx.tpl != nullptr, ErrorCode::Internal, "loss context is not initialized");
    const int n = ctx.tpl->mesh.vertex_count();
    require_data(static_cast<int>(pred.size()) == n, "prediction has " + std::to_string(pred.size()) +
                                                         " vertices, template has " + std::to_string(n));

    LossReport report;
    report.weights = weights;
    report.supervised = sample.supervised;
    report.grad.assign(pred.size(), Vec3::Zero());
    uint64_t h = 0xcbf29ce484222325ULL;

    TriMesh pred_mesh{pred, ctx.tpl->mesh.faces};

    auto accumulate = [&](const std::vector<Vec3>& grad, double weight) {
        for (size_t i = 0; i < grad.size(); ++i) report.grad[i] += weight * grad[i];
    };

    if (sample.supervised) {
        require_data(sample.ground_truth != nullptr, "supervised sample lacks ground truth");
        const auto& gt = *sample.ground_truth;

        const auto vt = l1_vertex(pred, gt);
        report.vertex_term = vt.value;
        accumulate(vt.grad, 1.0);
        for (const auto& g : vt.grad)
            for (int c = 0; c < 3; ++c) hash_sign(h, g[c]);

        const TriMesh gt_mesh{gt, ctx.tpl->mesh.faces};
        const auto gt_normals = vertex_normals(gt_mesh);
        const auto nc = normal_cosine(pred_mesh, gt_normals.normals);
        report.normal_term = nc.value;
        accumulate(nc.grad, weights.lambda_normal);

        const auto er = edge_ratio(pred, gt, ctx.edges);
        report.edge_term = er.value;
        accumulate(er.grad, weights.lambda_edge);
        for (const auto& [i, j] : ctx.edges)
            hash_sign(h, (pred[i] - pred[j]).norm() - (gt[i] - gt[j]).norm());
    } else {
        require_data(sample.raw != nullptr, "unsupervised sample lacks a raw scan");
        const PointCloud& raw = *sample.raw;

        ScanIndices local;
        if (!indices) {
            local = ScanIndices::build(raw, weights.counterpart_mode == CounterpartMode::NormalRay);
            indices = &local;
        }

        const auto cd = chamfer(pred, raw, weights.epsilon, indices->kd.get());
        report.vertex_term = cd.value;
        report.flying_pred = cd.flying_pred;
        report.flying_raw = cd.flying_raw;
        report.counterpart = cd.pred_counterpart;
        accumulate(cd.grad, 1.0);
        for (size_t i = 0; i < cd.pred_counterpart.size(); ++i) {
            hash_mix(h, static_cast<uint64_t>(cd.pred_counterpart[i]));
            hash_mix(h, cd.pred_d2[i] > weights.epsilon);
        }
        for (size_t j = 0; j < cd.raw_counterpart.size(); ++j) {
            hash_mix(h, static_cast<uint64_t>(cd.raw_counterpart[j]));
            hash_mix(h, cd.raw_d2[j] > weights.epsilon);
        }

        const auto un = unsup_normal(pred_mesh, raw, weights.counterpart_mode, weights.epsilon, cd,
                                     indices->rays.get(), weights.cone_half_angle, weights.ray_max_t);
        report.normal_term = un.value;
        report.normal_excluded = un.excluded;
        accumulate(un.grad, weights.lambda_normal);
        for (int cp : un.counterpart) hash_mix(h, static_cast<uint64_t>(cp + 1));

        const auto er = edge_ratio(pred, ctx.tpl->mesh.vertices, ctx.edges);
        report.edge_term = er.value;
        accumulate(er.grad, weights.lambda_edge);
        for (const auto& [i, j] : ctx.edges)
            hash_sign(h, (pred[i] - pred[j]).norm() - (ctx.tpl->mesh.vertices[i] - ctx.tpl->mesh.vertices[j]).norm());

        if (sample.expressive) {
            const auto lap = laplacian_reg(pred, ctx.mouth_lap);
            report.lap_term = lap.value;
            report.lap_applied = true;
            accumulate(lap.grad, weights.lambda_lap);
            hash_mix(h, lap.value == 0.0);
        }
    }

    report.total = report.vertex_term + weights.lambda_normal * report.normal_term +
                   weights.lambda_edge * report.edge_term +
                   (report.lap_applied ? weights.lambda_lap * report.lap_term : 0.0);
    report.routing_hash = h;
    return report;
}

}  // namespace facecorr
