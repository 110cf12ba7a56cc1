#include "facecorr/gradcheck.hpp"

#include "facecorr/autodiff.hpp"
#include "facecorr/error.hpp"
#include "facecorr/losses.hpp"
#include "facecorr/network.hpp"
#include "facecorr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace facecorr {

namespace {

void hash_mix(uint64_t& h, uint64_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); }

struct Probe {
    double value = 0.0;
    uint64_t routing = 0;
};

// Central differences carry O(h^2) truncation plus cancellation noise, so a
// gradient entry whose analytic and numeric values are both below this floor
// is numerically zero on both sides and counts as agreeing. Anything above
// the floor must meet the relative threshold.
double noise_floor(double value_scale) { return 1e-6 * std::max(1.0, std::abs(value_scale)); }

void record_entry(GradCheckEntry& entry, double fd, double analytic, double value_scale) {
    ++entry.checked;
    const double denom = std::max(std::abs(fd), std::abs(analytic));
    if (denom <= noise_floor(value_scale)) return;
    entry.max_rel_err = std::max(entry.max_rel_err, std::abs(fd - analytic) / denom);
}

struct Instance {
    FaceTemplate tpl;
    LossContext ctx;
    std::vector<Vec3> pred;
    std::vector<Vec3> gt;
    std::vector<Vec3> gt_normals;
    PointCloud raw;
    LossWeights weights;
};

// Jittered grid patch template with an interior mouth region; generic
// geometry (no symmetric ties).
Instance make_instance(uint64_t seed, int vertices) {
    require_data(vertices >= 20, "gradcheck needs at least 20 vertices");
    Rng rng(derive_seed(seed, "gradcheck-instance"));

    int cols = 5;
    while ((vertices % cols) != 0) ++cols;
    const int rows = vertices / cols;
    require_data(rows >= 3 && cols >= 3, "vertex count does not factor into a usable grid");

    Instance inst;
    auto& mesh = inst.tpl.mesh;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            mesh.vertices.emplace_back(0.2 * c + rng.normal(0.0, 0.02), 0.2 * r + rng.normal(0.0, 0.02),
                                       rng.normal(0.0, 0.05));
    auto at = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            mesh.faces.push_back({at(r, c), at(r, c + 1), at(r + 1, c)});
            mesh.faces.push_back({at(r, c + 1), at(r + 1, c + 1), at(r + 1, c)});
        }
    inst.tpl.landmarks = {{"a", 0}, {"b", cols - 1}, {"c", at(rows - 1, 0)}, {"d", at(rows - 1, cols - 1)},
                          {"e", at(rows / 2, cols / 2)}};
    for (int c = 1; c + 1 < cols; ++c) inst.tpl.mouth_indices.push_back(at(rows / 2, c));
    inst.ctx = LossContext::build(inst.tpl);

    // Prediction: a smoothly deformed copy of the template.
    inst.pred = mesh.vertices;
    for (auto& p : inst.pred) p += Vec3(rng.normal(0.0, 0.03), rng.normal(0.0, 0.03), rng.normal(0.0, 0.05));

    // Ground truth: offset with a margin away from the L1 kink in every
    // coordinate.
    inst.gt = inst.pred;
    for (auto& p : inst.gt)
        for (int c = 0; c < 3; ++c) {
            const double mag = rng.uniform(0.05, 0.2);
            p[c] += rng.uniform() < 0.5 ? -mag : mag;
        }
    const TriMesh gt_mesh{inst.gt, mesh.faces};
    inst.gt_normals = vertex_normals(gt_mesh).normals;

    // Raw scan: noisy copy of the prediction (most points inside the cutoff)
    // plus a far cluster of flying points. Normals come from the raw points'
    // own surface so the cosine term sits away from its minimum and its
    // gradient is nonzero.
    for (size_t i = 0; i < inst.pred.size(); ++i)
        inst.raw.points.push_back(inst.pred[i] + Vec3(rng.normal(0.0, 0.008), rng.normal(0.0, 0.008),
                                                      rng.normal(0.0, 0.008)));
    inst.raw.normals = vertex_normals(TriMesh{inst.raw.points, mesh.faces}).normals;
    for (int i = 0; i < 8; ++i) {
        inst.raw.points.emplace_back(10.0 + rng.uniform(), 10.0 + rng.uniform(), 10.0 + rng.uniform());
        inst.raw.normals.push_back(Vec3(0, 0, 1));
    }

    inst.weights.epsilon = 0.01;  // keeps most counterparts live, some flying
    inst.weights.lambda_normal = 1.6e-4;
    inst.weights.lambda_edge = 1.6e-4;
    inst.weights.lambda_lap = 0.005;
    return inst;
}

uint64_t hash_l1_signs(const std::vector<Vec3>& pred, const std::vector<Vec3>& gt) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < pred.size(); ++i)
        for (int c = 0; c < 3; ++c) {
            const double d = pred[i][c] - gt[i][c];
            hash_mix(h, d > 0 ? 1 : (d < 0 ? 2 : 0));
        }
    return h;
}

uint64_t hash_edge_signs(const std::vector<Vec3>& pred, const std::vector<Vec3>& ref, const EdgeList& edges) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [i, j] : edges) {
        const double d = (pred[i] - pred[j]).norm() - (ref[i] - ref[j]).norm();
        hash_mix(h, d > 0 ? 1 : (d < 0 ? 2 : 0));
    }
    return h;
}

uint64_t hash_chamfer(const ChamferResult& cd, double eps) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < cd.pred_counterpart.size(); ++i) {
        hash_mix(h, static_cast<uint64_t>(cd.pred_counterpart[i]));
        hash_mix(h, cd.pred_d2[i] > eps);
    }
    for (size_t j = 0; j < cd.raw_counterpart.size(); ++j) {
        hash_mix(h, static_cast<uint64_t>(cd.raw_counterpart[j]));
        hash_mix(h, cd.raw_d2[j] > eps);
    }
    return h;
}

uint64_t hash_counterparts(const std::vector<int>& cps) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (int cp : cps) hash_mix(h, static_cast<uint64_t>(cp + 1));
    return h;
}

// One checked quantity: an analytic gradient vector and a probe functional.
struct VertexTermCheck {
    std::string name;
    std::function<std::pair<double, std::vector<Vec3>>()> analytic;  // value + grad
    std::function<Probe()> probe;                                    // value + routing
};

void check_vertex_terms(Instance& inst, GradCheckReport& report, double h,
                        std::vector<GradCheckEntry>& entries) {
    const auto& faces = inst.tpl.mesh.faces;
    const double eps = inst.weights.epsilon;

    const auto scan = ScanIndices::build(inst.raw, /*with_rays=*/true);

    std::vector<VertexTermCheck> checks;
    checks.push_back({"l1_vertex",
                      [&]() {
                          auto t = l1_vertex(inst.pred, inst.gt);
                          return std::make_pair(t.value, t.grad);
                      },
                      [&]() {
                          auto t = l1_vertex(inst.pred, inst.gt);
                          return Probe{t.value, hash_l1_signs(inst.pred, inst.gt)};
                      }});
    checks.push_back({"normal_cosine",
                      [&]() {
                          auto t = normal_cosine(TriMesh{inst.pred, faces}, inst.gt_normals);
                          return std::make_pair(t.value, t.grad);
                      },
                      [&]() {
                          auto t = normal_cosine(TriMesh{inst.pred, faces}, inst.gt_normals);
                          return Probe{t.value, 0};
                      }});
    checks.push_back({"edge_ratio",
                      [&]() {
                          auto t = edge_ratio(inst.pred, inst.gt, inst.ctx.edges);
                          return std::make_pair(t.value, t.grad);
                      },
                      [&]() {
                          auto t = edge_ratio(inst.pred, inst.gt, inst.ctx.edges);
                          return Probe{t.value, hash_edge_signs(inst.pred, inst.gt, inst.ctx.edges)};
                      }});
    checks.push_back({"chamfer",
                      [&]() {
                          auto t = chamfer(inst.pred, inst.raw, eps, scan.kd.get());
                          return std::make_pair(t.value, t.grad);
                      },
                      [&]() {
                          auto t = chamfer(inst.pred, inst.raw, eps, scan.kd.get());
                          return Probe{t.value, hash_chamfer(t, eps)};
                      }});
    for (const auto mode : {CounterpartMode::ClosestVertex, CounterpartMode::NormalRay}) {
        checks.push_back({std::string("unsup_normal_") + to_string(mode),
                          [&, mode]() {
                              const auto cd = chamfer(inst.pred, inst.raw, eps, scan.kd.get());
                              auto t = unsup_normal(TriMesh{inst.pred, faces}, inst.raw, mode, eps, cd,
                                                    scan.rays.get(), inst.weights.cone_half_angle,
                                                    inst.weights.ray_max_t);
                              return std::make_pair(t.value, t.grad);
                          },
                          [&, mode]() {
                              const auto cd = chamfer(inst.pred, inst.raw, eps, scan.kd.get());
                              auto t = unsup_normal(TriMesh{inst.pred, faces}, inst.raw, mode, eps, cd,
                                                    scan.rays.get(), inst.weights.cone_half_angle,
                                                    inst.weights.ray_max_t);
                              uint64_t hh = hash_chamfer(cd, eps);
                              hash_mix(hh, hash_counterparts(t.counterpart));
                              return Probe{t.value, hh};
                          }});
    }
    checks.push_back({"laplacian_reg",
                      [&]() {
                          auto t = laplacian_reg(inst.pred, inst.ctx.mouth_lap);
                          return std::make_pair(t.value, t.grad);
                      },
                      [&]() {
                          auto t = laplacian_reg(inst.pred, inst.ctx.mouth_lap);
                          return Probe{t.value, t.value == 0.0};
                      }});

    SampleView supervised;
    supervised.supervised = true;
    supervised.ground_truth = &inst.gt;
    SampleView unsup;
    unsup.raw = &inst.raw;
    unsup.expressive = true;
    for (const bool sup : {true, false}) {
        for (const auto mode : {CounterpartMode::ClosestVertex, CounterpartMode::NormalRay}) {
            if (sup && mode == CounterpartMode::NormalRay) continue;
            LossWeights w = inst.weights;
            w.counterpart_mode = mode;
            const SampleView& view = sup ? supervised : unsup;
            const std::string name =
                sup ? "total_supervised" : std::string("total_unsupervised_") + to_string(mode);
            checks.push_back({name,
                              [&, w, &view = view]() {
                                  auto r = total_loss(inst.pred, view, inst.ctx, w, &scan);
                                  return std::make_pair(r.total, r.grad);
                              },
                              [&, w, &view = view]() {
                                  auto r = total_loss(inst.pred, view, inst.ctx, w, &scan);
                                  return Probe{r.total, r.routing_hash};
                              }});
        }
    }

    for (auto& check : checks) {
        GradCheckEntry entry;
        entry.name = check.name;
        const auto [value, grad] = check.analytic();
        const uint64_t base_routing = check.probe().routing;
        for (size_t i = 0; i < inst.pred.size(); ++i)
            for (int c = 0; c < 3; ++c) {
                double& x = inst.pred[i][c];
                const double saved = x;
                x = saved + h;
                const Probe up = check.probe();
                x = saved - h;
                const Probe down = check.probe();
                x = saved;
                if (up.routing != base_routing || down.routing != base_routing) {
                    ++entry.excluded;
                    continue;
                }
                const double fd = (up.value - down.value) / (2.0 * h);
                record_entry(entry, fd, grad[i][c], value);
            }
        entries.push_back(entry);
    }
    (void)report;
}

void check_parameter_grads(Instance& inst, uint64_t seed, GradCheckReport& report, double h,
                           std::vector<GradCheckEntry>& entries) {
    (void)report;
    ArchConfig arch;
    arch.points = inst.tpl.mesh.vertex_count();
    arch.latent_id = 4;
    arch.latent_exp = 4;
    arch.encoder_widths = {6, 6, 8, 16};
    arch.decoder_hidden = 12;
    ShapeModel model(arch, derive_seed(seed, "gradcheck-net"), &inst.tpl.mesh.vertices);

    const auto scan = ScanIndices::build(inst.raw, /*with_rays=*/true);

    SampleView supervised;
    supervised.supervised = true;
    supervised.ground_truth = &inst.gt;
    SampleView unsup;
    unsup.raw = &inst.raw;
    unsup.expressive = true;

    for (const bool sup : {true, false}) {
        const SampleView& view = sup ? supervised : unsup;
        GradCheckEntry entry;
        entry.name = sup ? "params_total_supervised" : "params_total_unsupervised";

        auto probe = [&]() {
            Tape tape;
            const auto fwd = model.forward(tape, inst.raw);
            const auto pred = tensor_to_vertices(tape.value_tensor(fwd.s_hat));
            const auto r = total_loss(pred, view, inst.ctx, inst.weights, &scan);
            uint64_t routing = tape.routing_hash();
            hash_mix(routing, r.routing_hash);
            return Probe{r.total, routing};
        };

        // Analytic parameter gradients via the tape.
        model.zero_grads();
        Tape tape;
        const auto fwd = model.forward(tape, inst.raw);
        const auto pred = tensor_to_vertices(tape.value_tensor(fwd.s_hat));
        const auto base_report = total_loss(pred, view, inst.ctx, inst.weights, &scan);
        tape.backward(fwd.s_hat, vertices_to_tensor(base_report.grad));
        uint64_t base_routing = tape.routing_hash();
        hash_mix(base_routing, base_report.routing_hash);

        for (auto& param : model.parameters()) {
            const Tensor& grad = *param.grad;
            for (int k = 0; k < param.value->size(); ++k) {
                double& x = param.value->data[k];
                const double saved = x;
                x = saved + h;
                const Probe up = probe();
                x = saved - h;
                const Probe down = probe();
                x = saved;
                if (up.routing != base_routing || down.routing != base_routing) {
                    ++entry.excluded;
                    continue;
                }
                const double fd = (up.value - down.value) / (2.0 * h);
                record_entry(entry, fd, grad.data[k], base_report.total);
            }
        }
        entries.push_back(entry);
    }
}

}  // namespace

GradCheckReport run_gradcheck(uint64_t seed, int instances, int vertices, double step) {
    require_data(instances >= 1, "gradcheck needs at least one instance");
    GradCheckReport report;

    std::vector<GradCheckEntry> all;
    for (int k = 0; k < instances; ++k) {
        auto inst = make_instance(derive_seed(seed, "instance", static_cast<uint64_t>(k)), vertices);
        check_vertex_terms(inst, report, step, all);
        check_parameter_grads(inst, derive_seed(seed, "net", static_cast<uint64_t>(k)), report, step, all);
    }

    // Merge by name across instances.
    for (const auto& e : all) {
        auto it = std::find_if(report.entries.begin(), report.entries.end(),
                               [&](const GradCheckEntry& x) { return x.name == e.name; });
        if (it == report.entries.end()) {
            report.entries.push_back(e);
        } else {
            it->max_rel_err = std::max(it->max_rel_err, e.max_rel_err);
            it->checked += e.checked;
            it->excluded += e.excluded;
        }
    }
    for (const auto& e : report.entries) {
        report.overall_max_rel_err = std::max(report.overall_max_rel_err, e.max_rel_err);
        report.total_checked += e.checked;
        report.total_excluded += e.excluded;
    }
    return report;
}

}  // namespace facecorr
