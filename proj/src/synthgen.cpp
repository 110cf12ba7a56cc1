#include "facecorr/synthgen.hpp"

#include "facecorr/error.hpp"
#include "facecorr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace facecorr {

namespace {

TriMesh icosahedron() {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    TriMesh m;
    m.vertices = {Vec3(-1, t, 0), Vec3(1, t, 0),  Vec3(-1, -t, 0), Vec3(1, -t, 0),
                  Vec3(0, -1, t), Vec3(0, 1, t),  Vec3(0, -1, -t), Vec3(0, 1, -t),
                  Vec3(t, 0, -1), Vec3(t, 0, 1),  Vec3(-t, 0, -1), Vec3(-t, 0, 1)};
    m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
               {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
               {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    return m;
}

double max_radius(const std::vector<Vec3>& pts) {
    double r = 0.0;
    for (const auto& p : pts) r = std::max(r, p.norm());
    return r;
}

// Smooth bump field: direction * Gaussian falloff from a center point.
struct Bump {
    Vec3 center;
    Vec3 direction;
    double width;
    double amplitude;
};

std::vector<Vec3> evaluate_bumps(const std::vector<Bump>& bumps, const std::vector<Vec3>& vertices) {
    std::vector<Vec3> field(vertices.size(), Vec3::Zero());
    for (const auto& bump : bumps) {
        const double inv = 1.0 / (2.0 * bump.width * bump.width);
        for (size_t v = 0; v < vertices.size(); ++v) {
            const double d2 = (vertices[v] - bump.center).squaredNorm();
            field[v] += bump.amplitude * std::exp(-d2 * inv) * bump.direction;
        }
    }
    return field;
}

double field_dot(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
    return s;
}

// Gram-Schmidt under the flattened vertex inner product; redraws via the
// caller when a field collapses.
bool orthonormalize_against(std::vector<Vec3>& field, const std::vector<std::vector<Vec3>>& basis) {
    for (const auto& prev : basis) {
        const double c = field_dot(field, prev);
        for (size_t i = 0; i < field.size(); ++i) field[i] -= c * prev[i];
    }
    const double norm = std::sqrt(field_dot(field, field));
    if (norm < 1e-8) return false;
    for (auto& v : field) v /= norm;
    return true;
}

Vec3 random_unit_vec(Rng& rng) {
    for (;;) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-6) return v / n;
    }
}

int nearest_vertex(const std::vector<Vec3>& vertices, const Vec3& target) {
    int best = 0;
    double best_d2 = (vertices[0] - target).squaredNorm();
    for (size_t i = 1; i < vertices.size(); ++i) {
        const double d2 = (vertices[i] - target).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return best;
}

Eigen::Matrix<double, 6, 1> quadratic_features(const Vec3& p) {
    Eigen::Matrix<double, 6, 1> h;
    h << p.y() * p.z(), p.z() * p.x(), p.x() * p.y(), p.x() * p.x(), p.y() * p.y(), p.z() * p.z();
    return h;
}

constexpr double kTemplateRadius = 0.78;
constexpr double kWarpGain = 0.15;        // max warp displacement at gamma = 1
constexpr double kNeutralRadiusCap = 0.97;
constexpr double kFullRadiusCap = 0.99;

}  // namespace

TriMesh icosphere(int n, double radius) {
    static const std::map<int, int> ladder{{12, 0}, {42, 1}, {162, 2}, {642, 3}, {2562, 4}};
    const auto it = ladder.find(n);
    require_data(it != ladder.end(),
                 "icosphere vertex count must be one of 12/42/162/642/2562, got " + std::to_string(n));
    TriMesh mesh = icosahedron();
    for (int level = 0; level < it->second; ++level) mesh = interpolating_subdivide(mesh);
    for (auto& v : mesh.vertices) v *= radius / v.norm();
    require(mesh.vertex_count() == n, ErrorCode::Internal, "icosphere ladder mismatch");
    return mesh;
}

ToyMorphable build_toy_model(uint64_t seed, int n, int k_id, int k_exp, double gamma) {
    require_data(n == 162 || n == 642 || n == 2562, "toy model size must be 162, 642 or 2562 vertices");
    require_data(k_id >= 1 && k_exp >= 1, "toy model needs at least one identity and one expression field");
    require_data(k_id + k_exp <= 3 * n, "more basis fields than degrees of freedom");
    require_data(gamma >= 0.0, "nonlinearity gain must be nonnegative");

    ToyMorphable model;
    model.seed = seed;
    model.gamma = gamma;
    model.tpl.mesh = icosphere(n, kTemplateRadius);
    const auto& verts = model.tpl.mesh.vertices;

    // Canonical face layout: the face looks along +z.
    auto dir = [&](double x, double y, double z) -> Vec3 { return Vec3(x, y, z).normalized() * kTemplateRadius; };
    const Vec3 mouth_center = dir(0.0, -0.55, 0.8);
    const Vec3 brow_center = dir(0.0, 0.55, 0.8);
    model.tpl.landmarks = {{"eye_outer_l", nearest_vertex(verts, dir(-0.5, 0.45, 0.75))},
                           {"eye_outer_r", nearest_vertex(verts, dir(0.5, 0.45, 0.75))},
                           {"nose_tip", nearest_vertex(verts, dir(0.0, 0.0, 1.0))},
                           {"mouth_corner_l", nearest_vertex(verts, dir(-0.4, -0.5, 0.75))},
                           {"mouth_corner_r", nearest_vertex(verts, dir(0.4, -0.5, 0.75))}};
    for (int i = 0; i < static_cast<int>(verts.size()); ++i)
        if ((verts[i] - mouth_center).norm() <= 0.35 * kTemplateRadius) model.tpl.mouth_indices.push_back(i);
    validate(model.tpl);

    Rng rng(derive_seed(seed, "toy-model"));

    auto draw_field = [&](bool localized) {
        std::vector<Bump> bumps;
        const int count = 3;
        for (int b = 0; b < count; ++b) {
            Bump bump;
            if (localized) {
                const Vec3 anchor = (b < 2) ? mouth_center : brow_center;
                bump.center = (anchor + 0.25 * kTemplateRadius * random_unit_vec(rng)).normalized() * kTemplateRadius;
                bump.width = rng.uniform(0.15, 0.3) * kTemplateRadius;
            } else {
                bump.center = random_unit_vec(rng) * kTemplateRadius;
                bump.width = rng.uniform(0.35, 0.7) * kTemplateRadius;
            }
            bump.direction = random_unit_vec(rng);
            bump.amplitude = rng.uniform(0.5, 1.0);
            bumps.push_back(bump);
        }
        return evaluate_bumps(bumps, verts);
    };

    auto build_basis = [&](int k, bool localized) {
        std::vector<std::vector<Vec3>> basis;
        while (static_cast<int>(basis.size()) < k) {
            auto field = draw_field(localized);
            if (orthonormalize_against(field, basis)) basis.push_back(std::move(field));
        }
        return basis;
    };
    model.id_basis = build_basis(k_id, /*localized=*/false);
    model.exp_basis = build_basis(k_exp, /*localized=*/true);

    // Quadratic warp, rescaled so the largest displacement over the template
    // equals kWarpGain at gamma = 1.
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 6; ++c) model.warp(r, c) = rng.uniform(-1.0, 1.0);
    double peak = 0.0;
    for (const auto& v : verts) peak = std::max(peak, (model.warp * quadratic_features(v)).norm());
    require(peak > 0.0, ErrorCode::Internal, "degenerate warp");
    model.warp *= kWarpGain / peak;

    return model;
}

std::vector<Vec3> compose_shape(const ToyMorphable& model, const Eigen::VectorXd& id_coeffs,
                                const Eigen::VectorXd& exp_coeffs) {
    require_data(id_coeffs.size() == model.k_id(), "identity coefficient count mismatch");
    require_data(exp_coeffs.size() == model.k_exp(), "expression coefficient count mismatch");
    const auto& verts = model.tpl.mesh.vertices;
    std::vector<Vec3> shape(verts.size());
    for (size_t v = 0; v < verts.size(); ++v) {
        Vec3 p = verts[v];
        for (int k = 0; k < model.k_id(); ++k) p += id_coeffs(k) * model.id_basis[k][v];
        if (model.gamma > 0.0) p += model.gamma * (model.warp * quadratic_features(p));
        for (int k = 0; k < model.k_exp(); ++k) p += exp_coeffs(k) * model.exp_basis[k][v];
        shape[v] = p;
    }
    return shape;
}

std::vector<SynthSample> sample_dataset(const ToyMorphable& model, int subjects, int expressions_per_subject,
                                        uint64_t seed) {
    require_data(subjects >= 1 && expressions_per_subject >= 0, "sample counts must be nonnegative (subjects >= 1)");

    std::vector<SynthSample> samples;
    samples.reserve(static_cast<size_t>(subjects) * (1 + expressions_per_subject));
    const Eigen::VectorXd zero_exp = Eigen::VectorXd::Zero(model.k_exp());

    for (int s = 0; s < subjects; ++s) {
        Rng rng(derive_seed(model.seed ^ seed, "subject", static_cast<uint64_t>(s)));

        // Identity coefficients, redrawn while the neutral shape escapes the
        // unit sphere (rare by construction).
        Eigen::VectorXd id_coeffs(model.k_id());
        std::vector<Vec3> neutral_shape;
        for (int attempt = 0;; ++attempt) {
            require(attempt < 1000, ErrorCode::Internal, "identity rejection loop did not terminate");
            for (int k = 0; k < model.k_id(); ++k) id_coeffs(k) = rng.normal(0.0, model.sigma_id);
            neutral_shape = compose_shape(model, id_coeffs, zero_exp);
            if (max_radius(neutral_shape) <= kNeutralRadiusCap) break;
        }

        auto make_sample = [&](std::vector<Vec3> shape, const Eigen::VectorXd& exp_coeffs, bool neutral,
                               uint64_t shuffle_tag) {
            SynthSample sample;
            sample.subject = s;
            sample.neutral = neutral;
            sample.id_coeffs = id_coeffs;
            sample.exp_coeffs = exp_coeffs;
            sample.ground_truth = std::move(shape);

            const TriMesh gt_mesh{sample.ground_truth, model.tpl.mesh.faces};
            const auto normals = vertex_normals(gt_mesh);

            const int n = static_cast<int>(sample.ground_truth.size());
            sample.permutation.resize(n);
            std::iota(sample.permutation.begin(), sample.permutation.end(), 0);
            Rng shuffle_rng(derive_seed(model.seed ^ seed, "shuffle", (static_cast<uint64_t>(s) << 20) | shuffle_tag));
            for (int i = n - 1; i > 0; --i)
                std::swap(sample.permutation[i], sample.permutation[shuffle_rng.index(i + 1)]);

            sample.input.points.resize(n);
            sample.input.normals.resize(n);
            for (int i = 0; i < n; ++i) {
                sample.input.points[i] = sample.ground_truth[sample.permutation[i]];
                sample.input.normals[i] = normals.normals[sample.permutation[i]];
            }
            return sample;
        };

        samples.push_back(make_sample(neutral_shape, zero_exp, /*neutral=*/true, 0));

        for (int e = 0; e < expressions_per_subject; ++e) {
            Eigen::VectorXd exp_coeffs(model.k_exp());
            std::vector<Vec3> shape;
            for (int attempt = 0;; ++attempt) {
                require(attempt < 1000, ErrorCode::Internal, "expression rejection loop did not terminate");
                for (int k = 0; k < model.k_exp(); ++k) exp_coeffs(k) = rng.normal(0.0, model.sigma_exp);
                shape = compose_shape(model, id_coeffs, exp_coeffs);
                if (max_radius(shape) <= kFullRadiusCap) break;
            }
            samples.push_back(make_sample(std::move(shape), exp_coeffs, /*neutral=*/false,
                                          static_cast<uint64_t>(e) + 1));
        }
    }
    return samples;
}

}  // namespace facecorr
