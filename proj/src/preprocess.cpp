#include "facecorr/preprocess.hpp"

#include "facecorr/error.hpp"
#include "facecorr/rng.hpp"
#include "facecorr/spatial.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace facecorr {

PointCloud Similarity::apply(const PointCloud& cloud) const {
    PointCloud out;
    out.points.reserve(cloud.points.size());
    for (const auto& p : cloud.points) out.points.push_back(apply(p));
    out.normals.reserve(cloud.normals.size());
    for (const auto& n : cloud.normals) out.normals.push_back(rotation * n);
    return out;
}

TriMesh Similarity::apply(const TriMesh& mesh) const {
    TriMesh out;
    out.faces = mesh.faces;
    out.vertices.reserve(mesh.vertices.size());
    for (const auto& v : mesh.vertices) out.vertices.push_back(apply(v));
    return out;
}

Similarity Similarity::inverse() const {
    Similarity inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
}

Similarity Similarity::compose(const Similarity& inner) const {
    Similarity out;
    out.scale = scale * inner.scale;
    out.rotation = rotation * inner.rotation;
    out.translation = scale * (rotation * inner.translation) + translation;
    return out;
}

void validate(const Similarity& t) {
    require_data(std::isfinite(t.scale) && t.scale > 0.0, "similarity scale must be finite and positive");
    require_data(t.translation.allFinite(), "similarity translation must be finite");
    const Mat3 residual = t.rotation.transpose() * t.rotation - Mat3::Identity();
    require_data(residual.cwiseAbs().maxCoeff() <= 1e-9, "similarity rotation is not orthonormal");
    require_data(t.rotation.determinant() > 0.0, "similarity rotation must be proper (det +1)");
}

const Landmark* LandmarkSet::find(const std::string& id) const {
    for (const auto& lm : landmarks)
        if (lm.id == id) return &lm;
    return nullptr;
}

void validate(const LandmarkSet& set) {
    std::map<std::string, int> seen;
    for (const auto& lm : set.landmarks) {
        require_data(lm.position.allFinite(), "landmark '" + lm.id + "' has non-finite position");
        require_data(++seen[lm.id] == 1, "duplicate landmark id '" + lm.id + "'");
    }
}

SimilarityFit fit_similarity(const LandmarkSet& source, const LandmarkSet& target) {
    validate(source);
    validate(target);

    // Pair landmarks by id, in sorted id order for determinism.
    std::vector<std::pair<Vec3, Vec3>> pairs;
    std::map<std::string, Vec3> target_by_id;
    for (const auto& lm : target.landmarks) target_by_id[lm.id] = lm.position;
    std::map<std::string, Vec3> source_by_id;
    for (const auto& lm : source.landmarks) source_by_id[lm.id] = lm.position;
    for (const auto& [id, src] : source_by_id) {
        auto it = target_by_id.find(id);
        if (it != target_by_id.end()) pairs.emplace_back(src, it->second);
    }
    const int m = static_cast<int>(pairs.size());
    require_data(m >= 3, "similarity fit needs at least 3 matched landmark pairs, found " + std::to_string(m));

    Vec3 mu_src = Vec3::Zero(), mu_tgt = Vec3::Zero();
    for (const auto& [s, t] : pairs) {
        mu_src += s;
        mu_tgt += t;
    }
    mu_src /= m;
    mu_tgt /= m;

    Mat3 cov = Mat3::Zero();
    double var_src = 0.0;
    for (const auto& [s, t] : pairs) {
        const Vec3 sc = s - mu_src;
        cov += (t - mu_tgt) * sc.transpose();
        var_src += sc.squaredNorm();
    }
    cov /= m;
    var_src /= m;

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    require_data(sv(1) > 1e-12 * std::max(1.0, sv(0)),
                 "degenerate landmark configuration (collinear or coincident points)");

    Vec3 guard = Vec3::Ones();
    if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) guard(2) = -1.0;

    SimilarityFit fit;
    fit.pairs = m;
    fit.transform.rotation = svd.matrixU() * guard.asDiagonal() * svd.matrixV().transpose();
    fit.transform.scale = sv.dot(guard) / var_src;
    require_data(fit.transform.scale > 0.0, "similarity fit collapsed to non-positive scale");
    fit.transform.translation = mu_tgt - fit.transform.scale * (fit.transform.rotation * mu_src);

    double ss = 0.0;
    for (const auto& [s, t] : pairs) ss += (fit.transform.apply(s) - t).squaredNorm();
    fit.rms = std::sqrt(ss / m);
    return fit;
}

NormalizeResult normalize_unit_sphere(const PointCloud& cloud) {
    validate(cloud);
    require_data(!cloud.points.empty(), "cannot normalize an empty point cloud");
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud.points) centroid += p;
    centroid /= static_cast<double>(cloud.points.size());

    double max_r = 0.0;
    for (const auto& p : cloud.points) max_r = std::max(max_r, (p - centroid).norm());
    require_data(max_r > 0.0, "cannot normalize a cloud whose points all coincide");

    NormalizeResult result;
    result.transform.scale = 1.0 / max_r;
    result.transform.translation = -centroid / max_r;
    result.cloud = result.transform.apply(cloud);
    return result;
}

PointCloud crop_unit_sphere(const PointCloud& cloud) {
    validate(cloud);
    PointCloud out;
    for (size_t i = 0; i < cloud.points.size(); ++i) {
        if (cloud.points[i].norm() <= 1.0) {
            out.points.push_back(cloud.points[i]);
            if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
        }
    }
    require_data(!out.points.empty(), "cropping to the unit sphere removed every point");
    return out;
}

namespace {

// Partial Fisher-Yates: the first n entries of a random permutation of
// [0, count).
std::vector<int> sample_without_replacement(int count, int n, Rng& rng) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
        const int j = i + rng.index(count - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
}

}  // namespace

PointCloud resample(const PointCloud& cloud, int n, uint64_t seed, const TriMesh* mesh) {
    validate(cloud);
    require_data(n >= 1, "resample requires n >= 1");
    Rng rng(derive_seed(seed, "resample"));

    const PointCloud* source = &cloud;
    PointCloud subdivided_cloud;
    if (cloud.size() < n && mesh != nullptr) {
        TriMesh refined = *mesh;
        while (refined.vertex_count() < n) refined = interpolating_subdivide(refined);
        subdivided_cloud.points = refined.vertices;
        if (cloud.has_normals()) {
            const auto nf = vertex_normals(refined);
            subdivided_cloud.normals = nf.normals;
        }
        source = &subdivided_cloud;
    }

    PointCloud out;
    out.points.reserve(n);
    if (source->has_normals()) out.normals.reserve(n);
    if (source->size() >= n) {
        for (int i : sample_without_replacement(source->size(), n, rng)) {
            out.points.push_back(source->points[i]);
            if (source->has_normals()) out.normals.push_back(source->normals[i]);
        }
    } else {
        // No topology to refine: draw with replacement and jitter so that
        // duplicates never coincide exactly.
        for (int i = 0; i < n; ++i) {
            const int j = rng.index(source->size());
            const Vec3 jitter(rng.normal(0.0, 1e-4), rng.normal(0.0, 1e-4), rng.normal(0.0, 1e-4));
            out.points.push_back(source->points[j] + jitter);
            if (source->has_normals()) out.normals.push_back(source->normals[j]);
        }
    }
    return out;
}

std::vector<PointCloud> augment(const PointCloud& cloud, int n, int k, uint64_t seed, const TriMesh* mesh) {
    require_data(k >= 1, "augment requires k >= 1");
    std::vector<PointCloud> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) out.push_back(resample(cloud, n, seed + static_cast<uint64_t>(i), mesh));
    return out;
}

std::vector<Vec3> estimate_normals(const PointCloud& cloud, const TriMesh& oriented_reference, int k) {
    validate(cloud);
    require_data(cloud.size() >= 3, "normal estimation needs at least 3 points");
    const KdTree tree(cloud.points);
    const KdTree ref_tree(oriented_reference.vertices);
    const auto ref_normals = vertex_normals(oriented_reference);

    std::vector<Vec3> out(cloud.points.size());
    for (int i = 0; i < cloud.size(); ++i) {
        const auto nn = tree.knn(cloud.points[i], std::min(k, cloud.size()));
        Vec3 mean = Vec3::Zero();
        for (const auto& h : nn) mean += cloud.points[h.index];
        mean /= static_cast<double>(nn.size());
        Mat3 cov = Mat3::Zero();
        for (const auto& h : nn) {
            const Vec3 d = cloud.points[h.index] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 normal = eig.eigenvectors().col(0);  // smallest eigenvalue
        const double norm = normal.norm();
        require_data(norm > 0.0, "degenerate neighborhood around point " + std::to_string(i));
        normal /= norm;
        const Vec3 ref = ref_normals.normals[ref_tree.nearest(cloud.points[i]).index];
        if (normal.dot(ref) < 0.0) normal = -normal;
        out[i] = normal;
    }
    return out;
}

}  // namespace facecorr
