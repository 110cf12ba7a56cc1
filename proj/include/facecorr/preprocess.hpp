#pragma once

#include "facecorr/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace facecorr {

/// Similarity transform p' = scale * R * p + t.
struct Similarity {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }
    PointCloud apply(const PointCloud& cloud) const;
    TriMesh apply(const TriMesh& mesh) const;
    Similarity inverse() const;
    /// Composition: (this o inner)(p) = this(inner(p)).
    Similarity compose(const Similarity& inner) const;
};

void validate(const Similarity& t);

struct Landmark {
    std::string id;
    Vec3 position;
};

struct LandmarkSet {
    std::vector<Landmark> landmarks;

    const Landmark* find(const std::string& id) const;
    int size() const { return static_cast<int>(landmarks.size()); }
};

void validate(const LandmarkSet& set);

struct SimilarityFit {
    Similarity transform;  // maps source positions onto target positions
    double rms = 0.0;      // residual after the fit
    int pairs = 0;
};

/// Closed-form least-squares similarity between landmark sets matched by
/// semantic id (cross-covariance SVD with reflection guard).
SimilarityFit fit_similarity(const LandmarkSet& source, const LandmarkSet& target);

struct NormalizeResult {
    PointCloud cloud;
    Similarity transform;  // maps original coordinates into the unit frame
};

/// Center at the centroid and scale so the maximum radius is exactly 1.
NormalizeResult normalize_unit_sphere(const PointCloud& cloud);

/// Keep exactly the points with norm <= 1 (boundary inclusive).
PointCloud crop_unit_sphere(const PointCloud& cloud);

/// Draw exactly n points. Without replacement when the source suffices; if it
/// does not and a mesh is supplied, the mesh is midpoint-subdivided until its
/// vertex count reaches n; otherwise samples are drawn with replacement and
/// jittered (sigma 1e-4). Deterministic under the seed.
PointCloud resample(const PointCloud& cloud, int n, uint64_t seed, const TriMesh* mesh = nullptr);

/// k resamplings with derived seeds seed+0 .. seed+k-1.
std::vector<PointCloud> augment(const PointCloud& cloud, int n, int k, uint64_t seed, const TriMesh* mesh = nullptr);

/// Per-point normals from plane fits over k nearest neighbors, oriented by
/// the nearest vertex normal of an aligned reference mesh.
std::vector<Vec3> estimate_normals(const PointCloud& cloud, const TriMesh& oriented_reference, int k = 16);

}  // namespace facecorr
