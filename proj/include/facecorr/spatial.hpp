#pragma once

#include "facecorr/geometry.hpp"

#include <optional>
#include <vector>

namespace facecorr {

// Shared squared-distance kernel. Every exact-equality contract in this
// module (kd vs. brute force, BVH vs. brute force) relies on evaluating
// distances through this one expression.
inline double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

struct NearestHit {
    int index = -1;
    double d2 = 0.0;
};

/// Balanced 3D kd-tree over an immutable point array. Queries are exact and
/// tie-break to the lowest original point index.
class KdTree {
public:
    explicit KdTree(std::vector<Vec3> points, int leaf_size = 16);

    NearestHit nearest(const Vec3& query) const;

    /// k nearest neighbors, ascending by squared distance, ties by index.
    std::vector<NearestHit> knn(const Vec3& query, int k) const;

    int size() const { return static_cast<int>(points_.size()); }
    const Vec3& point(int original_index) const { return points_[original_index]; }

private:
    struct Node {
        double split = 0.0;
        int dim = -1;       // -1 marks a leaf
        int left = -1;      // child node or leaf range begin
        int right = -1;     // child node or leaf range end
    };

    int build(int begin, int end);

    std::vector<Vec3> points_;    // original order
    std::vector<int> order_;      // permutation grouping leaf ranges
    std::vector<Node> nodes_;
    int root_ = -1;
    int leaf_size_;
};

struct RayHit {
    Vec3 point = Vec3::Zero();  // counterpart position
    double distance = 0.0;      // Euclidean distance from the ray origin
    int index = -1;             // triangle index (mesh mode) or point index (cloud mode)
};

/// Bounding-volume hierarchy over target geometry. Mesh mode answers
/// ray-triangle intersection; cloud mode answers cone-constrained
/// closest-point-to-ray queries. Both search the +direction and -direction
/// sides of the ray and match brute force exactly.
class Bvh {
public:
    static Bvh over_triangles(const TriMesh& mesh);
    static Bvh over_points(std::vector<Vec3> points);

    bool mesh_mode() const { return mesh_mode_; }

    /// direction must be unit length. max_t bounds |t| along the ray; in
    /// cloud mode cone_half_angle (radians) bounds the angular offset of a
    /// candidate from the ray axis. Returns nullopt when nothing qualifies.
    std::optional<RayHit> ray_counterpart(const Vec3& origin, const Vec3& direction, double cone_half_angle,
                                          double max_t) const;

private:
    struct Node {
        Vec3 lo, hi;
        int left = -1, right = -1;  // children, or leaf range when leaf
        bool leaf = false;
    };

    int build(int begin, int end);
    std::optional<RayHit> ray_triangles(const Vec3& origin, const Vec3& dir, double max_t) const;
    std::optional<RayHit> ray_points(const Vec3& origin, const Vec3& dir, double cone_half_angle, double max_t) const;

    bool mesh_mode_ = false;
    std::vector<Vec3> points_;                   // cloud mode payload
    std::vector<Vec3> tri_a_, tri_b_, tri_c_;    // mesh mode payload
    std::vector<Vec3> centroids_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

// Brute-force references used by the benchmark command. Tests carry their own
// independent copies.
NearestHit brute_force_nearest(const std::vector<Vec3>& points, const Vec3& query);
std::optional<RayHit> brute_force_ray_points(const std::vector<Vec3>& points, const Vec3& origin, const Vec3& dir,
                                             double cone_half_angle, double max_t);

}  // namespace facecorr
