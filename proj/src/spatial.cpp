#include "facecorr/spatial.hpp"

#include "facecorr/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace facecorr {

namespace {

bool better(double d2, int idx, double best_d2, int best_idx) {
    return d2 < best_d2 || (d2 == best_d2 && idx < best_idx);
}

int widest_dim(const std::vector<Vec3>& pts, const std::vector<int>& order, int begin, int end) {
    Vec3 lo = pts[order[begin]], hi = pts[order[begin]];
    for (int i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(pts[order[i]]);
        hi = hi.cwiseMax(pts[order[i]]);
    }
    const Vec3 extent = hi - lo;
    int dim = 0;
    if (extent.y() > extent.x()) dim = 1;
    if (extent.z() > extent[dim]) dim = 2;
    return dim;
}

}  // namespace

KdTree::KdTree(std::vector<Vec3> points, int leaf_size)
    : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
    require_data(!points_.empty(), "cannot build a kd-tree over an empty point set");
    for (size_t i = 0; i < points_.size(); ++i)
        require_data(points_[i].allFinite(), "kd-tree input point " + std::to_string(i) + " is not finite");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    root_ = build(0, static_cast<int>(points_.size()));
}

int KdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= leaf_size_) {
        nodes_[id].dim = -1;
        nodes_[id].left = begin;
        nodes_[id].right = end;
        return id;
    }
    const int dim = widest_dim(points_, order_, begin, end);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double ca = points_[a][dim], cb = points_[b][dim];
        return ca < cb || (ca == cb && a < b);
    });
    const double split = points_[order_[mid]][dim];
    nodes_[id].dim = dim;
    nodes_[id].split = split;
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

NearestHit KdTree::nearest(const Vec3& query) const {
    NearestHit best{-1, std::numeric_limits<double>::infinity()};

    struct Frame {
        int node;
        double bound;  // squared distance lower bound for this subtree
    };
    Frame stack[64];
    int top = 0;
    stack[top++] = {root_, 0.0};

    while (top > 0) {
        const Frame frame = stack[--top];
        if (frame.bound > best.d2) continue;
        int node = frame.node;
        // Descend to the near leaf, deferring far siblings.
        while (nodes_[node].dim >= 0) {
            const Node& nd = nodes_[node];
            const double diff = query[nd.dim] - nd.split;
            const int near = diff < 0.0 ? nd.left : nd.right;
            const int far = diff < 0.0 ? nd.right : nd.left;
            const double far_bound = diff * diff;
            if (!(far_bound > best.d2)) stack[top++] = {far, far_bound};
            node = near;
        }
        for (int i = nodes_[node].left; i < nodes_[node].right; ++i) {
            const int idx = order_[i];
            const double d2 = dist2(points_[idx], query);
            if (better(d2, idx, best.d2, best.index)) best = {idx, d2};
        }
    }
    return best;
}

std::vector<NearestHit> KdTree::knn(const Vec3& query, int k) const {
    require_data(k >= 1, "knn requires k >= 1");
    k = std::min(k, size());

    auto worse = [](const NearestHit& a, const NearestHit& b) {
        return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
    };
    std::vector<NearestHit> heap;  // max-heap: top is the current worst keeper
    heap.reserve(k + 1);

    auto consider = [&](int idx, double d2) {
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back({idx, d2});
            std::push_heap(heap.begin(), heap.end(), worse);
        } else if (worse({idx, d2}, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), worse);
            heap.back() = {idx, d2};
            std::push_heap(heap.begin(), heap.end(), worse);
        }
    };
    auto prune_bound = [&]() {
        return static_cast<int>(heap.size()) < k ? std::numeric_limits<double>::infinity() : heap.front().d2;
    };

    struct Frame {
        int node;
        double bound;
    };
    Frame stack[64];
    int top = 0;
    stack[top++] = {root_, 0.0};
    while (top > 0) {
        const Frame frame = stack[--top];
        if (frame.bound > prune_bound()) continue;
        int node = frame.node;
        while (nodes_[node].dim >= 0) {
            const Node& nd = nodes_[node];
            const double diff = query[nd.dim] - nd.split;
            const int near = diff < 0.0 ? nd.left : nd.right;
            const int far = diff < 0.0 ? nd.right : nd.left;
            const double far_bound = diff * diff;
            if (!(far_bound > prune_bound())) stack[top++] = {far, far_bound};
            node = near;
        }
        for (int i = nodes_[node].left; i < nodes_[node].right; ++i) {
            const int idx = order_[i];
            consider(idx, dist2(points_[idx], query));
        }
    }
    std::sort(heap.begin(), heap.end(), worse);
    return heap;
}

// ---------------------------------------------------------------------------
// BVH
// ---------------------------------------------------------------------------

namespace {
constexpr int kBvhLeafSize = 4;
}

Bvh Bvh::over_triangles(const TriMesh& mesh) {
    validate(mesh);
    require_data(!mesh.faces.empty(), "cannot build a BVH over a mesh with no faces");
    Bvh bvh;
    bvh.mesh_mode_ = true;
    const int f = mesh.face_count();
    bvh.tri_a_.resize(f);
    bvh.tri_b_.resize(f);
    bvh.tri_c_.resize(f);
    bvh.centroids_.resize(f);
    for (int i = 0; i < f; ++i) {
        const auto& [a, b, c] = mesh.faces[i];
        bvh.tri_a_[i] = mesh.vertices[a];
        bvh.tri_b_[i] = mesh.vertices[b];
        bvh.tri_c_[i] = mesh.vertices[c];
        bvh.centroids_[i] = (bvh.tri_a_[i] + bvh.tri_b_[i] + bvh.tri_c_[i]) / 3.0;
    }
    bvh.order_.resize(f);
    std::iota(bvh.order_.begin(), bvh.order_.end(), 0);
    bvh.root_ = bvh.build(0, f);
    return bvh;
}

Bvh Bvh::over_points(std::vector<Vec3> points) {
    require_data(!points.empty(), "cannot build a BVH over an empty point set");
    Bvh bvh;
    bvh.mesh_mode_ = false;
    bvh.points_ = std::move(points);
    bvh.centroids_ = bvh.points_;
    bvh.order_.resize(bvh.points_.size());
    std::iota(bvh.order_.begin(), bvh.order_.end(), 0);
    bvh.root_ = bvh.build(0, static_cast<int>(bvh.points_.size()));
    return bvh;
}

int Bvh::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();

    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    auto grow = [&](const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    };
    for (int i = begin; i < end; ++i) {
        const int e = order_[i];
        if (mesh_mode_) {
            grow(tri_a_[e]);
            grow(tri_b_[e]);
            grow(tri_c_[e]);
        } else {
            grow(points_[e]);
        }
    }
    nodes_[id].lo = lo;
    nodes_[id].hi = hi;

    if (end - begin <= kBvhLeafSize) {
        nodes_[id].leaf = true;
        nodes_[id].left = begin;
        nodes_[id].right = end;
        return id;
    }
    const int dim = widest_dim(centroids_, order_, begin, end);
    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
        const double ca = centroids_[a][dim], cb = centroids_[b][dim];
        return ca < cb || (ca == cb && a < b);
    });
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

namespace {

// Intersection of the doubly-infinite line origin + t*dir with an AABB,
// returned as a t-interval. Empty when the line misses the box.
bool line_box_interval(const Vec3& origin, const Vec3& dir, const Vec3& lo, const Vec3& hi, double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int d = 0; d < 3; ++d) {
        if (std::abs(dir[d]) < 1e-300) {
            if (origin[d] < lo[d] || origin[d] > hi[d]) return false;
            continue;
        }
        double a = (lo[d] - origin[d]) / dir[d];
        double b = (hi[d] - origin[d]) / dir[d];
        if (a > b) std::swap(a, b);
        t0 = std::max(t0, a);
        t1 = std::min(t1, b);
        if (t0 > t1) return false;
    }
    return true;
}

double min_abs_in_interval(double a, double b) {
    if (a > 0.0) return a;
    if (b < 0.0) return -b;
    return 0.0;
}

// Squared distance from a point to a segment [p0, p1].
double point_segment_dist2(const Vec3& x, const Vec3& p0, const Vec3& p1) {
    const Vec3 d = p1 - p0;
    const double len2 = d.squaredNorm();
    double s = len2 > 0.0 ? (x - p0).dot(d) / len2 : 0.0;
    s = std::clamp(s, 0.0, 1.0);
    return (x - (p0 + s * d)).squaredNorm();
}

struct RayPointCandidate {
    bool eligible = false;
    double perp2 = 0.0;
};

// Shared cloud-mode predicate: candidate must lie within max_t along either
// ray direction and within the (double-sided) cone about the axis.
RayPointCandidate ray_point_candidate(const Vec3& point, const Vec3& origin, const Vec3& dir, double tan2_cone,
                                      double max_t) {
    const double vx = point.x() - origin.x();
    const double vy = point.y() - origin.y();
    const double vz = point.z() - origin.z();
    const double t = vx * dir.x() + vy * dir.y() + vz * dir.z();
    if (std::abs(t) > max_t) return {};
    const double v2 = vx * vx + vy * vy + vz * vz;
    const double perp2 = std::max(0.0, v2 - t * t);
    if (perp2 > t * t * tan2_cone) return {};
    return {true, perp2};
}

// Moller-Trumbore against the doubly-infinite line; boundary-inclusive in
// barycentric coordinates.
bool line_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c, double& t_out) {
    const Vec3 e1 = b - a;
    const Vec3 e2 = c - a;
    const Vec3 pvec = dir.cross(e2);
    const double det = e1.dot(pvec);
    if (std::abs(det) < 1e-300) return false;
    const double inv = 1.0 / det;
    const Vec3 tvec = origin - a;
    const double u = tvec.dot(pvec) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qvec = tvec.cross(e1);
    const double v = dir.dot(qvec) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    t_out = e2.dot(qvec) * inv;
    return true;
}

}  // namespace

std::optional<RayHit> Bvh::ray_counterpart(const Vec3& origin, const Vec3& direction, double cone_half_angle,
                                           double max_t) const {
    require_data(std::abs(direction.norm() - 1.0) <= 1e-6, "ray direction must be unit length");
    return mesh_mode_ ? ray_triangles(origin, direction, max_t)
                      : ray_points(origin, direction, cone_half_angle, max_t);
}

std::optional<RayHit> Bvh::ray_triangles(const Vec3& origin, const Vec3& dir, double max_t) const {
    double best_t = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    double best_signed_t = 0.0;

    int stack[64];
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const int id = stack[--top];
        const Node& nd = nodes_[id];
        double t0, t1;
        if (!line_box_interval(origin, dir, nd.lo, nd.hi, t0, t1)) continue;
        t0 = std::max(t0, -max_t);
        t1 = std::min(t1, max_t);
        if (t0 > t1) continue;
        if (min_abs_in_interval(t0, t1) > best_t) continue;
        if (nd.leaf) {
            for (int i = nd.left; i < nd.right; ++i) {
                const int e = order_[i];
                double t;
                if (!line_triangle(origin, dir, tri_a_[e], tri_b_[e], tri_c_[e], t)) continue;
                const double at = std::abs(t);
                if (at > max_t) continue;
                if (at < best_t || (at == best_t && e < best_idx)) {
                    best_t = at;
                    best_idx = e;
                    best_signed_t = t;
                }
            }
        } else {
            stack[top++] = nd.right;
            stack[top++] = nd.left;
        }
    }
    if (best_idx < 0) return std::nullopt;
    return RayHit{origin + best_signed_t * dir, best_t, best_idx};
}

std::optional<RayHit> Bvh::ray_points(const Vec3& origin, const Vec3& dir, double cone_half_angle,
                                      double max_t) const {
    require_data(cone_half_angle > 0.0 && cone_half_angle < 1.5707963267948966,
                 "cone half-angle must lie in (0, pi/2)");
    const double tan_cone = std::tan(cone_half_angle);
    const double tan2_cone = tan_cone * tan_cone;
    const Vec3 seg0 = origin - max_t * dir;
    const Vec3 seg1 = origin + max_t * dir;

    double best_perp2 = std::numeric_limits<double>::infinity();
    int best_idx = -1;

    int stack[64];
    int top = 0;
    stack[top++] = root_;
    while (top > 0) {
        const int id = stack[--top];
        const Node& nd = nodes_[id];
        // Conservative lower bound on the perpendicular distance from the
        // segment to anything inside the box.
        const Vec3 center = 0.5 * (nd.lo + nd.hi);
        const double radius = 0.5 * (nd.hi - nd.lo).norm();
        const double center_d = std::sqrt(point_segment_dist2(center, seg0, seg1));
        const double lb = std::max(0.0, center_d - radius);
        if (lb * lb > best_perp2) continue;
        if (nd.leaf) {
            for (int i = nd.left; i < nd.right; ++i) {
                const int e = order_[i];
                const auto cand = ray_point_candidate(points_[e], origin, dir, tan2_cone, max_t);
                if (!cand.eligible) continue;
                if (cand.perp2 < best_perp2 || (cand.perp2 == best_perp2 && e < best_idx)) {
                    best_perp2 = cand.perp2;
                    best_idx = e;
                }
            }
        } else {
            stack[top++] = nd.right;
            stack[top++] = nd.left;
        }
    }
    if (best_idx < 0) return std::nullopt;
    return RayHit{points_[best_idx], std::sqrt(dist2(points_[best_idx], origin)), best_idx};
}

NearestHit brute_force_nearest(const std::vector<Vec3>& points, const Vec3& query) {
    NearestHit best{-1, std::numeric_limits<double>::infinity()};
    for (size_t i = 0; i < points.size(); ++i) {
        const double d2 = dist2(points[i], query);
        if (d2 < best.d2) best = {static_cast<int>(i), d2};
    }
    return best;
}

std::optional<RayHit> brute_force_ray_points(const std::vector<Vec3>& points, const Vec3& origin, const Vec3& dir,
                                             double cone_half_angle, double max_t) {
    const double tan_cone = std::tan(cone_half_angle);
    const double tan2_cone = tan_cone * tan_cone;
    double best_perp2 = std::numeric_limits<double>::infinity();
    int best_idx = -1;
    for (size_t i = 0; i < points.size(); ++i) {
        const auto cand = ray_point_candidate(points[i], origin, dir, tan2_cone, max_t);
        if (cand.eligible && cand.perp2 < best_perp2) {
            best_perp2 = cand.perp2;
            best_idx = static_cast<int>(i);
        }
    }
    if (best_idx < 0) return std::nullopt;
    return RayHit{points[best_idx], std::sqrt(dist2(points[best_idx], origin)), best_idx};
}

}  // namespace facecorr
