#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace facecorr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Unorganized point set, optionally with per-point unit normals.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty, or same length as points

    bool has_normals() const { return !normals.empty(); }
    int size() const { return static_cast<int>(points.size()); }
};

/// Fixed-topology triangle mesh. Edges are derived, not stored.
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int face_count() const { return static_cast<int>(faces.size()); }
};

/// Unique undirected edges as (i, j) with i < j, sorted lexicographically.
using EdgeList = std::vector<std::pair<int, int>>;

/// Per-vertex unit normals.
struct NormalField {
    std::vector<Vec3> normals;
    int size() const { return static_cast<int>(normals.size()); }
};

/// Canonical template: the mesh every scan is corresponded into, plus the
/// semantic landmark vertices and the mouth-region vertex set.
struct FaceTemplate {
    TriMesh mesh;
    std::vector<std::pair<std::string, int>> landmarks;  // semantic id -> vertex index
    std::vector<int> mouth_indices;

    int find_landmark(const std::string& id) const;  // -1 if absent
};

/// Umbrella Laplacian rows for a vertex subset; neighbors are taken from the
/// full mesh graph. (L x)_i = x_i - mean of x over neighbors of i.
struct GraphLaplacian {
    std::vector<int> rows;
    std::vector<std::vector<int>> neighbors;  // parallel to rows

    std::vector<Vec3> apply(const std::vector<Vec3>& positions) const;
};

void validate(const PointCloud& cloud);
void validate(const TriMesh& mesh);
void validate(const FaceTemplate& tpl);

EdgeList edge_graph(const TriMesh& mesh);

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh);

/// Area-weighted vertex normals; orientation follows face winding.
NormalField vertex_normals(const TriMesh& mesh);

/// Reverse-mode companion of vertex_normals: accumulates dL/dvertices given
/// dL/d(unit normals). Shapes must match the mesh.
void vertex_normals_backward(const TriMesh& mesh, const std::vector<Vec3>& normal_grads,
                             std::vector<Vec3>& vertex_grads);

GraphLaplacian graph_laplacian(const TriMesh& mesh, const std::vector<int>& subset);

/// Midpoint 1-to-4 subdivision: original vertices preserved bit-exactly, one
/// new vertex per unique edge, each face split into four.
TriMesh interpolating_subdivide(const TriMesh& mesh);

}  // namespace facecorr
