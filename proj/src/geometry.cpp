#include "facecorr/geometry.hpp"

#include "facecorr/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

namespace facecorr {

namespace {

constexpr double kUnitNormTol = 1e-6;

bool finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

}  // namespace

int FaceTemplate::find_landmark(const std::string& id) const {
    for (const auto& [lid, idx] : landmarks)
        if (lid == id) return idx;
    return -1;
}

void validate(const PointCloud& cloud) {
    for (size_t i = 0; i < cloud.points.size(); ++i)
        require_data(finite(cloud.points[i]), "point cloud has non-finite coordinates at point " + std::to_string(i));
    if (cloud.has_normals()) {
        require_data(cloud.normals.size() == cloud.points.size(),
                     "normal count (" + std::to_string(cloud.normals.size()) + ") does not match point count (" +
                         std::to_string(cloud.points.size()) + ")");
        for (size_t i = 0; i < cloud.normals.size(); ++i) {
            require_data(finite(cloud.normals[i]), "non-finite normal at point " + std::to_string(i));
            require_data(std::abs(cloud.normals[i].norm() - 1.0) <= kUnitNormTol,
                         "normal at point " + std::to_string(i) + " is not unit length");
        }
    }
}

void validate(const TriMesh& mesh) {
    const int n = mesh.vertex_count();
    for (int i = 0; i < n; ++i)
        require_data(finite(mesh.vertices[i]), "mesh has non-finite vertex " + std::to_string(i));
    for (size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& [a, b, c] = mesh.faces[f];
        require_data(a >= 0 && a < n && b >= 0 && b < n && c >= 0 && c < n,
                     "face " + std::to_string(f) + " references a vertex out of range");
        require_data(a != b && b != c && a != c, "face " + std::to_string(f) + " is degenerate (repeated index)");
    }
}

void validate(const FaceTemplate& tpl) {
    validate(tpl.mesh);
    const int n = tpl.mesh.vertex_count();
    require_data(tpl.landmarks.size() >= 5, "template must carry at least 5 landmarks");
    for (const auto& [id, idx] : tpl.landmarks)
        require_data(idx >= 0 && idx < n, "template landmark '" + id + "' index out of range");
    for (int idx : tpl.mouth_indices)
        require_data(idx >= 0 && idx < n, "template mouth index " + std::to_string(idx) + " out of range");
}

EdgeList edge_graph(const TriMesh& mesh) {
    validate(mesh);
    EdgeList edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& [a, b, c] : mesh.faces) {
        edges.emplace_back(std::min(a, b), std::max(a, b));
        edges.emplace_back(std::min(b, c), std::max(b, c));
        edges.emplace_back(std::min(a, c), std::max(a, c));
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
    std::vector<std::vector<int>> adj(mesh.vertex_count());
    for (const auto& [i, j] : edge_graph(mesh)) {
        adj[i].push_back(j);
        adj[j].push_back(i);
    }
    return adj;
}

namespace {

// Unnormalized area-weighted normal accumulation shared by the forward and
// reverse passes.
std::vector<Vec3> accumulate_face_normals(const TriMesh& mesh) {
    std::vector<Vec3> acc(mesh.vertex_count(), Vec3::Zero());
    for (const auto& [ia, ib, ic] : mesh.faces) {
        const Vec3 u = (mesh.vertices[ib] - mesh.vertices[ia]).cross(mesh.vertices[ic] - mesh.vertices[ia]);
        acc[ia] += u;
        acc[ib] += u;
        acc[ic] += u;
    }
    return acc;
}

}  // namespace

NormalField vertex_normals(const TriMesh& mesh) {
    validate(mesh);
    std::vector<int> incidence(mesh.vertex_count(), 0);
    for (const auto& [a, b, c] : mesh.faces) {
        ++incidence[a];
        ++incidence[b];
        ++incidence[c];
    }
    for (int i = 0; i < mesh.vertex_count(); ++i)
        require_data(incidence[i] > 0, "vertex " + std::to_string(i) + " is isolated (no incident face)");

    auto acc = accumulate_face_normals(mesh);
    NormalField field;
    field.normals.resize(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) {
        const double norm = acc[i].norm();
        require_data(norm > 0.0, "vertex " + std::to_string(i) + " has only zero-area incident faces");
        field.normals[i] = acc[i] / norm;
    }
    return field;
}

void vertex_normals_backward(const TriMesh& mesh, const std::vector<Vec3>& normal_grads,
                             std::vector<Vec3>& vertex_grads) {
    require_data(normal_grads.size() == mesh.vertices.size(), "normal gradient count does not match vertex count");
    if (vertex_grads.size() != mesh.vertices.size()) vertex_grads.assign(mesh.vertices.size(), Vec3::Zero());

    auto acc = accumulate_face_normals(mesh);
    // dL/du_i through the normalization n = u/|u|:  (I - n n^T)/|u| * dL/dn.
    std::vector<Vec3> du(acc.size());
    for (size_t i = 0; i < acc.size(); ++i) {
        const double norm = acc[i].norm();
        require_data(norm > 0.0, "vertex " + std::to_string(i) + " has a zero accumulated normal");
        const Vec3 n = acc[i] / norm;
        du[i] = (normal_grads[i] - n * n.dot(normal_grads[i])) / norm;
    }
    // Every incident face contributes the same cross product u to each of its
    // three corners, so each corner's du flows into the face geometry.
    for (const auto& [ia, ib, ic] : mesh.faces) {
        const Vec3& a = mesh.vertices[ia];
        const Vec3& b = mesh.vertices[ib];
        const Vec3& c = mesh.vertices[ic];
        const Vec3 g = du[ia] + du[ib] + du[ic];
        vertex_grads[ia] += g.cross(c - b);
        vertex_grads[ib] += (c - a).cross(g);
        vertex_grads[ic] += g.cross(b - a);
    }
}

GraphLaplacian graph_laplacian(const TriMesh& mesh, const std::vector<int>& subset) {
    auto adj = vertex_adjacency(mesh);
    GraphLaplacian lap;
    lap.rows.reserve(subset.size());
    lap.neighbors.reserve(subset.size());
    for (int idx : subset) {
        require_data(idx >= 0 && idx < mesh.vertex_count(), "laplacian subset index " + std::to_string(idx) + " out of range");
        require_data(!adj[idx].empty(), "laplacian subset vertex " + std::to_string(idx) + " has no neighbors");
        lap.rows.push_back(idx);
        lap.neighbors.push_back(adj[idx]);
    }
    return lap;
}

std::vector<Vec3> GraphLaplacian::apply(const std::vector<Vec3>& positions) const {
    std::vector<Vec3> out(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) {
        Vec3 mean = Vec3::Zero();
        for (int j : neighbors[r]) mean += positions[j];
        mean /= static_cast<double>(neighbors[r].size());
        out[r] = positions[rows[r]] - mean;
    }
    return out;
}

TriMesh interpolating_subdivide(const TriMesh& mesh) {
    validate(mesh);
    TriMesh out;
    out.vertices = mesh.vertices;

    std::map<std::pair<int, int>, int> midpoint;
    auto midpoint_index = [&](int i, int j) {
        const auto key = std::make_pair(std::min(i, j), std::max(i, j));
        auto it = midpoint.find(key);
        if (it != midpoint.end()) return it->second;
        const int idx = static_cast<int>(out.vertices.size());
        out.vertices.push_back(0.5 * (mesh.vertices[i] + mesh.vertices[j]));
        midpoint.emplace(key, idx);
        return idx;
    };

    out.faces.reserve(mesh.faces.size() * 4);
    for (const auto& [a, b, c] : mesh.faces) {
        const int ab = midpoint_index(a, b);
        const int bc = midpoint_index(b, c);
        const int ca = midpoint_index(c, a);
        out.faces.push_back({a, ab, ca});
        out.faces.push_back({b, bc, ab});
        out.faces.push_back({c, ca, bc});
        out.faces.push_back({ab, bc, ca});
    }
    return out;
}

}  // namespace facecorr
