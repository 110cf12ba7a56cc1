#include "facecorr/geometry.hpp"

#include "facecorr/error.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <set>

using namespace facecorr;
using testutil::grid_patch;
using testutil::regular_octahedron;
using testutil::unit_right_triangle;

TEST_CASE("vertex normals of a planar CCW triangle point +z") {
    const auto normals = vertex_normals(unit_right_triangle());
    REQUIRE(normals.size() == 3);
    for (const auto& n : normals.normals) CHECK((n - Vec3(0, 0, 1)).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("reversed winding flips the normal") {
    auto mesh = unit_right_triangle();
    std::swap(mesh.faces[0][1], mesh.faces[0][2]);
    const auto normals = vertex_normals(mesh);
    for (const auto& n : normals.normals) CHECK(n.isApprox(Vec3(0, 0, -1), 1e-12));
}

TEST_CASE("octahedron apex normal is the axis direction") {
    // Derived by averaging the four incident face normals by hand: the
    // lateral components cancel by symmetry, leaving (0,0,1).
    const auto normals = vertex_normals(regular_octahedron());
    CHECK(normals.normals[4].isApprox(Vec3(0, 0, 1), 1e-12));
    CHECK(normals.normals[5].isApprox(Vec3(0, 0, -1), 1e-12));
}

TEST_CASE("isolated vertex is reported by index") {
    auto mesh = unit_right_triangle();
    mesh.vertices.push_back(Vec3(5, 5, 5));  // vertex 3, no face
    CHECK_THROWS_WITH_AS(vertex_normals(mesh), doctest::Contains("vertex 3"), Error);
}

TEST_CASE("zero-area-only incidence is an error") {
    TriMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)};  // collinear
    mesh.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(vertex_normals(mesh), Error);
}

TEST_CASE("normals are rotation equivariant") {
    Rng rng(42);
    auto mesh = grid_patch(5, 6, &rng);
    const auto base = vertex_normals(mesh);
    for (int trial = 0; trial < 5; ++trial) {
        const Mat3 rot = testutil::random_rotation(rng);
        TriMesh rotated = mesh;
        for (auto& v : rotated.vertices) v = rot * v;
        const auto rn = vertex_normals(rotated);
        for (int i = 0; i < rn.size(); ++i)
            CHECK((rn.normals[i] - rot * base.normals[i]).norm() < 1e-6);
    }
}

TEST_CASE("edge graph counts") {
    CHECK(edge_graph(unit_right_triangle()).size() == 3);

    TriMesh two;
    two.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)};
    two.faces = {{0, 1, 2}, {1, 3, 2}};
    CHECK(edge_graph(two).size() == 5);  // shared edge deduplicated

    // Closed surface: V - E + F = 2.
    const auto octa = regular_octahedron();
    const auto edges = edge_graph(octa);
    CHECK(octa.vertex_count() - static_cast<int>(edges.size()) + octa.face_count() == 2);
}

TEST_CASE("edge list is sorted and unique") {
    Rng rng(7);
    const auto mesh = grid_patch(4, 4, &rng);
    const auto edges = edge_graph(mesh);
    CHECK(std::is_sorted(edges.begin(), edges.end()));
    CHECK(std::adjacent_find(edges.begin(), edges.end()) == edges.end());
    for (const auto& [i, j] : edges) CHECK(i < j);
}

TEST_CASE("umbrella laplacian basics") {
    // Center of a symmetric 1-ring sits at the neighbor mean: row is zero.
    TriMesh star;
    star.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(-1, 0, 0), Vec3(0, -1, 0)};
    star.faces = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}};
    const auto lap = graph_laplacian(star, {0});
    auto rows = lap.apply(star.vertices);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].norm() == doctest::Approx(0.0).epsilon(1e-15));

    // Perturb the center by (0,0,delta): the row is exactly that offset.
    const double delta = 0.37;
    auto perturbed = star.vertices;
    perturbed[0] += Vec3(0, 0, delta);
    rows = lap.apply(perturbed);
    CHECK(rows[0].isApprox(Vec3(0, 0, delta), 1e-15));
}

TEST_CASE("laplacian annihilates constants and ignores translations") {
    Rng rng(11);
    const auto mesh = grid_patch(5, 5, &rng);
    std::vector<int> subset;
    for (int i = 0; i < mesh.vertex_count(); i += 3) subset.push_back(i);
    const auto lap = graph_laplacian(mesh, subset);

    const auto base = lap.apply(mesh.vertices);
    const Vec3 t(0.3, -2.0, 11.5);
    auto shifted = mesh.vertices;
    for (auto& v : shifted) v += t;
    const auto moved = lap.apply(shifted);
    for (size_t r = 0; r < base.size(); ++r) CHECK((moved[r] - base[r]).norm() <= 1e-9);

    std::vector<Vec3> constant(mesh.vertex_count(), Vec3(4, 5, 6));
    for (const auto& row : lap.apply(constant)) CHECK(row.norm() <= 1e-12);
}

TEST_CASE("laplacian rejects isolated subset vertices") {
    auto mesh = unit_right_triangle();
    mesh.vertices.push_back(Vec3(9, 9, 9));
    mesh.faces.push_back({0, 1, 2});  // vertex 3 still has no neighbors
    CHECK_THROWS_AS(graph_laplacian(mesh, {3}), Error);
}

TEST_CASE("midpoint subdivision counts and interpolation") {
    const auto tri = unit_right_triangle();
    const auto sub = interpolating_subdivide(tri);
    CHECK(sub.vertex_count() == 6);
    CHECK(sub.face_count() == 4);

    // Original vertices preserved bit-exactly.
    for (int i = 0; i < tri.vertex_count(); ++i) {
        CHECK(sub.vertices[i].x() == tri.vertices[i].x());
        CHECK(sub.vertices[i].y() == tri.vertices[i].y());
        CHECK(sub.vertices[i].z() == tri.vertices[i].z());
    }

    Rng rng(3);
    const auto mesh = grid_patch(4, 5, &rng);
    const auto edges = edge_graph(mesh);
    const auto refined = interpolating_subdivide(mesh);
    CHECK(refined.vertex_count() == mesh.vertex_count() + static_cast<int>(edges.size()));
    CHECK(refined.face_count() == 4 * mesh.face_count());

    // Topology preserved: Euler characteristic is unchanged.
    const auto euler = [](const TriMesh& m) {
        return m.vertex_count() - static_cast<int>(edge_graph(m).size()) + m.face_count();
    };
    CHECK(euler(refined) == euler(mesh));
}

TEST_CASE("vertex_normals_backward matches finite differences") {
    Rng rng(19);
    auto mesh = grid_patch(4, 4, &rng, 0.3);
    const int n = mesh.vertex_count();

    // Scalar functional: weighted sum of normal components.
    std::vector<Vec3> weights(n);
    for (auto& w : weights) w = Vec3(rng.normal(), rng.normal(), rng.normal());
    auto functional = [&]() {
        const auto nf = vertex_normals(mesh);
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += weights[i].dot(nf.normals[i]);
        return s;
    };

    std::vector<Vec3> grads(n, Vec3::Zero());
    vertex_normals_backward(mesh, weights, grads);

    for (int i = 0; i < n; i += 3)
        for (int c = 0; c < 3; ++c) {
            const double fd = testutil::central_difference(functional, mesh.vertices[i][c]);
            CHECK(testutil::rel_err(fd, grads[i][c]) < 1e-6);
        }
}

TEST_CASE("mesh validation catches bad faces") {
    TriMesh mesh;
    mesh.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    mesh.faces = {{0, 1, 3}};
    CHECK_THROWS_AS(validate(mesh), Error);
    mesh.faces = {{0, 1, 1}};
    CHECK_THROWS_AS(validate(mesh), Error);
}
