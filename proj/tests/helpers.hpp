#pragma once

// Shared fixtures and independent oracles for the test suite. The oracles
// deliberately re-implement the math they check with plain loops so the tests
// do not depend on the library's accelerated paths.

#include "facecorr/geometry.hpp"
#include "facecorr/rng.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <vector>

namespace testutil {

using facecorr::Rng;
using facecorr::TriMesh;
using facecorr::Vec3;

inline TriMesh unit_right_triangle() {
    TriMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.faces = {{0, 1, 2}};
    return m;
}

inline TriMesh regular_octahedron() {
    TriMesh m;
    m.vertices = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    m.faces = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

// rows x cols planar grid in the z=0 plane, triangulated; optionally jittered
// in z for generic geometry. Every vertex belongs to at least one face.
inline TriMesh grid_patch(int rows, int cols, Rng* jitter = nullptr, double jitter_scale = 0.1) {
    TriMesh m;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            double z = jitter ? jitter->normal(0.0, jitter_scale) : 0.0;
            m.vertices.emplace_back(c * 0.2, r * 0.2, z);
        }
    auto at = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            m.faces.push_back({at(r, c), at(r, c + 1), at(r + 1, c)});
            m.faces.push_back({at(r, c + 1), at(r + 1, c + 1), at(r + 1, c)});
        }
    return m;
}

inline Vec3 random_unit(Rng& rng) {
    for (;;) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        const double n = v.norm();
        if (n > 1e-6) return v / n;
    }
}

inline facecorr::Mat3 random_rotation(Rng& rng) {
    const Vec3 axis = random_unit(rng);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline std::vector<Vec3> random_points(Rng& rng, int n, double scale = 1.0) {
    std::vector<Vec3> pts(n);
    for (auto& p : pts) p = Vec3(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
    return pts;
}

// Independent nearest-neighbor oracle (lowest index on ties).
inline std::pair<int, double> oracle_nearest(const std::vector<Vec3>& pts, const Vec3& q) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i) {
        const double dx = pts[i].x() - q.x();
        const double dy = pts[i].y() - q.y();
        const double dz = pts[i].z() - q.z();
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<int>(i);
        }
    }
    return {best, best_d2};
}

// Independent two-sided Chamfer oracle with the flying-vertex cutoff.
struct OracleChamfer {
    double value = 0.0;
    int flying_a = 0;
    int flying_b = 0;
};
inline OracleChamfer oracle_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double eps) {
    OracleChamfer out;
    for (const auto& p : a) {
        const auto [idx, d2] = oracle_nearest(b, p);
        (void)idx;
        if (d2 > eps) ++out.flying_a;
        else out.value += d2;
    }
    for (const auto& q : b) {
        const auto [idx, d2] = oracle_nearest(a, q);
        (void)idx;
        if (d2 > eps) ++out.flying_b;
        else out.value += d2;
    }
    return out;
}

// Central finite difference of a scalar functional.
template <typename F>
double central_difference(F&& f, double& x, double h = 1e-5) {
    const double saved = x;
    x = saved + h;
    const double up = f();
    x = saved - h;
    const double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    const double denom = std::max({1e-7, std::abs(a), std::abs(b)});
    return std::abs(a - b) / denom;
}

}  // namespace testutil
