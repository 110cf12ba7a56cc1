#include "facecorr/preprocess.hpp"

#include "facecorr/error.hpp"
#include "facecorr/geometry.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <set>

using namespace facecorr;
using testutil::random_rotation;

namespace {

LandmarkSet five_landmarks() {
    LandmarkSet set;
    set.landmarks = {{"eye_outer_l", Vec3(-0.4, 0.3, 0.8)},
                     {"eye_outer_r", Vec3(0.4, 0.3, 0.8)},
                     {"nose_tip", Vec3(0.0, 0.0, 1.0)},
                     {"mouth_corner_l", Vec3(-0.3, -0.4, 0.8)},
                     {"mouth_corner_r", Vec3(0.3, -0.4, 0.8)}};
    return set;
}

LandmarkSet transformed(const LandmarkSet& src, const Similarity& t) {
    LandmarkSet out = src;
    for (auto& lm : out.landmarks) lm.position = t.apply(lm.position);
    return out;
}

}  // namespace

TEST_CASE("identity fit on identical landmark sets") {
    const auto src = five_landmarks();
    const auto fit = fit_similarity(src, src);
    CHECK(fit.transform.scale == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((fit.transform.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fit.transform.translation.norm() < 1e-12);
    CHECK(fit.rms < 1e-12);
}

TEST_CASE("fit recovers a known similarity") {
    Similarity known;
    known.scale = 2.0;
    known.rotation = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()).toRotationMatrix();
    known.translation = Vec3(1, 0, 0);

    const auto src = five_landmarks();
    const auto fit = fit_similarity(src, transformed(src, known));
    CHECK(std::abs(fit.transform.scale - known.scale) < 1e-8);
    CHECK((fit.transform.rotation - known.rotation).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((fit.transform.translation - known.translation).norm() < 1e-8);
    CHECK(fit.rms < 1e-9);
}

TEST_CASE("collinear landmarks are degenerate") {
    LandmarkSet line;
    line.landmarks = {{"a", Vec3(0, 0, 0)}, {"b", Vec3(1, 0, 0)}, {"c", Vec3(2, 0, 0)}};
    CHECK_THROWS_AS(fit_similarity(line, line), Error);
}

TEST_CASE("fit residual is invariant to a common rigid motion") {
    Rng rng(8);
    auto src = five_landmarks();
    // Perturb the target so the residual is nonzero.
    auto tgt = src;
    for (auto& lm : tgt.landmarks) lm.position += Vec3(rng.normal(0, 0.05), rng.normal(0, 0.05), rng.normal(0, 0.05));
    const double base_rms = fit_similarity(src, tgt).rms;

    for (int trial = 0; trial < 5; ++trial) {
        Similarity motion;
        motion.rotation = random_rotation(rng);
        motion.translation = Vec3(rng.normal(), rng.normal(), rng.normal());
        const double rms = fit_similarity(transformed(src, motion), transformed(tgt, motion)).rms;
        CHECK(std::abs(rms - base_rms) <= 1e-9);
    }
}

TEST_CASE("unit-sphere normalization") {
    SUBCASE("sphere of radius 5 at (3,0,0)") {
        PointCloud cloud;
        Rng rng(4);
        for (int i = 0; i < 200; ++i) cloud.points.push_back(Vec3(3, 0, 0) + 5.0 * testutil::random_unit(rng));
        const auto res = normalize_unit_sphere(cloud);
        double max_r = 0.0;
        Vec3 centroid = Vec3::Zero();
        for (const auto& p : res.cloud.points) {
            max_r = std::max(max_r, p.norm());
            centroid += p;
        }
        CHECK(max_r == doctest::Approx(1.0).epsilon(1e-9));
        CHECK((centroid / res.cloud.size()).norm() < 1e-9);
    }
    SUBCASE("two points") {
        PointCloud cloud;
        cloud.points = {Vec3(0, 0, 0), Vec3(2, 0, 0)};
        const auto res = normalize_unit_sphere(cloud);
        CHECK(res.cloud.points[0].isApprox(Vec3(-1, 0, 0), 1e-12));
        CHECK(res.cloud.points[1].isApprox(Vec3(1, 0, 0), 1e-12));
    }
    SUBCASE("already normalized cloud gets the identity transform") {
        PointCloud cloud;
        cloud.points = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
        const auto res = normalize_unit_sphere(cloud);
        CHECK(std::abs(res.transform.scale - 1.0) < 1e-9);
        CHECK(res.transform.translation.norm() < 1e-9);
    }
    SUBCASE("coincident points are rejected") {
        PointCloud cloud;
        cloud.points = {Vec3(1, 1, 1), Vec3(1, 1, 1)};
        CHECK_THROWS_AS(normalize_unit_sphere(cloud), Error);
    }
}

TEST_CASE("crop keeps exactly the points inside the closed unit ball") {
    PointCloud cloud;
    cloud.points = {Vec3(0.5, 0, 0), Vec3(1.0, 0, 0), Vec3(1.5, 0, 0)};
    const auto cropped = crop_unit_sphere(cloud);
    REQUIRE(cropped.size() == 2);  // boundary inclusive
    CHECK(cropped.points[0].x() == 0.5);
    CHECK(cropped.points[1].x() == 1.0);

    Rng rng(14);
    PointCloud big;
    big.points = testutil::random_points(rng, 400, 1.4);
    int inside = 0;
    for (const auto& p : big.points) inside += p.norm() <= 1.0;
    CHECK(crop_unit_sphere(big).size() == inside);

    PointCloud far;
    far.points = {Vec3(2, 2, 2)};
    CHECK_THROWS_AS(crop_unit_sphere(far), Error);
}

TEST_CASE("resample basics") {
    Rng rng(25);
    PointCloud cloud;
    cloud.points = testutil::random_points(rng, 64);

    SUBCASE("n equal to source gives a permutation") {
        const auto out = resample(cloud, 64, 9);
        REQUIRE(out.size() == 64);
        std::set<std::array<double, 3>> src, dst;
        for (const auto& p : cloud.points) src.insert({p.x(), p.y(), p.z()});
        for (const auto& p : out.points) dst.insert({p.x(), p.y(), p.z()});
        CHECK(src == dst);
    }
    SUBCASE("deterministic under the seed") {
        const auto a = resample(cloud, 32, 1234);
        const auto b = resample(cloud, 32, 1234);
        REQUIRE(a.size() == b.size());
        for (int i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);
        const auto c = resample(cloud, 32, 1235);
        bool all_equal = true;
        for (int i = 0; i < a.size(); ++i) all_equal = all_equal && a.points[i] == c.points[i];
        CHECK_FALSE(all_equal);
    }
    SUBCASE("membership: every output point comes from the source") {
        const auto out = resample(cloud, 48, 77);
        std::set<std::array<double, 3>> src;
        for (const auto& p : cloud.points) src.insert({p.x(), p.y(), p.z()});
        for (const auto& p : out.points) CHECK(src.count({p.x(), p.y(), p.z()}) == 1);
    }
    SUBCASE("n = 0 is rejected") {
        CHECK_THROWS_AS(resample(cloud, 0, 1), Error);
    }
}

TEST_CASE("resample subdivides a mesh when the source is short") {
    const auto tri = testutil::unit_right_triangle();
    PointCloud cloud;
    cloud.points = tri.vertices;
    const auto out = resample(cloud, 5, 3, &tri);
    REQUIRE(out.size() == 5);
    // Source after one subdivision: the 3 corners plus 3 edge midpoints.
    std::set<std::array<double, 3>> allowed;
    for (const auto& v : interpolating_subdivide(tri).vertices) allowed.insert({v.x(), v.y(), v.z()});
    std::set<std::array<double, 3>> seen;
    for (const auto& p : out.points) {
        CHECK(allowed.count({p.x(), p.y(), p.z()}) == 1);
        seen.insert({p.x(), p.y(), p.z()});
    }
    CHECK(seen.size() == 5);  // without replacement
}

TEST_CASE("resample without a mesh jitters instead of duplicating") {
    PointCloud tiny;
    tiny.points = {Vec3(0, 0, 0), Vec3(1, 1, 1)};
    const auto out = resample(tiny, 10, 5);
    REQUIRE(out.size() == 10);
    std::set<std::array<double, 3>> seen;
    for (const auto& p : out.points) seen.insert({p.x(), p.y(), p.z()});
    CHECK(seen.size() == 10);  // jitter keeps duplicates distinct
    for (const auto& p : out.points) {
        const double d0 = p.norm(), d1 = (p - Vec3(1, 1, 1)).norm();
        CHECK(std::min(d0, d1) < 1e-2);  // still near a source point
    }
}

TEST_CASE("augment derives k deterministic resamplings") {
    Rng rng(2);
    PointCloud cloud;
    cloud.points = testutil::random_points(rng, 32);

    const auto one = augment(cloud, 16, 1, 5);
    REQUIRE(one.size() == 1);
    const auto single = resample(cloud, 16, 5);
    for (int i = 0; i < 16; ++i) CHECK(one[0].points[i] == single.points[i]);

    const auto ten = augment(cloud, 16, 10, 5);
    REQUIRE(ten.size() == 10);
    int distinct_orderings = 0;
    for (int a = 0; a < 10; ++a) {
        CHECK(ten[a].size() == 16);
        for (int b = a + 1; b < 10; ++b) {
            bool same = true;
            for (int i = 0; i < 16 && same; ++i) same = ten[a].points[i] == ten[b].points[i];
            distinct_orderings += !same;
        }
    }
    CHECK(distinct_orderings == 45);  // all pairs differ
}

TEST_CASE("estimated normals agree with plane orientation") {
    // Points on the z=0 plane; the oriented reference is a CCW grid whose
    // normals point +z.
    const auto ref = testutil::grid_patch(4, 4);
    Rng rng(6);
    PointCloud cloud;
    for (int i = 0; i < 100; ++i) cloud.points.emplace_back(rng.uniform(0.0, 0.6), rng.uniform(0.0, 0.6), 0.0);
    const auto normals = estimate_normals(cloud, ref, 12);
    REQUIRE(normals.size() == cloud.points.size());
    for (const auto& n : normals) CHECK(n.isApprox(Vec3(0, 0, 1), 1e-9));
}
