#pragma once

#include "facecorr/geometry.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace facecorr {

/// Procedural stand-in for a scanned morphable-model corpus: a fixed-topology
/// sphere-patch template with orthonormal smooth identity/expression
/// displacement bases and an optional quadratic warp of the identity shape
/// controlled by gamma. gamma = 0 makes the generator exactly linear.
struct ToyMorphable {
    FaceTemplate tpl;
    std::vector<std::vector<Vec3>> id_basis;   // k_id fields, each one Vec3 per vertex
    std::vector<std::vector<Vec3>> exp_basis;  // k_exp fields, mouth/brow localized
    double gamma = 0.0;
    Eigen::Matrix<double, 3, 6> warp;  // quadratic warp coefficients
    double sigma_id = 1.0;
    double sigma_exp = 0.5;
    uint64_t seed = 0;

    int vertex_count() const { return tpl.mesh.vertex_count(); }
    int k_id() const { return static_cast<int>(id_basis.size()); }
    int k_exp() const { return static_cast<int>(exp_basis.size()); }
};

/// One generated scan with its ground-truth correspondence.
struct SynthSample {
    std::vector<Vec3> ground_truth;  // template vertex order
    PointCloud input;                // seeded shuffle of ground_truth, with normals
    std::vector<int> permutation;    // input.points[i] == ground_truth[permutation[i]]
    Eigen::VectorXd id_coeffs;
    Eigen::VectorXd exp_coeffs;
    bool neutral = false;
    int subject = 0;
};

/// Icosphere at the subdivision level giving exactly n vertices
/// (n in {12, 42, 162, 642, 2562}).
TriMesh icosphere(int n, double radius);

/// Deterministic model construction. n must be on the icosphere ladder
/// (162/642/2562); k_id and k_exp must each be at least 1 and fit in 3n.
ToyMorphable build_toy_model(uint64_t seed, int n, int k_id, int k_exp, double gamma);

/// Compose a shape from coefficients: warp(template + id displacement) +
/// expression displacement.
std::vector<Vec3> compose_shape(const ToyMorphable& model, const Eigen::VectorXd& id_coeffs,
                                const Eigen::VectorXd& exp_coeffs);

/// subjects x (1 neutral + expressions_per_subject expressive) samples with
/// Gaussian coefficients (neutral samples have exactly zero expression
/// coefficients) and seeded input shuffles.
std::vector<SynthSample> sample_dataset(const ToyMorphable& model, int subjects, int expressions_per_subject,
                                        uint64_t seed);

}  // namespace facecorr
