#pragma once

#include "facecorr/geometry.hpp"
#include "facecorr/preprocess.hpp"

#include <string>
#include <vector>

namespace facecorr {

/// One metric evaluation; units are model units unless a positive mm-per-unit
/// scale was supplied.
struct MetricReport {
    std::string metric;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_item;
    std::string units = "model";

    static MetricReport from_items(std::string metric, std::vector<double> items, double mm_per_unit);
};

/// Mean distance between corresponding vertices of two equally ordered shapes.
MetricReport per_vertex_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double mm_per_unit = 0.0);

/// Mean distance from each test point to its nearest estimated vertex
/// (kd-accelerated, exact).
MetricReport fitting_error(const PointCloud& test, const std::vector<Vec3>& estimate, double mm_per_unit = 0.0);

/// Mean distance between annotated landmarks and the landmarks transferred
/// through the template's landmark vertex indices.
MetricReport semantic_landmark_error(const std::vector<Vec3>& estimate, const FaceTemplate& tpl,
                                     const LandmarkSet& annotations, double mm_per_unit = 0.0);

}  // namespace facecorr
