#include "facecorr/evalmetrics.hpp"

#include "facecorr/error.hpp"
#include "facecorr/spatial.hpp"

#include <cmath>

namespace facecorr {

MetricReport MetricReport::from_items(std::string metric, std::vector<double> items, double mm_per_unit) {
    MetricReport report;
    report.metric = std::move(metric);
    report.per_item = std::move(items);
    require_data(!report.per_item.empty(), "metric '" + report.metric + "' has no items");
    if (mm_per_unit > 0.0) {
        for (auto& v : report.per_item) v *= mm_per_unit;
        report.units = "mm";
    }
    double sum = 0.0;
    for (double v : report.per_item) sum += v;
    report.mean = sum / static_cast<double>(report.per_item.size());
    double ss = 0.0;
    for (double v : report.per_item) ss += (v - report.mean) * (v - report.mean);
    report.stddev = std::sqrt(ss / static_cast<double>(report.per_item.size()));
    return report;
}

MetricReport per_vertex_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double mm_per_unit) {
    require_data(a.size() == b.size(), "per-vertex error needs equal vertex counts, got " +
                                           std::to_string(a.size()) + " and " + std::to_string(b.size()));
    require_data(!a.empty(), "per-vertex error over empty shapes");
    std::vector<double> items(a.size());
    for (size_t i = 0; i < a.size(); ++i) items[i] = (a[i] - b[i]).norm();
    return MetricReport::from_items("per_vertex_error", std::move(items), mm_per_unit);
}

MetricReport fitting_error(const PointCloud& test, const std::vector<Vec3>& estimate, double mm_per_unit) {
    require_data(test.size() > 0 && !estimate.empty(), "fitting error needs non-empty inputs");
    const KdTree tree(estimate);
    std::vector<double> items(test.size());
    for (int i = 0; i < test.size(); ++i) items[i] = std::sqrt(tree.nearest(test.points[i]).d2);
    return MetricReport::from_items("fitting_error", std::move(items), mm_per_unit);
}

MetricReport semantic_landmark_error(const std::vector<Vec3>& estimate, const FaceTemplate& tpl,
                                     const LandmarkSet& annotations, double mm_per_unit) {
    require_data(annotations.size() >= 1, "landmark error needs at least one annotation");
    std::vector<double> items;
    items.reserve(annotations.size());
    for (const auto& ann : annotations.landmarks) {
        const int idx = tpl.find_landmark(ann.id);
        require_data(idx >= 0, "template has no landmark id '" + ann.id + "'");
        require_data(idx < static_cast<int>(estimate.size()), "landmark index out of range for the estimate");
        items.push_back((estimate[idx] - ann.position).norm());
    }
    return MetricReport::from_items("semantic_landmark_error", std::move(items), mm_per_unit);
}

}  // namespace facecorr
