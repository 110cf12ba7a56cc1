#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace facecorr {

/// Central finite-difference verification of every analytic gradient: each
/// loss term with respect to predicted vertices, and the composed totals with
/// respect to every network parameter of a reduced-width model. Probes that
/// cross a routing boundary (ReLU flip, argmin/argmax change, cutoff or sign
/// flip) are excluded and counted.
struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
    int excluded = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double overall_max_rel_err = 0.0;
    int total_checked = 0;
    int total_excluded = 0;

    bool pass(double threshold = 1e-4) const { return overall_max_rel_err < threshold && total_checked > 0; }
};

GradCheckReport run_gradcheck(uint64_t seed, int instances = 20, int vertices = 50, double step = 1e-5);

}  // namespace facecorr
