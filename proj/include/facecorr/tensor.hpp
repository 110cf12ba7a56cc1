#pragma once

#include <Eigen/Core>

#include <cmath>
#include <vector>

namespace facecorr {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

/// Dense row-major rank-2 array of 64-bit floats. Vectors are 1 x n.
/// Storage is SIMD-aligned so that vectorized kernels take the same code
/// path on every allocation; bit-level reproducibility depends on it.
struct Tensor {
    using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

    int rows = 0;
    int cols = 0;
    Storage data;

    Tensor() = default;
    Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    int size() const { return rows * cols; }
    bool empty() const { return data.empty(); }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    RowMap map() { return RowMap(data.data(), rows, cols); }
    ConstRowMap map() const { return ConstRowMap(data.data(), rows, cols); }

    void set_zero() { std::fill(data.begin(), data.end(), 0.0); }
    void resize_like(const Tensor& other) {
        rows = other.rows;
        cols = other.cols;
        data.assign(static_cast<size_t>(rows) * cols, 0.0);
    }
    bool same_shape(const Tensor& other) const { return rows == other.rows && cols == other.cols; }
    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

}  // namespace facecorr
