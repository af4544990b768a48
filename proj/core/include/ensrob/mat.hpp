#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ensrob {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

} // namespace ensrob
