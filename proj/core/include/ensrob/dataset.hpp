#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ensrob/mat.hpp"

namespace ensrob {

// Labeled samples with features in [0, 1].
struct Dataset {
    Mat features; // n x d
    std::vector<int> labels;
    int class_count = 0;
    std::string name;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    std::span<const double> sample(std::size_t i) const { return features.row(i); }
};

// IDX binary pair (big-endian magics 0x803 for images, 0x801 for labels);
// pixel bytes are scaled by 1/255.
Dataset load_idx(const std::string& image_path, const std::string& label_path);

// Inverse of load_idx up to 1/255 feature quantization. Features must fit an
// r x c grid: rows = dim, cols = 1 is always valid.
void save_idx(const Dataset& ds, const std::string& image_path,
              const std::string& label_path, std::uint32_t img_rows,
              std::uint32_t img_cols);

// Gaussian blobs around class centers rejection-sampled inside [0.2, 0.8]^d
// with pairwise separation; samples clamped to [0, 1].
Dataset synthetic_blobs(int n, int d, int classes, double separation, double noise,
                        std::uint64_t seed);

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed);

// Seeded shuffle of 0..n-1 chunked into batches; the last batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t epoch_seed);

void validate_dataset(const Dataset& ds);

} // namespace ensrob
