#include "ensrob/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "ensrob/errors.hpp"
#include "ensrob/rng.hpp"

namespace ensrob {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw IoError("truncated IDX header in " + path);
    return (static_cast<std::uint32_t>(buf[0]) << 24) |
           (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) |
           static_cast<std::uint32_t>(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

} // namespace

Dataset load_idx(const std::string& image_path, const std::string& label_path) {
    std::ifstream img(image_path, std::ios::binary);
    if (!img) throw IoError("cannot open " + image_path);
    std::uint32_t magic = read_u32_be(img, image_path);
    if (magic != kImageMagic)
        throw FormatError("bad image magic in " + image_path);
    std::uint32_t count = read_u32_be(img, image_path);
    std::uint32_t rows = read_u32_be(img, image_path);
    std::uint32_t cols = read_u32_be(img, image_path);
    if (count == 0) throw FormatError("empty image file " + image_path);
    std::size_t dim = static_cast<std::size_t>(rows) * cols;
    if (dim == 0) throw FormatError("zero image dimensions in " + image_path);

    std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * dim);
    if (!img.read(reinterpret_cast<char*>(pixels.data()),
                  static_cast<std::streamsize>(pixels.size())))
        throw IoError("truncated image data in " + image_path);

    std::ifstream lab(label_path, std::ios::binary);
    if (!lab) throw IoError("cannot open " + label_path);
    std::uint32_t lmagic = read_u32_be(lab, label_path);
    if (lmagic != kLabelMagic)
        throw FormatError("bad label magic in " + label_path);
    std::uint32_t lcount = read_u32_be(lab, label_path);
    if (lcount != count)
        throw FormatError("label count " + std::to_string(lcount) +
                          " does not match image count " + std::to_string(count));
    std::vector<unsigned char> raw_labels(lcount);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                  static_cast<std::streamsize>(raw_labels.size())))
        throw IoError("truncated label data in " + label_path);

    Dataset ds;
    ds.name = image_path;
    ds.features = Mat(count, dim);
    for (std::size_t k = 0; k < pixels.size(); ++k)
        ds.features.data[k] = static_cast<double>(pixels[k]) / 255.0;
    ds.labels.resize(lcount);
    int max_label = 0;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        ds.labels[i] = static_cast<int>(raw_labels[i]);
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.class_count = max_label + 1;
    return ds;
}

void save_idx(const Dataset& ds, const std::string& image_path,
              const std::string& label_path, std::uint32_t img_rows,
              std::uint32_t img_cols) {
    if (static_cast<std::size_t>(img_rows) * img_cols != ds.dim())
        throw ShapeError("image grid does not match feature dimension");

    std::ofstream img(image_path, std::ios::binary);
    if (!img) throw IoError("cannot write " + image_path);
    write_u32_be(img, kImageMagic);
    write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(img, img_rows);
    write_u32_be(img, img_cols);
    for (double v : ds.features.data) {
        auto byte = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        img.put(static_cast<char>(byte));
    }
    if (!img) throw IoError("short write to " + image_path);

    std::ofstream lab(label_path, std::ios::binary);
    if (!lab) throw IoError("cannot write " + label_path);
    write_u32_be(lab, kLabelMagic);
    write_u32_be(lab, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        if (l < 0 || l > 255) throw FormatError("label does not fit a byte");
        lab.put(static_cast<char>(static_cast<unsigned char>(l)));
    }
    if (!lab) throw IoError("short write to " + label_path);
}

Dataset synthetic_blobs(int n, int d, int classes, double separation, double noise,
                        std::uint64_t seed) {
    if (d < 1) throw ConfigError("blob dimension must be >= 1");
    if (classes < 2) throw ConfigError("blob class count must be >= 2");
    if (n < classes) throw ConfigError("need at least one sample per class");
    if (!(separation > 0.0)) throw ConfigError("separation must be positive");
    if (noise < 0.0) throw ConfigError("noise must be >= 0");

    Rng rng(seed);
    std::vector<Vec> centers;
    centers.reserve(static_cast<std::size_t>(classes));
    constexpr int kMaxAttempts = 10000;
    int attempts = 0;
    while (centers.size() < static_cast<std::size_t>(classes)) {
        if (++attempts > kMaxAttempts)
            throw GenerationError("could not place " + std::to_string(classes) +
                                  " centers with separation " +
                                  std::to_string(separation));
        Vec c(static_cast<std::size_t>(d));
        for (double& x : c) x = rng.uniform(0.2, 0.8);
        bool ok = true;
        for (const Vec& other : centers) {
            double dist2 = 0.0;
            for (std::size_t j = 0; j < c.size(); ++j) {
                double diff = c[j] - other[j];
                dist2 += diff * diff;
            }
            if (dist2 < separation * separation) {
                ok = false;
                break;
            }
        }
        if (ok) centers.push_back(std::move(c));
    }

    Dataset ds;
    ds.name = "blobs";
    ds.class_count = classes;
    ds.features = Mat(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    ds.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int label = i % classes;
        ds.labels[static_cast<std::size_t>(i)] = label;
        const Vec& c = centers[static_cast<std::size_t>(label)];
        auto row = ds.features.row(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < row.size(); ++j) {
            double x = c[j];
            if (noise > 0.0) x += noise * rng.normal();
            row[j] = std::clamp(x, 0.0, 1.0);
        }
    }
    return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
        throw ConfigError("train fraction must be in (0, 1)");
    std::size_t n = ds.size();
    auto train_count = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction + 1e-9));
    if (train_count == 0 || train_count >= n)
        throw ConfigError("split leaves an empty part");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    auto take = [&](std::size_t begin, std::size_t end, const std::string& suffix) {
        Dataset part;
        part.name = ds.name + suffix;
        part.class_count = ds.class_count;
        part.features = Mat(end - begin, ds.dim());
        part.labels.resize(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            std::size_t src = order[i];
            auto dst = part.features.row(i - begin);
            auto s = ds.sample(src);
            std::copy(s.begin(), s.end(), dst.begin());
            part.labels[i - begin] = ds.labels[src];
        }
        return part;
    };
    return {take(0, train_count, "/train"), take(train_count, n, "/test")};
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n, std::size_t batch_size,
                                                  std::uint64_t epoch_seed) {
    if (n == 0) throw ConfigError("cannot batch an empty index range");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(epoch_seed);
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < n; at += batch_size) {
        std::size_t end = std::min(at + batch_size, n);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void validate_dataset(const Dataset& ds) {
    if (ds.size() == 0) throw FormatError("dataset is empty");
    if (ds.class_count < 1) throw FormatError("dataset class count must be >= 1");
    if (ds.labels.size() != ds.size())
        throw ShapeError("label count does not match feature rows");
    for (double v : ds.features.data)
        if (!(v >= 0.0 && v <= 1.0))
            throw FormatError("feature outside [0, 1]");
    for (int l : ds.labels)
        if (l < 0 || l >= ds.class_count)
            throw FormatError("label outside class range");
}

} // namespace ensrob
