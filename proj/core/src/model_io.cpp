#include "ensrob/model_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ensrob/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace ensrob {

namespace {

constexpr char kMagic[8] = {'E', 'N', 'S', 'R', 'O', 'B', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw IoError("truncated model file " + path);
    return v;
}

std::string sidecar_path(const std::string& path) {
    if (path.size() > 4 && path.ends_with(".bin"))
        return path.substr(0, path.size() - 4) + ".json";
    return path + ".json";
}

} // namespace

void save_model(const MlpModel& model, const std::string& path) {
    if (!all_finite(model)) throw NumericError("refusing to save non-finite parameters");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (int d : model.layer_dims) write_u32(out, static_cast<std::uint32_t>(d));
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        const Mat& w = model.weights[l];
        out.write(reinterpret_cast<const char*>(w.data.data()),
                  static_cast<std::streamsize>(w.data.size() * sizeof(double)));
        const Vec& b = model.biases[l];
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
    if (!out) throw IoError("short write to " + path);
}

MlpModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[8];
    if (!in.read(magic, sizeof magic)) throw IoError("truncated model file " + path);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw FormatError("bad model magic in " + path);
    std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw FormatError("unsupported model format version " + std::to_string(version) +
                          " in " + path);
    std::uint32_t ndims = read_u32(in, path);
    if (ndims < 2) throw FormatError("model needs at least 2 layer dims in " + path);

    MlpModel model;
    model.layer_dims.resize(ndims);
    for (std::uint32_t i = 0; i < ndims; ++i) {
        std::uint32_t d = read_u32(in, path);
        if (d == 0) throw FormatError("zero layer dimension in " + path);
        model.layer_dims[i] = static_cast<int>(d);
    }
    for (std::uint32_t l = 0; l + 1 < ndims; ++l) {
        auto rows = static_cast<std::size_t>(model.layer_dims[l + 1]);
        auto cols = static_cast<std::size_t>(model.layer_dims[l]);
        Mat w(rows, cols);
        if (!in.read(reinterpret_cast<char*>(w.data.data()),
                     static_cast<std::streamsize>(w.data.size() * sizeof(double))))
            throw IoError("truncated weights in " + path);
        model.weights.push_back(std::move(w));
        Vec b(rows);
        if (!in.read(reinterpret_cast<char*>(b.data()),
                     static_cast<std::streamsize>(b.size() * sizeof(double))))
            throw IoError("truncated biases in " + path);
        model.biases.push_back(std::move(b));
    }
    if (in.get() != std::ifstream::traits_type::eof())
        throw FormatError("trailing bytes in " + path);
    if (!all_finite(model)) throw NumericError("non-finite parameters in " + path);
    return model;
}

void save_hypothesis(const Hypothesis& h, const TrainConfig& config,
                     const std::string& path) {
    save_model(h.model, path);
    nlohmann::json meta;
    meta["algorithm"] = h.algorithm;
    meta["canonical_config"] = canonical_config_string(config);
    meta["config_hash"] = h.config_hash;
    meta["seed"] = h.seed;
    meta["train_loss_curve"] = h.train_loss_curve;
    std::ofstream out(sidecar_path(path));
    if (!out) throw IoError("cannot write " + sidecar_path(path));
    out << meta.dump(2) << '\n';
}

Hypothesis load_hypothesis(const std::string& path) {
    Hypothesis h;
    h.model = load_model(path);
    std::string side = sidecar_path(path);
    if (!std::filesystem::exists(side)) return h;
    std::ifstream in(side);
    if (!in) throw IoError("cannot open " + side);
    nlohmann::json meta;
    try {
        in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("bad sidecar " + side + ": " + e.what());
    }
    h.algorithm = meta.value("algorithm", std::string{});
    h.config_hash = meta.value("config_hash", std::uint64_t{0});
    h.seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("train_loss_curve"))
        h.train_loss_curve = meta["train_loss_curve"].get<Vec>();
    return h;
}

} // namespace ensrob
