#include "ensrob/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "ensrob/errors.hpp"

namespace ensrob {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) parts.push_back(trim(item));
    return parts;
}

struct Cursor {
    std::string origin;
    int line = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
    }
};

double parse_double(const Cursor& at, const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        at.fail("key '" + key + "' needs a real number, got '" + v + "'");
    }
}

long long parse_int(const Cursor& at, const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        at.fail("key '" + key + "' needs an integer, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const Cursor& at, const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        at.fail("key '" + key + "' needs an unsigned integer, got '" + v + "'");
    }
}

bool parse_bool(const Cursor& at, const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    at.fail("key '" + key + "' needs a boolean, got '" + v + "'");
}

std::vector<double> parse_double_list(const Cursor& at, const std::string& key,
                                      const std::string& v) {
    std::vector<double> out;
    for (const std::string& part : split_list(v, ','))
        out.push_back(parse_double(at, key, part));
    if (out.empty()) at.fail("key '" + key + "' needs at least one value");
    return out;
}

std::vector<int> parse_int_list(const Cursor& at, const std::string& key,
                                const std::string& v, char sep) {
    std::vector<int> out;
    if (v == "none") return out;
    for (const std::string& part : split_list(v, sep))
        out.push_back(static_cast<int>(parse_int(at, key, part)));
    return out;
}

// Sweep grid; expanded into TrainEntry values after the file is read.
struct SweepSpec {
    bool present = false;
    std::vector<std::string> algorithms;
    std::vector<int> widths = {32};
    std::vector<double> lrs = {0.01};
    std::vector<double> radii = {0.1};
    TrainConfig base; // shared scalar fields
};

void apply_train_key(const Cursor& at, TrainEntry& e, const std::string& key,
                     const std::string& value) {
    TrainConfig& c = e.config;
    if (key == "algorithm") {
        try {
            c.algorithm = parse_algorithm(value);
        } catch (const ConfigError& err) {
            at.fail(err.what());
        }
    } else if (key == "hidden_dims") {
        e.hidden_dims = parse_int_list(at, key, value, 'x');
    } else if (key == "lr") {
        c.lr = parse_double(at, key, value);
    } else if (key == "momentum") {
        c.momentum = parse_double(at, key, value);
    } else if (key == "weight_decay") {
        c.weight_decay = parse_double(at, key, value);
    } else if (key == "batch_size") {
        c.batch_size = static_cast<int>(parse_int(at, key, value));
    } else if (key == "epochs") {
        c.epochs = static_cast<int>(parse_int(at, key, value));
    } else if (key == "dropout_rate") {
        c.dropout_rate = parse_double(at, key, value);
    } else if (key == "dropout_layers") {
        c.dropout_layers = parse_int_list(at, key, value, ',');
    } else if (key == "adv_radius") {
        c.adv_radius = parse_double(at, key, value);
    } else if (key == "adv_clamp") {
        c.adv_clamp = parse_bool(at, key, value);
    } else if (key == "priority_exponent") {
        c.priority_exponent = parse_double(at, key, value);
    } else if (key == "prior_sigma") {
        c.bbb.prior_sigma = parse_double(at, key, value);
    } else if (key == "init_rho") {
        c.bbb.init_rho = parse_double(at, key, value);
    } else if (key == "kl_weight") {
        c.bbb.kl_weight = parse_double(at, key, value);
    } else if (key == "init_scale") {
        c.init_scale = parse_double(at, key, value);
    } else if (key == "seed") {
        e.explicit_seed = parse_u64(at, key, value);
    } else {
        at.fail("unknown key '" + key + "' in [train]");
    }
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    SweepSpec sweep;
    Cursor at{origin, 0};
    std::string section;

    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        ++at.line;
        std::string line = raw;
        if (std::size_t hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']') at.fail("unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section == "train") {
                cfg.entries.emplace_back();
            } else if (section == "sweep") {
                if (sweep.present) at.fail("only one [sweep] section is allowed");
                sweep.present = true;
            } else if (section == "dataset") {
            } else if (section != "experiment") {
                at.fail("unknown section [" + section + "]");
            }
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos) at.fail("expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) at.fail("empty key");
        if (section.empty()) at.fail("key '" + key + "' outside any section");

        if (section == "dataset") {
            DatasetSpec& d = cfg.dataset;
            if (key == "kind") {
                if (value == "blobs") d.kind = DatasetSpec::Kind::Blobs;
                else if (value == "idx") d.kind = DatasetSpec::Kind::Idx;
                else at.fail("dataset kind must be 'blobs' or 'idx'");
            } else if (key == "n") {
                d.n = static_cast<int>(parse_int(at, key, value));
            } else if (key == "d") {
                d.d = static_cast<int>(parse_int(at, key, value));
            } else if (key == "classes") {
                d.classes = static_cast<int>(parse_int(at, key, value));
            } else if (key == "separation") {
                d.separation = parse_double(at, key, value);
            } else if (key == "noise") {
                d.noise = parse_double(at, key, value);
            } else if (key == "seed") {
                d.seed = parse_u64(at, key, value);
            } else if (key == "images") {
                d.images = value;
            } else if (key == "labels") {
                d.labels = value;
            } else if (key == "test_images") {
                d.test_images = value;
            } else if (key == "test_labels") {
                d.test_labels = value;
            } else if (key == "split_fraction") {
                d.split_fraction = parse_double(at, key, value);
            } else if (key == "split_seed") {
                d.split_seed = parse_u64(at, key, value);
            } else {
                at.fail("unknown key '" + key + "' in [dataset]");
            }
        } else if (section == "experiment") {
            if (key == "T") {
                cfg.T = static_cast<int>(parse_int(at, key, value));
            } else if (key == "norm") {
                try {
                    cfg.norm = parse_norm(value);
                } catch (const ConfigError& err) {
                    at.fail(err.what());
                }
            } else if (key == "radii") {
                cfg.radii = parse_double_list(at, key, value);
            } else if (key == "eval_radius") {
                cfg.eval_radius = parse_double(at, key, value);
            } else if (key == "clamp") {
                cfg.clamp = parse_bool(at, key, value);
            } else if (key == "M") {
                cfg.M = parse_double(at, key, value);
            } else if (key == "K") {
                cfg.K = static_cast<std::size_t>(parse_u64(at, key, value));
            } else if (key == "delta") {
                cfg.delta = parse_double(at, key, value);
            } else if (key == "seed") {
                cfg.seed = parse_u64(at, key, value);
            } else if (key == "sample_cap") {
                cfg.sample_cap = static_cast<std::size_t>(parse_u64(at, key, value));
            } else if (key == "output_dir") {
                cfg.output_dir = value;
            } else if (key == "parallelism") {
                cfg.parallelism = static_cast<int>(parse_int(at, key, value));
            } else {
                at.fail("unknown key '" + key + "' in [experiment]");
            }
        } else if (section == "train") {
            apply_train_key(at, cfg.entries.back(), key, value);
        } else if (section == "sweep") {
            if (key == "algorithms") {
                sweep.algorithms = split_list(value, ',');
                if (sweep.algorithms.empty()) at.fail("algorithms list is empty");
            } else if (key == "widths") {
                sweep.widths = parse_int_list(at, key, value, ',');
                if (sweep.widths.empty()) at.fail("widths list is empty");
            } else if (key == "lr") {
                sweep.lrs = parse_double_list(at, key, value);
            } else if (key == "adv_radius") {
                sweep.radii = parse_double_list(at, key, value);
            } else {
                TrainEntry probe; // shared scalar keys reuse the [train] schema
                probe.config = sweep.base;
                apply_train_key(at, probe, key, value);
                sweep.base = probe.config;
            }
        }
    }

    if (cfg.dataset.kind == DatasetSpec::Kind::Idx) {
        if (cfg.dataset.images.empty() || cfg.dataset.labels.empty())
            throw ConfigError(origin + ": idx dataset needs 'images' and 'labels'");
        if (cfg.dataset.test_images.empty() != cfg.dataset.test_labels.empty())
            throw ConfigError(origin + ": test_images and test_labels go together");
    }

    if (sweep.present) {
        Cursor end{origin, at.line};
        for (const std::string& alg : sweep.algorithms)
            for (int w : sweep.widths)
                for (double lr : sweep.lrs)
                    for (double r : sweep.radii) {
                        TrainEntry e;
                        e.config = sweep.base;
                        try {
                            e.config.algorithm = parse_algorithm(alg);
                        } catch (const ConfigError& err) {
                            end.fail(err.what());
                        }
                        e.config.lr = lr;
                        e.config.adv_radius = r;
                        e.hidden_dims = {w};
                        cfg.entries.push_back(std::move(e));
                    }
    }
    if (cfg.entries.empty())
        throw ConfigError(origin + ": no training configurations (add [train] or [sweep])");

    if (cfg.T < 1) throw ConfigError(origin + ": T must be >= 1");
    if (cfg.radii.empty()) throw ConfigError(origin + ": radii must be non-empty");
    for (std::size_t i = 0; i < cfg.radii.size(); ++i) {
        if (!(cfg.radii[i] >= 0.0))
            throw ConfigError(origin + ": radii must be >= 0");
        if (i && cfg.radii[i] < cfg.radii[i - 1])
            throw ConfigError(origin + ": radii must be ascending");
    }
    if (!(cfg.M > 0.0)) throw ConfigError(origin + ": M must be positive");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
        throw ConfigError(origin + ": delta must be in (0, 1)");
    if (cfg.K < 1) throw ConfigError(origin + ": K must be >= 1");
    if (cfg.parallelism < 0) throw ConfigError(origin + ": parallelism must be >= 0");

    // Validate each entry against placeholder input/output dims; the real
    // dims are attached when the dataset is built.
    for (std::size_t i = 0; i < cfg.entries.size(); ++i) {
        TrainConfig probe = cfg.entries[i].config;
        probe.loss_bound = cfg.M;
        probe.layer_dims.clear();
        probe.layer_dims.push_back(2);
        for (int h : cfg.entries[i].hidden_dims) probe.layer_dims.push_back(h);
        probe.layer_dims.push_back(2);
        try {
            validate_config(probe, true);
        } catch (const ConfigError& err) {
            throw ConfigError(origin + ": configuration " + std::to_string(i) + ": " +
                              err.what());
        }
        cfg.entries[i].config.loss_bound = cfg.M;
    }
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

} // namespace ensrob
