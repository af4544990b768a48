#include "ensrob/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "ensrob/bounds.hpp"
#include "ensrob/errors.hpp"
#include "ensrob/model_io.hpp"

namespace ensrob {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string dims_string(const std::vector<int>& dims) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(dims[i]);
    }
    return s;
}

std::vector<int> parse_dims(const std::string& s) {
    std::vector<int> dims;
    std::size_t at = 0;
    while (at < s.size()) {
        std::size_t end = s.find('x', at);
        if (end == std::string::npos) end = s.size();
        dims.push_back(std::stoi(s.substr(at, end - at)));
        at = end + 1;
    }
    return dims;
}

[[noreturn]] void rethrow_labeled(std::exception_ptr ep, const std::string& prefix) {
    try {
        std::rethrow_exception(ep);
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const DivergenceError& e) {
        throw DivergenceError(prefix + e.what());
    } catch (const NumericError& e) {
        throw NumericError(prefix + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError(prefix + e.what());
    } catch (const Error& e) {
        throw Error(prefix + e.what());
    }
}

} // namespace

std::pair<Dataset, Dataset> build_datasets(const DatasetSpec& spec) {
    if (spec.kind == DatasetSpec::Kind::Blobs) {
        Dataset all = synthetic_blobs(spec.n, spec.d, spec.classes, spec.separation,
                                      spec.noise, spec.seed);
        return split(all, spec.split_fraction, spec.split_seed);
    }
    Dataset train = load_idx(spec.images, spec.labels);
    if (!spec.test_images.empty()) {
        Dataset test = load_idx(spec.test_images, spec.test_labels);
        if (train.dim() != test.dim())
            throw FormatError("train and test feature dimensions differ");
        int classes = std::max(train.class_count, test.class_count);
        train.class_count = classes;
        test.class_count = classes;
        return {std::move(train), std::move(test)};
    }
    return split(train, spec.split_fraction, spec.split_seed);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    if (config.entries.empty()) throw ConfigError("no training configurations");
    if (config.T < 1) throw ConfigError("T must be >= 1");
    if (config.radii.empty()) throw ConfigError("radii must be non-empty");
    BoundedLoss bound(config.M);

    auto [train_ds, test_ds] = build_datasets(config.dataset);
    double eval_r = config.eval_radius >= 0.0 ? config.eval_radius : config.radii.back();

    std::vector<TrainConfig> cfgs;
    cfgs.reserve(config.entries.size());
    for (std::size_t i = 0; i < config.entries.size(); ++i) {
        const TrainEntry& e = config.entries[i];
        TrainConfig c = e.config;
        c.loss_bound = config.M;
        c.layer_dims.clear();
        c.layer_dims.push_back(static_cast<int>(train_ds.dim()));
        for (int h : e.hidden_dims) c.layer_dims.push_back(h);
        c.layer_dims.push_back(train_ds.class_count);
        c.seed = e.explicit_seed ? *e.explicit_seed
                                 : config.seed + 1000003ULL * (static_cast<std::uint64_t>(i) + 1);
        try {
            validate_config(c, true);
        } catch (const ConfigError& err) {
            throw ConfigError("configuration " + std::to_string(i) + ": " + err.what());
        }
        cfgs.push_back(std::move(c));
    }

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    int requested = config.parallelism > 0
                        ? config.parallelism
                        : static_cast<int>(std::min<std::size_t>(cfgs.size(), hw));
    int count = static_cast<int>(cfgs.size());
    int outer = std::max(1, std::min(requested, count));
    int inner = std::max(1, requested / outer);

    ExperimentResult result;
    result.train_size = train_ds.size();
    result.test_size = test_ds.size();
    result.outcomes.resize(cfgs.size());

    std::atomic<int> next{0};
    std::vector<std::exception_ptr> failures(cfgs.size());
    std::vector<std::string> stages(cfgs.size(), "train");
    auto work = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= count) return;
            auto idx = static_cast<std::size_t>(i);
            try {
                ConfigOutcome& out = result.outcomes[idx];
                out.config = cfgs[idx];
                stages[idx] = "train";
                out.ensemble = train_ensemble(cfgs[idx], train_ds, config.T,
                                              cfgs[idx].seed, inner);

                stages[idx] = "robustness";
                PerturbationSpec spec{config.norm, eval_r, config.clamp};
                RobustnessEstimate est = empirical_ensemble_robustness(
                    out.ensemble, train_ds, spec, bound, config.sample_cap, inner);
                out.profile =
                    deviation_profile(out.ensemble, train_ds, config.radii, config.norm,
                                      bound, config.clamp, config.sample_cap, inner);

                stages[idx] = "evaluation";
                GapResult mean_gap;
                for (const Hypothesis& h : out.ensemble) {
                    GapResult g = generalization_gap(h, train_ds, test_ds, bound);
                    mean_gap.train_error += g.train_error;
                    mean_gap.test_error += g.test_error;
                    mean_gap.train_loss += g.train_loss;
                    mean_gap.test_loss += g.test_loss;
                }
                double T = static_cast<double>(out.ensemble.size());
                mean_gap.train_error /= T;
                mean_gap.test_error /= T;
                mean_gap.train_loss /= T;
                mean_gap.test_loss /= T;
                mean_gap.error_gap = mean_gap.test_error - mean_gap.train_error;
                mean_gap.loss_gap = mean_gap.test_loss - mean_gap.train_loss;

                BoundInputs bi;
                bi.n = train_ds.size();
                bi.M = config.M;
                bi.delta = config.delta;
                bi.epsilon_bar = est.epsilon_bar_emp;
                bi.K = config.K;
                bi.alpha = est.variance_alpha;

                ExperimentRecord& r = out.record;
                r.config_hash = config_hash(cfgs[idx]);
                r.algorithm = algorithm_name(cfgs[idx].algorithm);
                r.hyperparameters = canonical_config_string(cfgs[idx]);
                r.layer_dims = cfgs[idx].layer_dims;
                r.seed = cfgs[idx].seed;
                r.T = config.T;
                r.norm = norm_name(config.norm);
                r.radius = eval_r;
                r.epsilon_bar_emp = est.epsilon_bar_emp;
                r.variance_alpha = est.variance_alpha;
                r.robustness_t1 = est.per_run_max.front();
                r.train_error = mean_gap.train_error;
                r.test_error = mean_gap.test_error;
                r.error_gap = mean_gap.error_gap;
                r.train_loss = mean_gap.train_loss;
                r.test_loss = mean_gap.test_loss;
                r.loss_gap = mean_gap.loss_gap;
                r.theorem1 = theorem1_bound(bi);
                r.theorem2 = theorem2_bound(bi);
                r.lemma1 = lemma1_bound(bi);
            } catch (...) {
                failures[idx] = std::current_exception();
            }
        }
    };
    if (outer == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(outer));
        for (int i = 0; i < outer; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < failures.size(); ++i)
        if (failures[i])
            rethrow_labeled(failures[i], "stage " + stages[i] + ", configuration " +
                                             std::to_string(i) + ": ");

    std::vector<ExperimentRecord> records;
    records.reserve(result.outcomes.size());
    for (const ConfigOutcome& out : result.outcomes) records.push_back(out.record);
    result.report = build_report(records);
    return result;
}

namespace {

constexpr const char* kCsvHeader =
    "config_index,config_hash,algorithm,hyperparameters,layer_dims,seed,T,norm,radius,"
    "epsilon_bar_emp,variance_alpha,robustness_t1,train_error,test_error,error_gap,"
    "train_loss,test_loss,loss_gap,theorem1,theorem2,lemma1";

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

} // namespace

void write_records_csv(const std::vector<ExperimentRecord>& records,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << kCsvHeader << '\n';
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ExperimentRecord& r = records[i];
        out << i << ',' << r.config_hash << ',' << r.algorithm << ",\""
            << r.hyperparameters << "\"," << dims_string(r.layer_dims) << ',' << r.seed
            << ',' << r.T << ',' << r.norm << ',' << fmt(r.radius) << ','
            << fmt(r.epsilon_bar_emp) << ',' << fmt(r.variance_alpha) << ','
            << fmt(r.robustness_t1) << ',' << fmt(r.train_error) << ','
            << fmt(r.test_error) << ',' << fmt(r.error_gap) << ',' << fmt(r.train_loss)
            << ',' << fmt(r.test_loss) << ',' << fmt(r.loss_gap) << ','
            << fmt(r.theorem1) << ',' << fmt(r.theorem2) << ',' << fmt(r.lemma1)
            << '\n';
    }
    if (!out) throw IoError("short write to " + path);
}

std::vector<ExperimentRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty records file " + path);
    if (line != kCsvHeader) throw FormatError("unexpected records header in " + path);

    std::vector<ExperimentRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() != 21)
            throw FormatError("expected 21 fields, got " + std::to_string(f.size()) +
                              " in " + path);
        ExperimentRecord r;
        r.config_hash = std::stoull(f[1]);
        r.algorithm = f[2];
        r.hyperparameters = f[3];
        r.layer_dims = parse_dims(f[4]);
        r.seed = std::stoull(f[5]);
        r.T = std::stoi(f[6]);
        r.norm = f[7];
        r.radius = std::stod(f[8]);
        r.epsilon_bar_emp = std::stod(f[9]);
        r.variance_alpha = std::stod(f[10]);
        r.robustness_t1 = std::stod(f[11]);
        r.train_error = std::stod(f[12]);
        r.test_error = std::stod(f[13]);
        r.error_gap = std::stod(f[14]);
        r.train_loss = std::stod(f[15]);
        r.test_loss = std::stod(f[16]);
        r.loss_gap = std::stod(f[17]);
        r.theorem1 = std::stod(f[18]);
        r.theorem2 = std::stod(f[19]);
        r.lemma1 = std::stod(f[20]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_profiles_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "config_index,radius,epsilon_bar_emp,variance_alpha\n";
    for (std::size_t i = 0; i < result.outcomes.size(); ++i)
        for (const auto& [r, est] : result.outcomes[i].profile)
            out << i << ',' << fmt(r) << ',' << fmt(est.epsilon_bar_emp) << ','
                << fmt(est.variance_alpha) << '\n';
    if (!out) throw IoError("short write to " + path);
}

namespace {

nlohmann::json record_json(const ExperimentRecord& r) {
    nlohmann::json j;
    j["config_hash"] = r.config_hash;
    j["algorithm"] = r.algorithm;
    j["hyperparameters"] = r.hyperparameters;
    j["layer_dims"] = r.layer_dims;
    j["seed"] = r.seed;
    j["T"] = r.T;
    j["norm"] = r.norm;
    j["radius"] = r.radius;
    j["epsilon_bar_emp"] = r.epsilon_bar_emp;
    j["variance_alpha"] = r.variance_alpha;
    j["robustness_t1"] = r.robustness_t1;
    j["train_error"] = r.train_error;
    j["test_error"] = r.test_error;
    j["error_gap"] = r.error_gap;
    j["train_loss"] = r.train_loss;
    j["test_loss"] = r.test_loss;
    j["loss_gap"] = r.loss_gap;
    j["theorem1"] = r.theorem1;
    j["theorem2"] = r.theorem2;
    j["lemma1"] = r.lemma1;
    return j;
}

nlohmann::json correlation_json(const CorrelationSummary& s) {
    nlohmann::json j;
    j["available"] = s.available;
    if (s.available) {
        j["pearson"] = s.pearson_ensemble_gap;
        j["spearman"] = s.spearman_ensemble_gap;
        j["pearson_t1"] = s.pearson_t1_gap;
        j["spearman_t1"] = s.spearman_t1_gap;
    }
    return j;
}

} // namespace

void write_report_json(const ExperimentConfig& config, const ExperimentResult& result,
                       const std::string& path) {
    nlohmann::json j;
    if (config.dataset.kind == DatasetSpec::Kind::Blobs) {
        j["dataset"] = {{"kind", "blobs"},
                        {"n", config.dataset.n},
                        {"d", config.dataset.d},
                        {"classes", config.dataset.classes},
                        {"separation", config.dataset.separation},
                        {"noise", config.dataset.noise},
                        {"seed", config.dataset.seed}};
    } else {
        j["dataset"] = {{"kind", "idx"},
                        {"images", config.dataset.images},
                        {"labels", config.dataset.labels}};
    }
    j["dataset"]["train_size"] = result.train_size;
    j["dataset"]["test_size"] = result.test_size;
    j["experiment"] = {{"T", config.T},
                       {"norm", norm_name(config.norm)},
                       {"radii", config.radii},
                       {"eval_radius",
                        config.eval_radius >= 0.0 ? config.eval_radius
                                                  : config.radii.back()},
                       {"clamp", config.clamp},
                       {"M", config.M},
                       {"K", config.K},
                       {"delta", config.delta},
                       {"seed", config.seed},
                       {"sample_cap", config.sample_cap}};

    j["records"] = nlohmann::json::array();
    for (const ExperimentRecord& r : result.report.records)
        j["records"].push_back(record_json(r));

    j["correlations"]["overall"] = correlation_json(result.report.overall);
    for (const auto& [name, summary] : result.report.per_algorithm)
        j["correlations"]["per_algorithm"][name] = correlation_json(summary);

    j["profiles"] = nlohmann::json::array();
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        nlohmann::json p;
        p["config_index"] = i;
        p["points"] = nlohmann::json::array();
        for (const auto& [r, est] : result.outcomes[i].profile)
            p["points"].push_back({{"radius", r},
                                   {"epsilon_bar_emp", est.epsilon_bar_emp},
                                   {"variance_alpha", est.variance_alpha},
                                   {"per_run_max", est.per_run_max}});
        j["profiles"].push_back(std::move(p));
    }

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(config.output_dir) / "models", ec);
    if (ec) throw IoError("cannot create output directory " + config.output_dir);

    std::vector<ExperimentRecord> records;
    records.reserve(result.outcomes.size());
    for (const ConfigOutcome& out : result.outcomes) records.push_back(out.record);

    fs::path base(config.output_dir);
    write_records_csv(records, (base / "records.csv").string());
    write_profiles_csv(result, (base / "profiles.csv").string());
    write_report_json(config, result, (base / "report.json").string());
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        const ConfigOutcome& out = result.outcomes[i];
        for (std::size_t t = 0; t < out.ensemble.size(); ++t) {
            fs::path p = base / "models" /
                         ("cfg" + std::to_string(i) + "_m" + std::to_string(t) + ".bin");
            save_hypothesis(out.ensemble[t], out.config, p.string());
        }
    }
}

} // namespace ensrob
