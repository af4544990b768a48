#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ensrob/bounds.hpp"
#include "ensrob/errors.hpp"
#include "ensrob/experiment.hpp"
#include "ensrob/model_io.hpp"
#include "ensrob/robustness.hpp"

namespace {

using namespace ensrob;

struct RunArgs {
    std::string config_path;
    std::string output_dir;
    int parallelism = -1;
};

int cmd_run(const RunArgs& args) {
    ExperimentConfig config = parse_config(args.config_path);
    if (!args.output_dir.empty()) config.output_dir = args.output_dir;
    if (args.parallelism >= 0) config.parallelism = args.parallelism;

    ExperimentResult result = run_experiment(config);
    write_outputs(config, result);

    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
        const ExperimentRecord& r = result.outcomes[i].record;
        std::printf("config %zu %s eps_bar_emp=%.6f variance=%.6g error_gap=%.6f\n", i,
                    r.algorithm.c_str(), r.epsilon_bar_emp, r.variance_alpha,
                    r.error_gap);
    }
    if (result.report.overall.available) {
        std::printf("pearson %.6f\n", result.report.overall.pearson_ensemble_gap);
        std::printf("spearman %.6f\n", result.report.overall.spearman_ensemble_gap);
    }
    std::printf("wrote %s\n",
                (std::filesystem::path(config.output_dir) / "records.csv").string().c_str());
    return 0;
}

struct BoundsArgs {
    BoundInputs in;
    double adv_mean = -1.0;
    bool has_alpha = false;
    bool has_K = false;
    bool has_L = false;
    bool has_beta = false;
    bool has_adv_mean = false;
    std::string form = "stated";
};

int cmd_bounds(const BoundsArgs& args) {
    BoundInputs in = args.in;
    std::printf("theorem1 %.9f\n", theorem1_bound(in));
    if (args.has_adv_mean)
        std::printf("corollary1 %.9f\n", corollary1_risk_bound(args.adv_mean, in));
    if (args.has_alpha && args.has_K)
        std::printf("theorem2 %.9f\n", theorem2_bound(in));
    if (args.has_K) std::printf("lemma1 %.9f\n", lemma1_bound(in));
    if (args.has_K && args.has_L) {
        if (args.form == "stated") {
            std::printf("dropout_stated %.9f\n",
                        dropout_bound(in, DropoutBoundForm::Stated));
        } else {
            std::printf("dropout_proof %.9f\n", dropout_bound(in, DropoutBoundForm::Proof));
        }
    }
    return 0;
}

struct MeasureArgs {
    std::vector<std::string> models;
    std::string images, labels;
    int blobs_n = 1000, blobs_d = 2, blobs_classes = 2;
    double blobs_separation = 0.5, blobs_noise = 0.1;
    std::uint64_t blobs_seed = 9;
    std::string norm = "linf";
    double radius = 0.1;
    bool clamp = false;
    double M = kDefaultLossBound;
    std::size_t sample_cap = 0;
    std::string csv;
};

int cmd_measure(const MeasureArgs& args) {
    std::vector<Hypothesis> ensemble;
    ensemble.reserve(args.models.size());
    for (const std::string& path : args.models)
        ensemble.push_back(load_hypothesis(path));
    for (const Hypothesis& h : ensemble)
        if (h.model.layer_dims != ensemble.front().model.layer_dims)
            throw ProtocolError("model architectures differ across files");

    Dataset data = args.images.empty()
                       ? synthetic_blobs(args.blobs_n, args.blobs_d, args.blobs_classes,
                                         args.blobs_separation, args.blobs_noise,
                                         args.blobs_seed)
                       : load_idx(args.images, args.labels);
    if (static_cast<int>(data.dim()) != ensemble.front().model.input_dim())
        throw ProtocolError("dataset dimension does not match the models");
    if (data.class_count > ensemble.front().model.class_count())
        throw ProtocolError("dataset classes exceed the models' output dimension");

    PerturbationSpec spec{parse_norm(args.norm), args.radius, args.clamp};
    BoundedLoss bound(args.M);
    RobustnessEstimate est =
        empirical_ensemble_robustness(ensemble, data, spec, bound, args.sample_cap);

    for (std::size_t t = 0; t < est.per_run_max.size(); ++t)
        std::printf("member %zu max_deviation %.9f\n", t, est.per_run_max[t]);
    std::printf("epsilon_bar_emp %.9f\n", est.epsilon_bar_emp);
    std::printf("variance_alpha %.9f\n", est.variance_alpha);

    if (!args.csv.empty()) {
        std::FILE* f = std::fopen(args.csv.c_str(), "w");
        if (!f) throw IoError("cannot write " + args.csv);
        std::fprintf(f, "member,max_deviation\n");
        for (std::size_t t = 0; t < est.per_run_max.size(); ++t)
            std::fprintf(f, "%zu,%.17g\n", t, est.per_run_max[t]);
        std::fclose(f);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ensemble robustness toolkit"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto add_run = [&](CLI::App* cmd) {
        cmd->add_option("config", run_args.config_path, "experiment config file")
            ->required();
        cmd->add_option("--output-dir", run_args.output_dir,
                        "override the config's output directory");
        cmd->add_option("--parallelism", run_args.parallelism,
                        "worker threads (0 = one per configuration)");
    };
    CLI::App* run_cmd = app.add_subcommand("run", "train ensembles and measure robustness");
    add_run(run_cmd);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "alias of run for grid configs");
    add_run(sweep_cmd);

    BoundsArgs bounds_args;
    CLI::App* bounds_cmd = app.add_subcommand("bounds", "evaluate generalization bounds");
    bounds_cmd->add_option("--n", bounds_args.in.n, "training sample count")->required();
    bounds_cmd->add_option("--M", bounds_args.in.M, "loss bound")->required();
    bounds_cmd->add_option("--delta", bounds_args.in.delta, "confidence parameter")
        ->required();
    bounds_cmd->add_option("--eps-bar", bounds_args.in.epsilon_bar, "ensemble robustness")
        ->required();
    CLI::Option* alpha_opt =
        bounds_cmd->add_option("--alpha", bounds_args.in.alpha, "robustness variance");
    CLI::Option* k_opt =
        bounds_cmd->add_option("--K", bounds_args.in.K, "partition cardinality");
    CLI::Option* l_opt =
        bounds_cmd->add_option("--L", bounds_args.in.L_layers, "dropout layer count");
    CLI::Option* beta_opt =
        bounds_cmd->add_option("--beta", bounds_args.in.beta, "dropout sensitivity");
    CLI::Option* adv_opt = bounds_cmd->add_option("--adv-mean", bounds_args.adv_mean,
                                                  "adversarial empirical mean loss");
    bounds_cmd->add_option("--form", bounds_args.form, "dropout bound form")
        ->check(CLI::IsMember({"stated", "proof"}));

    MeasureArgs measure_args;
    CLI::App* measure_cmd =
        app.add_subcommand("measure", "ensemble robustness of serialized models");
    measure_cmd->add_option("--model", measure_args.models, "model file (repeatable)")
        ->required();
    measure_cmd->add_option("--images", measure_args.images, "IDX image file");
    measure_cmd->add_option("--labels", measure_args.labels, "IDX label file");
    measure_cmd->add_option("--blobs-n", measure_args.blobs_n, "synthetic sample count");
    measure_cmd->add_option("--blobs-d", measure_args.blobs_d, "synthetic dimension");
    measure_cmd->add_option("--blobs-classes", measure_args.blobs_classes,
                            "synthetic class count");
    measure_cmd->add_option("--blobs-separation", measure_args.blobs_separation,
                            "synthetic center separation");
    measure_cmd->add_option("--blobs-noise", measure_args.blobs_noise, "synthetic noise");
    measure_cmd->add_option("--blobs-seed", measure_args.blobs_seed, "synthetic seed");
    measure_cmd->add_option("--norm", measure_args.norm, "perturbation norm")
        ->check(CLI::IsMember({"l1", "l2", "linf"}));
    measure_cmd->add_option("--radius", measure_args.radius, "perturbation radius");
    measure_cmd->add_flag("--clamp", measure_args.clamp, "clamp perturbed samples to [0,1]");
    measure_cmd->add_option("--loss-bound", measure_args.M, "loss bound M");
    measure_cmd->add_option("--sample-cap", measure_args.sample_cap,
                            "scan only the first N samples (0 = all)");
    measure_cmd->add_option("--csv", measure_args.csv, "write per-member maxima here");

    try {
        app.parse(argc, argv);
        if (app.got_subcommand(run_cmd) || app.got_subcommand(sweep_cmd))
            return cmd_run(run_args);
        if (app.got_subcommand(bounds_cmd)) {
            bounds_args.has_alpha = alpha_opt->count() > 0;
            bounds_args.has_K = k_opt->count() > 0;
            bounds_args.has_L = l_opt->count() > 0;
            bounds_args.has_beta = beta_opt->count() > 0;
            bounds_args.has_adv_mean = adv_opt->count() > 0;
            return cmd_bounds(bounds_args);
        }
        if (app.got_subcommand(measure_cmd)) {
            if (measure_args.images.empty() != measure_args.labels.empty())
                throw ConfigError("--images and --labels go together");
            return cmd_measure(measure_args);
        }
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
