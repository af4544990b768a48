#include "ensrob/trainers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "ensrob/errors.hpp"

namespace ensrob {

namespace {

// Independent RNG streams per concern so enabling one feature never shifts
// another's draws (radius-0 adversarial must replay plain sgd exactly).
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kDropoutStream = 2;
constexpr std::uint64_t kPriorityStream = 3;
constexpr std::uint64_t kBbbStream = 4;
constexpr std::uint64_t kEpochStreamBase = 0x10000;
constexpr std::uint64_t kBbbSampleStreamBase = 0x20000;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

Algorithm parse_algorithm(std::string_view name) {
    if (name == "sgd") return Algorithm::Sgd;
    if (name == "sgd_dropout") return Algorithm::SgdDropout;
    if (name == "prioritized") return Algorithm::Prioritized;
    if (name == "prioritized_dropout") return Algorithm::PrioritizedDropout;
    if (name == "adversarial_l1") return Algorithm::AdversarialL1;
    if (name == "adversarial_l2") return Algorithm::AdversarialL2;
    if (name == "adversarial_linf") return Algorithm::AdversarialLinf;
    if (name == "bayes_by_backprop") return Algorithm::BayesByBackprop;
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

std::string algorithm_name(Algorithm alg) {
    switch (alg) {
        case Algorithm::Sgd: return "sgd";
        case Algorithm::SgdDropout: return "sgd_dropout";
        case Algorithm::Prioritized: return "prioritized";
        case Algorithm::PrioritizedDropout: return "prioritized_dropout";
        case Algorithm::AdversarialL1: return "adversarial_l1";
        case Algorithm::AdversarialL2: return "adversarial_l2";
        case Algorithm::AdversarialLinf: return "adversarial_linf";
        case Algorithm::BayesByBackprop: return "bayes_by_backprop";
    }
    throw ConfigError("invalid algorithm value");
}

bool is_adversarial(Algorithm alg) {
    return alg == Algorithm::AdversarialL1 || alg == Algorithm::AdversarialL2 ||
           alg == Algorithm::AdversarialLinf;
}

bool uses_dropout(Algorithm alg) {
    return alg == Algorithm::SgdDropout || alg == Algorithm::PrioritizedDropout;
}

Norm adversarial_norm(Algorithm alg) {
    switch (alg) {
        case Algorithm::AdversarialL1: return Norm::L1;
        case Algorithm::AdversarialL2: return Norm::L2;
        case Algorithm::AdversarialLinf: return Norm::Linf;
        default: throw ConfigError(algorithm_name(alg) + " has no perturbation norm");
    }
}

void validate_config(const TrainConfig& c, bool strict) {
    if (c.layer_dims.size() < 2)
        throw ConfigError("layer_dims needs at least input and output dimensions");
    for (int d : c.layer_dims)
        if (d < 1) throw ConfigError("layer_dims entries must be >= 1");
    if (!(c.lr > 0.0) || !std::isfinite(c.lr))
        throw ConfigError("lr must be positive and finite");
    if (!(c.momentum >= 0.0) || c.momentum >= 1.0)
        throw ConfigError("momentum must be in [0, 1)");
    if (!(c.weight_decay >= 0.0) || !std::isfinite(c.weight_decay))
        throw ConfigError("weight_decay must be >= 0");
    if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (!(c.dropout_rate >= 0.0) || c.dropout_rate >= 1.0)
        throw ConfigError("dropout_rate must be in [0, 1)");
    if (!(c.adv_radius >= 0.0) || !std::isfinite(c.adv_radius))
        throw ConfigError("adv_radius must be >= 0 and finite");
    if (!(c.priority_exponent >= 0.0) || !std::isfinite(c.priority_exponent))
        throw ConfigError("priority_exponent must be >= 0");
    if (!(c.loss_bound > 0.0) || !std::isfinite(c.loss_bound))
        throw ConfigError("loss_bound must be positive");
    if (!(c.init_scale > 0.0) || !std::isfinite(c.init_scale))
        throw ConfigError("init_scale must be positive");
    if (!(c.bbb.prior_sigma > 0.0) || !std::isfinite(c.bbb.prior_sigma))
        throw ConfigError("prior_sigma must be positive");
    if (!std::isfinite(c.bbb.init_rho)) throw ConfigError("init_rho must be finite");
    if (!(c.bbb.kl_weight >= 0.0) || !std::isfinite(c.bbb.kl_weight))
        throw ConfigError("kl_weight must be >= 0");
    int hidden = static_cast<int>(c.layer_dims.size()) - 2;
    for (int l : c.dropout_layers)
        if (l < 0 || l >= std::max(hidden, 1))
            throw ConfigError("dropout_layers index out of range");
    if (strict) {
        if (is_adversarial(c.algorithm) && !(c.adv_radius > 0.0))
            throw ConfigError(algorithm_name(c.algorithm) + " requires adv_radius > 0");
        if (uses_dropout(c.algorithm) && !(c.dropout_rate > 0.0))
            throw ConfigError(algorithm_name(c.algorithm) + " requires dropout_rate > 0");
    }
}

std::string canonical_config_string(const TrainConfig& c) {
    std::string s;
    s += "algorithm=" + algorithm_name(c.algorithm);
    s += ";layer_dims=";
    for (std::size_t i = 0; i < c.layer_dims.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(c.layer_dims[i]);
    }
    s += ";lr=" + format_double(c.lr);
    s += ";momentum=" + format_double(c.momentum);
    s += ";weight_decay=" + format_double(c.weight_decay);
    s += ";batch_size=" + std::to_string(c.batch_size);
    s += ";epochs=" + std::to_string(c.epochs);
    s += ";dropout_rate=" + format_double(c.dropout_rate);
    s += ";dropout_layers=";
    for (std::size_t i = 0; i < c.dropout_layers.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(c.dropout_layers[i]);
    }
    s += ";adv_radius=" + format_double(c.adv_radius);
    s += ";adv_clamp=" + std::string(c.adv_clamp ? "1" : "0");
    s += ";priority_exponent=" + format_double(c.priority_exponent);
    s += ";prior_sigma=" + format_double(c.bbb.prior_sigma);
    s += ";init_rho=" + format_double(c.bbb.init_rho);
    s += ";kl_weight=" + format_double(c.bbb.kl_weight);
    s += ";loss_bound=" + format_double(c.loss_bound);
    s += ";init_scale=" + format_double(c.init_scale);
    return s;
}

std::uint64_t config_hash(const TrainConfig& c) {
    std::string s = canonical_config_string(c);
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

double softplus(double x) {
    // ln(1 + e^x) without overflow for large |x|
    if (x > 30.0) return x;
    return std::log1p(std::exp(x));
}

double gaussian_kl(double mu, double sigma, double prior_sigma) {
    if (!(sigma > 0.0) || !(prior_sigma > 0.0))
        throw NumericError("gaussian_kl requires positive scales");
    double ratio2 = (sigma * sigma + mu * mu) / (prior_sigma * prior_sigma);
    return std::log(prior_sigma / sigma) + 0.5 * ratio2 - 0.5;
}

namespace {

std::vector<int> hidden_widths_of(const std::vector<int>& layer_dims) {
    if (layer_dims.size() <= 2) return {};
    return {layer_dims.begin() + 1, layer_dims.end() - 1};
}

// Masks for every hidden layer, with layers outside config.dropout_layers
// forced to all-ones (mask only where configured).
DropoutState make_training_mask(const TrainConfig& config,
                                const std::vector<int>& hidden_widths,
                                std::uint64_t seed) {
    DropoutState st = sample_dropout_mask(config.dropout_rate, hidden_widths, seed);
    for (std::size_t l = 0; l < st.masks.size(); ++l) {
        bool active = std::find(config.dropout_layers.begin(), config.dropout_layers.end(),
                                static_cast<int>(l)) != config.dropout_layers.end();
        if (!active) std::fill(st.masks[l].begin(), st.masks[l].end(), std::uint8_t{1});
    }
    return st;
}

void accumulate(Gradients& acc, const Gradients& g, double weight) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        for (std::size_t k = 0; k < acc.weights[l].data.size(); ++k)
            acc.weights[l].data[k] += weight * g.weights[l].data[k];
        for (std::size_t k = 0; k < acc.biases[l].size(); ++k)
            acc.biases[l][k] += weight * g.biases[l][k];
    }
}

Gradients zero_gradients(const MlpModel& model) {
    Gradients g;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        g.weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
        g.biases.emplace_back(model.biases[l].size(), 0.0);
    }
    g.input.assign(static_cast<std::size_t>(model.input_dim()), 0.0);
    return g;
}

void scale(Gradients& g, double factor) {
    for (auto& w : g.weights)
        for (double& x : w.data) x *= factor;
    for (auto& b : g.biases)
        for (double& x : b) x *= factor;
}

struct EpochContext {
    const TrainConfig& config;
    const Dataset& data;
    const BoundedLoss& bound;
    std::vector<int> hidden_widths;
    Rng dropout_rng;
    Rng priority_rng;
};

void plain_epoch(MlpModel& model, SgdState& velocity, EpochContext& ctx, int epoch) {
    const TrainConfig& c = ctx.config;
    bool dropout_on = uses_dropout(c.algorithm) && c.dropout_rate > 0.0;
    auto batches = minibatches(ctx.data.size(), static_cast<std::size_t>(c.batch_size),
                               mix_seed(c.seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch)));
    for (const auto& batch : batches) {
        Gradients acc = zero_gradients(model);
        for (std::size_t idx : batch) {
            DropoutState mask;
            const DropoutState* mask_ptr = nullptr;
            if (dropout_on) {
                mask = make_training_mask(c, ctx.hidden_widths, ctx.dropout_rng.next_u64());
                mask_ptr = &mask;
            }
            Gradients g = backward(model, ctx.data.sample(idx), ctx.data.labels[idx],
                                   ctx.bound, mask_ptr);
            accumulate(acc, g, 1.0);
        }
        scale(acc, 1.0 / static_cast<double>(batch.size()));
        sgd_step(model, acc, c.lr, c.momentum, velocity, c.weight_decay);
    }
}

void adversarial_epoch(MlpModel& model, SgdState& velocity, EpochContext& ctx, int epoch) {
    const TrainConfig& c = ctx.config;
    PerturbationSpec spec{adversarial_norm(c.algorithm), c.adv_radius, c.adv_clamp};
    auto batches = minibatches(ctx.data.size(), static_cast<std::size_t>(c.batch_size),
                               mix_seed(c.seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch)));
    for (const auto& batch : batches)
        adversarial_training_step(model, ctx.data, batch, spec, ctx.bound, c.lr,
                                  c.momentum, velocity, c.weight_decay);
}

void prioritized_epoch(MlpModel& model, SgdState& velocity, EpochContext& ctx, int epoch) {
    (void)epoch;
    const TrainConfig& c = ctx.config;
    bool dropout_on = uses_dropout(c.algorithm) && c.dropout_rate > 0.0;
    std::size_t n = ctx.data.size();

    Vec losses(n);
    for (std::size_t i = 0; i < n; ++i)
        losses[i] = loss_at(model, ctx.data.sample(i), ctx.data.labels[i], ctx.bound);

    double floor = 1e-3 * c.loss_bound;
    auto batch_size = static_cast<std::size_t>(c.batch_size);
    std::size_t steps = (n + batch_size - 1) / batch_size;
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t count = std::min(batch_size, n);
        PrioritizedDraw draw =
            prioritized_sample(losses, c.priority_exponent, count, floor, ctx.priority_rng);
        Gradients acc = zero_gradients(model);
        for (std::size_t j = 0; j < draw.indices.size(); ++j) {
            std::size_t idx = draw.indices[j];
            DropoutState mask;
            const DropoutState* mask_ptr = nullptr;
            if (dropout_on) {
                mask = make_training_mask(c, ctx.hidden_widths, ctx.dropout_rng.next_u64());
                mask_ptr = &mask;
            }
            Gradients g = backward(model, ctx.data.sample(idx), ctx.data.labels[idx],
                                   ctx.bound, mask_ptr);
            accumulate(acc, g, draw.weights[j]);
        }
        scale(acc, 1.0 / static_cast<double>(draw.indices.size()));
        sgd_step(model, acc, c.lr, c.momentum, velocity, c.weight_decay);
    }
}

WeightPosterior train_posterior(const TrainConfig& c, const Dataset& data,
                                Vec& loss_curve) {
    BoundedLoss bound(c.loss_bound);
    WeightPosterior post =
        init_posterior(c.layer_dims, c.bbb, mix_seed(c.seed, kInitStream), c.init_scale);
    Rng bbb_rng(mix_seed(c.seed, kBbbStream));
    for (int e = 0; e < c.epochs; ++e) {
        auto batches =
            minibatches(data.size(), static_cast<std::size_t>(c.batch_size),
                        mix_seed(c.seed, kEpochStreamBase + static_cast<std::uint64_t>(e)));
        for (const auto& batch : batches)
            bbb_step(post, data, batch, c.bbb.kl_weight, c.lr, bound, bbb_rng);
        MlpModel mean_model;
        mean_model.layer_dims = post.layer_dims;
        mean_model.weights = post.weight_mu;
        mean_model.biases = post.bias_mu;
        double ml = mean_loss(mean_model, data, bound);
        if (!std::isfinite(ml) || !all_finite(mean_model))
            throw DivergenceError("training diverged at epoch " + std::to_string(e));
        loss_curve.push_back(ml);
    }
    return post;
}

} // namespace

Hypothesis train(const TrainConfig& config, const Dataset& data) {
    validate_config(config, false);
    validate_dataset(data);
    if (config.layer_dims.front() != static_cast<int>(data.dim()))
        throw ConfigError("layer_dims input does not match dataset dimension");
    if (config.layer_dims.back() != data.class_count)
        throw ConfigError("layer_dims output does not match dataset class count");

    Hypothesis h;
    h.config_hash = config_hash(config);
    h.seed = config.seed;
    h.algorithm = algorithm_name(config.algorithm);

    if (config.algorithm == Algorithm::BayesByBackprop) {
        Vec curve;
        WeightPosterior post = train_posterior(config, data, curve);
        Hypothesis sampled = sample_bbb_hypothesis(
            post, mix_seed(config.seed, kBbbSampleStreamBase), h.config_hash);
        h.model = std::move(sampled.model);
        h.train_loss_curve = std::move(curve);
        return h;
    }

    BoundedLoss bound(config.loss_bound);
    MlpModel model =
        init_mlp(config.layer_dims, mix_seed(config.seed, kInitStream), config.init_scale);
    SgdState velocity = make_sgd_state(model);
    EpochContext ctx{config,
                     data,
                     bound,
                     hidden_widths_of(config.layer_dims),
                     Rng(mix_seed(config.seed, kDropoutStream)),
                     Rng(mix_seed(config.seed, kPriorityStream))};

    for (int e = 0; e < config.epochs; ++e) {
        if (is_adversarial(config.algorithm))
            adversarial_epoch(model, velocity, ctx, e);
        else if (config.algorithm == Algorithm::Prioritized ||
                 config.algorithm == Algorithm::PrioritizedDropout)
            prioritized_epoch(model, velocity, ctx, e);
        else
            plain_epoch(model, velocity, ctx, e);

        double ml = mean_loss(model, data, bound);
        if (!std::isfinite(ml) || !all_finite(model))
            throw DivergenceError("training diverged at epoch " + std::to_string(e));
        h.train_loss_curve.push_back(ml);
    }
    h.model = std::move(model);
    return h;
}

void adversarial_training_step(MlpModel& model, const Dataset& data,
                               std::span<const std::size_t> batch,
                               const PerturbationSpec& spec, const BoundedLoss& bound,
                               double lr, double momentum, SgdState& velocity,
                               double weight_decay) {
    if (batch.empty()) throw ConfigError("empty batch");
    Gradients acc = zero_gradients(model);
    for (std::size_t idx : batch) {
        auto s = data.sample(idx);
        Vec delta = adversarial_perturbation(model, s, data.labels[idx], spec, bound);
        Vec shifted = perturbed_sample(s, delta);
        Gradients g = backward(model, shifted, data.labels[idx], bound);
        accumulate(acc, g, 1.0);
    }
    scale(acc, 1.0 / static_cast<double>(batch.size()));
    sgd_step(model, acc, lr, momentum, velocity, weight_decay);
}

PrioritizedDraw prioritized_sample(const Vec& losses, double exponent,
                                   std::size_t count, double floor, Rng& rng) {
    if (losses.empty()) throw ConfigError("prioritized_sample needs losses");
    if (!(exponent >= 0.0)) throw ConfigError("priority exponent must be >= 0");
    if (!(floor >= 0.0)) throw ConfigError("priority floor must be >= 0");

    std::size_t n = losses.size();
    Vec cumulative(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double base = losses[i] + floor;
        if (!(base >= 0.0)) throw NumericError("negative loss in priorities");
        total += exponent == 0.0 ? 1.0 : std::pow(base, exponent);
        cumulative[i] = total;
    }
    bool degenerate = !(total > 0.0);

    // max importance weight over reachable indices: the smallest positive p_i
    double min_mass = degenerate ? 1.0 : total;
    if (!degenerate) {
        double prev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mass = cumulative[i] - prev;
            prev = cumulative[i];
            if (mass > 0.0) min_mass = std::min(min_mass, mass);
        }
    }

    PrioritizedDraw draw;
    draw.indices.reserve(count);
    draw.weights.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t idx;
        if (degenerate) {
            idx = rng.below(n);
            draw.weights.push_back(1.0);
        } else {
            double u = rng.uniform01() * total;
            idx = static_cast<std::size_t>(
                std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                cumulative.begin());
            if (idx >= n) idx = n - 1;
            double mass = cumulative[idx] - (idx ? cumulative[idx - 1] : 0.0);
            // (n*p_i)^-1 / (n*p_min)^-1 = p_min / p_i
            draw.weights.push_back(min_mass / mass);
        }
        draw.indices.push_back(idx);
    }
    return draw;
}

WeightPosterior init_posterior(const std::vector<int>& layer_dims, const BbbConfig& bbb,
                               std::uint64_t seed, double init_scale) {
    if (!(bbb.prior_sigma > 0.0)) throw ConfigError("prior_sigma must be positive");
    MlpModel base = init_mlp(layer_dims, seed, init_scale);
    WeightPosterior post;
    post.layer_dims = layer_dims;
    post.prior_sigma = bbb.prior_sigma;
    post.weight_mu = std::move(base.weights);
    post.bias_mu = std::move(base.biases);
    for (std::size_t l = 0; l < post.weight_mu.size(); ++l) {
        post.weight_rho.emplace_back(post.weight_mu[l].rows, post.weight_mu[l].cols,
                                     bbb.init_rho);
        post.bias_rho.emplace_back(post.bias_mu[l].size(), bbb.init_rho);
    }
    return post;
}

namespace {

constexpr double kRhoUnderflow = -30.0;

double sigma_of(double rho) {
    if (rho < kRhoUnderflow)
        throw NumericError("posterior scale underflow: rho = " + std::to_string(rho));
    return softplus(rho);
}

double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

} // namespace

void bbb_step(WeightPosterior& post, const Dataset& data,
              std::span<const std::size_t> batch, double kl_weight, double lr,
              const BoundedLoss& bound, Rng& rng) {
    if (batch.empty()) throw ConfigError("empty batch");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");

    // One weight realization per step, reused across the whole batch.
    MlpModel model;
    model.layer_dims = post.layer_dims;
    std::vector<Mat> eps_w;
    std::vector<Vec> eps_b;
    for (std::size_t l = 0; l < post.weight_mu.size(); ++l) {
        const Mat& mu = post.weight_mu[l];
        Mat ew(mu.rows, mu.cols);
        Mat w(mu.rows, mu.cols);
        for (std::size_t k = 0; k < mu.data.size(); ++k) {
            ew.data[k] = rng.normal();
            w.data[k] = mu.data[k] + sigma_of(post.weight_rho[l].data[k]) * ew.data[k];
        }
        eps_w.push_back(std::move(ew));
        model.weights.push_back(std::move(w));

        const Vec& bmu = post.bias_mu[l];
        Vec eb(bmu.size());
        Vec b(bmu.size());
        for (std::size_t k = 0; k < bmu.size(); ++k) {
            eb[k] = rng.normal();
            b[k] = bmu[k] + sigma_of(post.bias_rho[l][k]) * eb[k];
        }
        eps_b.push_back(std::move(eb));
        model.biases.push_back(std::move(b));
    }

    Gradients acc = zero_gradients(model);
    for (std::size_t idx : batch) {
        Gradients g = backward(model, data.sample(idx), data.labels[idx], bound);
        accumulate(acc, g, 1.0);
    }
    scale(acc, 1.0 / static_cast<double>(batch.size()));

    double prior2 = post.prior_sigma * post.prior_sigma;
    auto update = [&](double& mu, double& rho, double gw, double eps) {
        double sigma = sigma_of(rho);
        double g_mu = gw + kl_weight * mu / prior2;
        double g_rho =
            (gw * eps + kl_weight * (-1.0 / sigma + sigma / prior2)) * sigmoid(rho);
        mu -= lr * g_mu;
        rho -= lr * g_rho;
    };
    for (std::size_t l = 0; l < post.weight_mu.size(); ++l) {
        for (std::size_t k = 0; k < post.weight_mu[l].data.size(); ++k)
            update(post.weight_mu[l].data[k], post.weight_rho[l].data[k],
                   acc.weights[l].data[k], eps_w[l].data[k]);
        for (std::size_t k = 0; k < post.bias_mu[l].size(); ++k)
            update(post.bias_mu[l][k], post.bias_rho[l][k], acc.biases[l][k],
                   eps_b[l][k]);
    }
}

MlpModel sample_posterior_model(const WeightPosterior& post, std::uint64_t seed) {
    Rng rng(seed);
    MlpModel model;
    model.layer_dims = post.layer_dims;
    for (std::size_t l = 0; l < post.weight_mu.size(); ++l) {
        const Mat& mu = post.weight_mu[l];
        Mat w(mu.rows, mu.cols);
        for (std::size_t k = 0; k < mu.data.size(); ++k)
            w.data[k] = mu.data[k] + sigma_of(post.weight_rho[l].data[k]) * rng.normal();
        model.weights.push_back(std::move(w));
        const Vec& bmu = post.bias_mu[l];
        Vec b(bmu.size());
        for (std::size_t k = 0; k < bmu.size(); ++k)
            b[k] = bmu[k] + sigma_of(post.bias_rho[l][k]) * rng.normal();
        model.biases.push_back(std::move(b));
    }
    return model;
}

Hypothesis sample_bbb_hypothesis(const WeightPosterior& post, std::uint64_t seed,
                                 std::uint64_t hash) {
    Hypothesis h;
    h.model = sample_posterior_model(post, seed);
    h.config_hash = hash;
    h.seed = seed;
    h.algorithm = algorithm_name(Algorithm::BayesByBackprop);
    return h;
}

std::vector<Hypothesis> train_ensemble(const TrainConfig& config, const Dataset& data,
                                       int T, std::uint64_t base_seed, int parallelism) {
    if (T < 1) throw ConfigError("ensemble size must be >= 1");

    std::vector<Hypothesis> members(static_cast<std::size_t>(T));

    if (config.algorithm == Algorithm::BayesByBackprop) {
        TrainConfig c = config;
        c.seed = base_seed;
        validate_config(c, false);
        validate_dataset(data);
        if (c.layer_dims.front() != static_cast<int>(data.dim()) ||
            c.layer_dims.back() != data.class_count)
            throw ConfigError("layer_dims do not match dataset");
        Vec curve;
        WeightPosterior post = train_posterior(c, data, curve);
        std::uint64_t hash = config_hash(c);
        for (int t = 0; t < T; ++t) {
            Hypothesis h = sample_bbb_hypothesis(
                post, mix_seed(base_seed, kBbbSampleStreamBase + static_cast<std::uint64_t>(t)),
                hash);
            h.seed = base_seed + static_cast<std::uint64_t>(t);
            h.train_loss_curve = curve;
            members[static_cast<std::size_t>(t)] = std::move(h);
        }
        return members;
    }

    int workers = std::max(1, std::min(parallelism, T));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(T));
    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            int t = next.fetch_add(1);
            if (t >= T) return;
            try {
                TrainConfig c = config;
                c.seed = base_seed + static_cast<std::uint64_t>(t);
                members[static_cast<std::size_t>(t)] = train(c, data);
            } catch (...) {
                failures[static_cast<std::size_t>(t)] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (int t = 0; t < T; ++t) {
        if (!failures[static_cast<std::size_t>(t)]) continue;
        try {
            std::rethrow_exception(failures[static_cast<std::size_t>(t)]);
        } catch (const DivergenceError& e) {
            throw DivergenceError("ensemble member " + std::to_string(t) + ": " + e.what());
        }
    }
    return members;
}

double mean_loss(const MlpModel& model, const Dataset& data, const BoundedLoss& bound) {
    if (data.size() == 0) throw ConfigError("empty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        total += loss_at(model, data.sample(i), data.labels[i], bound);
    return total / static_cast<double>(data.size());
}

double error_rate(const MlpModel& model, const Dataset& data) {
    if (data.size() == 0) throw ConfigError("empty dataset");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (predict_class(model, data.sample(i)) != data.labels[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(data.size());
}

} // namespace ensrob
