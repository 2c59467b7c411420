#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "qdiag/matrix.hpp"
#include "qdiag/rbm.hpp"
#include "qdiag/rng.hpp"
#include "qdiag/samplers.hpp"

namespace qdiag {

enum class LossMetric { Auto, CrossEntropy, MeanSquare };

/// Generative-training settings for one RBM layer.
///
/// `momentum` multiplies the *previous parameter value* in the update rule
/// (w' = momentum * w + lr * gradient). At the default momentum of one this
/// is plain stochastic gradient ascent; below one it acts as weight decay,
/// not as velocity momentum.
struct TrainingConfig {
    double learning_rate = 0.01;
    double momentum = 1.0;
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    SamplerConfig sampler;
    std::uint64_t rng_seed = 0;
    LossMetric loss_metric = LossMetric::Auto;
    bool forward_sampling = false;  // binomial draws between DBN layers while stacking

    /// 0.001 for Gaussian-visible layers, 0.01 for Bernoulli layers.
    static double default_learning_rate(UnitKind kind) {
        return kind == UnitKind::Gaussian ? 0.001 : 0.01;
    }
};

/// Per-epoch loss record of one training run.
struct LossCurve {
    std::string sampler_label;
    std::vector<std::pair<std::size_t, double>> points;  // (epoch, loss)
};

/// Greedily trained RBM stack. Layer L's hidden layer is layer L+1's visible
/// layer; only the first layer may be Gaussian.
struct DbnModel {
    std::vector<RbmParams> layers;

    void validate() const {
        if (layers.empty()) throw Error("DBN has no layers");
        for (std::size_t l = 0; l < layers.size(); ++l) {
            layers[l].validate();
            if (l > 0) {
                if (layers[l].visible_kind != UnitKind::Bernoulli)
                    throw UnsupportedError("only the first DBN layer may be Gaussian");
                if (layers[l].visible_count != layers[l - 1].hidden_count)
                    throw DimensionError("layer " + std::to_string(l) + " visible_count " +
                                         std::to_string(layers[l].visible_count) +
                                         " does not match layer " + std::to_string(l - 1) +
                                         " hidden_count " +
                                         std::to_string(layers[l - 1].hidden_count));
            }
        }
    }

    std::size_t input_dim() const { return layers.front().visible_count; }
    std::size_t output_dim() const { return layers.back().hidden_count; }
};

/// One application of the update rules: each parameter is scaled by the
/// momentum and nudged by learning_rate times (data - model) expectation gap.
inline RbmParams update_params(const RbmParams& params, const ExpectationEstimate& data_exp,
                               const ExpectationEstimate& model_exp,
                               const TrainingConfig& config) {
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    auto check = [&](const ExpectationEstimate& e, const char* side) {
        if (e.pair_expectation.rows() != m || e.pair_expectation.cols() != n)
            throw DimensionError(std::string(side) + " pair_expectation is " +
                                 std::to_string(e.pair_expectation.rows()) + "x" +
                                 std::to_string(e.pair_expectation.cols()) + ", expected " +
                                 std::to_string(m) + "x" + std::to_string(n));
        if (e.visible_expectation.size() != m)
            throw DimensionError(std::string(side) + " visible_expectation length " +
                                 std::to_string(e.visible_expectation.size()) + ", expected " +
                                 std::to_string(m));
        if (e.hidden_expectation.size() != n)
            throw DimensionError(std::string(side) + " hidden_expectation length " +
                                 std::to_string(e.hidden_expectation.size()) + ", expected " +
                                 std::to_string(n));
    };
    check(data_exp, "data");
    check(model_exp, "model");

    RbmParams out = params;
    const double a = config.momentum;
    const double lr = config.learning_rate;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out.weights(i, j) = a * params.weights(i, j) +
                                lr * (data_exp.pair_expectation(i, j) -
                                      model_exp.pair_expectation(i, j));
    for (std::size_t i = 0; i < m; ++i)
        out.visible_bias[i] = a * params.visible_bias[i] +
                              lr * (data_exp.visible_expectation[i] -
                                    model_exp.visible_expectation[i]);
    for (std::size_t j = 0; j < n; ++j)
        out.hidden_bias[j] = a * params.hidden_bias[j] +
                             lr * (data_exp.hidden_expectation[j] -
                                   model_exp.hidden_expectation[j]);
    return out;
}

/// sigma(input . W + c), row per sample. The deterministic layer transform;
/// no sampling and no visible-std scaling.
inline Matrix forward_layer(const RbmParams& params, const Matrix& input) {
    if (input.cols() != params.visible_count)
        throw DimensionError("input has " + std::to_string(input.cols()) +
                             " columns, expected visible_count " +
                             std::to_string(params.visible_count));
    Matrix out = multiply(input, params.weights);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t j = 0; j < params.hidden_count; ++j)
            out(r, j) = sigmoid(out(r, j) + params.hidden_bias[j]);
    return out;
}

/// One-step reconstruction means: hidden probabilities from the data, then
/// the visible conditional evaluated at those probabilities. Used for loss
/// tracking only.
inline Matrix reconstruct_means(const RbmParams& params, const Matrix& input) {
    if (input.cols() != params.visible_count)
        throw DimensionError("input has " + std::to_string(input.cols()) +
                             " columns, expected visible_count " +
                             std::to_string(params.visible_count));
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    const bool gaussian = params.visible_kind == UnitKind::Gaussian;
    Matrix recon(input.rows(), m);
    std::vector<double> v(m), hp(n);
    for (std::size_t r = 0; r < input.rows(); ++r) {
        for (std::size_t i = 0; i < m; ++i) v[i] = input(r, i);
        hp = hidden_conditional(params, v);
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += params.weights(i, j) * hp[j];
            recon(r, i) = gaussian ? params.visible_bias[i] + params.visible_std[i] * acc
                                   : sigmoid(params.visible_bias[i] + acc);
        }
    }
    return recon;
}

/// Cross-entropy (inputs in [0,1], reconstruction clamped to [1e-7, 1-1e-7])
/// or mean squared difference, averaged over all elements.
inline double reconstruction_loss(const Matrix& original, const Matrix& reconstructed,
                                  LossMetric metric) {
    if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols())
        throw DimensionError("reconstruction_loss: shapes " + std::to_string(original.rows()) +
                             "x" + std::to_string(original.cols()) + " vs " +
                             std::to_string(reconstructed.rows()) + "x" +
                             std::to_string(reconstructed.cols()));
    if (original.empty()) throw Error("reconstruction_loss: empty matrices");
    const std::size_t count = original.rows() * original.cols();
    double acc = 0.0;
    if (metric == LossMetric::MeanSquare) {
        for (std::size_t idx = 0; idx < count; ++idx) {
            const double d = original.values()[idx] - reconstructed.values()[idx];
            acc += d * d;
        }
        return acc / static_cast<double>(count);
    }
    for (std::size_t idx = 0; idx < count; ++idx) {
        const double x = original.values()[idx];
        double xr = reconstructed.values()[idx];
        if (x < 0.0 || x > 1.0 || xr < 0.0 || xr > 1.0)
            throw Error("cross-entropy loss requires values in [0,1]");
        if (xr < 1e-7) xr = 1e-7;
        if (xr > 1.0 - 1e-7) xr = 1.0 - 1e-7;
        acc -= x * std::log(xr) + (1.0 - x) * std::log(1.0 - xr);
    }
    return acc / static_cast<double>(count);
}

inline LossMetric resolve_loss_metric(LossMetric metric, UnitKind kind) {
    if (metric != LossMetric::Auto) return metric;
    return kind == UnitKind::Gaussian ? LossMetric::MeanSquare : LossMetric::CrossEntropy;
}

struct TrainedRbm {
    RbmParams params;
    LossCurve curve;
};

/// Epoch x mini-batch generative training of one RBM. Batches run in file
/// order (no shuffling); every model-expectation call gets a seed derived
/// from (rng_seed, epoch, batch), so runs are bit-reproducible.
inline TrainedRbm train_rbm(const RbmParams& init, const Matrix& data,
                            const TrainingConfig& config) {
    if (data.rows() == 0) throw Error("train_rbm: empty dataset");
    if (data.cols() != init.visible_count)
        throw DimensionError("data has " + std::to_string(data.cols()) +
                             " columns, expected visible_count " +
                             std::to_string(init.visible_count));
    if (config.batch_size < 1) throw Error("train_rbm: batch_size must be >= 1");
    init.validate();

    const SamplerConfig sampler = config.sampler.with_loaded_samples();
    const LossMetric metric = resolve_loss_metric(config.loss_metric, init.visible_kind);

    TrainedRbm result;
    result.params = init;
    result.curve.sampler_label = sampler_kind_name(sampler.kind);
    const std::size_t batches = (data.rows() + config.batch_size - 1) / config.batch_size;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches; ++b) {
            const std::size_t begin = b * config.batch_size;
            const std::size_t end = std::min(begin + config.batch_size, data.rows());
            const Matrix batch = data.slice_rows(begin, end);
            const ExpectationEstimate data_exp = clamped_expectations(result.params, batch);
            const std::uint64_t update_seed =
                derive_seed(derive_seed(config.rng_seed, epoch), b);
            const ExpectationEstimate model_exp =
                model_expectations(result.params, batch, sampler, update_seed);
            result.params = update_params(result.params, data_exp, model_exp, config);
            bool finite = result.params.weights.all_finite();
            for (double x : result.params.visible_bias) finite = finite && std::isfinite(x);
            for (double x : result.params.hidden_bias) finite = finite && std::isfinite(x);
            if (!finite)
                throw NumericError("non-finite parameter at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(b) +
                                   " (learning rate likely too large)");
        }
        const double loss =
            reconstruction_loss(data, reconstruct_means(result.params, data), metric);
        result.curve.points.emplace_back(epoch, loss);
    }
    return result;
}

/// Architecture of a DBN: the input layer's width and kind, then one hidden
/// size per stacked RBM.
struct DbnSpec {
    std::size_t input_dim = 0;
    UnitKind input_kind = UnitKind::Gaussian;
    std::vector<std::size_t> hidden_sizes;
};

struct TrainedDbn {
    DbnModel model;
    std::vector<LossCurve> curves;
};

/// Greedy layer-wise training: layer 1 learns the raw data, each later layer
/// learns the previous layer's deterministic forward output (or a seeded
/// binomial sample of it when forward_sampling is set).
inline TrainedDbn train_dbn(const DbnSpec& spec, const Matrix& data,
                            const std::vector<TrainingConfig>& configs) {
    if (spec.hidden_sizes.empty()) throw Error("train_dbn: no layers requested");
    if (configs.size() != spec.hidden_sizes.size())
        throw DimensionError("train_dbn: " + std::to_string(configs.size()) +
                             " configs for " + std::to_string(spec.hidden_sizes.size()) +
                             " layers");
    if (data.cols() != spec.input_dim)
        throw DimensionError("data has " + std::to_string(data.cols()) +
                             " columns, expected input_dim " + std::to_string(spec.input_dim));

    TrainedDbn out;
    Matrix layer_input = data;
    std::size_t visible = spec.input_dim;
    UnitKind kind = spec.input_kind;
    for (std::size_t l = 0; l < spec.hidden_sizes.size(); ++l) {
        const TrainingConfig& cfg = configs[l];
        const RbmParams init =
            RbmParams::random_init(visible, spec.hidden_sizes[l], kind, cfg.rng_seed);
        TrainedRbm trained = train_rbm(init, layer_input, cfg);
        Matrix next = forward_layer(trained.params, layer_input);
        if (cfg.forward_sampling) {
            Rng rng(derive_seed(cfg.rng_seed, 0x666f7277));  // stacking draw stream
            for (double& x : next.values()) x = rng.bernoulli(x) ? 1.0 : 0.0;
        }
        out.model.layers.push_back(std::move(trained.params));
        out.curves.push_back(std::move(trained.curve));
        layer_input = std::move(next);
        visible = spec.hidden_sizes[l];
        kind = UnitKind::Bernoulli;
    }
    out.model.validate();
    return out;
}

/// Deterministic pass through every layer; outputs land in (0,1).
inline Matrix dbn_forward(const DbnModel& model, const Matrix& input) {
    model.validate();
    Matrix x = input;
    for (const RbmParams& layer : model.layers) x = forward_layer(layer, x);
    return x;
}

}  // namespace qdiag
