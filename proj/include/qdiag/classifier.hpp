#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qdiag/matrix.hpp"
#include "qdiag/rng.hpp"
#include "qdiag/training.hpp"

namespace qdiag {

/// Fully connected hidden layer (ReLU) plus soft-max output layer. The
/// hidden width always equals the input width.
struct ClassifierParams {
    Matrix hidden_weights;            // input_dim x input_dim
    std::vector<double> hidden_bias;  // input_dim
    Matrix output_weights;            // input_dim x class_count
    std::vector<double> output_bias;  // class_count

    std::size_t input_dim() const { return hidden_weights.rows(); }
    std::size_t class_count() const { return output_weights.cols(); }

    static ClassifierParams zeros(std::size_t input_dim, std::size_t class_count) {
        ClassifierParams p;
        p.hidden_weights = Matrix(input_dim, input_dim);
        p.hidden_bias.assign(input_dim, 0.0);
        p.output_weights = Matrix(input_dim, class_count);
        p.output_bias.assign(class_count, 0.0);
        return p;
    }

    static ClassifierParams random_init(std::size_t input_dim, std::size_t class_count,
                                        std::uint64_t seed) {
        ClassifierParams p = zeros(input_dim, class_count);
        Rng rng(seed);
        const double scale = std::sqrt(2.0 / static_cast<double>(input_dim));
        for (double& w : p.hidden_weights.values()) w = scale * rng.normal();
        for (double& w : p.output_weights.values()) w = scale * rng.normal();
        // The head's inputs are sigmoid abstractions, hence strictly positive;
        // a small positive bias keeps the ReLU units initially active.
        for (double& b : p.hidden_bias) b = 0.1;
        return p;
    }

    void validate() const {
        if (hidden_weights.rows() != hidden_weights.cols())
            throw DimensionError("hidden layer must be square, got " +
                                 std::to_string(hidden_weights.rows()) + "x" +
                                 std::to_string(hidden_weights.cols()));
        if (hidden_bias.size() != hidden_weights.cols())
            throw DimensionError("hidden_bias length " + std::to_string(hidden_bias.size()) +
                                 " does not match hidden width " +
                                 std::to_string(hidden_weights.cols()));
        if (output_weights.rows() != hidden_weights.cols())
            throw DimensionError("output_weights rows " + std::to_string(output_weights.rows()) +
                                 " do not match hidden width " +
                                 std::to_string(hidden_weights.cols()));
        if (output_bias.size() != output_weights.cols())
            throw DimensionError("output_bias length " + std::to_string(output_bias.size()) +
                                 " does not match class count " +
                                 std::to_string(output_weights.cols()));
        if (!hidden_weights.all_finite() || !output_weights.all_finite())
            throw NumericError("classifier weights contain non-finite entries");
    }
};

struct HeadForward {
    Matrix hidden;  // post-ReLU activations
    Matrix probs;   // row-wise soft-max, each row sums to 1
};

/// ReLU(features . W_f + b_f) -> soft-max(hidden . W_s + b_s). Soft-max is
/// computed with per-row max subtraction.
inline HeadForward head_forward(const ClassifierParams& head, const Matrix& features) {
    if (features.cols() != head.input_dim())
        throw DimensionError("features have " + std::to_string(features.cols()) +
                             " columns, expected input_dim " +
                             std::to_string(head.input_dim()));
    HeadForward out;
    out.hidden = multiply(features, head.hidden_weights);
    for (std::size_t r = 0; r < out.hidden.rows(); ++r)
        for (std::size_t c = 0; c < out.hidden.cols(); ++c) {
            const double z = out.hidden(r, c) + head.hidden_bias[c];
            out.hidden(r, c) = z > 0.0 ? z : 0.0;
        }
    out.probs = multiply(out.hidden, head.output_weights);
    for (std::size_t r = 0; r < out.probs.rows(); ++r) {
        double* row = out.probs.row(r);
        double max_logit = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < head.class_count(); ++c) {
            row[c] += head.output_bias[c];
            max_logit = std::max(max_logit, row[c]);
        }
        double sum = 0.0;
        for (std::size_t c = 0; c < head.class_count(); ++c) {
            row[c] = std::exp(row[c] - max_logit);
            sum += row[c];
        }
        for (std::size_t c = 0; c < head.class_count(); ++c) row[c] /= sum;
    }
    return out;
}

/// -mean over rows of sum_c Y_c log P_c, probabilities clamped to >= 1e-12.
/// Label rows must be exactly one-hot.
inline double cross_entropy_loss(const Matrix& probs, const Matrix& labels) {
    if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
        throw DimensionError("cross_entropy_loss: shapes " + std::to_string(probs.rows()) + "x" +
                             std::to_string(probs.cols()) + " vs " +
                             std::to_string(labels.rows()) + "x" +
                             std::to_string(labels.cols()));
    if (probs.rows() == 0) throw Error("cross_entropy_loss: no rows");
    double acc = 0.0;
    for (std::size_t r = 0; r < labels.rows(); ++r) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < labels.cols(); ++c) {
            const double y = labels(r, c);
            if (y == 1.0)
                ++ones;
            else if (y != 0.0)
                throw Error("label row " + std::to_string(r) + " is not one-hot");
            if (y == 1.0) acc -= std::log(std::max(probs(r, c), 1e-12));
        }
        if (ones != 1) throw Error("label row " + std::to_string(r) + " is not one-hot");
    }
    return acc / static_cast<double>(labels.rows());
}

inline Matrix one_hot(const std::vector<int>& labels, std::size_t class_count) {
    Matrix out(labels.size(), class_count);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= class_count)
            throw Error("label " + std::to_string(labels[r]) + " out of range [0, " +
                        std::to_string(class_count) + ")");
        out(r, static_cast<std::size_t>(labels[r])) = 1.0;
    }
    return out;
}

/// The full two-state diagnosis network: DBN-N and DBN-F abstractions
/// concatenated into the local classifier head.
struct DiagnosisModel {
    DbnModel dbn_normal;
    DbnModel dbn_fault;
    ClassifierParams head;
    double threshold = 0.5;

    void validate() const {
        dbn_normal.validate();
        dbn_fault.validate();
        head.validate();
        if (dbn_normal.input_dim() != dbn_fault.input_dim())
            throw DimensionError("DBN branches disagree on input dim: " +
                                 std::to_string(dbn_normal.input_dim()) + " vs " +
                                 std::to_string(dbn_fault.input_dim()));
        if (dbn_normal.output_dim() != dbn_fault.output_dim())
            throw DimensionError("DBN branches disagree on output dim: " +
                                 std::to_string(dbn_normal.output_dim()) + " vs " +
                                 std::to_string(dbn_fault.output_dim()));
        if (head.input_dim() != 2 * dbn_normal.output_dim())
            throw DimensionError("head input_dim " + std::to_string(head.input_dim()) +
                                 " does not match concatenated abstraction width " +
                                 std::to_string(2 * dbn_normal.output_dim()));
        if (!(threshold > 0.0 && threshold < 1.0))
            throw Error("threshold must lie in (0, 1)");
    }

    std::size_t input_dim() const { return dbn_normal.input_dim(); }
};

struct DiagnosisResult {
    Matrix probs;                      // column 0 = normal, column 1 = faulty
    std::vector<std::uint8_t> states;  // 1 = faulty
};

/// Concatenates the (normal, fault) abstractions, runs the head, and labels a
/// sample faulty iff the faulty-class probability strictly exceeds the
/// threshold (a tie stays normal).
inline DiagnosisResult diagnose(const DiagnosisModel& model, const Matrix& samples) {
    model.validate();
    const Matrix features = hconcat(dbn_forward(model.dbn_normal, samples),
                                    dbn_forward(model.dbn_fault, samples));
    DiagnosisResult out;
    out.probs = head_forward(model.head, features).probs;
    out.states.resize(samples.rows());
    for (std::size_t r = 0; r < samples.rows(); ++r)
        out.states[r] = out.probs(r, 1) > model.threshold ? 1 : 0;
    return out;
}

// --- gradients ----------------------------------------------------------------

struct HeadGradients {
    Matrix hidden_weights;
    std::vector<double> hidden_bias;
    Matrix output_weights;
    std::vector<double> output_bias;
};

struct LayerGradients {
    Matrix weights;
    std::vector<double> hidden_bias;
};

struct ModelGradients {
    std::vector<LayerGradients> normal;
    std::vector<LayerGradients> fault;
    HeadGradients head;
};

namespace detail {

inline std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out[c] += m(r, c);
    return out;
}

}  // namespace detail

/// Loss and head gradients on a batch; optionally also the gradient w.r.t.
/// the input features (needed to continue into the DBN branches).
inline double head_gradients(const ClassifierParams& head, const Matrix& features,
                             const Matrix& labels, HeadGradients& grads,
                             Matrix* dfeatures = nullptr) {
    const HeadForward fwd = head_forward(head, features);
    const double loss = cross_entropy_loss(fwd.probs, labels);
    const std::size_t rows = features.rows();

    Matrix dlogits = fwd.probs;
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < labels.cols(); ++c)
            dlogits(r, c) = (dlogits(r, c) - labels(r, c)) / static_cast<double>(rows);

    grads.output_weights = multiply_at_b(fwd.hidden, dlogits);
    grads.output_bias = detail::column_sums(dlogits);

    Matrix dhidden = multiply_a_bt(dlogits, head.output_weights);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < dhidden.cols(); ++c)
            if (fwd.hidden(r, c) <= 0.0) dhidden(r, c) = 0.0;  // ReLU gate

    grads.hidden_weights = multiply_at_b(features, dhidden);
    grads.hidden_bias = detail::column_sums(dhidden);
    if (dfeatures) *dfeatures = multiply_a_bt(dhidden, head.hidden_weights);
    return loss;
}

/// Loss and gradients for every trainable tensor of the diagnosis model:
/// both DBN branches' weights and hidden biases plus the head. Visible
/// biases do not enter the forward transform, so they carry no gradient.
inline double diagnosis_gradients(const DiagnosisModel& model, const Matrix& samples,
                                  const Matrix& labels, ModelGradients& grads) {
    model.validate();
    auto forward_branch = [&](const DbnModel& dbn, std::vector<Matrix>& activations) {
        activations.clear();
        activations.push_back(samples);
        for (const RbmParams& layer : dbn.layers)
            activations.push_back(forward_layer(layer, activations.back()));
    };
    std::vector<Matrix> acts_normal, acts_fault;
    forward_branch(model.dbn_normal, acts_normal);
    forward_branch(model.dbn_fault, acts_fault);
    const std::size_t k = model.dbn_normal.output_dim();
    const Matrix features = hconcat(acts_normal.back(), acts_fault.back());

    Matrix dfeatures;
    const double loss = head_gradients(model.head, features, labels, grads.head, &dfeatures);

    auto backward_branch = [&](const DbnModel& dbn, const std::vector<Matrix>& acts,
                               Matrix dout, std::vector<LayerGradients>& layer_grads) {
        layer_grads.resize(dbn.layers.size());
        for (std::size_t l = dbn.layers.size(); l-- > 0;) {
            const Matrix& out = acts[l + 1];
            Matrix dz = dout;
            for (std::size_t r = 0; r < dz.rows(); ++r)
                for (std::size_t c = 0; c < dz.cols(); ++c)
                    dz(r, c) *= out(r, c) * (1.0 - out(r, c));  // sigmoid'
            layer_grads[l].weights = multiply_at_b(acts[l], dz);
            layer_grads[l].hidden_bias = detail::column_sums(dz);
            if (l > 0) dout = multiply_a_bt(dz, dbn.layers[l].weights);
        }
    };
    Matrix dnormal(samples.rows(), k), dfault(samples.rows(), k);
    for (std::size_t r = 0; r < samples.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) {
            dnormal(r, c) = dfeatures(r, c);
            dfault(r, c) = dfeatures(r, k + c);
        }
    backward_branch(model.dbn_normal, acts_normal, std::move(dnormal), grads.normal);
    backward_branch(model.dbn_fault, acts_fault, std::move(dfault), grads.fault);
    return loss;
}

// --- adaptive-moment updates ---------------------------------------------------

struct FineTuneConfig {
    double step_size = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::uint64_t rng_seed = 0;
    bool freeze_dbn = false;  // ablation switch: leave the branches untouched
};

namespace detail {

/// First/second moment buffers for one tensor.
struct AdamSlot {
    std::vector<double> m;
    std::vector<double> v;

    void init(std::size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }

    void apply(double* values, const double* grads, std::size_t n, const FineTuneConfig& cfg,
               double bias1, double bias2) {
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
            const double mhat = m[i] / bias1;
            const double vhat = v[i] / bias2;
            values[i] -= cfg.step_size * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t j = rng.next_u64() % (i + 1);
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

inline Matrix gather_rows(const Matrix& src, const std::vector<std::size_t>& idx,
                          std::size_t begin, std::size_t end) {
    Matrix out(end - begin, src.cols());
    for (std::size_t r = begin; r < end; ++r)
        for (std::size_t c = 0; c < src.cols(); ++c) out(r - begin, c) = src(idx[r], c);
    return out;
}

}  // namespace detail

struct FineTuneResult {
    DiagnosisModel model;
    LossCurve curve;
};

/// Supervised fine-tuning of the whole network (or just the head when
/// freeze_dbn is set) by backpropagation with adaptive-moment updates.
/// Mini-batch order is a seeded shuffle per epoch; runs are reproducible.
inline FineTuneResult train_discriminative(const DiagnosisModel& model, const Matrix& samples,
                                           const std::vector<int>& labels,
                                           const FineTuneConfig& config) {
    if (samples.rows() == 0) throw Error("train_discriminative: empty dataset");
    if (labels.size() != samples.rows())
        throw DimensionError("labels length " + std::to_string(labels.size()) +
                             " does not match sample count " + std::to_string(samples.rows()));
    model.validate();
    const Matrix targets = one_hot(labels, model.head.class_count());

    FineTuneResult result;
    result.model = model;
    result.curve.sampler_label = "finetune";

    // One Adam slot per tensor, fixed order: head, then per-branch layers.
    detail::AdamSlot s_hw, s_hb, s_ow, s_ob;
    s_hw.init(model.head.hidden_weights.values().size());
    s_hb.init(model.head.hidden_bias.size());
    s_ow.init(model.head.output_weights.values().size());
    s_ob.init(model.head.output_bias.size());
    std::vector<detail::AdamSlot> s_normal_w(model.dbn_normal.layers.size()),
        s_normal_c(model.dbn_normal.layers.size()), s_fault_w(model.dbn_fault.layers.size()),
        s_fault_c(model.dbn_fault.layers.size());
    for (std::size_t l = 0; l < model.dbn_normal.layers.size(); ++l) {
        s_normal_w[l].init(model.dbn_normal.layers[l].weights.values().size());
        s_normal_c[l].init(model.dbn_normal.layers[l].hidden_bias.size());
    }
    for (std::size_t l = 0; l < model.dbn_fault.layers.size(); ++l) {
        s_fault_w[l].init(model.dbn_fault.layers[l].weights.values().size());
        s_fault_c[l].init(model.dbn_fault.layers[l].hidden_bias.size());
    }

    std::size_t step = 0;
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.rng_seed, epoch));
        const std::vector<std::size_t> order =
            detail::shuffled_indices(samples.rows(), shuffle_rng);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            const Matrix batch = detail::gather_rows(samples, order, begin, end);
            const Matrix batch_targets = detail::gather_rows(targets, order, begin, end);
            ModelGradients grads;
            diagnosis_gradients(result.model, batch, batch_targets, grads);

            ++step;
            const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            auto& head = result.model.head;
            s_hw.apply(head.hidden_weights.values().data(),
                       grads.head.hidden_weights.values().data(),
                       head.hidden_weights.values().size(), config, bias1, bias2);
            s_hb.apply(head.hidden_bias.data(), grads.head.hidden_bias.data(),
                       head.hidden_bias.size(), config, bias1, bias2);
            s_ow.apply(head.output_weights.values().data(),
                       grads.head.output_weights.values().data(),
                       head.output_weights.values().size(), config, bias1, bias2);
            s_ob.apply(head.output_bias.data(), grads.head.output_bias.data(),
                       head.output_bias.size(), config, bias1, bias2);
            if (!config.freeze_dbn) {
                for (std::size_t l = 0; l < result.model.dbn_normal.layers.size(); ++l) {
                    RbmParams& layer = result.model.dbn_normal.layers[l];
                    s_normal_w[l].apply(layer.weights.values().data(),
                                        grads.normal[l].weights.values().data(),
                                        layer.weights.values().size(), config, bias1, bias2);
                    s_normal_c[l].apply(layer.hidden_bias.data(),
                                        grads.normal[l].hidden_bias.data(),
                                        layer.hidden_bias.size(), config, bias1, bias2);
                }
                for (std::size_t l = 0; l < result.model.dbn_fault.layers.size(); ++l) {
                    RbmParams& layer = result.model.dbn_fault.layers[l];
                    s_fault_w[l].apply(layer.weights.values().data(),
                                       grads.fault[l].weights.values().data(),
                                       layer.weights.values().size(), config, bias1, bias2);
                    s_fault_c[l].apply(layer.hidden_bias.data(),
                                       grads.fault[l].hidden_bias.data(),
                                       layer.hidden_bias.size(), config, bias1, bias2);
                }
            }
        }
        const Matrix probs = diagnose(result.model, samples).probs;
        const double loss = cross_entropy_loss(probs, targets);
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        result.curve.points.emplace_back(epoch, loss);
    }
    return result;
}

struct TrainedHead {
    ClassifierParams head;
    LossCurve curve;
};

/// Adaptive-moment training of a stand-alone classifier head (the global
/// fault-identification network).
inline TrainedHead train_head(const ClassifierParams& head, const Matrix& features,
                              const std::vector<int>& labels, const FineTuneConfig& config) {
    if (features.rows() == 0) throw Error("train_head: empty dataset");
    if (labels.size() != features.rows())
        throw DimensionError("labels length " + std::to_string(labels.size()) +
                             " does not match sample count " + std::to_string(features.rows()));
    head.validate();
    const Matrix targets = one_hot(labels, head.class_count());

    TrainedHead result;
    result.head = head;
    result.curve.sampler_label = "head";
    detail::AdamSlot s_hw, s_hb, s_ow, s_ob;
    s_hw.init(head.hidden_weights.values().size());
    s_hb.init(head.hidden_bias.size());
    s_ow.init(head.output_weights.values().size());
    s_ob.init(head.output_bias.size());

    std::size_t step = 0;
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.rng_seed, epoch));
        const std::vector<std::size_t> order =
            detail::shuffled_indices(features.rows(), shuffle_rng);
        for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
            const std::size_t end = std::min(begin + batch_size, order.size());
            const Matrix batch = detail::gather_rows(features, order, begin, end);
            const Matrix batch_targets = detail::gather_rows(targets, order, begin, end);
            HeadGradients grads;
            head_gradients(result.head, batch, batch_targets, grads);
            ++step;
            const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            s_hw.apply(result.head.hidden_weights.values().data(),
                       grads.hidden_weights.values().data(),
                       result.head.hidden_weights.values().size(), config, bias1, bias2);
            s_hb.apply(result.head.hidden_bias.data(), grads.hidden_bias.data(),
                       result.head.hidden_bias.size(), config, bias1, bias2);
            s_ow.apply(result.head.output_weights.values().data(),
                       grads.output_weights.values().data(),
                       result.head.output_weights.values().size(), config, bias1, bias2);
            s_ob.apply(result.head.output_bias.data(), grads.output_bias.data(),
                       result.head.output_bias.size(), config, bias1, bias2);
        }
        const double loss =
            cross_entropy_loss(head_forward(result.head, features).probs, targets);
        if (!std::isfinite(loss))
            throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
        result.curve.points.emplace_back(epoch, loss);
    }
    return result;
}

/// Class prediction for merged per-fault probability vectors: arg-max of the
/// soft-max output, ties resolved toward the lowest class index.
inline std::vector<int> global_identify(const Matrix& features, const ClassifierParams& head) {
    if (features.cols() != head.input_dim())
        throw DimensionError("features have " + std::to_string(features.cols()) +
                             " columns, expected " + std::to_string(head.input_dim()));
    const Matrix probs = head_forward(head, features).probs;
    std::vector<int> classes(features.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c)
            if (probs(r, c) > probs(r, best)) best = c;
        classes[r] = static_cast<int>(best);
    }
    return classes;
}

}  // namespace qdiag
