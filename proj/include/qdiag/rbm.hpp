#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qdiag/error.hpp"
#include "qdiag/matrix.hpp"
#include "qdiag/rng.hpp"

namespace qdiag {

enum class UnitKind { Bernoulli, Gaussian };

inline const char* unit_kind_name(UnitKind kind) {
    return kind == UnitKind::Bernoulli ? "bernoulli" : "gaussian";
}

/// Largest visible_count + hidden_count for which exact enumeration
/// (partition function, marginals, exact expectations) is allowed.
constexpr std::size_t kDefaultEnumerationCap = 24;

/// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(1 + e^x) without overflow.
inline double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

/// Weights, biases and unit kinds of one RBM layer.
///
/// `weights` is visible_count x hidden_count. `visible_std` holds the
/// per-unit Gaussian noise scale; for Bernoulli layers it is all ones and
/// unused. Instances are treated as immutable values: operations never
/// mutate their inputs.
struct RbmParams {
    std::size_t visible_count = 0;
    std::size_t hidden_count = 0;
    UnitKind visible_kind = UnitKind::Bernoulli;
    Matrix weights;
    std::vector<double> visible_bias;
    std::vector<double> hidden_bias;
    std::vector<double> visible_std;

    static RbmParams zeros(std::size_t visible, std::size_t hidden,
                           UnitKind kind = UnitKind::Bernoulli) {
        RbmParams p;
        p.visible_count = visible;
        p.hidden_count = hidden;
        p.visible_kind = kind;
        p.weights = Matrix(visible, hidden);
        p.visible_bias.assign(visible, 0.0);
        p.hidden_bias.assign(hidden, 0.0);
        p.visible_std.assign(visible, 1.0);
        return p;
    }

    /// Standard starting point for training: small Gaussian weights, zero
    /// biases, unit stds. Keeps the early conditionals near 0.5.
    static RbmParams random_init(std::size_t visible, std::size_t hidden, UnitKind kind,
                                 std::uint64_t seed, double weight_std = 0.01) {
        RbmParams p = zeros(visible, hidden, kind);
        Rng rng(seed);
        for (std::size_t i = 0; i < visible; ++i)
            for (std::size_t j = 0; j < hidden; ++j) p.weights(i, j) = weight_std * rng.normal();
        return p;
    }

    void validate() const {
        if (weights.rows() != visible_count || weights.cols() != hidden_count)
            throw DimensionError("weights matrix is " + std::to_string(weights.rows()) + "x" +
                                 std::to_string(weights.cols()) + ", expected " +
                                 std::to_string(visible_count) + "x" + std::to_string(hidden_count));
        if (visible_bias.size() != visible_count)
            throw DimensionError("visible_bias length " + std::to_string(visible_bias.size()) +
                                 " does not match visible_count " + std::to_string(visible_count));
        if (hidden_bias.size() != hidden_count)
            throw DimensionError("hidden_bias length " + std::to_string(hidden_bias.size()) +
                                 " does not match hidden_count " + std::to_string(hidden_count));
        if (visible_std.size() != visible_count)
            throw DimensionError("visible_std length " + std::to_string(visible_std.size()) +
                                 " does not match visible_count " + std::to_string(visible_count));
        for (double s : visible_std)
            if (!(s > 0.0)) throw NumericError("visible_std entries must be strictly positive");
        if (!weights.all_finite()) throw NumericError("weights contain non-finite entries");
        for (double v : visible_bias)
            if (!std::isfinite(v)) throw NumericError("visible_bias contains non-finite entries");
        for (double v : hidden_bias)
            if (!std::isfinite(v)) throw NumericError("hidden_bias contains non-finite entries");
    }

    std::size_t total_units() const { return visible_count + hidden_count; }
};

/// One joint configuration (v, h). Visible entries are {0,1} for Bernoulli
/// layers and real-valued for Gaussian layers; hidden entries are bits.
struct JointState {
    std::vector<double> visible;
    std::vector<std::uint8_t> hidden;
};

/// The RBM energy as a quadratic binary objective. Variables 0..m-1 are the
/// visible units, m..m+n-1 the hidden units; couplers exist only between the
/// two groups (the graph is bipartite by construction).
struct QuboProblem {
    std::size_t size = 0;
    std::vector<double> linear;
    std::map<std::pair<std::size_t, std::size_t>, double> quadratic;
    std::vector<std::pair<char, std::size_t>> variable_names;
};

namespace detail {

inline void check_visible(const RbmParams& p, std::size_t len) {
    if (len != p.visible_count)
        throw DimensionError("visible vector length " + std::to_string(len) +
                             " does not match visible_count " + std::to_string(p.visible_count));
}

inline void check_hidden(const RbmParams& p, std::size_t len) {
    if (len != p.hidden_count)
        throw DimensionError("hidden vector length " + std::to_string(len) +
                             " does not match hidden_count " + std::to_string(p.hidden_count));
}

inline void check_bernoulli(const RbmParams& p, const char* op) {
    if (p.visible_kind != UnitKind::Bernoulli)
        throw UnsupportedError(std::string(op) +
                               " requires Bernoulli visible units (continuous state space)");
}

inline void check_cap(const RbmParams& p, std::size_t cap, const char* op) {
    if (p.total_units() > cap)
        throw UnsupportedError(std::string(op) + ": " + std::to_string(p.total_units()) +
                               " total units exceed the exact-enumeration cap of " +
                               std::to_string(cap));
}

/// c_j + sum_i w_ij v_i, with v_i / sigma_i for Gaussian layers.
inline double hidden_logit(const RbmParams& p, const std::vector<double>& v, std::size_t j) {
    double acc = p.hidden_bias[j];
    if (p.visible_kind == UnitKind::Gaussian) {
        for (std::size_t i = 0; i < p.visible_count; ++i)
            acc += p.weights(i, j) * v[i] / p.visible_std[i];
    } else {
        for (std::size_t i = 0; i < p.visible_count; ++i) acc += p.weights(i, j) * v[i];
    }
    return acc;
}

}  // namespace detail

/// E(v, h). Bernoulli form: -sum b_i v_i - sum c_j h_j - sum w_ij v_i h_j.
/// Gaussian form: sum (v_i-b_i)^2/(2 sigma_i^2) - sum c_j h_j
///                - sum w_ij (v_i/sigma_i) h_j.
inline double energy(const RbmParams& params, const JointState& state) {
    detail::check_visible(params, state.visible.size());
    detail::check_hidden(params, state.hidden.size());
    double e = 0.0;
    if (params.visible_kind == UnitKind::Gaussian) {
        for (std::size_t i = 0; i < params.visible_count; ++i) {
            const double d = state.visible[i] - params.visible_bias[i];
            e += d * d / (2.0 * params.visible_std[i] * params.visible_std[i]);
        }
    } else {
        for (std::size_t i = 0; i < params.visible_count; ++i) {
            const double v = state.visible[i];
            if (v != 0.0 && v != 1.0)
                throw NumericError("Bernoulli visible entries must be 0 or 1");
            e -= params.visible_bias[i] * v;
        }
    }
    for (std::size_t j = 0; j < params.hidden_count; ++j)
        if (state.hidden[j]) e -= params.hidden_bias[j];
    for (std::size_t j = 0; j < params.hidden_count; ++j) {
        if (!state.hidden[j]) continue;
        double acc = 0.0;
        if (params.visible_kind == UnitKind::Gaussian) {
            for (std::size_t i = 0; i < params.visible_count; ++i)
                acc += params.weights(i, j) * state.visible[i] / params.visible_std[i];
        } else {
            for (std::size_t i = 0; i < params.visible_count; ++i)
                acc += params.weights(i, j) * state.visible[i];
        }
        e -= acc;
    }
    return e;
}

/// log Z by enumerating the smaller layer and summing the other analytically.
/// Bernoulli only; refuses above the enumeration cap.
inline double log_partition_function(const RbmParams& params,
                                     std::size_t cap = kDefaultEnumerationCap) {
    detail::check_bernoulli(params, "partition function");
    detail::check_cap(params, cap, "partition function");
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    const bool enumerate_visible = m <= n;
    const std::size_t outer = enumerate_visible ? m : n;
    const std::size_t inner = enumerate_visible ? n : m;

    double running_max = -std::numeric_limits<double>::infinity();
    double running_sum = 0.0;
    std::vector<double> logits(inner);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << outer); ++mask) {
        double bias_term = 0.0;
        for (std::size_t j = 0; j < inner; ++j)
            logits[j] = enumerate_visible ? params.hidden_bias[j] : params.visible_bias[j];
        for (std::size_t o = 0; o < outer; ++o) {
            if (!((mask >> o) & 1)) continue;
            bias_term += enumerate_visible ? params.visible_bias[o] : params.hidden_bias[o];
            for (std::size_t j = 0; j < inner; ++j)
                logits[j] += enumerate_visible ? params.weights(o, j) : params.weights(j, o);
        }
        double x = bias_term;
        for (std::size_t j = 0; j < inner; ++j) x += softplus(logits[j]);
        // online logsumexp
        if (x <= running_max) {
            running_sum += std::exp(x - running_max);
        } else {
            running_sum = running_sum * std::exp(running_max - x) + 1.0;
            running_max = x;
        }
    }
    return running_max + std::log(running_sum);
}

inline double partition_function(const RbmParams& params,
                                 std::size_t cap = kDefaultEnumerationCap) {
    return std::exp(log_partition_function(params, cap));
}

/// p(v, h) = exp(-E) / Z.
inline double joint_probability(const RbmParams& params, const JointState& state,
                                std::size_t cap = kDefaultEnumerationCap) {
    const double log_z = log_partition_function(params, cap);
    return std::exp(-energy(params, state) - log_z);
}

/// p(v) = (1/Z) sum_h exp(-E(v, h)), via the analytic hidden sum.
inline double marginal_visible(const RbmParams& params, const std::vector<double>& v,
                               std::size_t cap = kDefaultEnumerationCap) {
    detail::check_bernoulli(params, "visible marginal");
    detail::check_visible(params, v.size());
    const double log_z = log_partition_function(params, cap);
    double x = 0.0;
    for (std::size_t i = 0; i < params.visible_count; ++i) x += params.visible_bias[i] * v[i];
    for (std::size_t j = 0; j < params.hidden_count; ++j)
        x += softplus(detail::hidden_logit(params, v, j));
    return std::exp(x - log_z);
}

/// P(h_j = 1 | v) componentwise. Gaussian layers scale v by 1/sigma first.
inline std::vector<double> hidden_conditional(const RbmParams& params,
                                              const std::vector<double>& v) {
    detail::check_visible(params, v.size());
    std::vector<double> probs(params.hidden_count);
    for (std::size_t j = 0; j < params.hidden_count; ++j)
        probs[j] = sigmoid(detail::hidden_logit(params, v, j));
    return probs;
}

/// Bernoulli: P(v_i = 1 | h). Gaussian: the conditional mean
/// b_i + sigma_i * sum_j w_ij h_j (draws, when needed, live in the samplers).
inline std::vector<double> visible_conditional(const RbmParams& params,
                                               const std::vector<std::uint8_t>& h) {
    detail::check_hidden(params, h.size());
    std::vector<double> out(params.visible_count);
    for (std::size_t i = 0; i < params.visible_count; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < params.hidden_count; ++j)
            if (h[j]) acc += params.weights(i, j);
        if (params.visible_kind == UnitKind::Gaussian)
            out[i] = params.visible_bias[i] + params.visible_std[i] * acc;
        else
            out[i] = sigmoid(params.visible_bias[i] + acc);
    }
    return out;
}

/// Maps the energy function onto a QUBO: linear terms -b, -c and couplers
/// -w_ij between visible i and hidden j. The objective value of any binary
/// assignment equals energy() of the corresponding joint state.
inline QuboProblem to_qubo(const RbmParams& params) {
    detail::check_bernoulli(params, "QUBO export");
    params.validate();
    QuboProblem q;
    q.size = params.total_units();
    q.linear.resize(q.size);
    q.variable_names.resize(q.size);
    const std::size_t m = params.visible_count;
    for (std::size_t i = 0; i < m; ++i) {
        q.linear[i] = -params.visible_bias[i];
        q.variable_names[i] = {'v', i};
    }
    for (std::size_t j = 0; j < params.hidden_count; ++j) {
        q.linear[m + j] = -params.hidden_bias[j];
        q.variable_names[m + j] = {'h', j};
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < params.hidden_count; ++j)
            q.quadratic[{i, m + j}] = -params.weights(i, j);
    return q;
}

/// Objective value of a binary assignment.
inline double qubo_value(const QuboProblem& q, const std::vector<std::uint8_t>& x) {
    if (x.size() != q.size)
        throw DimensionError("assignment length " + std::to_string(x.size()) +
                             " does not match QUBO size " + std::to_string(q.size));
    double val = 0.0;
    for (std::size_t i = 0; i < q.size; ++i)
        if (x[i]) val += q.linear[i];
    for (const auto& [pair, coeff] : q.quadratic)
        if (x[pair.first] && x[pair.second]) val += coeff;
    return val;
}

}  // namespace qdiag
