#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "qdiag/matrix.hpp"
#include "qdiag/rbm.hpp"
#include "qdiag/rng.hpp"

namespace qdiag {

/// The three expectation blocks <v_i h_j>, <v_i>, <h_j> under one
/// distribution (data side or model side). sample_count == 0 marks an exact
/// (enumerated) estimate.
struct ExpectationEstimate {
    Matrix pair_expectation;                 // visible_count x hidden_count
    std::vector<double> visible_expectation;
    std::vector<double> hidden_expectation;
    std::size_t sample_count = 0;
};

/// Controls for the annealing sampler that stands in for a quantum device.
/// One read = one independent run: ramp the inverse temperature from
/// beta_start to beta_eff over sweeps_per_read full Gibbs sweeps, hold at
/// beta_eff for hold_sweeps more, and keep the final joint state.
struct AnnealConfig {
    std::size_t reads = 1000;
    std::size_t sweeps_per_read = 1000;
    double beta_start = 0.1;
    double beta_eff = 1.0;
    std::size_t hold_sweeps = 200;
    double scaling_factor = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (reads < 1) throw Error("anneal: reads must be >= 1");
        if (sweeps_per_read < 1) throw Error("anneal: sweeps_per_read must be >= 1");
        if (!(beta_start > 0.0)) throw Error("anneal: beta_start must be positive");
        if (!(beta_start < beta_eff))
            throw Error("anneal: beta_start must be smaller than beta_eff");
        if (!(scaling_factor > 0.0)) throw Error("anneal: scaling_factor must be positive");
    }
};

/// Exact model expectations by enumerating the smaller layer; the other layer
/// is marginalized analytically. Serves as the oracle the sampling backends
/// are checked against.
inline ExpectationEstimate exact_expectations(const RbmParams& params,
                                              std::size_t cap = kDefaultEnumerationCap) {
    detail::check_bernoulli(params, "exact expectations");
    detail::check_cap(params, cap, "exact expectations");
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    const double log_z = log_partition_function(params, cap);

    ExpectationEstimate est;
    est.pair_expectation = Matrix(m, n);
    est.visible_expectation.assign(m, 0.0);
    est.hidden_expectation.assign(n, 0.0);
    est.sample_count = 0;

    const bool enumerate_visible = m <= n;
    const std::size_t outer = enumerate_visible ? m : n;
    const std::size_t inner = enumerate_visible ? n : m;
    std::vector<double> logits(inner);
    std::vector<double> cond(inner);
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
        const double weight = std::exp(x - log_z);
        for (std::size_t j = 0; j < inner; ++j) cond[j] = sigmoid(logits[j]);

        if (enumerate_visible) {
            for (std::size_t i = 0; i < m; ++i) {
                if (!((mask >> i) & 1)) continue;
                est.visible_expectation[i] += weight;
                for (std::size_t j = 0; j < n; ++j) est.pair_expectation(i, j) += weight * cond[j];
            }
            for (std::size_t j = 0; j < n; ++j) est.hidden_expectation[j] += weight * cond[j];
        } else {
            for (std::size_t j = 0; j < n; ++j)
                if ((mask >> j) & 1) est.hidden_expectation[j] += weight;
            for (std::size_t i = 0; i < m; ++i) {
                est.visible_expectation[i] += weight * cond[i];
                for (std::size_t j = 0; j < n; ++j)
                    if ((mask >> j) & 1) est.pair_expectation(i, j) += weight * cond[i];
            }
        }
    }
    return est;
}

/// One true Gibbs transition: h ~ P(h|v), then v' ~ P(v|h) (Bernoulli draw;
/// Gaussian layers take the conditional mean). Probabilities are returned
/// alongside the draws.
struct GibbsStepResult {
    std::vector<std::uint8_t> h_sample;
    std::vector<double> v_next;
    std::vector<double> h_probs;
    std::vector<double> v_next_probs;  // probabilities (Bernoulli) or means (Gaussian)
};

inline GibbsStepResult gibbs_step(const RbmParams& params, const std::vector<double>& v,
                                  Rng& rng) {
    GibbsStepResult r;
    r.h_probs = hidden_conditional(params, v);
    r.h_sample.resize(params.hidden_count);
    for (std::size_t j = 0; j < params.hidden_count; ++j)
        r.h_sample[j] = rng.bernoulli(r.h_probs[j]) ? 1 : 0;
    r.v_next_probs = visible_conditional(params, r.h_sample);
    r.v_next.resize(params.visible_count);
    if (params.visible_kind == UnitKind::Bernoulli) {
        for (std::size_t i = 0; i < params.visible_count; ++i)
            r.v_next[i] = rng.bernoulli(r.v_next_probs[i]) ? 1.0 : 0.0;
    } else {
        r.v_next = r.v_next_probs;  // noise-free conditional mean
    }
    return r;
}

/// Visible sides this small get exact final-step smoothing in
/// cd_expectations; larger models use the classic probability statistics.
constexpr std::size_t kCdSmoothingLimit = 12;

/// CD-k estimate of the model expectations. Each batch row seeds its own
/// chain and runs k true Gibbs steps (binary hidden and visible draws for
/// Bernoulli; Gaussian layers use noise-free conditional means), so the
/// chain's law converges to the model distribution as k grows. The final
/// step accumulates probabilities, never draws:
///   - Bernoulli with visible_count <= kCdSmoothingLimit: the statistics are
///     the exact conditional expectations given the chain's last hidden
///     state (the visible conditional is enumerated), which keeps the
///     estimator's noise at oracle-comparison levels;
///   - otherwise: the usual smoothed final step, v = P(v|h_last) and hidden
///     probabilities evaluated at those reconstruction values.
/// Rows use derived seeds, so the result is independent of traversal order.
inline ExpectationEstimate cd_expectations(const RbmParams& params, const Matrix& batch,
                                           std::size_t k, std::uint64_t seed) {
    if (batch.rows() == 0) throw Error("cd_expectations: empty batch");
    if (batch.cols() != params.visible_count)
        throw DimensionError("batch has " + std::to_string(batch.cols()) +
                             " columns, expected visible_count " +
                             std::to_string(params.visible_count));
    if (k < 1) throw Error("cd_expectations: k must be >= 1");

    const std::size_t rows = batch.rows();
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    const bool gaussian = params.visible_kind == UnitKind::Gaussian;
    const bool enumerate_final = !gaussian && m <= kCdSmoothingLimit;

    ExpectationEstimate est;
    est.pair_expectation = Matrix(m, n);
    est.visible_expectation.assign(m, 0.0);
    est.hidden_expectation.assign(n, 0.0);
    est.sample_count = rows;

    std::vector<double> v(m), vp(m), logits(n);
    std::vector<std::uint8_t> h(n);
    for (std::size_t r = 0; r < rows; ++r) {
        Rng rng(derive_seed(seed, r));
        for (std::size_t i = 0; i < m; ++i) v[i] = batch(r, i);
        for (std::size_t step = 0; step < k; ++step) {
            for (std::size_t j = 0; j < n; ++j) logits[j] = params.hidden_bias[j];
            for (std::size_t i = 0; i < m; ++i) {
                const double vi = gaussian ? v[i] / params.visible_std[i] : v[i];
                if (vi == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) logits[j] += params.weights(i, j) * vi;
            }
            for (std::size_t j = 0; j < n; ++j)
                h[j] = rng.bernoulli(sigmoid(logits[j])) ? 1 : 0;
            for (std::size_t i = 0; i < m; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    if (h[j]) acc += params.weights(i, j);
                if (gaussian)
                    v[i] = params.visible_bias[i] + params.visible_std[i] * acc;
                else
                    v[i] = rng.bernoulli(sigmoid(params.visible_bias[i] + acc)) ? 1.0 : 0.0;
            }
        }
        // Reconstruction probabilities (Bernoulli) or means (Gaussian) given
        // the chain's final hidden state.
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (h[j]) acc += params.weights(i, j);
            vp[i] = gaussian ? params.visible_bias[i] + params.visible_std[i] * acc
                             : sigmoid(params.visible_bias[i] + acc);
            est.visible_expectation[i] += vp[i];
        }
        if (enumerate_final) {
            // Exact expectations of sigma_j(v) and v_i sigma_j(v) over the
            // product distribution v | h_last.
            for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
                double weight = 1.0;
                for (std::size_t i = 0; i < m; ++i)
                    weight *= ((mask >> i) & 1) ? vp[i] : 1.0 - vp[i];
                if (weight == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    double logit = params.hidden_bias[j];
                    for (std::size_t i = 0; i < m; ++i)
                        if ((mask >> i) & 1) logit += params.weights(i, j);
                    const double sj = weight * sigmoid(logit);
                    est.hidden_expectation[j] += sj;
                    for (std::size_t i = 0; i < m; ++i)
                        if ((mask >> i) & 1) est.pair_expectation(i, j) += sj;
                }
            }
        } else {
            for (std::size_t j = 0; j < n; ++j) logits[j] = params.hidden_bias[j];
            for (std::size_t i = 0; i < m; ++i) {
                const double vi = gaussian ? vp[i] / params.visible_std[i] : vp[i];
                if (vi == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) logits[j] += params.weights(i, j) * vi;
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double pj = sigmoid(logits[j]);
                est.hidden_expectation[j] += pj;
                for (std::size_t i = 0; i < m; ++i)
                    est.pair_expectation(i, j) += vp[i] * pj;
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(rows);
    for (double& x : est.visible_expectation) x *= inv;
    for (double& x : est.hidden_expectation) x *= inv;
    for (double& x : est.pair_expectation.values()) x *= inv;
    return est;
}

/// Data-side (clamped) expectations: v fixed to each batch row, hidden units
/// summed out analytically through their conditional probabilities.
inline ExpectationEstimate clamped_expectations(const RbmParams& params, const Matrix& batch) {
    if (batch.rows() == 0) throw Error("clamped_expectations: empty batch");
    if (batch.cols() != params.visible_count)
        throw DimensionError("batch has " + std::to_string(batch.cols()) +
                             " columns, expected visible_count " +
                             std::to_string(params.visible_count));
    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    ExpectationEstimate est;
    est.pair_expectation = Matrix(m, n);
    est.visible_expectation.assign(m, 0.0);
    est.hidden_expectation.assign(n, 0.0);
    est.sample_count = batch.rows();

    std::vector<double> v(m);
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        for (std::size_t i = 0; i < m; ++i) v[i] = batch(r, i);
        const std::vector<double> p = hidden_conditional(params, v);
        for (std::size_t i = 0; i < m; ++i) {
            est.visible_expectation[i] += v[i];
            if (v[i] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) est.pair_expectation(i, j) += v[i] * p[j];
        }
        for (std::size_t j = 0; j < n; ++j) est.hidden_expectation[j] += p[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.rows());
    for (double& x : est.visible_expectation) x *= inv;
    for (double& x : est.hidden_expectation) x *= inv;
    for (double& x : est.pair_expectation.values()) x *= inv;
    return est;
}

/// Annealing sampler emulating a quantum device read: the control parameters
/// are the RBM parameters times scaling_factor, and each read ends near the
/// Boltzmann distribution at beta_eff. Reads are seeded independently
/// (derive_seed(rng_seed, read)), so any execution order gives identical
/// output.
inline std::vector<JointState> anneal_sample(const RbmParams& params,
                                             const AnnealConfig& config) {
    detail::check_bernoulli(params, "anneal sampling");
    config.validate();
    params.validate();

    const std::size_t m = params.visible_count;
    const std::size_t n = params.hidden_count;
    const double s = config.scaling_factor;

    // Geometric ramp beta_start -> beta_eff, then a hold at beta_eff.
    std::vector<double> betas(config.sweeps_per_read + config.hold_sweeps);
    const double ratio = config.beta_eff / config.beta_start;
    for (std::size_t t = 0; t < config.sweeps_per_read; ++t) {
        const double frac = config.sweeps_per_read == 1
                                ? 1.0
                                : static_cast<double>(t) /
                                      static_cast<double>(config.sweeps_per_read - 1);
        betas[t] = config.beta_start * std::pow(ratio, frac);
    }
    for (std::size_t t = 0; t < config.hold_sweeps; ++t)
        betas[config.sweeps_per_read + t] = config.beta_eff;

    std::vector<JointState> reads(config.reads);
    std::vector<std::uint8_t> v(m), h(n);
    for (std::size_t read = 0; read < config.reads; ++read) {
        Rng rng(derive_seed(config.rng_seed, read));
        for (std::size_t i = 0; i < m; ++i) v[i] = rng.bernoulli(0.5) ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) h[j] = rng.bernoulli(0.5) ? 1 : 0;
        for (const double beta : betas) {
            const double bs = beta * s;
            for (std::size_t j = 0; j < n; ++j) {
                double logit = params.hidden_bias[j];
                for (std::size_t i = 0; i < m; ++i)
                    if (v[i]) logit += params.weights(i, j);
                h[j] = rng.bernoulli(sigmoid(bs * logit)) ? 1 : 0;
            }
            for (std::size_t i = 0; i < m; ++i) {
                double logit = params.visible_bias[i];
                for (std::size_t j = 0; j < n; ++j)
                    if (h[j]) logit += params.weights(i, j);
                v[i] = rng.bernoulli(sigmoid(bs * logit)) ? 1 : 0;
            }
        }
        JointState& state = reads[read];
        state.visible.resize(m);
        state.hidden.assign(h.begin(), h.end());
        for (std::size_t i = 0; i < m; ++i) state.visible[i] = v[i] ? 1.0 : 0.0;
    }
    return reads;
}

/// Plain sample averages of <v_i h_j>, <v_i>, <h_j> over a set of reads.
inline ExpectationEstimate expectations_from_samples(const std::vector<JointState>& samples) {
    if (samples.empty()) throw Error("expectations_from_samples: empty sample list");
    const std::size_t m = samples.front().visible.size();
    const std::size_t n = samples.front().hidden.size();
    ExpectationEstimate est;
    est.pair_expectation = Matrix(m, n);
    est.visible_expectation.assign(m, 0.0);
    est.hidden_expectation.assign(n, 0.0);
    est.sample_count = samples.size();
    for (const JointState& s : samples) {
        if (s.visible.size() != m)
            throw DimensionError("sample visible length " + std::to_string(s.visible.size()) +
                                 " does not match first sample's " + std::to_string(m));
        if (s.hidden.size() != n)
            throw DimensionError("sample hidden length " + std::to_string(s.hidden.size()) +
                                 " does not match first sample's " + std::to_string(n));
        for (std::size_t i = 0; i < m; ++i) {
            est.visible_expectation[i] += s.visible[i];
            if (s.visible[i] == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                if (s.hidden[j]) est.pair_expectation(i, j) += s.visible[i];
        }
        for (std::size_t j = 0; j < n; ++j)
            if (s.hidden[j]) est.hidden_expectation[j] += 1.0;
    }
    const double inv = 1.0 / static_cast<double>(samples.size());
    for (double& x : est.visible_expectation) x *= inv;
    for (double& x : est.hidden_expectation) x *= inv;
    for (double& x : est.pair_expectation.values()) x *= inv;
    return est;
}

// --- sample wire format -----------------------------------------------------
// Header `samples <visible_count> <hidden_count>`, then one read per line:
// visible bits, ` | `, hidden bits. Text so externally produced reads can be
// diffed and hand-edited.

inline void export_samples(std::ostream& out, const std::vector<JointState>& samples,
                           std::size_t visible_count, std::size_t hidden_count) {
    out << "samples " << visible_count << ' ' << hidden_count << '\n';
    for (const JointState& s : samples) {
        if (s.visible.size() != visible_count || s.hidden.size() != hidden_count)
            throw DimensionError("sample dimensions do not match declared header");
        for (std::size_t i = 0; i < visible_count; ++i) {
            if (i) out << ' ';
            out << (s.visible[i] != 0.0 ? '1' : '0');
        }
        out << " |";
        for (std::size_t j = 0; j < hidden_count; ++j) out << ' ' << (s.hidden[j] ? '1' : '0');
        out << '\n';
    }
}

inline void export_samples(const std::string& path, const std::vector<JointState>& samples,
                           std::size_t visible_count, std::size_t hidden_count) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    export_samples(out, samples, visible_count, hidden_count);
}

inline std::vector<JointState> import_external_samples(std::istream& in,
                                                       const std::string& name) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(name + ": empty file");
    std::istringstream header(line);
    std::string tag;
    std::size_t m = 0, n = 0;
    if (!(header >> tag >> m >> n) || tag != "samples")
        throw ParseError(name + ": line 1: expected header `samples <visible> <hidden>`");

    std::vector<JointState> samples;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        JointState s;
        s.visible.reserve(m);
        s.hidden.reserve(n);
        std::istringstream row(line);
        std::string token;
        bool seen_bar = false;
        while (row >> token) {
            if (token == "|") {
                if (seen_bar)
                    throw ParseError(name + ": line " + std::to_string(line_no) +
                                     ": duplicate separator");
                seen_bar = true;
            } else if (token == "0" || token == "1") {
                if (seen_bar)
                    s.hidden.push_back(token == "1" ? 1 : 0);
                else
                    s.visible.push_back(token == "1" ? 1.0 : 0.0);
            } else {
                throw ParseError(name + ": line " + std::to_string(line_no) +
                                 ": unexpected token `" + token + "`");
            }
        }
        if (!seen_bar)
            throw ParseError(name + ": line " + std::to_string(line_no) +
                             ": missing `|` separator");
        if (s.visible.size() != m)
            throw ParseError(name + ": line " + std::to_string(line_no) + ": " +
                             std::to_string(s.visible.size()) + " visible bits, header declares " +
                             std::to_string(m));
        if (s.hidden.size() != n)
            throw ParseError(name + ": line " + std::to_string(line_no) + ": " +
                             std::to_string(s.hidden.size()) + " hidden bits, header declares " +
                             std::to_string(n));
        samples.push_back(std::move(s));
    }
    if (samples.empty()) throw ParseError(name + ": no samples");
    return samples;
}

inline std::vector<JointState> import_external_samples(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return import_external_samples(in, path);
}

// --- backend selection -------------------------------------------------------

enum class SamplerKind { Exact, Cd, Anneal, File };

inline const char* sampler_kind_name(SamplerKind kind) {
    switch (kind) {
        case SamplerKind::Exact: return "exact";
        case SamplerKind::Cd: return "cd";
        case SamplerKind::Anneal: return "anneal";
        case SamplerKind::File: return "file";
    }
    return "?";
}

/// Which backend supplies model expectations, plus its knobs. `anneal.rng_seed`
/// is ignored here; callers pass a per-update seed to model_expectations.
struct SamplerConfig {
    SamplerKind kind = SamplerKind::Cd;
    std::size_t cd_k = 1;
    AnnealConfig anneal;
    std::string sample_file;  // File backend
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    std::shared_ptr<const std::vector<JointState>> file_samples;

    /// Loads the File backend's samples once so repeated updates reuse them.
    SamplerConfig with_loaded_samples() const {
        SamplerConfig copy = *this;
        if (kind == SamplerKind::File && !copy.file_samples)
            copy.file_samples = std::make_shared<const std::vector<JointState>>(
                import_external_samples(sample_file));
        return copy;
    }
};

/// Model-side expectations via the configured backend. `batch` is the data
/// batch the surrounding update works on; only the CD backend consumes it.
inline ExpectationEstimate model_expectations(const RbmParams& params, const Matrix& batch,
                                              const SamplerConfig& config, std::uint64_t seed) {
    switch (config.kind) {
        case SamplerKind::Exact:
            return exact_expectations(params, config.enumeration_cap);
        case SamplerKind::Cd:
            return cd_expectations(params, batch, config.cd_k, seed);
        case SamplerKind::Anneal: {
            AnnealConfig anneal = config.anneal;
            anneal.rng_seed = seed;
            return expectations_from_samples(anneal_sample(params, anneal));
        }
        case SamplerKind::File: {
            std::shared_ptr<const std::vector<JointState>> samples = config.file_samples;
            if (!samples)
                samples = std::make_shared<const std::vector<JointState>>(
                    import_external_samples(config.sample_file));
            if (samples->empty()) throw Error("file sampler: no samples");
            if (samples->front().visible.size() != params.visible_count)
                throw DimensionError("file sampler: sample visible length " +
                                     std::to_string(samples->front().visible.size()) +
                                     " does not match visible_count " +
                                     std::to_string(params.visible_count));
            if (samples->front().hidden.size() != params.hidden_count)
                throw DimensionError("file sampler: sample hidden length " +
                                     std::to_string(samples->front().hidden.size()) +
                                     " does not match hidden_count " +
                                     std::to_string(params.hidden_count));
            return expectations_from_samples(*samples);
        }
    }
    throw Error("unknown sampler kind");
}

}  // namespace qdiag
