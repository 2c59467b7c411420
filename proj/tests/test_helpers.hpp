#pragma once

#include <cstdint>
#include <vector>

#include "qdiag/matrix.hpp"
#include "qdiag/rbm.hpp"
#include "qdiag/rng.hpp"
#include "qdiag/samplers.hpp"

// Brute-force oracles for the library's enumeration paths. These deliberately
// use the naive sum over all 2^(m+n) joint states, not the analytic one-layer
// marginalization the implementation uses.

namespace testutil {

inline qdiag::JointState nth_state(const qdiag::RbmParams& p, std::uint64_t code) {
    qdiag::JointState s;
    s.visible.resize(p.visible_count);
    s.hidden.resize(p.hidden_count);
    for (std::size_t i = 0; i < p.visible_count; ++i) s.visible[i] = (code >> i) & 1 ? 1.0 : 0.0;
    for (std::size_t j = 0; j < p.hidden_count; ++j)
        s.hidden[j] = (code >> (p.visible_count + j)) & 1;
    return s;
}

inline std::uint64_t state_count(const qdiag::RbmParams& p) {
    return std::uint64_t{1} << (p.visible_count + p.hidden_count);
}

inline double brute_force_partition(const qdiag::RbmParams& p) {
    double z = 0.0;
    for (std::uint64_t code = 0; code < state_count(p); ++code)
        z += std::exp(-qdiag::energy(p, nth_state(p, code)));
    return z;
}

inline qdiag::ExpectationEstimate brute_force_expectations(const qdiag::RbmParams& p) {
    const double z = brute_force_partition(p);
    qdiag::ExpectationEstimate est;
    est.pair_expectation = qdiag::Matrix(p.visible_count, p.hidden_count);
    est.visible_expectation.assign(p.visible_count, 0.0);
    est.hidden_expectation.assign(p.hidden_count, 0.0);
    for (std::uint64_t code = 0; code < state_count(p); ++code) {
        const qdiag::JointState s = nth_state(p, code);
        const double w = std::exp(-qdiag::energy(p, s)) / z;
        for (std::size_t i = 0; i < p.visible_count; ++i) {
            est.visible_expectation[i] += w * s.visible[i];
            for (std::size_t j = 0; j < p.hidden_count; ++j)
                if (s.hidden[j]) est.pair_expectation(i, j) += w * s.visible[i];
        }
        for (std::size_t j = 0; j < p.hidden_count; ++j)
            if (s.hidden[j]) est.hidden_expectation[j] += w;
    }
    return est;
}

/// Random Bernoulli RBM with weights and biases uniform in [-scale, scale].
inline qdiag::RbmParams random_rbm(std::size_t m, std::size_t n, std::uint64_t seed,
                                   double scale = 1.0) {
    qdiag::RbmParams p = qdiag::RbmParams::zeros(m, n);
    qdiag::Rng rng(seed);
    for (double& w : p.weights.values()) w = scale * (2.0 * rng.uniform() - 1.0);
    for (double& b : p.visible_bias) b = scale * (2.0 * rng.uniform() - 1.0);
    for (double& c : p.hidden_bias) c = scale * (2.0 * rng.uniform() - 1.0);
    return p;
}

inline double linf_gap(const qdiag::ExpectationEstimate& a, const qdiag::ExpectationEstimate& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < a.visible_expectation.size(); ++i)
        gap = std::max(gap, std::abs(a.visible_expectation[i] - b.visible_expectation[i]));
    for (std::size_t j = 0; j < a.hidden_expectation.size(); ++j)
        gap = std::max(gap, std::abs(a.hidden_expectation[j] - b.hidden_expectation[j]));
    for (std::size_t i = 0; i < a.pair_expectation.rows(); ++i)
        for (std::size_t j = 0; j < a.pair_expectation.cols(); ++j)
            gap = std::max(gap,
                           std::abs(a.pair_expectation(i, j) - b.pair_expectation(i, j)));
    return gap;
}

/// The strong-weight two-visible RBM used by the sampler-bias checks: both
/// visible units couple to one hidden unit with weight `w`, hidden bias -w.
inline qdiag::RbmParams crafted_strong_rbm(double w) {
    qdiag::RbmParams p = qdiag::RbmParams::zeros(2, 1);
    p.weights(0, 0) = w;
    p.weights(1, 0) = w;
    p.hidden_bias[0] = -w;
    return p;
}

/// Batch of corner patterns (0,0)/(1,1) alternating.
inline qdiag::Matrix corner_batch(std::size_t rows) {
    qdiag::Matrix batch(rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
        const double bit = (r % 2) ? 1.0 : 0.0;
        batch(r, 0) = bit;
        batch(r, 1) = bit;
    }
    return batch;
}

}  // namespace testutil
