#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "qdiag/classifier.hpp"
#include "qdiag/samplers.hpp"
#include "qdiag/training.hpp"

namespace qdiag {

/// Exact detection counts. Percentages are derived views; the integer counts
/// are the primary record so rational identities (FDR + missed rate = 100)
/// hold without rounding.
struct DetectionCounts {
    std::size_t faulty_total = 0;
    std::size_t normal_total = 0;
    std::size_t detected_faulty = 0;  // p of the FDR definition
    std::size_t false_alarms = 0;     // q of the FAR definition

    /// Absent (not 0) when no faulty samples exist.
    std::optional<double> fdr_percent() const {
        if (faulty_total == 0) return std::nullopt;
        return 100.0 * static_cast<double>(detected_faulty) /
               static_cast<double>(faulty_total);
    }

    /// Absent when no normal samples exist.
    std::optional<double> far_percent() const {
        if (normal_total == 0) return std::nullopt;
        return 100.0 * static_cast<double>(false_alarms) / static_cast<double>(normal_total);
    }
};

/// FDR/FAR counting for binary detection. `truth` entries are 0 (normal) or
/// nonzero (faulty); `predicted` is the detector's state output.
inline DetectionCounts detection_metrics(const std::vector<std::uint8_t>& predicted,
                                         const std::vector<std::uint8_t>& truth) {
    if (predicted.size() != truth.size())
        throw DimensionError("predicted length " + std::to_string(predicted.size()) +
                             " does not match truth length " + std::to_string(truth.size()));
    DetectionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) {
            ++c.faulty_total;
            if (predicted[i]) ++c.detected_faulty;
        } else {
            ++c.normal_total;
            if (predicted[i]) ++c.false_alarms;
        }
    }
    return c;
}

/// Multi-class identification metrics: confusion matrix, per-class FDR
/// (diagonal over row total) and per-fault false alarm rate (normal samples
/// classified as that fault).
struct IdentificationResult {
    std::size_t class_count = 0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
    std::vector<std::size_t> row_totals;

    std::optional<double> class_fdr_percent(std::size_t cls) const {
        if (row_totals[cls] == 0) return std::nullopt;
        return 100.0 * static_cast<double>(confusion[cls][cls]) /
               static_cast<double>(row_totals[cls]);
    }

    /// FAR of fault class f: percent of true-normal samples predicted as f.
    std::optional<double> fault_far_percent(std::size_t cls) const {
        if (cls == 0 || row_totals[0] == 0) return std::nullopt;
        return 100.0 * static_cast<double>(confusion[0][cls]) /
               static_cast<double>(row_totals[0]);
    }
};

inline IdentificationResult identification_metrics(const std::vector<int>& predicted,
                                                   const std::vector<int>& truth,
                                                   std::size_t class_count = 21) {
    if (predicted.size() != truth.size())
        throw DimensionError("predicted length " + std::to_string(predicted.size()) +
                             " does not match truth length " + std::to_string(truth.size()));
    IdentificationResult r;
    r.class_count = class_count;
    r.confusion.assign(class_count, std::vector<std::size_t>(class_count, 0));
    r.row_totals.assign(class_count, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i];
        const int p = predicted[i];
        if (t < 0 || static_cast<std::size_t>(t) >= class_count)
            throw Error("true class " + std::to_string(t) + " out of range [0, " +
                        std::to_string(class_count) + ")");
        if (p < 0 || static_cast<std::size_t>(p) >= class_count)
            throw Error("predicted class " + std::to_string(p) + " out of range [0, " +
                        std::to_string(class_count) + ")");
        ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
        ++r.row_totals[static_cast<std::size_t>(t)];
    }
    return r;
}

/// Histogram of read energies for one anneal configuration. Energies are
/// evaluated under the unscaled parameters; only the sampler sees the scaled
/// control parameters.
struct EnergyHistogram {
    double scaling_factor = 1.0;
    std::size_t reads = 0;
    double bin_lo = 0.0;
    double bin_width = 1.0;
    std::vector<std::size_t> counts;
    double mean_energy = 0.0;
};

/// Draws reads per config and bins their energies on a shared fixed-width
/// grid so the histograms are directly comparable.
inline std::vector<EnergyHistogram> energy_histogram(const RbmParams& params,
                                                     const std::vector<AnnealConfig>& configs,
                                                     std::size_t bin_count = 40) {
    if (configs.empty()) throw Error("energy_histogram: no configurations");
    if (bin_count < 1) throw Error("energy_histogram: bin_count must be >= 1");
    detail::check_bernoulli(params, "energy histogram");

    std::vector<std::vector<double>> energies(configs.size());
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const std::vector<JointState> reads = anneal_sample(params, configs[c]);
        energies[c].reserve(reads.size());
        for (const JointState& state : reads) {
            const double e = energy(params, state);
            energies[c].push_back(e);
            lo = std::min(lo, e);
            hi = std::max(hi, e);
        }
    }
    double width = (hi - lo) / static_cast<double>(bin_count);
    if (width <= 0.0) width = 1.0;  // all reads share one energy

    std::vector<EnergyHistogram> out(configs.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
        EnergyHistogram& h = out[c];
        h.scaling_factor = configs[c].scaling_factor;
        h.reads = energies[c].size();
        h.bin_lo = lo;
        h.bin_width = width;
        h.counts.assign(bin_count, 0);
        double sum = 0.0;
        for (double e : energies[c]) {
            sum += e;
            std::size_t bin = static_cast<std::size_t>((e - lo) / width);
            if (bin >= bin_count) bin = bin_count - 1;  // right edge
            ++h.counts[bin];
        }
        h.mean_energy = sum / static_cast<double>(h.reads);
    }
    return out;
}

/// One sampler's training trace in a side-by-side comparison.
struct SamplerRun {
    std::string label;
    LossCurve curve;
    std::optional<double> linf_bias;         // vs exact expectations at the shared init
    std::optional<std::size_t> epochs_to_target;
};

struct SamplerComparison {
    std::vector<SamplerRun> runs;
    std::optional<double> target_loss;  // reference run's loss at target_epoch
    std::size_t target_epoch = 0;
};

namespace detail {

inline double linf_gap(const ExpectationEstimate& a, const ExpectationEstimate& b) {
    double gap = 0.0;
    for (std::size_t i = 0; i < a.visible_expectation.size(); ++i)
        gap = std::max(gap, std::abs(a.visible_expectation[i] - b.visible_expectation[i]));
    for (std::size_t j = 0; j < a.hidden_expectation.size(); ++j)
        gap = std::max(gap, std::abs(a.hidden_expectation[j] - b.hidden_expectation[j]));
    for (std::size_t i = 0; i < a.pair_expectation.rows(); ++i)
        for (std::size_t j = 0; j < a.pair_expectation.cols(); ++j)
            gap = std::max(gap, std::abs(a.pair_expectation(i, j) - b.pair_expectation(i, j)));
    return gap;
}

}  // namespace detail

/// Trains the same RBM once per sampler from an identical starting point and
/// seed, and reports aligned loss curves, each sampler's expectation bias
/// against the exact oracle at the shared init (when the model is small
/// enough to enumerate), and the first epoch at which each run reaches the
/// reference (exact-sampler) run's loss at `target_epoch`.
inline SamplerComparison sampler_comparison(const RbmParams& init, const Matrix& data,
                                            const std::vector<SamplerConfig>& samplers,
                                            const TrainingConfig& base,
                                            std::size_t target_epoch = 50) {
    if (samplers.empty()) throw Error("sampler_comparison: no samplers given");
    SamplerComparison out;
    out.target_epoch = std::min<std::size_t>(target_epoch, base.epochs);

    std::optional<ExpectationEstimate> oracle;
    if (init.visible_kind == UnitKind::Bernoulli &&
        init.total_units() <= kDefaultEnumerationCap)
        oracle = exact_expectations(init);

    for (const SamplerConfig& sampler : samplers) {
        TrainingConfig cfg = base;
        cfg.sampler = sampler;
        SamplerRun run;
        run.label = sampler_kind_name(sampler.kind);
        run.curve = train_rbm(init, data, cfg).curve;
        if (oracle) {
            const ExpectationEstimate est =
                model_expectations(init, data, sampler.with_loaded_samples(), base.rng_seed);
            run.linf_bias = detail::linf_gap(est, *oracle);
        }
        out.runs.push_back(std::move(run));
    }

    for (const SamplerRun& run : out.runs) {
        if (run.label == "exact" && out.target_epoch >= 1) {
            out.target_loss = run.curve.points[out.target_epoch - 1].second;
            break;
        }
    }
    if (out.target_loss) {
        for (SamplerRun& run : out.runs) {
            for (const auto& [epoch, loss] : run.curve.points) {
                if (loss <= *out.target_loss) {
                    run.epochs_to_target = epoch;
                    break;
                }
            }
        }
    }
    return out;
}

}  // namespace qdiag
