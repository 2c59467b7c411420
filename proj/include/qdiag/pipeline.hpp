#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qdiag/classifier.hpp"
#include "qdiag/data.hpp"
#include "qdiag/eval.hpp"
#include "qdiag/io.hpp"
#include "qdiag/synthgen.hpp"
#include "qdiag/training.hpp"

namespace qdiag {

/// Windowed, normalized train/test samples ready for model training. The
/// normalizer is fitted on the training series only and reused everywhere.
struct PipelineData {
    Matrix train_samples;
    std::vector<int> train_labels;
    Matrix test_samples;
    std::vector<int> test_labels;
    Normalizer normalizer;
    std::size_t window_length = 0;
    std::size_t source_dims = 0;
    std::string dataset_name;
};

namespace detail {

inline void append_windows(const WindowedDataset& wd, Matrix& samples,
                           std::vector<int>& labels) {
    if (samples.empty()) {
        samples = wd.samples;
        labels = wd.labels;
        return;
    }
    if (samples.cols() != wd.samples.cols())
        throw DimensionError("window widths disagree across series: " +
                             std::to_string(samples.cols()) + " vs " +
                             std::to_string(wd.samples.cols()));
    Matrix merged(samples.rows() + wd.samples.rows(), samples.cols());
    for (std::size_t r = 0; r < samples.rows(); ++r)
        for (std::size_t c = 0; c < samples.cols(); ++c) merged(r, c) = samples(r, c);
    for (std::size_t r = 0; r < wd.samples.rows(); ++r)
        for (std::size_t c = 0; c < samples.cols(); ++c)
            merged(samples.rows() + r, c) = wd.samples(r, c);
    samples = std::move(merged);
    labels.insert(labels.end(), wd.labels.begin(), wd.labels.end());
}

inline RawSeries concat_series(const std::vector<SuiteMember>& suite) {
    std::size_t total = 0;
    for (const SuiteMember& m : suite) total += m.series.timesteps();
    RawSeries out;
    out.variable_names = suite.front().series.variable_names;
    out.sampling_interval = suite.front().series.sampling_interval;
    out.values = Matrix(total, suite.front().series.dims());
    out.labels.reserve(total);
    std::size_t row = 0;
    for (const SuiteMember& m : suite) {
        for (std::size_t r = 0; r < m.series.timesteps(); ++r, ++row)
            for (std::size_t c = 0; c < m.series.dims(); ++c)
                out.values(row, c) = m.series.values(r, c);
        out.labels.insert(out.labels.end(), m.series.labels.begin(), m.series.labels.end());
    }
    return out;
}

}  // namespace detail

/// Builds train/test samples from suites of series. When `test_suite` is
/// empty, each training series is split chronologically at `split_ratio`
/// before windowing, so no window straddles the boundary and no test row
/// touches the normalizer.
inline PipelineData prepare_pipeline_data(const std::vector<SuiteMember>& train_suite,
                                          const std::vector<SuiteMember>& test_suite,
                                          double split_ratio, std::size_t window_length,
                                          LabelRule rule = LabelRule::LastTimestep,
                                          const std::string& dataset_name = "") {
    if (train_suite.empty()) throw Error("pipeline: no training series");
    PipelineData data;
    data.window_length = window_length;
    data.source_dims = train_suite.front().series.dims();
    data.dataset_name = dataset_name;

    std::vector<SuiteMember> train_members = train_suite;
    std::vector<SuiteMember> test_members = test_suite;
    if (test_members.empty() && split_ratio > 0.0) {
        for (SuiteMember& member : train_members) {
            auto [train_part, test_part] = split_series(member.series, split_ratio);
            member.series = std::move(train_part);
            SuiteMember test_member = member;
            test_member.series = std::move(test_part);
            test_members.push_back(std::move(test_member));
        }
    }

    data.normalizer = fit_normalizer(detail::concat_series(train_members));
    for (const SuiteMember& member : train_members)
        detail::append_windows(window(apply_normalizer(data.normalizer, member.series),
                                      window_length, rule),
                               data.train_samples, data.train_labels);
    for (const SuiteMember& member : test_members)
        detail::append_windows(window(apply_normalizer(data.normalizer, member.series),
                                      window_length, rule),
                               data.test_samples, data.test_labels);
    return data;
}

/// Builds windowed samples from series using an already-fitted normalizer
/// (staged runs: the normalizer comes from the training stage's artifact).
inline void windows_with_normalizer(const std::vector<SuiteMember>& suite,
                                    const Normalizer& norm, std::size_t window_length,
                                    LabelRule rule, Matrix& samples,
                                    std::vector<int>& labels) {
    for (const SuiteMember& member : suite)
        detail::append_windows(
            window(apply_normalizer(norm, member.series), window_length, rule), samples,
            labels);
}

/// Full configuration of one detection pipeline run. The sampler choice
/// applies to Bernoulli layers; the Gaussian input layer always trains with
/// CD (its continuous state space admits neither enumeration nor annealing).
struct PipelineConfig {
    std::vector<std::size_t> hidden_sizes = {15, 8};
    std::size_t pretrain_epochs = 30;
    std::size_t finetune_epochs = 80;
    std::size_t batch_size = 64;
    double lr_gaussian = 0.001;
    double lr_bernoulli = 0.01;
    double momentum = 1.0;
    SamplerConfig sampler;
    double finetune_step_size = 0.001;
    double threshold = 0.5;
    bool freeze_dbn = false;
    bool forward_sampling = false;
    std::uint64_t seed = 0;
};

/// Detection-evaluation record: overall counts plus counts restricted to each
/// fault class, and enough metadata to reproduce the run.
struct EvalReport {
    DetectionCounts overall;
    std::vector<std::pair<int, DetectionCounts>> per_fault;
    std::string dataset_name;
    std::string model_fingerprint;
    std::uint64_t seed = 0;
};

inline EvalReport build_detection_report(const std::vector<std::uint8_t>& predicted,
                                         const std::vector<int>& truth) {
    std::vector<std::uint8_t> binary(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) binary[i] = truth[i] != 0 ? 1 : 0;
    EvalReport report;
    report.overall = detection_metrics(predicted, binary);
    std::set<int> fault_ids(truth.begin(), truth.end());
    fault_ids.erase(0);
    for (int f : fault_ids) {
        DetectionCounts counts;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] != f) continue;
            ++counts.faulty_total;
            if (predicted[i]) ++counts.detected_faulty;
        }
        report.per_fault.emplace_back(f, counts);
    }
    return report;
}

struct DetectionOutcome {
    DiagnosisModel model;
    std::vector<LossCurve> pretrain_normal_curves;
    std::vector<LossCurve> pretrain_fault_curves;
    LossCurve finetune_curve;
    DiagnosisResult predictions;  // on the test samples
    EvalReport report;
};

namespace detail {

inline Matrix select_rows(const Matrix& samples, const std::vector<int>& labels,
                          bool (*keep)(int)) {
    std::size_t count = 0;
    for (int l : labels)
        if (keep(l)) ++count;
    Matrix out(count, samples.cols());
    std::size_t row = 0;
    for (std::size_t r = 0; r < samples.rows(); ++r) {
        if (!keep(labels[r])) continue;
        for (std::size_t c = 0; c < samples.cols(); ++c) out(row, c) = samples(r, c);
        ++row;
    }
    return out;
}

inline std::vector<TrainingConfig> layer_configs(const PipelineConfig& cfg,
                                                 std::uint64_t branch_seed) {
    std::vector<TrainingConfig> configs;
    for (std::size_t l = 0; l < cfg.hidden_sizes.size(); ++l) {
        TrainingConfig layer;
        layer.learning_rate = l == 0 ? cfg.lr_gaussian : cfg.lr_bernoulli;
        layer.momentum = cfg.momentum;
        layer.epochs = cfg.pretrain_epochs;
        layer.batch_size = cfg.batch_size;
        layer.rng_seed = derive_seed(branch_seed, l);
        layer.forward_sampling = cfg.forward_sampling;
        if (l == 0) {
            layer.sampler.kind = SamplerKind::Cd;
            layer.sampler.cd_k = cfg.sampler.kind == SamplerKind::Cd ? cfg.sampler.cd_k : 1;
        } else {
            layer.sampler = cfg.sampler;
        }
        configs.push_back(std::move(layer));
    }
    return configs;
}

inline TrainedDbn train_branch(const PipelineData& data, const PipelineConfig& cfg,
                               const Matrix& rows, std::uint64_t branch_seed) {
    DbnSpec spec;
    spec.input_dim = data.window_length * data.source_dims;
    spec.input_kind = UnitKind::Gaussian;
    spec.hidden_sizes = cfg.hidden_sizes;
    return train_dbn(spec, rows, layer_configs(cfg, branch_seed));
}

}  // namespace detail

/// The two-step detection pipeline: generative training of DBN-N on normal
/// windows and DBN-F on the union of faulty windows, then discriminative
/// fine-tuning of the concatenated network, then evaluation on the test set.
inline DetectionOutcome run_detection_pipeline(const PipelineData& data,
                                               const PipelineConfig& cfg) {
    const Matrix normal_rows =
        detail::select_rows(data.train_samples, data.train_labels, [](int l) { return l == 0; });
    const Matrix fault_rows =
        detail::select_rows(data.train_samples, data.train_labels, [](int l) { return l != 0; });
    if (normal_rows.rows() == 0) throw Error("pipeline: no normal training windows");
    if (fault_rows.rows() == 0) throw Error("pipeline: no faulty training windows");

    DetectionOutcome out;
    TrainedDbn dbn_n = detail::train_branch(data, cfg, normal_rows, derive_seed(cfg.seed, 1));
    TrainedDbn dbn_f = detail::train_branch(data, cfg, fault_rows, derive_seed(cfg.seed, 2));
    out.pretrain_normal_curves = std::move(dbn_n.curves);
    out.pretrain_fault_curves = std::move(dbn_f.curves);

    DiagnosisModel model;
    model.dbn_normal = std::move(dbn_n.model);
    model.dbn_fault = std::move(dbn_f.model);
    const std::size_t k = model.dbn_normal.output_dim();
    model.head = ClassifierParams::random_init(2 * k, 2, derive_seed(cfg.seed, 3));
    model.threshold = cfg.threshold;

    std::vector<int> binary_labels(data.train_labels.size());
    for (std::size_t i = 0; i < binary_labels.size(); ++i)
        binary_labels[i] = data.train_labels[i] != 0 ? 1 : 0;
    FineTuneConfig ft;
    ft.step_size = cfg.finetune_step_size;
    ft.epochs = cfg.finetune_epochs;
    ft.batch_size = cfg.batch_size;
    ft.rng_seed = derive_seed(cfg.seed, 4);
    ft.freeze_dbn = cfg.freeze_dbn;
    FineTuneResult tuned =
        train_discriminative(model, data.train_samples, binary_labels, ft);
    out.model = std::move(tuned.model);
    out.finetune_curve = std::move(tuned.curve);

    out.predictions = diagnose(out.model, data.test_samples);
    out.report = build_detection_report(out.predictions.states, data.test_labels);
    out.report.dataset_name = data.dataset_name;
    out.report.model_fingerprint = model_hash(out.model);
    out.report.seed = cfg.seed;
    return out;
}

// --- architecture grid search ---------------------------------------------------

struct GridCell {
    std::size_t hidden1 = 0;
    std::size_t hidden2 = 0;
    int fault_id = 0;
    std::optional<double> fdr;  // absent when the cell's run failed (--keep-going)
};

struct HeatmapGrid {
    std::vector<std::size_t> axis1;
    std::vector<std::size_t> axis2;
    std::vector<GridCell> cells;
};

/// Trains a full pipeline per (h1, h2) and records the per-fault test FDR.
/// Every cell's seed is derived from (base seed, h1, h2), so results do not
/// depend on grid iteration order. With keep_going a failed cell is recorded
/// as absent; otherwise the failure propagates.
inline HeatmapGrid grid_search(const PipelineData& data, const std::vector<std::size_t>& axis1,
                               const std::vector<std::size_t>& axis2,
                               const PipelineConfig& base, bool keep_going = false) {
    if (axis1.empty() || axis2.empty()) throw Error("grid_search: empty axis");
    std::set<int> fault_ids;
    for (int l : data.test_labels)
        if (l != 0) fault_ids.insert(l);

    HeatmapGrid grid;
    grid.axis1 = axis1;
    grid.axis2 = axis2;
    for (std::size_t h1 : axis1) {
        for (std::size_t h2 : axis2) {
            PipelineConfig cfg = base;
            cfg.hidden_sizes = {h1, h2};
            cfg.seed = derive_seed(derive_seed(base.seed, h1), h2);
            std::optional<EvalReport> report;
            try {
                report = run_detection_pipeline(data, cfg).report;
            } catch (const Error&) {
                if (!keep_going) throw;
            }
            for (int f : fault_ids) {
                GridCell cell;
                cell.hidden1 = h1;
                cell.hidden2 = h2;
                cell.fault_id = f;
                if (report)
                    for (const auto& [id, counts] : report->per_fault)
                        if (id == f) cell.fdr = counts.fdr_percent();
                grid.cells.push_back(cell);
            }
        }
    }
    return grid;
}

/// The generative stage alone: DBN-N on normal windows, DBN-F on the union of
/// faulty windows. Used by the staged command flow (pretrain / finetune /
/// detect share model files).
struct PretrainOutcome {
    TrainedDbn normal;
    TrainedDbn fault;
};

inline PretrainOutcome pretrain_branches(const PipelineData& data, const PipelineConfig& cfg) {
    const Matrix normal_rows =
        detail::select_rows(data.train_samples, data.train_labels, [](int l) { return l == 0; });
    const Matrix fault_rows =
        detail::select_rows(data.train_samples, data.train_labels, [](int l) { return l != 0; });
    if (normal_rows.rows() == 0) throw Error("pretrain: no normal training windows");
    if (fault_rows.rows() == 0) throw Error("pretrain: no faulty training windows");
    PretrainOutcome out;
    out.normal = detail::train_branch(data, cfg, normal_rows, derive_seed(cfg.seed, 1));
    out.fault = detail::train_branch(data, cfg, fault_rows, derive_seed(cfg.seed, 2));
    return out;
}

inline void write_detection_report_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "fault_id,fdr,far\n";
    for (const auto& [fault, counts] : report.per_fault)
        out << fault << ',' << render_optional(counts.fdr_percent()) << ','
            << render_optional(report.overall.far_percent()) << '\n';
}

// --- fault identification --------------------------------------------------------

struct IdentificationOutcome {
    std::vector<int> fault_ids;                    // class index f+1 <-> fault_ids[f]
    std::vector<DiagnosisModel> per_fault_models;  // aligned with fault_ids
    ClassifierParams global_head;
    LossCurve global_curve;
    std::vector<int> test_predictions;  // class indices
    IdentificationResult test_result;
};

/// Identification mode: DBN-N is trained once; each fault gets its own DBN-F
/// and local head; the per-fault state probabilities are merged into one
/// feature vector per sample and classified by the global soft-max head.
inline IdentificationOutcome run_identification_pipeline(const PipelineData& data,
                                                         const PipelineConfig& cfg,
                                                         std::size_t global_epochs = 200) {
    std::set<int> fault_set;
    for (int l : data.train_labels)
        if (l != 0) fault_set.insert(l);
    if (fault_set.empty()) throw Error("identification: no faulty training windows");

    IdentificationOutcome out;
    out.fault_ids.assign(fault_set.begin(), fault_set.end());

    const Matrix normal_rows =
        detail::select_rows(data.train_samples, data.train_labels, [](int l) { return l == 0; });
    if (normal_rows.rows() == 0) throw Error("identification: no normal training windows");
    TrainedDbn dbn_n = detail::train_branch(data, cfg, normal_rows, derive_seed(cfg.seed, 1));

    // One detector per fault, sharing DBN-N.
    for (std::size_t f = 0; f < out.fault_ids.size(); ++f) {
        const int fault_id = out.fault_ids[f];
        const std::uint64_t fault_seed =
            derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(fault_id));
        std::size_t count = 0;
        for (int l : data.train_labels)
            if (l == fault_id) ++count;
        Matrix fault_rows(count, data.train_samples.cols());
        std::size_t row = 0;
        for (std::size_t r = 0; r < data.train_samples.rows(); ++r) {
            if (data.train_labels[r] != fault_id) continue;
            for (std::size_t c = 0; c < data.train_samples.cols(); ++c)
                fault_rows(row, c) = data.train_samples(r, c);
            ++row;
        }
        TrainedDbn dbn_f = detail::train_branch(data, cfg, fault_rows, fault_seed);

        DiagnosisModel model;
        model.dbn_normal = dbn_n.model;
        model.dbn_fault = std::move(dbn_f.model);
        const std::size_t k = model.dbn_normal.output_dim();
        model.head = ClassifierParams::random_init(2 * k, 2, derive_seed(fault_seed, 1));
        model.threshold = cfg.threshold;

        // Fine-tune on this fault's binary task: normal vs fault f.
        std::size_t subset = 0;
        for (int l : data.train_labels)
            if (l == 0 || l == fault_id) ++subset;
        Matrix subset_rows(subset, data.train_samples.cols());
        std::vector<int> subset_labels(subset);
        row = 0;
        for (std::size_t r = 0; r < data.train_samples.rows(); ++r) {
            const int l = data.train_labels[r];
            if (l != 0 && l != fault_id) continue;
            for (std::size_t c = 0; c < data.train_samples.cols(); ++c)
                subset_rows(row, c) = data.train_samples(r, c);
            subset_labels[row] = l == 0 ? 0 : 1;
            ++row;
        }
        FineTuneConfig ft;
        ft.step_size = cfg.finetune_step_size;
        ft.epochs = cfg.finetune_epochs;
        ft.batch_size = cfg.batch_size;
        ft.rng_seed = derive_seed(fault_seed, 2);
        ft.freeze_dbn = cfg.freeze_dbn;
        out.per_fault_models.push_back(
            train_discriminative(model, subset_rows, subset_labels, ft).model);
    }

    auto merged_features = [&](const Matrix& samples) {
        Matrix features;
        for (const DiagnosisModel& model : out.per_fault_models) {
            const Matrix probs = diagnose(model, samples).probs;
            features = features.empty() ? probs : hconcat(features, probs);
        }
        return features;
    };
    const Matrix train_features = merged_features(data.train_samples);
    const Matrix test_features = merged_features(data.test_samples);

    auto to_class = [&](int label) {
        if (label == 0) return 0;
        const auto it = std::find(out.fault_ids.begin(), out.fault_ids.end(), label);
        if (it == out.fault_ids.end())
            throw Error("identification: label " + std::to_string(label) +
                        " absent from training faults");
        return static_cast<int>(it - out.fault_ids.begin()) + 1;
    };
    std::vector<int> train_classes(data.train_labels.size());
    for (std::size_t i = 0; i < train_classes.size(); ++i)
        train_classes[i] = to_class(data.train_labels[i]);
    std::vector<int> test_classes(data.test_labels.size());
    for (std::size_t i = 0; i < test_classes.size(); ++i)
        test_classes[i] = to_class(data.test_labels[i]);

    const std::size_t class_count = out.fault_ids.size() + 1;
    ClassifierParams head = ClassifierParams::random_init(
        train_features.cols(), class_count, derive_seed(cfg.seed, 5));
    FineTuneConfig ft;
    ft.step_size = cfg.finetune_step_size;
    ft.epochs = global_epochs;
    ft.batch_size = cfg.batch_size;
    ft.rng_seed = derive_seed(cfg.seed, 6);
    TrainedHead trained = train_head(head, train_features, train_classes, ft);
    out.global_head = std::move(trained.head);
    out.global_curve = std::move(trained.curve);

    out.test_predictions = global_identify(test_features, out.global_head);
    out.test_result = identification_metrics(out.test_predictions, test_classes, class_count);
    return out;
}

inline void write_grid_csv(const std::string& path, const HeatmapGrid& grid) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "h1,h2,fault_id,fdr\n";
    for (const GridCell& cell : grid.cells)
        out << cell.hidden1 << ',' << cell.hidden2 << ',' << cell.fault_id << ','
            << render_optional(cell.fdr) << '\n';
}

}  // namespace qdiag
