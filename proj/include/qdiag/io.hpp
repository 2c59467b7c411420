#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qdiag/classifier.hpp"
#include "qdiag/data.hpp"
#include "qdiag/eval.hpp"
#include "qdiag/rbm.hpp"
#include "qdiag/training.hpp"

namespace qdiag {

// Text persistence. All floats are written with 17 significant digits, so
// every format round-trips 64-bit values exactly.

inline void save_rbm(std::ostream& out, const RbmParams& params) {
    params.validate();
    out << "rbm " << params.visible_count << ' ' << params.hidden_count << ' '
        << unit_kind_name(params.visible_kind) << '\n';
    for (std::size_t i = 0; i < params.visible_count; ++i) {
        for (std::size_t j = 0; j < params.hidden_count; ++j) {
            if (j) out << ' ';
            out << format_real(params.weights(i, j));
        }
        out << '\n';
    }
    for (std::size_t i = 0; i < params.visible_count; ++i) {
        if (i) out << ' ';
        out << format_real(params.visible_bias[i]);
    }
    out << '\n';
    for (std::size_t j = 0; j < params.hidden_count; ++j) {
        if (j) out << ' ';
        out << format_real(params.hidden_bias[j]);
    }
    out << '\n';
    for (std::size_t i = 0; i < params.visible_count; ++i) {
        if (i) out << ' ';
        out << format_real(params.visible_std[i]);
    }
    out << '\n';
}

namespace detail {

inline double read_real(std::istream& in, const std::string& name, const char* what) {
    double v;
    if (!(in >> v)) throw ParseError(name + ": expected " + std::string(what));
    return v;
}

}  // namespace detail

/// Reads one `rbm` block. Returns nothing at a clean end of stream.
inline std::optional<RbmParams> load_rbm_block(std::istream& in, const std::string& name) {
    std::string tag;
    if (!(in >> tag)) return std::nullopt;
    if (tag != "rbm") throw ParseError(name + ": expected `rbm` block, found `" + tag + "`");
    RbmParams p;
    std::string kind;
    if (!(in >> p.visible_count >> p.hidden_count >> kind))
        throw ParseError(name + ": malformed rbm header");
    if (kind == "bernoulli")
        p.visible_kind = UnitKind::Bernoulli;
    else if (kind == "gaussian")
        p.visible_kind = UnitKind::Gaussian;
    else
        throw ParseError(name + ": unknown unit kind `" + kind + "`");
    p.weights = Matrix(p.visible_count, p.hidden_count);
    for (std::size_t i = 0; i < p.visible_count; ++i)
        for (std::size_t j = 0; j < p.hidden_count; ++j)
            p.weights(i, j) = detail::read_real(in, name, "weight");
    p.visible_bias.resize(p.visible_count);
    for (double& v : p.visible_bias) v = detail::read_real(in, name, "visible bias");
    p.hidden_bias.resize(p.hidden_count);
    for (double& v : p.hidden_bias) v = detail::read_real(in, name, "hidden bias");
    p.visible_std.resize(p.visible_count);
    for (double& v : p.visible_std) v = detail::read_real(in, name, "visible std");
    p.validate();
    return p;
}

/// DBN file: the layer blocks, first to last, nothing else.
inline void save_dbn(const std::string& path, const DbnModel& model) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const RbmParams& layer : model.layers) save_rbm(out, layer);
}

inline DbnModel load_dbn(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    DbnModel model;
    while (auto layer = load_rbm_block(in, path)) model.layers.push_back(std::move(*layer));
    if (model.layers.empty()) throw ParseError(path + ": no rbm blocks");
    model.validate();
    return model;
}

namespace detail {

inline void save_matrix_block(std::ostream& out, const char* tag, const Matrix& m,
                              const std::vector<double>& bias) {
    out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) out << ' ';
            out << format_real(m(r, c));
        }
        out << '\n';
    }
    for (std::size_t c = 0; c < bias.size(); ++c) {
        if (c) out << ' ';
        out << format_real(bias[c]);
    }
    out << '\n';
}

inline void load_matrix_block(std::istream& in, const std::string& name, const char* tag,
                              Matrix& m, std::vector<double>& bias) {
    std::string found;
    std::size_t rows = 0, cols = 0;
    if (!(in >> found >> rows >> cols) || found != tag)
        throw ParseError(name + ": expected `" + tag + "` block");
    m = Matrix(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = read_real(in, name, tag);
    bias.resize(cols);
    for (double& v : bias) v = read_real(in, name, "bias");
}

}  // namespace detail

/// Diagnosis-model file: threshold, both DBN branches (layer blocks prefixed
/// with a `dbn <count>` marker), then the head's `fc` and `softmax` blocks.
inline void save_diagnosis(const std::string& path, const DiagnosisModel& model) {
    model.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "diagnosis " << format_real(model.threshold) << '\n';
    for (const DbnModel* dbn : {&model.dbn_normal, &model.dbn_fault}) {
        out << "dbn " << dbn->layers.size() << '\n';
        for (const RbmParams& layer : dbn->layers) save_rbm(out, layer);
    }
    detail::save_matrix_block(out, "fc", model.head.hidden_weights, model.head.hidden_bias);
    detail::save_matrix_block(out, "softmax", model.head.output_weights,
                              model.head.output_bias);
}

inline DiagnosisModel load_diagnosis(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string tag;
    DiagnosisModel model;
    if (!(in >> tag >> model.threshold) || tag != "diagnosis")
        throw ParseError(path + ": expected `diagnosis <threshold>` header");
    for (DbnModel* dbn : {&model.dbn_normal, &model.dbn_fault}) {
        std::size_t layers = 0;
        if (!(in >> tag >> layers) || tag != "dbn")
            throw ParseError(path + ": expected `dbn <layer_count>`");
        for (std::size_t l = 0; l < layers; ++l) {
            auto layer = load_rbm_block(in, path);
            if (!layer) throw ParseError(path + ": truncated dbn block");
            dbn->layers.push_back(std::move(*layer));
        }
    }
    detail::load_matrix_block(in, path, "fc", model.head.hidden_weights,
                              model.head.hidden_bias);
    detail::load_matrix_block(in, path, "softmax", model.head.output_weights,
                              model.head.output_bias);
    model.validate();
    return model;
}

inline void save_normalizer(const std::string& path, const Normalizer& norm) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "normalizer " << norm.mean.size() << '\n';
    for (std::size_t c = 0; c < norm.mean.size(); ++c) {
        if (c) out << ' ';
        out << format_real(norm.mean[c]);
    }
    out << '\n';
    for (std::size_t c = 0; c < norm.std.size(); ++c) {
        if (c) out << ' ';
        out << format_real(norm.std[c]);
    }
    out << '\n';
}

inline Normalizer load_normalizer(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string tag;
    std::size_t d = 0;
    if (!(in >> tag >> d) || tag != "normalizer")
        throw ParseError(path + ": expected `normalizer <dims>` header");
    Normalizer norm;
    norm.mean.resize(d);
    norm.std.resize(d);
    for (double& v : norm.mean) v = detail::read_real(in, path, "mean");
    for (double& v : norm.std) v = detail::read_real(in, path, "std");
    return norm;
}

/// QUBO export: `qubo <size>`, one `l <index> <coeff>` per linear term, one
/// `q <i> <j> <coeff>` per coupler, in index order.
inline void write_qubo(std::ostream& out, const QuboProblem& q) {
    out << "qubo " << q.size << '\n';
    for (std::size_t i = 0; i < q.size; ++i)
        out << "l " << i << ' ' << format_real(q.linear[i]) << '\n';
    for (const auto& [pair, coeff] : q.quadratic)
        out << "q " << pair.first << ' ' << pair.second << ' ' << format_real(coeff) << '\n';
}

inline void write_qubo(const std::string& path, const QuboProblem& q) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    write_qubo(out, q);
}

// --- report CSVs ----------------------------------------------------------------

inline void write_loss_curves_csv(const std::string& path,
                                  const std::vector<LossCurve>& curves) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,loss,sampler\n";
    for (const LossCurve& curve : curves)
        for (const auto& [epoch, loss] : curve.points)
            out << epoch << ',' << format_real(loss) << ',' << curve.sampler_label << '\n';
}

inline void write_predictions_csv(const std::string& path, const DiagnosisResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "sample_index,p_normal,p_faulty,state\n";
    for (std::size_t r = 0; r < result.probs.rows(); ++r)
        out << r << ',' << format_real(result.probs(r, 0)) << ','
            << format_real(result.probs(r, 1)) << ','
            << (result.states[r] ? "faulty" : "normal") << '\n';
}

inline std::string render_optional(const std::optional<double>& v) {
    return v ? format_real(*v) : std::string();
}

inline void write_confusion_csv(const std::string& path, const IdentificationResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "true_class,pred_class,count\n";
    for (std::size_t t = 0; t < result.class_count; ++t)
        for (std::size_t p = 0; p < result.class_count; ++p)
            out << t << ',' << p << ',' << result.confusion[t][p] << '\n';
}

/// Per-fault-class identification rates: class FDR (the confusion diagonal's
/// share of the class total) and the per-fault false alarm rate. Absent
/// metrics are left empty.
inline void write_identification_report_csv(const std::string& path,
                                            const IdentificationResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "fault_id,fdr,far\n";
    for (std::size_t cls = 1; cls < result.class_count; ++cls)
        out << cls << ',' << render_optional(result.class_fdr_percent(cls)) << ','
            << render_optional(result.fault_far_percent(cls)) << '\n';
}

inline void write_histogram_csv(const std::string& path,
                                const std::vector<EnergyHistogram>& histograms) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "scaling,bin_lo,bin_hi,count\n";
    for (const EnergyHistogram& h : histograms)
        for (std::size_t b = 0; b < h.counts.size(); ++b)
            out << format_real(h.scaling_factor) << ','
                << format_real(h.bin_lo + static_cast<double>(b) * h.bin_width) << ','
                << format_real(h.bin_lo + static_cast<double>(b + 1) * h.bin_width) << ','
                << h.counts[b] << '\n';
}

inline void write_sampler_bias_csv(const std::string& path,
                                   const std::vector<SamplerRun>& runs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "sampler,linf_bias,epochs_to_target\n";
    for (const SamplerRun& run : runs) {
        out << run.label << ',' << render_optional(run.linf_bias) << ',';
        if (run.epochs_to_target) out << *run.epochs_to_target;
        out << '\n';
    }
}

/// FNV-1a over a serialized model; used to fingerprint models in reports.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

inline std::string model_hash(const DiagnosisModel& model) {
    std::ostringstream text;
    text << format_real(model.threshold) << '\n';
    for (const DbnModel* dbn : {&model.dbn_normal, &model.dbn_fault})
        for (const RbmParams& layer : dbn->layers) save_rbm(text, layer);
    detail::save_matrix_block(text, "fc", model.head.hidden_weights, model.head.hidden_bias);
    detail::save_matrix_block(text, "softmax", model.head.output_weights,
                              model.head.output_bias);
    return fnv1a_hex(text.str());
}

}  // namespace qdiag
