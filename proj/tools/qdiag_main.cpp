// qdiag command-line tool: synthetic process data generation, generative and
// discriminative training, fault detection/identification, architecture grid
// search, sampler benchmarks, and QUBO export.
//
// Every run resolves its settings from defaults < config file < flags, writes
// the resolved configuration to <out>/config_echo.cfg, and is reproducible
// byte-for-byte by re-running the same command with --config on that echo.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdiag/config.hpp"
#include "qdiag/eval.hpp"
#include "qdiag/io.hpp"
#include "qdiag/pipeline.hpp"
#include "qdiag/synthgen.hpp"

namespace {

using namespace qdiag;

// exit codes
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;
constexpr int kAssertFailed = 4;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Set by the --config option of whichever subcommand runs.
std::string g_config_path;

class AssertionFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string dashed(const std::string& key) {
    std::string out = key;
    for (char& c : out)
        if (c == '_') c = '-';
    return out;
}

/// Resolves one command's options with precedence default < config < flag,
/// records each resolved value for the config echo, and rejects unknown
/// config keys. Resolution order in the code fixes the echo layout.
class Resolver {
public:
    Resolver(CLI::App& cmd, const std::string& config_path, const std::string& command_name)
        : cmd_(cmd) {
        if (!config_path.empty()) config_ = parse_config_file(config_path);
        known_.insert("command");
        const auto it = config_.find("command");
        if (it != config_.end()) {
            if (it->second.kind != ConfigValue::Kind::String || it->second.str != command_name)
                throw UsageError("config file is for command `" + it->second.str +
                                 "`, invoked command is `" + command_name + "`");
        }
        echo_.set_string("command", command_name);
    }

    bool flag_given(const std::string& key) const {
        return cmd_.count("--" + dashed(key)) > 0;
    }

    double num(const std::string& key, double bound) {
        known_.insert(key);
        double value = bound;
        if (!flag_given(key)) {
            const auto it = config_.find(key);
            if (it != config_.end()) {
                require_kind(it, ConfigValue::Kind::Number);
                value = it->second.num;
            }
        }
        echo_.set_number(key, value);
        return value;
    }

    std::size_t integer(const std::string& key, std::size_t bound) {
        const double value = num(key, static_cast<double>(bound));
        if (value < 0.0 || value != std::floor(value))
            throw UsageError("`" + key + "` must be a non-negative integer");
        return static_cast<std::size_t>(value);
    }

    std::uint64_t seed(const std::string& key, std::uint64_t bound) {
        return static_cast<std::uint64_t>(integer(key, static_cast<std::size_t>(bound)));
    }

    std::string str(const std::string& key, const std::string& bound) {
        known_.insert(key);
        std::string value = bound;
        if (!flag_given(key)) {
            const auto it = config_.find(key);
            if (it != config_.end()) {
                require_kind(it, ConfigValue::Kind::String);
                value = it->second.str;
            }
        }
        echo_.set_string(key, value);
        return value;
    }

    bool boolean(const std::string& key, bool bound) {
        known_.insert(key);
        bool value = bound;
        if (!flag_given(key)) {
            const auto it = config_.find(key);
            if (it != config_.end()) {
                require_kind(it, ConfigValue::Kind::Bool);
                value = it->second.flag;
            }
        }
        echo_.set_bool(key, value);
        return value;
    }

    std::vector<std::size_t> sizes(const std::string& key, const std::string& bound) {
        known_.insert(key);
        std::vector<double> values;
        if (!flag_given(key)) {
            const auto it = config_.find(key);
            if (it != config_.end()) {
                require_kind(it, ConfigValue::Kind::NumberList);
                values = it->second.list;
            }
        }
        if (values.empty()) {
            std::string token;
            std::istringstream stream(bound);
            while (std::getline(stream, token, ','))
                if (!token.empty()) values.push_back(std::stod(token));
        }
        std::vector<std::size_t> out;
        for (double v : values) {
            if (v < 1.0 || v != std::floor(v))
                throw UsageError("`" + key + "` entries must be positive integers");
            out.push_back(static_cast<std::size_t>(v));
        }
        if (out.empty()) throw UsageError("`" + key + "` must not be empty");
        echo_.set_numbers(key, values);
        return out;
    }

    /// Output directory: flag/config resolution plus the QDIAG_OUT_DIR
    /// environment override (the echo records the directory actually used).
    std::string out_dir(const std::string& bound) {
        known_.insert("out");
        std::string value = bound;
        if (!flag_given("out")) {
            const auto it = config_.find("out");
            if (it != config_.end()) {
                require_kind(it, ConfigValue::Kind::String);
                value = it->second.str;
            }
        }
        if (const char* env = std::getenv("QDIAG_OUT_DIR")) value = env;
        echo_.set_string("out", value);
        std::filesystem::create_directories(value);
        return value;
    }

    void finish(const std::string& out_dir) {
        for (const auto& [key, value] : config_)
            if (!known_.count(key)) throw UsageError("unknown config key `" + key + "`");
        echo_.write(out_dir + "/config_echo.cfg");
    }

private:
    void require_kind(ConfigMap::const_iterator it, ConfigValue::Kind kind) const {
        if (it->second.kind != kind)
            throw UsageError("config key `" + it->first + "` has the wrong value type");
    }

    CLI::App& cmd_;
    ConfigMap config_;
    std::set<std::string> known_;
    ConfigEcho echo_;
};

SamplerConfig parse_sampler(const std::string& text, std::size_t cd_k,
                            const AnnealConfig& anneal) {
    SamplerConfig cfg;
    cfg.cd_k = cd_k;
    cfg.anneal = anneal;
    if (text == "exact")
        cfg.kind = SamplerKind::Exact;
    else if (text == "cd")
        cfg.kind = SamplerKind::Cd;
    else if (text == "anneal")
        cfg.kind = SamplerKind::Anneal;
    else if (text.rfind("file:", 0) == 0) {
        cfg.kind = SamplerKind::File;
        cfg.sample_file = text.substr(5);
        if (cfg.sample_file.empty()) throw UsageError("--sampler file: needs a path");
    } else {
        throw UsageError("unknown sampler `" + text + "` (use exact|cd|anneal|file:<path>)");
    }
    return cfg;
}

ProcessSpec preset_spec(const std::string& name, std::uint64_t seed) {
    if (name == "cstr") return cstr_preset(seed);
    if (name == "te") return te_preset(seed);
    throw UsageError("unknown preset `" + name + "` (use cstr|te)");
}

LabelRule parse_label_rule(const std::string& text) {
    if (text == "last") return LabelRule::LastTimestep;
    if (text == "any") return LabelRule::AnyFaulty;
    throw UsageError("unknown label rule `" + text + "` (use last|any)");
}

std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
}

// Shared flag bundles -----------------------------------------------------------

struct DataFlags {
    std::string data;
    std::string test_data;
    double split = 0.0;
    std::size_t window = 4;
    std::string label_rule = "last";

    void add(CLI::App* cmd, bool with_test) {
        cmd->add_option("--data", data,
                        "training suite manifest.csv, its directory, or a single CSV");
        if (with_test) {
            cmd->add_option("--test-data,--test-file", test_data,
                            "test suite manifest.csv or a single labeled CSV");
            cmd->add_option("--split", split,
                            "chronological train fraction when no test suite is given");
        }
        cmd->add_option("--window", window, "time window length N");
        cmd->add_option("--label-rule", label_rule, "window label rule: last|any");
    }
};

struct TrainFlags {
    std::string arch = "15,8";
    std::size_t epochs = 30;
    std::size_t finetune_epochs = 80;
    std::size_t batch = 64;
    double lr_gaussian = 0.001;
    double lr_bernoulli = 0.01;
    double momentum = 1.0;
    double step_size = 0.001;
    double threshold = 0.5;
    bool freeze_dbn = false;
    bool forward_sampling = false;
    std::string sampler = "cd";
    std::size_t cd_k = 1;
    std::size_t reads = 1000;
    std::size_t sweeps = 1000;
    std::size_t hold = 200;
    double beta_start = 0.1;
    double beta_eff = 1.0;
    double scaling = 1.0;

    void add(CLI::App* cmd) {
        cmd->add_option("--arch", arch, "hidden layer sizes, e.g. 15,8");
        cmd->add_option("--epochs", epochs, "generative epochs per layer");
        cmd->add_option("--finetune-epochs", finetune_epochs, "discriminative epochs");
        cmd->add_option("--batch", batch, "mini-batch size");
        cmd->add_option("--lr-gaussian", lr_gaussian, "learning rate, Gaussian layer");
        cmd->add_option("--lr-bernoulli", lr_bernoulli, "learning rate, Bernoulli layers");
        cmd->add_option("--momentum", momentum, "momentum (multiplies the previous value)");
        cmd->add_option("--step-size", step_size, "fine-tuning step size");
        cmd->add_option("--threshold", threshold, "detection probability threshold");
        cmd->add_flag("--freeze-dbn", freeze_dbn, "do not fine-tune the DBN branches");
        cmd->add_flag("--forward-sampling", forward_sampling,
                      "binomial draws between DBN layers while stacking");
        cmd->add_option("--sampler", sampler, "exact|cd|anneal|file:<path>");
        cmd->add_option("--cd-k", cd_k, "Gibbs steps for the cd sampler");
        cmd->add_option("--reads", reads, "anneal reads per estimate");
        cmd->add_option("--sweeps", sweeps, "anneal ramp sweeps per read");
        cmd->add_option("--hold", hold, "anneal hold sweeps at beta_eff");
        cmd->add_option("--beta-start", beta_start, "anneal starting inverse temperature");
        cmd->add_option("--beta-eff", beta_eff, "anneal final inverse temperature");
        cmd->add_option("--scaling", scaling, "anneal control-parameter scaling factor");
    }

    // Resolution helpers shared by the training-flavored commands. Order
    // matters: it is the echo layout.
    PipelineConfig resolve(Resolver& r, std::uint64_t seed_value) const {
        PipelineConfig cfg;
        cfg.hidden_sizes = r.sizes("arch", arch);
        cfg.pretrain_epochs = r.integer("epochs", epochs);
        cfg.finetune_epochs = r.integer("finetune_epochs", finetune_epochs);
        cfg.batch_size = r.integer("batch", batch);
        cfg.lr_gaussian = r.num("lr_gaussian", lr_gaussian);
        cfg.lr_bernoulli = r.num("lr_bernoulli", lr_bernoulli);
        cfg.momentum = r.num("momentum", momentum);
        cfg.finetune_step_size = r.num("step_size", step_size);
        cfg.threshold = r.num("threshold", threshold);
        cfg.freeze_dbn = r.boolean("freeze_dbn", freeze_dbn);
        cfg.forward_sampling = r.boolean("forward_sampling", forward_sampling);
        AnnealConfig anneal;
        anneal.reads = r.integer("reads", reads);
        anneal.sweeps_per_read = r.integer("sweeps", sweeps);
        anneal.hold_sweeps = r.integer("hold", hold);
        anneal.beta_start = r.num("beta_start", beta_start);
        anneal.beta_eff = r.num("beta_eff", beta_eff);
        anneal.scaling_factor = r.num("scaling", scaling);
        cfg.sampler =
            parse_sampler(r.str("sampler", sampler), r.integer("cd_k", cd_k), anneal);
        cfg.seed = seed_value;
        return cfg;
    }
};

/// Accepts a manifest.csv, a directory containing one, or a single labeled
/// series CSV (which becomes a one-member suite).
std::vector<SuiteMember> load_suite_arg(const std::string& arg) {
    if (arg.empty()) throw UsageError("--data is required");
    std::filesystem::path path(arg);
    if (std::filesystem::is_directory(path)) path /= "manifest.csv";
    if (!std::filesystem::exists(path)) throw IoError("missing input: " + path.string());
    if (path.filename() != "manifest.csv") {
        SuiteMember member;
        member.name = path.stem().string();
        member.series = load_csv(path.string());
        for (int l : member.series.labels) member.fault_id = std::max(member.fault_id, l);
        return {std::move(member)};
    }
    return load_suite(path.string());
}

PipelineData resolve_data(Resolver& r, const DataFlags& flags, bool with_test) {
    const std::string data_arg = r.str("data", flags.data);
    std::string test_arg;
    double split = 0.0;
    if (with_test) {
        test_arg = r.str("test_data", flags.test_data);
        split = r.num("split", flags.split);
    }
    const std::size_t window_len = r.integer("window", flags.window);
    const LabelRule rule = parse_label_rule(r.str("label_rule", flags.label_rule));
    if (window_len < 1) throw UsageError("--window must be >= 1");
    const auto train_suite = load_suite_arg(data_arg);
    std::vector<SuiteMember> test_suite;
    if (!test_arg.empty()) test_suite = load_suite_arg(test_arg);
    if (with_test && test_suite.empty() && split <= 0.0)
        throw UsageError("provide --test-data or a --split fraction");
    return prepare_pipeline_data(train_suite, test_suite, split, window_len, rule,
                                 std::filesystem::path(data_arg).stem().string());
}

// Commands ------------------------------------------------------------------------

void run_synth(CLI::App* cmd) {
    static std::string preset = "cstr";
    static std::string out = "synth_out";
    static std::uint64_t seed = 0;
    static std::size_t duration = 0;
    static std::size_t onset = 0;
    cmd->add_option("--preset", preset, "generator preset: cstr|te");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "generator seed");
    cmd->add_option("--duration", duration, "override series length (0 = preset)");
    cmd->add_option("--onset", onset, "override fault onset (0 = preset)");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "synth");
        const std::string preset_name = r.str("preset", preset);
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        const std::size_t duration_value = r.integer("duration", duration);
        const std::size_t onset_value = r.integer("onset", onset);

        ProcessSpec spec = preset_spec(preset_name, seed_value);
        if (duration_value) spec.duration = duration_value;
        if (onset_value) spec.fault_onset = onset_value;
        const auto suite = generate_suite(spec, spec.fault_specs);
        write_suite(out_dir, suite);

        std::ostringstream summary;
        summary << "synthetic suite `" << preset_name << "`\n"
                << "members: " << suite.size() << " (normal + "
                << spec.fault_specs.size() << " faults)\n"
                << "rows per member: " << spec.duration << ", fault onset: " << spec.fault_onset
                << "\nvariables: " << spec.variable_count << "\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_pretrain(CLI::App* cmd) {
    static DataFlags data_flags;
    static TrainFlags train_flags;
    static std::string out = "pretrain_out";
    static std::uint64_t seed = 0;
    data_flags.add(cmd, false);
    train_flags.add(cmd);
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "pretrain");
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        PipelineData data = resolve_data(r, data_flags, false);
        const PipelineConfig cfg = train_flags.resolve(r, seed_value);

        const PretrainOutcome outcome = pretrain_branches(data, cfg);
        save_dbn(out_dir + "/dbn_normal.dbn", outcome.normal.model);
        save_dbn(out_dir + "/dbn_fault.dbn", outcome.fault.model);
        save_normalizer(out_dir + "/normalizer.txt", data.normalizer);
        write_loss_curves_csv(out_dir + "/loss_normal.csv", outcome.normal.curves);
        write_loss_curves_csv(out_dir + "/loss_fault.csv", outcome.fault.curves);

        std::ostringstream summary;
        summary << "generative training on `" << data.dataset_name << "`\n"
                << "train windows: " << data.train_samples.rows() << " ("
                << data.train_samples.cols() << " inputs)\n"
                << "sampler: " << sampler_kind_name(cfg.sampler.kind) << "\n";
        for (std::size_t l = 0; l < outcome.normal.curves.size(); ++l)
            summary << "dbn-n layer " << l + 1 << " final loss: "
                    << format_real(outcome.normal.curves[l].points.back().second) << "\n";
        for (std::size_t l = 0; l < outcome.fault.curves.size(); ++l)
            summary << "dbn-f layer " << l + 1 << " final loss: "
                    << format_real(outcome.fault.curves[l].points.back().second) << "\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_finetune(CLI::App* cmd) {
    static DataFlags data_flags;
    static std::string models = "pretrain_out";
    static std::string out = "finetune_out";
    static std::uint64_t seed = 0;
    static std::size_t epochs = 80;
    static std::size_t batch = 64;
    static double step_size = 0.001;
    static double threshold = 0.5;
    static bool freeze_dbn = false;
    data_flags.add(cmd, false);
    cmd->add_option("--models", models, "directory with dbn_normal.dbn / dbn_fault.dbn");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--epochs", epochs, "discriminative epochs");
    cmd->add_option("--batch", batch, "mini-batch size");
    cmd->add_option("--step-size", step_size, "optimizer step size");
    cmd->add_option("--threshold", threshold, "detection probability threshold");
    cmd->add_flag("--freeze-dbn", freeze_dbn, "train only the classifier head");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "finetune");
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        const std::string models_dir = r.str("models", models);
        const std::string data_arg = r.str("data", data_flags.data);
        const std::size_t window_len = r.integer("window", data_flags.window);
        const LabelRule rule = parse_label_rule(r.str("label_rule", data_flags.label_rule));
        const std::size_t epochs_value = r.integer("epochs", epochs);
        const std::size_t batch_value = r.integer("batch", batch);
        const double step_value = r.num("step_size", step_size);
        const double threshold_value = r.num("threshold", threshold);
        const bool freeze = r.boolean("freeze_dbn", freeze_dbn);

        DiagnosisModel model;
        model.dbn_normal = load_dbn(models_dir + "/dbn_normal.dbn");
        model.dbn_fault = load_dbn(models_dir + "/dbn_fault.dbn");
        const Normalizer norm = load_normalizer(models_dir + "/normalizer.txt");
        const std::size_t k = model.dbn_normal.output_dim();
        model.head = ClassifierParams::random_init(2 * k, 2, derive_seed(seed_value, 3));
        model.threshold = threshold_value;

        Matrix samples;
        std::vector<int> labels;
        windows_with_normalizer(load_suite_arg(data_arg), norm, window_len, rule, samples,
                                labels);
        std::vector<int> binary(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] != 0 ? 1 : 0;

        FineTuneConfig ft;
        ft.step_size = step_value;
        ft.epochs = epochs_value;
        ft.batch_size = batch_value;
        ft.rng_seed = derive_seed(seed_value, 4);
        ft.freeze_dbn = freeze;
        const FineTuneResult result = train_discriminative(model, samples, binary, ft);

        save_diagnosis(out_dir + "/diagnosis.model", result.model);
        save_normalizer(out_dir + "/normalizer.txt", norm);
        write_loss_curves_csv(out_dir + "/finetune_loss.csv", {result.curve});

        std::ostringstream summary;
        summary << "discriminative training on `" << data_arg << "`\n"
                << "windows: " << samples.rows() << ", epochs: " << epochs_value << "\n"
                << "final loss: " << format_real(result.curve.points.back().second) << "\n"
                << "model: " << model_hash(result.model) << "\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_detect(CLI::App* cmd) {
    static std::string model_path = "finetune_out/diagnosis.model";
    static std::string normalizer_path;
    static std::string data;
    static std::string out = "detect_out";
    static std::size_t window_len = 4;
    static std::string label_rule = "last";
    static double assert_min_fdr = -1.0;
    cmd->add_option("--model", model_path, "diagnosis model file");
    cmd->add_option("--normalizer", normalizer_path,
                    "normalizer file (default: next to the model)");
    cmd->add_option("--data,--test-file", data, "test suite manifest.csv or a single CSV");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--window", window_len, "time window length N");
    cmd->add_option("--label-rule", label_rule, "window label rule: last|any");
    cmd->add_option("--assert-min-fdr", assert_min_fdr,
                    "exit nonzero unless the overall FDR reaches this percent");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "detect");
        const std::string model_arg = r.str("model", model_path);
        std::string norm_arg = r.str("normalizer", normalizer_path);
        const std::string data_arg = r.str("data", data);
        const std::string out_dir = r.out_dir(out);
        const std::size_t window_value = r.integer("window", window_len);
        const LabelRule rule = parse_label_rule(r.str("label_rule", label_rule));
        const double min_fdr = r.num("assert_min_fdr", assert_min_fdr);

        if (norm_arg.empty())
            norm_arg =
                (std::filesystem::path(model_arg).parent_path() / "normalizer.txt").string();
        const DiagnosisModel model = load_diagnosis(model_arg);
        const Normalizer norm = load_normalizer(norm_arg);

        Matrix samples;
        std::vector<int> labels;
        windows_with_normalizer(load_suite_arg(data_arg), norm, window_value, rule, samples,
                                labels);
        if (samples.cols() != model.input_dim())
            throw DimensionError("windowed samples have " + std::to_string(samples.cols()) +
                                 " columns but the model expects " +
                                 std::to_string(model.input_dim()) +
                                 " (check --window and the variable count)");

        const DiagnosisResult predictions = diagnose(model, samples);
        EvalReport report = build_detection_report(predictions.states, labels);
        report.dataset_name = std::filesystem::path(data_arg).stem().string();
        report.model_fingerprint = model_hash(model);

        write_predictions_csv(out_dir + "/predictions.csv", predictions);
        write_detection_report_csv(out_dir + "/detection_report.csv", report);

        std::ostringstream summary;
        summary << "detection on `" << data_arg << "` (" << samples.rows() << " windows)\n"
                << "model: " << report.model_fingerprint << "\n"
                << "overall FDR: " << fmt_opt(report.overall.fdr_percent())
                << " %, FAR: " << fmt_opt(report.overall.far_percent()) << " %\n";
        for (const auto& [fault, counts] : report.per_fault)
            summary << "fault " << fault << " FDR: " << fmt_opt(counts.fdr_percent())
                    << " %\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();

        if (min_fdr >= 0.0) {
            const auto fdr = report.overall.fdr_percent();
            if (!fdr || *fdr < min_fdr)
                throw AssertionFailure("overall FDR " + fmt_opt(fdr) + " below required " +
                                       std::to_string(min_fdr));
        }
    });
}

void run_identify(CLI::App* cmd) {
    static DataFlags data_flags;
    static TrainFlags train_flags;
    static std::string out = "identify_out";
    static std::uint64_t seed = 0;
    static std::size_t global_epochs = 200;
    data_flags.add(cmd, true);
    train_flags.add(cmd);
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--global-epochs", global_epochs, "global classifier epochs");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "identify");
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        PipelineData data = resolve_data(r, data_flags, true);
        const PipelineConfig cfg = train_flags.resolve(r, seed_value);
        const std::size_t global_epochs_value = r.integer("global_epochs", global_epochs);

        const IdentificationOutcome outcome =
            run_identification_pipeline(data, cfg, global_epochs_value);
        write_confusion_csv(out_dir + "/confusion.csv", outcome.test_result);
        write_identification_report_csv(out_dir + "/identification_report.csv",
                                        outcome.test_result);
        write_loss_curves_csv(out_dir + "/global_loss.csv", {outcome.global_curve});

        std::ostringstream summary;
        summary << "identification on `" << data.dataset_name << "`\n"
                << "fault classes: " << outcome.fault_ids.size() << "\n";
        double fdr_sum = 0.0;
        std::size_t fdr_count = 0;
        for (std::size_t cls = 1; cls < outcome.test_result.class_count; ++cls) {
            const auto fdr = outcome.test_result.class_fdr_percent(cls);
            summary << "fault " << outcome.fault_ids[cls - 1]
                    << " FDR: " << fmt_opt(fdr)
                    << " %, FAR: " << fmt_opt(outcome.test_result.fault_far_percent(cls))
                    << " %\n";
            if (fdr) {
                fdr_sum += *fdr;
                ++fdr_count;
            }
        }
        if (fdr_count)
            summary << "average FDR: "
                    << fmt_opt(fdr_sum / static_cast<double>(fdr_count)) << " %\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_grid(CLI::App* cmd) {
    static DataFlags data_flags;
    static TrainFlags train_flags;
    static std::string out = "grid_out";
    static std::uint64_t seed = 0;
    static std::string axis1 = "5,10,15,20";
    static std::string axis2 = "4,8,12";
    static bool keep_going = false;
    data_flags.add(cmd, true);
    train_flags.add(cmd);
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--axis1", axis1, "first-layer hidden sizes, e.g. 5,10,15");
    cmd->add_option("--axis2", axis2, "second-layer hidden sizes, e.g. 4,8");
    cmd->add_flag("--keep-going", keep_going, "record failed cells as absent, do not abort");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "grid");
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        PipelineData data = resolve_data(r, data_flags, true);
        const PipelineConfig cfg = train_flags.resolve(r, seed_value);
        const std::vector<std::size_t> a1 = r.sizes("axis1", axis1);
        const std::vector<std::size_t> a2 = r.sizes("axis2", axis2);
        const bool keep = r.boolean("keep_going", keep_going);

        const HeatmapGrid grid = grid_search(data, a1, a2, cfg, keep);
        write_grid_csv(out_dir + "/grid.csv", grid);

        std::ostringstream summary;
        summary << "architecture grid on `" << data.dataset_name << "`: " << a1.size() << " x "
                << a2.size() << " cells\n";
        for (const GridCell& cell : grid.cells)
            summary << cell.hidden1 << "-" << cell.hidden2 << " fault " << cell.fault_id
                    << ": " << fmt_opt(cell.fdr) << " %\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_compare_samplers(CLI::App* cmd) {
    static DataFlags data_flags;
    static TrainFlags train_flags;
    static std::string out = "compare_out";
    static std::uint64_t seed = 0;
    static std::string samplers = "exact,cd,anneal";
    static std::string role = "fault";
    static std::size_t target_epoch = 50;
    data_flags.add(cmd, false);
    train_flags.add(cmd);
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--seed", seed, "run seed");
    cmd->add_option("--samplers", samplers, "comma-separated backends to compare");
    cmd->add_option("--role", role, "train on `normal` or `fault` windows");
    cmd->add_option("--target-epoch", target_epoch,
                    "epoch of the exact run that defines the target loss");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "compare-samplers");
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::string out_dir = r.out_dir(out);
        PipelineData data = resolve_data(r, data_flags, false);
        const PipelineConfig cfg = train_flags.resolve(r, seed_value);
        const std::string samplers_arg = r.str("samplers", samplers);
        const std::string role_arg = r.str("role", role);
        const std::size_t target = r.integer("target_epoch", target_epoch);
        if (cfg.hidden_sizes.size() != 2)
            throw UsageError("compare-samplers expects a two-layer --arch");

        const Matrix rows =
            role_arg == "normal"
                ? detail::select_rows(data.train_samples, data.train_labels,
                                      [](int l) { return l == 0; })
                : detail::select_rows(data.train_samples, data.train_labels,
                                      [](int l) { return l != 0; });
        if (rows.rows() == 0) throw Error("no training windows for role " + role_arg);

        // Layer 1 is trained once with CD (continuous inputs), then the
        // second-layer RBM is retrained once per sampler from a shared init.
        TrainingConfig layer1;
        layer1.learning_rate = cfg.lr_gaussian;
        layer1.momentum = cfg.momentum;
        layer1.epochs = cfg.pretrain_epochs;
        layer1.batch_size = cfg.batch_size;
        layer1.rng_seed = derive_seed(seed_value, 1);
        layer1.sampler.kind = SamplerKind::Cd;
        const std::size_t input_dim = data.train_samples.cols();
        const TrainedRbm first = train_rbm(
            RbmParams::random_init(input_dim, cfg.hidden_sizes[0], UnitKind::Gaussian,
                                   layer1.rng_seed),
            rows, layer1);
        const Matrix layer2_data = forward_layer(first.params, rows);

        std::vector<SamplerConfig> configs;
        std::vector<std::string> names;
        std::istringstream list(samplers_arg);
        std::string token;
        while (std::getline(list, token, ','))
            if (!token.empty()) {
                configs.push_back(parse_sampler(token, cfg.sampler.cd_k, cfg.sampler.anneal));
                names.push_back(token);
            }
        if (configs.empty()) throw UsageError("--samplers must name at least one backend");

        TrainingConfig base;
        base.learning_rate = cfg.lr_bernoulli;
        base.momentum = cfg.momentum;
        base.epochs = std::max<std::size_t>(cfg.pretrain_epochs, target);
        base.batch_size = cfg.batch_size;
        base.rng_seed = derive_seed(seed_value, 2);
        const RbmParams init = RbmParams::random_init(
            cfg.hidden_sizes[0], cfg.hidden_sizes[1], UnitKind::Bernoulli, base.rng_seed);
        const SamplerComparison cmp =
            sampler_comparison(init, layer2_data, configs, base, target);

        std::vector<LossCurve> curves;
        for (const SamplerRun& run : cmp.runs) curves.push_back(run.curve);
        write_loss_curves_csv(out_dir + "/loss_curves.csv", curves);
        write_sampler_bias_csv(out_dir + "/sampler_bias.csv", cmp.runs);

        std::ostringstream summary;
        summary << "sampler comparison on `" << data.dataset_name << "` (" << role_arg
                << " windows, layer " << cfg.hidden_sizes[0] << "x" << cfg.hidden_sizes[1]
                << ")\n";
        if (cmp.target_loss)
            summary << "target loss (exact run, epoch " << cmp.target_epoch
                    << "): " << format_real(*cmp.target_loss) << "\n";
        for (const SamplerRun& run : cmp.runs) {
            summary << run.label << ": final loss "
                    << format_real(run.curve.points.back().second);
            if (run.linf_bias) summary << ", bias " << format_real(*run.linf_bias);
            if (run.epochs_to_target)
                summary << ", reaches target at epoch " << *run.epochs_to_target;
            summary << "\n";
        }
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_export_qubo(CLI::App* cmd) {
    static std::string model_path;
    static std::string out = "qubo_out";
    static double layer = -1.0;
    cmd->add_option("--model", model_path, "dbn model file");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--layer", layer, "layer index to export (default: last layer)");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "export-qubo");
        const std::string model_arg = r.str("model", model_path);
        const std::string out_dir = r.out_dir(out);
        const double layer_arg = r.num("layer", layer);
        if (model_arg.empty()) throw UsageError("--model is required");

        const DbnModel model = load_dbn(model_arg);
        const std::size_t index = layer_arg < 0.0 ? model.layers.size() - 1
                                                  : static_cast<std::size_t>(layer_arg);
        if (index >= model.layers.size())
            throw UsageError("layer " + std::to_string(index) + " out of range (model has " +
                             std::to_string(model.layers.size()) + " layers)");
        const QuboProblem qubo = to_qubo(model.layers[index]);
        write_qubo(out_dir + "/qubo.txt", qubo);

        std::ostringstream summary;
        summary << "QUBO export of layer " << index << " from `" << model_arg << "`\n"
                << "size: " << qubo.size << " variables, " << qubo.quadratic.size()
                << " couplers\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

void run_energy_hist(CLI::App* cmd) {
    static std::string model_path;
    static std::string out = "hist_out";
    static double layer = -1.0;
    static std::string scalings = "1,2";
    static std::uint64_t seed = 0;
    static std::size_t reads = 1000;
    static std::size_t sweeps = 1000;
    static std::size_t hold = 200;
    static double beta_start = 0.1;
    static double beta_eff = 1.0;
    static std::size_t bins = 40;
    cmd->add_option("--model", model_path, "dbn model file");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--layer", layer, "layer index (default: last layer)");
    cmd->add_option("--scalings", scalings, "comma-separated scaling factors");
    cmd->add_option("--seed", seed, "sampler seed");
    cmd->add_option("--reads", reads, "reads per configuration");
    cmd->add_option("--sweeps", sweeps, "ramp sweeps per read");
    cmd->add_option("--hold", hold, "hold sweeps at beta_eff");
    cmd->add_option("--beta-start", beta_start, "starting inverse temperature");
    cmd->add_option("--beta-eff", beta_eff, "final inverse temperature");
    cmd->add_option("--bins", bins, "histogram bin count");

    cmd->callback([cmd]() {
        Resolver r(*cmd, g_config_path, "energy-hist");
        const std::string model_arg = r.str("model", model_path);
        const std::string out_dir = r.out_dir(out);
        const double layer_arg = r.num("layer", layer);
        const std::string scalings_arg = r.str("scalings", scalings);
        const std::uint64_t seed_value = r.seed("seed", seed);
        const std::size_t reads_value = r.integer("reads", reads);
        const std::size_t sweeps_value = r.integer("sweeps", sweeps);
        const std::size_t hold_value = r.integer("hold", hold);
        const double beta_start_value = r.num("beta_start", beta_start);
        const double beta_eff_value = r.num("beta_eff", beta_eff);
        const std::size_t bins_value = r.integer("bins", bins);
        if (model_arg.empty()) throw UsageError("--model is required");

        const DbnModel model = load_dbn(model_arg);
        const std::size_t index = layer_arg < 0.0 ? model.layers.size() - 1
                                                  : static_cast<std::size_t>(layer_arg);
        if (index >= model.layers.size())
            throw UsageError("layer " + std::to_string(index) + " out of range");

        std::vector<AnnealConfig> configs;
        std::istringstream list(scalings_arg);
        std::string token;
        std::size_t config_index = 0;
        while (std::getline(list, token, ',')) {
            if (token.empty()) continue;
            AnnealConfig cfg;
            cfg.reads = reads_value;
            cfg.sweeps_per_read = sweeps_value;
            cfg.hold_sweeps = hold_value;
            cfg.beta_start = beta_start_value;
            cfg.beta_eff = beta_eff_value;
            cfg.scaling_factor = std::stod(token);
            cfg.rng_seed = derive_seed(seed_value, config_index++);
            configs.push_back(cfg);
        }
        if (configs.empty()) throw UsageError("--scalings must name at least one factor");

        const auto histograms = energy_histogram(model.layers[index], configs, bins_value);
        write_histogram_csv(out_dir + "/energy_histogram.csv", histograms);

        std::ostringstream summary;
        summary << "energy histograms for layer " << index << " of `" << model_arg << "`\n";
        for (const auto& h : histograms)
            summary << "scaling " << format_real(h.scaling_factor) << ": mean energy "
                    << format_real(h.mean_energy) << " over " << h.reads << " reads\n";
        write_text(out_dir + "/summary.txt", summary.str());
        r.finish(out_dir);
        std::cout << summary.str();
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"qdiag: DBN-based process fault diagnosis with swappable Boltzmann samplers"};
    app.require_subcommand(1);

    auto add_config = [](CLI::App* cmd) {
        cmd->add_option("--config", g_config_path,
                        "config file of `key = value` lines; flags override it");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic process-data suite");
    add_config(synth);
    run_synth(synth);
    auto* pretrain =
        app.add_subcommand("pretrain", "generative DBN training (normal + fault branches)");
    add_config(pretrain);
    run_pretrain(pretrain);
    auto* finetune =
        app.add_subcommand("finetune", "discriminative training of the diagnosis network");
    add_config(finetune);
    run_finetune(finetune);
    auto* detect = app.add_subcommand("detect", "run detection on a test suite");
    add_config(detect);
    run_detect(detect);
    auto* identify =
        app.add_subcommand("identify", "per-fault diagnosis plus global fault identification");
    add_config(identify);
    run_identify(identify);
    auto* grid = app.add_subcommand("grid", "FDR grid search over DBN architectures");
    add_config(grid);
    run_grid(grid);
    auto* compare = app.add_subcommand("compare-samplers",
                                       "train one RBM per sampler and compare loss curves");
    add_config(compare);
    run_compare_samplers(compare);
    auto* export_qubo =
        app.add_subcommand("export-qubo", "export a trained layer's energy function as a QUBO");
    add_config(export_qubo);
    run_export_qubo(export_qubo);
    auto* energy_hist =
        app.add_subcommand("energy-hist", "read-energy histograms across scaling factors");
    add_config(energy_hist);
    run_energy_hist(energy_hist);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const AssertionFailure& e) {
        std::cerr << "assertion failed: " << e.what() << "\n";
        return kAssertFailed;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumericError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kOk;
}
