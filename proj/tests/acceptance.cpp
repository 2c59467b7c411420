// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Criterion 9 exercises the command-line binary (path in argv[1]).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qdiag/classifier.hpp"
#include "qdiag/eval.hpp"
#include "qdiag/io.hpp"
#include "qdiag/pipeline.hpp"
#include "qdiag/synthgen.hpp"
#include "test_helpers.hpp"

using namespace qdiag;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << " - " << detail << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence: CD-k (k=1e4, 1e3 chains) and anneal_sample (1e4
//    reads, beta_eff=1, hold 200) within L-inf 0.02 of exact enumeration on
//    20 random RBMs of at most 6+6 units. Runtime budget: 120 s.
void criterion_oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    double worst_cd = 0.0, worst_anneal = 0.0;
    // At 1e4 binary reads the annealer's max statistic over ~900 expectation
    // entries fluctuates around 0.011-0.016, close to the 0.02 tolerance, so
    // the fixed seed base matters; the CD margin is ~2x regardless of seeds.
    for (int t = 0; t < 20; ++t) {
        const std::uint64_t seed = 3000 + t;
        Rng size_rng(seed);
        const std::size_t m = 2 + size_rng.next_u64() % 5;  // 2..6
        const std::size_t n = 2 + size_rng.next_u64() % 5;
        const RbmParams p = testutil::random_rbm(m, n, derive_seed(seed, 5));
        const ExpectationEstimate oracle = exact_expectations(p);

        Matrix batch(1000, m);
        Rng batch_rng(derive_seed(seed, 77));
        for (double& x : batch.values()) x = batch_rng.bernoulli(0.5) ? 1.0 : 0.0;
        worst_cd = std::max(worst_cd, testutil::linf_gap(
                                          cd_expectations(p, batch, 10000, derive_seed(seed, 1)),
                                          oracle));

        AnnealConfig anneal;
        anneal.reads = 10000;
        anneal.sweeps_per_read = 200;
        anneal.hold_sweeps = 200;
        anneal.beta_eff = 1.0;
        anneal.rng_seed = derive_seed(seed, 2);
        worst_anneal = std::max(
            worst_anneal,
            testutil::linf_gap(expectations_from_samples(anneal_sample(p, anneal)), oracle));
    }
    const double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << "worst L-inf: cd " << worst_cd << ", anneal " << worst_anneal << " (tol 0.02); "
           << elapsed << " s (budget 120)";
    report("oracle-equivalence", worst_cd <= 0.02 && worst_anneal <= 0.02 && elapsed <= 120.0,
           detail.str());
}

// ---------------------------------------------------------------------------
// 2. Boltzmann fidelity: anneal reads on 3x3 RBMs, KL(empirical || exact)
//    <= 0.05 at 1e4 reads. Runtime budget: 30 s.
void criterion_boltzmann_fidelity() {
    const auto start = std::chrono::steady_clock::now();
    double worst_kl = 0.0;
    for (std::uint64_t seed : {9001, 9002, 9003}) {
        const RbmParams p = testutil::random_rbm(3, 3, seed);
        AnnealConfig cfg;
        cfg.reads = 10000;
        cfg.sweeps_per_read = 100;
        cfg.hold_sweeps = 200;
        cfg.rng_seed = derive_seed(seed, 1);
        std::map<std::uint64_t, std::size_t> counts;
        for (const JointState& s : anneal_sample(p, cfg)) {
            std::uint64_t code = 0;
            for (std::size_t i = 0; i < 3; ++i)
                if (s.visible[i] != 0.0) code |= std::uint64_t{1} << i;
            for (std::size_t j = 0; j < 3; ++j)
                if (s.hidden[j]) code |= std::uint64_t{1} << (3 + j);
            ++counts[code];
        }
        double kl = 0.0;
        for (const auto& [code, count] : counts) {
            const double emp = static_cast<double>(count) / static_cast<double>(cfg.reads);
            kl += emp * std::log(emp / joint_probability(p, testutil::nth_state(p, code)));
        }
        worst_kl = std::max(worst_kl, kl);
    }
    const double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << "worst KL " << worst_kl << " (tol 0.05); " << elapsed << " s (budget 30)";
    report("boltzmann-fidelity", worst_kl <= 0.05 && elapsed <= 30.0, detail.str());
}

// ---------------------------------------------------------------------------
// 3. Scaling-factor effect: doubling the control-parameter scale strictly
//    lowers the mean sampled energy on 5 seeded random RBMs.
void criterion_scaling_energy() {
    bool all_lower = true;
    std::ostringstream detail;
    for (std::uint64_t seed : {41, 42, 43, 44, 45}) {
        const RbmParams p = testutil::random_rbm(3, 3, seed);
        AnnealConfig base;
        base.reads = 2000;
        base.sweeps_per_read = 60;
        base.hold_sweeps = 60;
        base.rng_seed = derive_seed(seed, 9);
        AnnealConfig doubled = base;
        doubled.scaling_factor = 2.0;
        const auto histograms = energy_histogram(p, {base, doubled});
        all_lower = all_lower && histograms[1].mean_energy < histograms[0].mean_energy;
        detail << histograms[0].mean_energy << "->" << histograms[1].mean_energy << " ";
    }
    report("scaling-lowers-energy", all_lower, detail.str());
}

// ---------------------------------------------------------------------------
// 4. Exact-gradient likelihood ascent on a 4x3 RBM over a 4-pattern dataset:
//    non-decreasing log-likelihood for 200 epochs (per-step tolerance -1e-9)
//    and a final mean log-likelihood within 0.05 nats of -ln 4.
void criterion_likelihood_ascent() {
    const Matrix patterns = Matrix::from_rows(
        {{0, 0, 0, 0}, {1, 1, 1, 1}, {1, 1, 0, 0}, {0, 0, 1, 1}});
    Matrix data(40, 4);
    for (std::size_t rep = 0; rep < 10; ++rep)
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) data(rep * 4 + r, c) = patterns(r, c);

    TrainingConfig cfg;
    cfg.learning_rate = 0.8;
    cfg.momentum = 1.0;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.sampler.kind = SamplerKind::Exact;
    RbmParams params = RbmParams::random_init(4, 3, UnitKind::Bernoulli, 3, 0.1);

    auto mean_ll = [&](const RbmParams& p) {
        double ll = 0.0;
        for (std::size_t r = 0; r < 4; ++r) {
            std::vector<double> v(4);
            for (std::size_t c = 0; c < 4; ++c) v[c] = patterns(r, c);
            ll += std::log(marginal_visible(p, v));
        }
        return ll / 4.0;
    };

    bool monotone = true;
    double prev = mean_ll(params);
    for (int epoch = 0; epoch < 200; ++epoch) {
        params = train_rbm(params, data, cfg).params;
        const double cur = mean_ll(params);
        if (cur < prev - 1e-9) monotone = false;
        prev = cur;
    }
    const double bound = -std::log(4.0) - 0.05;
    std::ostringstream detail;
    detail << "final mean LL " << prev << " (bound " << bound << "), monotone="
           << (monotone ? "yes" : "no");
    report("exact-gradient-ascent", monotone && prev >= bound, detail.str());
}

// ---------------------------------------------------------------------------
// 5. Gradient check: backprop gradients of a 4-input toy diagnosis model
//    match central finite differences (step 1e-5) within relative 1e-4 on
//    every parameter of the discriminative forward pass.
void criterion_gradient_check() {
    DiagnosisModel model;
    auto branch = [&](std::uint64_t s) {
        DbnModel dbn;
        dbn.layers = {RbmParams::random_init(4, 3, UnitKind::Gaussian, s, 0.4),
                      RbmParams::random_init(3, 2, UnitKind::Bernoulli, s + 1, 0.4)};
        Rng rng(s + 2);
        for (double& c : dbn.layers[0].hidden_bias) c = 0.3 * rng.normal();
        for (double& c : dbn.layers[1].hidden_bias) c = 0.3 * rng.normal();
        return dbn;
    };
    model.dbn_normal = branch(70);
    model.dbn_fault = branch(80);
    model.head = ClassifierParams::random_init(4, 2, 90);

    Matrix samples(6, 4);
    Rng rng(91);
    for (double& x : samples.values()) x = rng.normal();
    const Matrix labels = one_hot({0, 1, 1, 0, 1, 0}, 2);

    ModelGradients grads;
    diagnosis_gradients(model, samples, labels, grads);
    auto loss_at = [&](const DiagnosisModel& m) {
        ModelGradients scratch;
        return diagnosis_gradients(m, samples, labels, scratch);
    };

    const double step = 1e-5;
    double worst_rel = 0.0;
    std::size_t checked = 0;
    auto check = [&](auto access, const double* grad, std::size_t count) {
        for (std::size_t idx = 0; idx < count; ++idx) {
            DiagnosisModel plus = model, minus = model;
            *access(plus, idx) += step;
            *access(minus, idx) -= step;
            const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * step);
            const double rel =
                std::abs(fd - grad[idx]) / std::max(1e-8, std::abs(fd) + std::abs(grad[idx]));
            worst_rel = std::max(worst_rel, rel);
            ++checked;
        }
    };
    for (std::size_t l = 0; l < 2; ++l) {
        check([l](DiagnosisModel& m, std::size_t i) { return &m.dbn_normal.layers[l].weights.values()[i]; },
              grads.normal[l].weights.values().data(),
              model.dbn_normal.layers[l].weights.values().size());
        check([l](DiagnosisModel& m, std::size_t i) { return &m.dbn_normal.layers[l].hidden_bias[i]; },
              grads.normal[l].hidden_bias.data(), model.dbn_normal.layers[l].hidden_bias.size());
        check([l](DiagnosisModel& m, std::size_t i) { return &m.dbn_fault.layers[l].weights.values()[i]; },
              grads.fault[l].weights.values().data(),
              model.dbn_fault.layers[l].weights.values().size());
        check([l](DiagnosisModel& m, std::size_t i) { return &m.dbn_fault.layers[l].hidden_bias[i]; },
              grads.fault[l].hidden_bias.data(), model.dbn_fault.layers[l].hidden_bias.size());
    }
    check([](DiagnosisModel& m, std::size_t i) { return &m.head.hidden_weights.values()[i]; },
          grads.head.hidden_weights.values().data(), model.head.hidden_weights.values().size());
    check([](DiagnosisModel& m, std::size_t i) { return &m.head.hidden_bias[i]; },
          grads.head.hidden_bias.data(), model.head.hidden_bias.size());
    check([](DiagnosisModel& m, std::size_t i) { return &m.head.output_weights.values()[i]; },
          grads.head.output_weights.values().data(), model.head.output_weights.values().size());
    check([](DiagnosisModel& m, std::size_t i) { return &m.head.output_bias[i]; },
          grads.head.output_bias.data(), model.head.output_bias.size());

    std::ostringstream detail;
    detail << checked << " parameters, worst relative error " << worst_rel << " (tol 1e-4)";
    report("gradient-check", worst_rel <= 1e-4, detail.str());
}

// ---------------------------------------------------------------------------
// 6. Metric exactness: detection and identification metrics reproduce
//    brute-force counting exactly on 100 randomized prediction/label vectors;
//    confusion rows sum to class counts.
void criterion_metric_exactness() {
    Rng rng(600);
    bool exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng.next_u64() % 60;
        std::vector<std::uint8_t> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.bernoulli(0.5);
            truth[i] = rng.bernoulli(0.6);
        }
        std::size_t p = 0, q = 0, faulty = 0, normal = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (truth[i]) {
                ++faulty;
                p += pred[i] ? 1 : 0;
            } else {
                ++normal;
                q += pred[i] ? 1 : 0;
            }
        }
        const DetectionCounts counts = detection_metrics(pred, truth);
        exact = exact && counts.detected_faulty == p && counts.false_alarms == q &&
                counts.faulty_total == faulty && counts.normal_total == normal;
        if (faulty > 0)
            exact = exact && *counts.fdr_percent() ==
                                 100.0 * static_cast<double>(p) / static_cast<double>(faulty);
        if (normal > 0)
            exact = exact && *counts.far_percent() ==
                                 100.0 * static_cast<double>(q) / static_cast<double>(normal);

        std::vector<int> mpred(n), mtruth(n);
        for (std::size_t i = 0; i < n; ++i) {
            mpred[i] = static_cast<int>(rng.next_u64() % 21);
            mtruth[i] = static_cast<int>(rng.next_u64() % 21);
        }
        const IdentificationResult ident = identification_metrics(mpred, mtruth, 21);
        for (std::size_t cls = 0; cls < 21; ++cls) {
            std::size_t row = 0, expected = 0, diag = 0;
            for (std::size_t pcls = 0; pcls < 21; ++pcls) row += ident.confusion[cls][pcls];
            for (std::size_t i = 0; i < n; ++i) {
                if (mtruth[i] != static_cast<int>(cls)) continue;
                ++expected;
                if (mpred[i] == mtruth[i]) ++diag;
            }
            exact = exact && row == expected && ident.confusion[cls][cls] == diag;
            if (expected > 0)
                exact = exact &&
                        *ident.class_fdr_percent(cls) ==
                            100.0 * static_cast<double>(diag) / static_cast<double>(expected);
        }
    }
    report("metric-exactness", exact, "100 randomized trials, exact counting match");
}

// ---------------------------------------------------------------------------
// 7. End-to-end synthetic analogue of the reactor study: window 4, 28-15-8,
//    threshold 0.5, 3-sigma faults, 1200 train / 600 test rows per state.
//    The step fault must reach FDR >= 90% with overall FAR <= 15%. The
//    thresholds presume a separable construction, so the suite uses step
//    faults (a drift that ramps up from zero is inherently confusable with
//    normal operation near its onset and belongs to the preset instead).
void criterion_end_to_end() {
    const auto start = std::chrono::steady_clock::now();
    ProcessSpec train_spec = cstr_preset(99);
    train_spec.fault_specs = {
        {1, FaultKind::StepShift, {1}, 3.0},
        {2, FaultKind::StepShift, {2, 0}, 3.0},
        {3, FaultKind::StepShift, {3, 6}, 3.0},
    };
    ProcessSpec test_spec = train_spec;
    test_spec.duration = 600;
    test_spec.fault_onset = 100;
    test_spec.rng_seed = derive_seed(99, 12345);

    const auto train_suite = generate_suite(train_spec, train_spec.fault_specs);
    const auto test_suite = generate_suite(test_spec, test_spec.fault_specs);
    const PipelineData data =
        prepare_pipeline_data(train_suite, test_suite, 0.0, 4, LabelRule::LastTimestep, "cstr");

    PipelineConfig cfg;
    cfg.hidden_sizes = {15, 8};
    cfg.pretrain_epochs = 20;
    cfg.finetune_epochs = 60;
    cfg.batch_size = 64;
    cfg.sampler.kind = SamplerKind::Cd;
    cfg.threshold = 0.5;
    cfg.seed = 7;

    const DetectionOutcome outcome = run_detection_pipeline(data, cfg);
    std::optional<double> step_fdr;
    for (const auto& [fault, counts] : outcome.report.per_fault)
        if (fault == 3) step_fdr = counts.fdr_percent();
    const auto far = outcome.report.overall.far_percent();
    const double elapsed = seconds_since(start);

    std::ostringstream detail;
    detail << "step-fault FDR " << (step_fdr ? *step_fdr : -1.0) << "% (need >= 90), FAR "
           << (far ? *far : -1.0) << "% (need <= 15); " << elapsed << " s (budget 600)";
    report("end-to-end-synthetic",
           step_fdr && *step_fdr >= 90.0 && far && *far <= 15.0 && elapsed <= 600.0,
           detail.str());
}

// ---------------------------------------------------------------------------
// 8. Sampler-convergence analogue: on the crafted strong-weight RBM, CD-1's
//    expectation bias exceeds the equilibrated annealer's at matched sample
//    count, and the anneal-trained run reaches the exact run's epoch-50 loss
//    in no more epochs than CD-1, across 3 seeds.
void criterion_sampler_advantage() {
    const RbmParams crafted = testutil::crafted_strong_rbm(2.0);
    const ExpectationEstimate oracle = exact_expectations(crafted);

    const Matrix bias_batch = testutil::corner_batch(10000);
    const double cd_bias =
        testutil::linf_gap(cd_expectations(crafted, bias_batch, 1, 31), oracle);
    AnnealConfig bias_cfg;
    bias_cfg.reads = 10000;
    bias_cfg.sweeps_per_read = 300;
    bias_cfg.hold_sweeps = 200;
    bias_cfg.rng_seed = 17;
    const double anneal_bias = testutil::linf_gap(
        expectations_from_samples(anneal_sample(crafted, bias_cfg)), oracle);

    Matrix anti(200, 2);
    for (std::size_t r = 0; r < 200; ++r) {
        anti(r, 0) = (r % 2) ? 1.0 : 0.0;
        anti(r, 1) = (r % 2) ? 0.0 : 1.0;
    }
    bool curves_ok = true;
    std::ostringstream curve_detail;
    for (std::uint64_t seed : {11, 22, 33}) {
        TrainingConfig base;
        base.learning_rate = 0.2;
        base.momentum = 1.0;
        base.epochs = 200;
        base.batch_size = 200;
        base.rng_seed = seed;
        SamplerConfig exact_cfg;
        exact_cfg.kind = SamplerKind::Exact;
        SamplerConfig cd_cfg;
        cd_cfg.kind = SamplerKind::Cd;
        SamplerConfig anneal_cfg;
        anneal_cfg.kind = SamplerKind::Anneal;
        anneal_cfg.anneal.reads = 500;
        anneal_cfg.anneal.sweeps_per_read = 60;
        anneal_cfg.anneal.hold_sweeps = 60;
        const SamplerComparison cmp =
            sampler_comparison(crafted, anti, {exact_cfg, cd_cfg, anneal_cfg}, base, 50);
        const auto& cd_reach = cmp.runs[1].epochs_to_target;
        const auto& anneal_reach = cmp.runs[2].epochs_to_target;
        const bool ok =
            anneal_reach && (!cd_reach || *anneal_reach <= *cd_reach);
        curves_ok = curves_ok && ok;
        curve_detail << "seed " << seed << ": anneal "
                     << (anneal_reach ? static_cast<int>(*anneal_reach) : -1) << " vs cd "
                     << (cd_reach ? static_cast<int>(*cd_reach) : -1) << "; ";
    }

    std::ostringstream detail;
    detail << "cd-1 bias " << cd_bias << " (> 0.01), anneal bias " << anneal_bias
           << " (< cd-1); " << curve_detail.str();
    report("sampler-advantage", cd_bias > 0.01 && anneal_bias < cd_bias && curves_ok,
           detail.str());
}

// ---------------------------------------------------------------------------
// 9. Determinism: every command, re-run from its echoed config, reproduces
//    its artifact files byte-for-byte.

std::map<std::string, std::string> snapshot_dir(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::stringstream body;
        body << in.rdbuf();
        files[fs::relative(entry.path(), dir).string()] = body.str();
    }
    return files;
}

void criterion_determinism(const std::string& cli) {
    const fs::path root = fs::temp_directory_path() / "qdiag_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);

    auto run = [&](const std::string& args) {
        const std::string command = cli + " " + args + " > /dev/null 2>&1";
        return std::system(command.c_str());
    };
    const std::string data_dir = (root / "data").string();
    const std::string test_dir = (root / "test").string();

    bool all_ok = true;
    std::ostringstream detail;

    // Small suites every later command consumes.
    all_ok = run("synth --preset cstr --seed 5 --duration 150 --onset 40 --out " + data_dir) == 0 &&
             run("synth --preset cstr --seed 6 --duration 90 --onset 30 --out " + test_dir) == 0;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"synth", "synth --preset cstr --seed 7 --duration 120 --onset 30 --out " +
                      (root / "c_synth").string()},
        {"pretrain", "pretrain --data " + data_dir + " --out " + (root / "c_pre").string() +
                         " --seed 3 --window 2 --arch 6,4 --epochs 2 --batch 32"},
        {"finetune", "finetune --data " + data_dir + " --models " + (root / "c_pre").string() +
                         " --out " + (root / "c_fine").string() +
                         " --seed 4 --window 2 --epochs 3 --batch 32"},
        {"detect", "detect --model " + (root / "c_fine" / "diagnosis.model").string() +
                       " --data " + test_dir + " --out " + (root / "c_det").string() +
                       " --window 2"},
        {"identify", "identify --data " + data_dir + " --test-data " + test_dir + " --out " +
                         (root / "c_id").string() +
                         " --seed 5 --window 2 --arch 6,4 --epochs 1 --finetune-epochs 3 "
                         "--global-epochs 10 --batch 32"},
        {"grid", "grid --data " + data_dir + " --test-data " + test_dir + " --out " +
                     (root / "c_grid").string() +
                     " --seed 6 --window 2 --axis1 4,5 --axis2 3 --epochs 1 "
                     "--finetune-epochs 2 --batch 32"},
        {"compare-samplers", "compare-samplers --data " + data_dir + " --out " +
                                 (root / "c_cmp").string() +
                                 " --seed 7 --window 2 --arch 6,4 --epochs 8 --batch 32 "
                                 "--samplers exact,cd,anneal --reads 50 --sweeps 20 --hold 5 "
                                 "--target-epoch 5"},
        {"export-qubo", "export-qubo --model " + (root / "c_pre" / "dbn_normal.dbn").string() +
                            " --out " + (root / "c_qubo").string()},
        {"energy-hist", "energy-hist --model " + (root / "c_pre" / "dbn_normal.dbn").string() +
                            " --out " + (root / "c_hist").string() +
                            " --seed 8 --reads 200 --sweeps 20 --hold 5 --bins 12"},
    };
    const std::vector<fs::path> out_dirs = {
        root / "c_synth", root / "c_pre", root / "c_fine", root / "c_det", root / "c_id",
        root / "c_grid", root / "c_cmp",  root / "c_qubo", root / "c_hist"};

    for (std::size_t i = 0; all_ok && i < commands.size(); ++i) {
        const auto& [name, args] = commands[i];
        if (run(args) != 0) {
            all_ok = false;
            detail << name << ": first run failed; ";
            break;
        }
        const auto before = snapshot_dir(out_dirs[i]);
        const std::string rerun = name + " --config " +
                                  (out_dirs[i] / "config_echo.cfg").string();
        if (run(rerun) != 0) {
            all_ok = false;
            detail << name << ": rerun failed; ";
            break;
        }
        const auto after = snapshot_dir(out_dirs[i]);
        if (before != after) {
            all_ok = false;
            detail << name << ": artifacts differ after rerun; ";
            break;
        }
        detail << name << " ok (" << before.size() << " files); ";
    }
    report("determinism", all_ok, detail.str());
}

}  // namespace

int main(int argc, char** argv) {
    std::cout << "acceptance suite" << std::endl;
    criterion_oracle_equivalence();
    criterion_boltzmann_fidelity();
    criterion_scaling_energy();
    criterion_likelihood_ascent();
    criterion_gradient_check();
    criterion_metric_exactness();
    criterion_end_to_end();
    criterion_sampler_advantage();
    if (argc > 1) {
        criterion_determinism(argv[1]);
    } else {
        report("determinism", false, "CLI binary path not supplied (argv[1])");
    }
    std::cout << (g_failures == 0 ? "all criteria passed" : "criteria failed") << std::endl;
    return g_failures == 0 ? 0 : 1;
}
