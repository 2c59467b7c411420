#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qdiag/data.hpp"
#include "qdiag/rng.hpp"

namespace qdiag {

enum class FaultKind { SensorDrift, SlowDecay, StepShift, RandomWalk };

inline const char* fault_kind_name(FaultKind kind) {
    switch (kind) {
        case FaultKind::SensorDrift: return "sensor_drift";
        case FaultKind::SlowDecay: return "slow_decay";
        case FaultKind::StepShift: return "step_shift";
        case FaultKind::RandomWalk: return "random_walk";
    }
    return "?";
}

/// One injected fault. `magnitude` is expressed in units of the affected
/// variable's normal-regime standard deviation (for SlowDecay it is the
/// fraction of gain lost by the end of the series).
struct FaultSpec {
    int fault_id = 1;
    FaultKind kind = FaultKind::StepShift;
    std::vector<std::size_t> affected_variables;
    double magnitude = 3.0;
};

/// Synthetic process description: AR(1) fluctuations around a steady state.
/// `noise_std` is the stationary standard deviation of each variable (the
/// innovation scale is derived from it), which makes fault magnitudes in
/// sigma units exact.
struct ProcessSpec {
    std::size_t variable_count = 0;
    std::vector<double> steady_state;
    std::vector<double> noise_std;
    double ar_coefficient = 0.9;
    std::vector<FaultSpec> fault_specs;
    std::size_t duration = 1200;
    std::size_t fault_onset = 200;
    std::uint64_t rng_seed = 0;
    double sampling_interval = 1.0;

    void validate() const {
        if (variable_count == 0) throw Error("synth: variable_count must be positive");
        if (steady_state.size() != variable_count)
            throw DimensionError("steady_state length " + std::to_string(steady_state.size()) +
                                 " does not match variable_count " +
                                 std::to_string(variable_count));
        if (noise_std.size() != variable_count)
            throw DimensionError("noise_std length " + std::to_string(noise_std.size()) +
                                 " does not match variable_count " +
                                 std::to_string(variable_count));
        for (double s : noise_std)
            if (s < 0.0) throw Error("synth: noise_std must be non-negative");
        if (!(ar_coefficient >= 0.0 && ar_coefficient < 1.0))
            throw Error("synth: ar_coefficient must lie in [0, 1)");
        if (fault_onset >= duration)
            throw Error("synth: fault_onset " + std::to_string(fault_onset) +
                        " must precede duration " + std::to_string(duration));
        for (const FaultSpec& f : fault_specs) {
            if (f.fault_id < 1) throw Error("synth: fault_id must be >= 1");
            for (std::size_t idx : f.affected_variables)
                if (idx >= variable_count)
                    throw Error("synth: fault " + std::to_string(f.fault_id) +
                                " touches variable " + std::to_string(idx) + ", only " +
                                std::to_string(variable_count) + " exist");
        }
    }
};

/// Seeded AR(1) series with the requested faults applied after the onset.
/// The base fluctuations depend only on (dimensions, dynamics, seed), so a
/// zero-magnitude fault yields values identical to the no-fault series while
/// still carrying fault labels.
inline RawSeries generate(const ProcessSpec& spec) {
    spec.validate();
    const std::size_t d = spec.variable_count;
    const std::size_t t_total = spec.duration;

    RawSeries series;
    series.values = Matrix(t_total, d);
    series.labels.assign(t_total, 0);
    series.sampling_interval = spec.sampling_interval;
    series.variable_names.resize(d);
    for (std::size_t c = 0; c < d; ++c) series.variable_names[c] = "var" + std::to_string(c + 1);

    // Innovations scaled so the stationary std equals noise_std.
    Rng rng(derive_seed(spec.rng_seed, 1));
    const double innovation_scale = std::sqrt(1.0 - spec.ar_coefficient * spec.ar_coefficient);
    std::vector<double> x(d);
    for (std::size_t c = 0; c < d; ++c) x[c] = spec.steady_state[c] + spec.noise_std[c] * rng.normal();
    for (std::size_t r = 0; r < t_total; ++r) {
        for (std::size_t c = 0; c < d; ++c) {
            if (r > 0)
                x[c] = spec.steady_state[c] +
                       spec.ar_coefficient * (x[c] - spec.steady_state[c]) +
                       spec.noise_std[c] * innovation_scale * rng.normal();
            series.values(r, c) = x[c];
        }
    }

    const std::size_t onset = spec.fault_onset;
    const double span = static_cast<double>(t_total - onset);
    for (const FaultSpec& fault : spec.fault_specs) {
        Rng walk_rng(derive_seed(spec.rng_seed, 0x77616c6bULL + static_cast<std::uint64_t>(fault.fault_id)));
        for (std::size_t c : fault.affected_variables) {
            const double sigma = spec.noise_std[c];
            double walk = 0.0;
            const double walk_step = fault.magnitude * sigma / std::sqrt(span);
            for (std::size_t r = onset; r < t_total; ++r) {
                const double progress = static_cast<double>(r - onset) / span;
                switch (fault.kind) {
                    case FaultKind::SensorDrift:
                        series.values(r, c) += fault.magnitude * progress * sigma;
                        break;
                    case FaultKind::SlowDecay:
                        series.values(r, c) *= 1.0 - fault.magnitude * progress;
                        break;
                    case FaultKind::StepShift:
                        series.values(r, c) += fault.magnitude * sigma;
                        break;
                    case FaultKind::RandomWalk:
                        walk += walk_step * walk_rng.normal();
                        series.values(r, c) += walk;
                        break;
                }
            }
        }
        for (std::size_t r = onset; r < t_total; ++r) series.labels[r] = fault.fault_id;
    }
    return series;
}

struct SuiteMember {
    std::string name;
    int fault_id = 0;  // 0 = normal
    std::size_t onset = 0;
    RawSeries series;
};

/// One normal series plus one series per fault, all sharing the base spec's
/// normal-regime statistics. Member seeds are derived from the base seed and
/// the fault id.
inline std::vector<SuiteMember> generate_suite(const ProcessSpec& base,
                                               const std::vector<FaultSpec>& faults) {
    for (std::size_t a = 0; a < faults.size(); ++a)
        for (std::size_t b = a + 1; b < faults.size(); ++b)
            if (faults[a].fault_id == faults[b].fault_id)
                throw Error("generate_suite: duplicate fault_id " +
                            std::to_string(faults[a].fault_id));
    std::vector<SuiteMember> suite;
    suite.reserve(faults.size() + 1);

    ProcessSpec normal = base;
    normal.fault_specs.clear();
    normal.rng_seed = derive_seed(base.rng_seed, 0);
    suite.push_back({"normal", 0, base.fault_onset, generate(normal)});

    for (const FaultSpec& fault : faults) {
        ProcessSpec spec = base;
        spec.fault_specs = {fault};
        spec.rng_seed = derive_seed(base.rng_seed, static_cast<std::uint64_t>(fault.fault_id));
        suite.push_back({"fault" + std::to_string(fault.fault_id), fault.fault_id,
                         base.fault_onset, generate(spec)});
    }
    return suite;
}

/// Writes each member as `<name>.csv` plus a `manifest.csv` index
/// (`name,path,fault_id,onset`).
inline void write_suite(const std::string& dir, const std::vector<SuiteMember>& suite) {
    std::ofstream manifest(dir + "/manifest.csv");
    if (!manifest) throw IoError("cannot open " + dir + "/manifest.csv for writing");
    manifest << "name,path,fault_id,onset\n";
    for (const SuiteMember& member : suite) {
        const std::string filename = member.name + ".csv";
        save_csv(dir + "/" + filename, member.series);
        manifest << member.name << ',' << filename << ',' << member.fault_id << ','
                 << member.onset << '\n';
    }
}

/// Reads a manifest written by write_suite and loads every member.
inline std::vector<SuiteMember> load_suite(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    std::string dir = manifest_path;
    const std::size_t slash = dir.find_last_of('/');
    dir = slash == std::string::npos ? std::string(".") : dir.substr(0, slash);

    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line) !=
                                       std::vector<std::string>{"name", "path", "fault_id",
                                                                "onset"})
        throw ParseError(manifest_path + ": expected header `name,path,fault_id,onset`");
    std::vector<SuiteMember> suite;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row_no;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != 4)
            throw ParseError(manifest_path + ": row " + std::to_string(row_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected 4");
        SuiteMember member;
        member.name = cells[0];
        member.fault_id = static_cast<int>(detail::parse_cell(cells[2], manifest_path, row_no, 3));
        member.onset =
            static_cast<std::size_t>(detail::parse_cell(cells[3], manifest_path, row_no, 4));
        member.series = load_csv(dir + "/" + cells[1]);
        suite.push_back(std::move(member));
    }
    if (suite.empty()) throw ParseError(manifest_path + ": no members");
    return suite;
}

// --- presets -------------------------------------------------------------------

/// Seven-variable reactor-style preset: drift, decay and step faults.
inline ProcessSpec cstr_preset(std::uint64_t seed) {
    ProcessSpec spec;
    spec.variable_count = 7;
    spec.steady_state = {2.5, 320.0, 0.9, 310.0, 100.0, 5.0, 50.0};
    spec.noise_std = {0.05, 1.5, 0.02, 1.2, 0.8, 0.1, 0.5};
    spec.ar_coefficient = 0.9;
    spec.duration = 1200;
    spec.fault_onset = 200;
    spec.rng_seed = seed;
    spec.fault_specs = {
        {1, FaultKind::SensorDrift, {1}, 3.0},
        {2, FaultKind::SlowDecay, {2, 0}, 0.5},
        {3, FaultKind::StepShift, {3, 6}, 3.0},
    };
    return spec;
}

/// 52-variable plant-style preset with twenty faults of mixed kinds.
/// The plant description (steady states, noise levels, fault wiring) is
/// fixed; `seed` only drives the recorded noise realization, so train and
/// test suites generated with different seeds describe the same plant.
inline ProcessSpec te_preset(std::uint64_t seed) {
    ProcessSpec spec;
    spec.variable_count = 52;
    spec.steady_state.assign(52, 0.0);
    spec.noise_std.assign(52, 1.0);
    Rng plant_rng(0x7465);
    for (std::size_t c = 0; c < 52; ++c) {
        spec.steady_state[c] = 10.0 + 5.0 * plant_rng.normal();
        spec.noise_std[c] = 0.5 + 0.5 * plant_rng.uniform();
    }
    spec.ar_coefficient = 0.85;
    spec.duration = 1200;
    spec.fault_onset = 200;
    spec.rng_seed = seed;
    for (int f = 1; f <= 20; ++f) {
        FaultSpec fault;
        fault.fault_id = f;
        const FaultKind kinds[4] = {FaultKind::StepShift, FaultKind::SensorDrift,
                                    FaultKind::RandomWalk, FaultKind::SlowDecay};
        fault.kind = kinds[(f - 1) % 4];
        fault.affected_variables = {static_cast<std::size_t>((f * 5) % 52),
                                    static_cast<std::size_t>((f * 11 + 3) % 52)};
        fault.magnitude = fault.kind == FaultKind::SlowDecay ? 0.5 : 3.0;
        spec.fault_specs.push_back(fault);
    }
    return spec;
}

}  // namespace qdiag
