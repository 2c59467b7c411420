#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdiag/error.hpp"
#include "qdiag/matrix.hpp"

namespace qdiag {

/// %.17g rendering; round-trips 64-bit floats exactly.
inline std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

/// A recorded multivariate time series: T rows of d process variables with a
/// per-timestep state label (0 = normal, f >= 1 = fault id).
struct RawSeries {
    Matrix values;                           // T x d
    std::vector<int> labels;                 // length T
    std::vector<std::string> variable_names; // length d
    double sampling_interval = 1.0;          // minutes

    std::size_t timesteps() const { return values.rows(); }
    std::size_t dims() const { return values.cols(); }

    void validate() const {
        if (labels.size() != values.rows())
            throw DimensionError("labels length " + std::to_string(labels.size()) +
                                 " does not match timestep count " +
                                 std::to_string(values.rows()));
        if (variable_names.size() != values.cols())
            throw DimensionError("variable_names length " +
                                 std::to_string(variable_names.size()) +
                                 " does not match variable count " +
                                 std::to_string(values.cols()));
        if (!values.all_finite()) throw NumericError("series contains non-finite values");
        for (int l : labels)
            if (l < 0) throw Error("labels must be non-negative");
    }
};

/// Per-variable zero-mean / unit-variance transform, fitted on training data
/// only. Population standard deviation; constant columns store std 1 so they
/// map to exactly zero. Applying a fitted normalizer twice is not the
/// identity: fit once, apply everywhere.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Fits column statistics. Columns with raw std below 1e-12 are treated as
/// constant.
inline Normalizer fit_normalizer(const RawSeries& train) {
    if (train.timesteps() == 0) throw Error("fit_normalizer: empty series");
    const std::size_t d = train.dims();
    const std::size_t t = train.timesteps();
    Normalizer norm;
    norm.mean.assign(d, 0.0);
    norm.std.assign(d, 0.0);
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < d; ++c) norm.mean[c] += train.values(r, c);
    for (double& m : norm.mean) m /= static_cast<double>(t);
    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = train.values(r, c) - norm.mean[c];
            norm.std[c] += dev * dev;
        }
    for (double& s : norm.std) {
        s = std::sqrt(s / static_cast<double>(t));
        if (s < 1e-12) s = 1.0;
    }
    return norm;
}

inline RawSeries apply_normalizer(const Normalizer& norm, const RawSeries& series) {
    if (norm.mean.size() != series.dims())
        throw DimensionError("normalizer has " + std::to_string(norm.mean.size()) +
                             " columns, series has " + std::to_string(series.dims()));
    RawSeries out = series;
    for (std::size_t r = 0; r < out.timesteps(); ++r)
        for (std::size_t c = 0; c < out.dims(); ++c)
            out.values(r, c) = (out.values(r, c) - norm.mean[c]) / norm.std[c];
    return out;
}

enum class LabelRule { LastTimestep, AnyFaulty };

/// Stride-1 sliding windows flattened timestep-major: sample s is
/// [row_s, row_{s+1}, ..., row_{s+N-1}], each timestep's variables contiguous.
struct WindowedDataset {
    Matrix samples;           // (T-N+1) x (N*d)
    std::vector<int> labels;
    std::size_t window_length = 0;
    std::size_t source_dims = 0;
};

/// Window labels follow `rule`: the last timestep's label (default, matches
/// online detection), or the most recent faulty label inside the window.
inline WindowedDataset window(const RawSeries& series, std::size_t n,
                              LabelRule rule = LabelRule::LastTimestep) {
    if (n < 1) throw Error("window length must be >= 1");
    if (n > series.timesteps())
        throw DimensionError("window length " + std::to_string(n) + " exceeds series length " +
                             std::to_string(series.timesteps()));
    const std::size_t d = series.dims();
    const std::size_t count = series.timesteps() - n + 1;
    WindowedDataset out;
    out.window_length = n;
    out.source_dims = d;
    out.samples = Matrix(count, n * d);
    out.labels.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t t = 0; t < n; ++t)
            for (std::size_t c = 0; c < d; ++c)
                out.samples(s, t * d + c) = series.values(s + t, c);
        if (rule == LabelRule::LastTimestep) {
            out.labels[s] = series.labels[s + n - 1];
        } else {
            int label = 0;
            for (std::size_t t = n; t-- > 0;) {
                if (series.labels[s + t] != 0) {
                    label = series.labels[s + t];
                    break;
                }
            }
            out.labels[s] = label;
        }
    }
    return out;
}

/// Chronological split of the raw rows; windows are built per side afterwards
/// so none straddles the boundary.
inline std::pair<RawSeries, RawSeries> split_series(const RawSeries& series, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw Error("split ratio must lie in (0, 1)");
    const std::size_t t = series.timesteps();
    const std::size_t cut = static_cast<std::size_t>(ratio * static_cast<double>(t));
    if (cut == 0 || cut >= t)
        throw Error("degenerate split: " + std::to_string(cut) + " / " +
                    std::to_string(t - cut) + " rows");
    RawSeries train, test;
    train.values = series.values.slice_rows(0, cut);
    test.values = series.values.slice_rows(cut, t);
    train.labels.assign(series.labels.begin(), series.labels.begin() + cut);
    test.labels.assign(series.labels.begin() + cut, series.labels.end());
    train.variable_names = series.variable_names;
    test.variable_names = series.variable_names;
    train.sampling_interval = series.sampling_interval;
    test.sampling_interval = series.sampling_interval;
    return {std::move(train), std::move(test)};
}

// --- CSV ----------------------------------------------------------------------
// Comma-separated, header row of variable names, optional trailing `label`
// column of integer states, `.` decimal separator.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell += ch;
        }
    }
    cells.push_back(cell);
    return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path, std::size_t row,
                         std::size_t col) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    const double value = std::strtod(begin, &end);
    if (end == begin || *end != '\0' || !std::isfinite(value))
        throw ParseError(path + ": non-numeric cell at row " + std::to_string(row) +
                         ", column " + std::to_string(col) + ": `" + cell + "`");
    return value;
}

}  // namespace detail

inline RawSeries load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    std::vector<std::string> header = detail::split_csv_line(line);
    const bool has_label = !header.empty() && header.back() == "label";
    if (has_label) header.pop_back();
    if (header.empty()) throw ParseError(path + ": header declares no variables");

    RawSeries series;
    series.variable_names = header;
    const std::size_t d = header.size();
    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;  // 1-based data row, header excluded
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row_no;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        const std::size_t expected = d + (has_label ? 1 : 0);
        if (cells.size() != expected)
            throw ParseError(path + ": row " + std::to_string(row_no) + " has " +
                             std::to_string(cells.size()) + " cells, expected " +
                             std::to_string(expected));
        std::vector<double> row(d);
        for (std::size_t c = 0; c < d; ++c)
            row[c] = detail::parse_cell(cells[c], path, row_no, c + 1);
        if (has_label) {
            const double l = detail::parse_cell(cells[d], path, row_no, d + 1);
            if (l < 0.0 || l != std::floor(l))
                throw ParseError(path + ": row " + std::to_string(row_no) +
                                 ": label must be a non-negative integer");
            series.labels.push_back(static_cast<int>(l));
        } else {
            series.labels.push_back(0);
        }
        rows.push_back(std::move(row));
    }
    series.values = Matrix(rows.size(), d);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) series.values(r, c) = rows[r][c];
    series.validate();
    return series;
}

inline void save_csv(const std::string& path, const RawSeries& series,
                     bool write_labels = true) {
    series.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (std::size_t c = 0; c < series.dims(); ++c) {
        if (c) out << ',';
        out << series.variable_names[c];
    }
    if (write_labels) out << ",label";
    out << '\n';
    for (std::size_t r = 0; r < series.timesteps(); ++r) {
        for (std::size_t c = 0; c < series.dims(); ++c) {
            if (c) out << ',';
            out << format_real(series.values(r, c));
        }
        if (write_labels) out << ',' << series.labels[r];
        out << '\n';
    }
}

}  // namespace qdiag
