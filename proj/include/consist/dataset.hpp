#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <iterator>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "consist/error.hpp"
#include "consist/matrix.hpp"
#include "consist/random.hpp"

namespace consist {

/// Feature matrix with optional binary outlier labels (1 = outlier).
///
/// `row_ids` records the original row index of every row so that results
/// computed on a shuffled copy can be mapped back to input order.
struct LabeledDataset {
    Matrix features;
    std::optional<std::vector<std::uint8_t>> labels;
    std::vector<std::string> column_names;
    std::vector<std::size_t> row_ids;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t dims() const noexcept { return features.cols(); }
    bool has_labels() const noexcept { return labels.has_value(); }

    std::size_t positives() const noexcept {
        if (!labels) {
            return 0;
        }
        return static_cast<std::size_t>(std::count(labels->begin(), labels->end(), std::uint8_t{1}));
    }

    /// Throws StructuralError if the members disagree on n or d, or if
    /// labels / entries are out of domain.
    void validate() const {
        if (column_names.size() != dims()) {
            throw StructuralError("dataset has " + std::to_string(dims()) + " columns but " +
                                  std::to_string(column_names.size()) + " column names");
        }
        if (row_ids.size() != size()) {
            throw StructuralError("dataset has " + std::to_string(size()) + " rows but " +
                                  std::to_string(row_ids.size()) + " row ids");
        }
        if (labels) {
            if (labels->size() != size()) {
                throw StructuralError("label vector has length " + std::to_string(labels->size()) +
                                      ", expected " + std::to_string(size()));
            }
            for (auto v : *labels) {
                if (v > 1) {
                    throw StructuralError("labels must be 0 or 1");
                }
            }
        }
        for (double v : features.values()) {
            if (!std::isfinite(v)) {
                throw StructuralError("dataset contains a non-finite value");
            }
        }
    }
};

/// Builds a dataset from a matrix with generated column names and identity row ids.
inline LabeledDataset make_dataset(Matrix features, std::optional<std::vector<std::uint8_t>> labels = std::nullopt) {
    LabeledDataset ds;
    ds.column_names.reserve(features.cols());
    for (std::size_t j = 0; j < features.cols(); ++j) {
        ds.column_names.push_back("col" + std::to_string(j));
    }
    ds.row_ids.resize(features.rows());
    std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Delimited text input / output
// ---------------------------------------------------------------------------

struct CsvOptions {
    /// Field separator. ' ' means "any run of blanks/tabs".
    char delimiter = ',';
    bool header = true;
    /// Column to split out as the 0/1 label vector. Without a header, columns
    /// are addressable as col0, col1, ...
    std::optional<std::string> label_column;
};

namespace detail {

struct CsvRecord {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

inline std::string_view trim(std::string_view s) noexcept {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

/// Splits RFC-4180 style text into records. Quoted fields may contain the
/// delimiter, doubled quotes and line breaks. Blank lines are skipped.
inline std::vector<CsvRecord> split_records(std::string_view text, char delimiter) {
    std::vector<CsvRecord> records;
    const bool blanks = delimiter == ' ';
    std::size_t line = 1;
    std::size_t pos = 0;
    while (pos < text.size()) {
        CsvRecord rec;
        rec.line = line;
        std::string field;
        bool quoted_field = false;
        bool in_field = false;
        bool done = false;
        while (!done) {
            if (pos >= text.size()) {
                done = true;
                break;
            }
            const char c = text[pos];
            if (c == '"' && !in_field) {
                quoted_field = true;
                in_field = true;
                ++pos;
                while (true) {
                    if (pos >= text.size()) {
                        throw ParseError("line " + std::to_string(rec.line) + ": unterminated quoted field");
                    }
                    const char q = text[pos];
                    if (q == '"') {
                        if (pos + 1 < text.size() && text[pos + 1] == '"') {
                            field.push_back('"');
                            pos += 2;
                            continue;
                        }
                        ++pos;
                        break;
                    }
                    if (q == '\n') {
                        ++line;
                    }
                    field.push_back(q);
                    ++pos;
                }
                continue;
            }
            if (c == '\n' || (c == '\r' && pos + 1 < text.size() && text[pos + 1] == '\n')) {
                pos += c == '\r' ? 2 : 1;
                ++line;
                done = true;
                break;
            }
            const bool separator = blanks ? (c == ' ' || c == '\t') : c == delimiter;
            if (separator) {
                if (blanks) {
                    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) {
                        ++pos;
                    }
                    if (in_field || quoted_field) {
                        rec.fields.push_back(std::move(field));
                    }
                } else {
                    ++pos;
                    rec.fields.push_back(std::move(field));
                }
                field.clear();
                quoted_field = false;
                in_field = false;
                continue;
            }
            if (!(c == ' ' || c == '\t' || c == '\r') || in_field) {
                in_field = true;
            }
            if (in_field) {
                field.push_back(c);
            }
            ++pos;
        }
        if (in_field || quoted_field || (!blanks && !rec.fields.empty())) {
            rec.fields.push_back(std::move(field));
        }
        bool blank = rec.fields.empty() || (rec.fields.size() == 1 && trim(rec.fields[0]).empty());
        if (!blank) {
            records.push_back(std::move(rec));
        }
    }
    return records;
}

inline double parse_cell(std::string_view raw, std::size_t line, std::size_t column) {
    const std::string_view cell = trim(raw);
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw ParseError("line " + std::to_string(line) + ", column " + std::to_string(column + 1) +
                         ": cannot parse '" + std::string(cell) + "' as a finite number");
    }
    return value;
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Parses a rectangular numeric table.
inline LabeledDataset read_csv(std::istream& in, const CsvOptions& options = {}) {
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    auto records = detail::split_records(text, options.delimiter);
    if (records.empty()) {
        throw StructuralError("input contains no rows");
    }

    std::vector<std::string> names;
    std::size_t first_data = 0;
    const std::size_t width = records.front().fields.size();
    if (options.header) {
        for (const auto& f : records.front().fields) {
            names.emplace_back(detail::trim(f));
        }
        first_data = 1;
    } else {
        for (std::size_t j = 0; j < width; ++j) {
            names.push_back("col" + std::to_string(j));
        }
    }

    std::optional<std::size_t> label_index;
    if (options.label_column) {
        const auto it = std::find(names.begin(), names.end(), *options.label_column);
        if (it == names.end()) {
            throw ConfigError("label column '" + *options.label_column + "' not found");
        }
        label_index = static_cast<std::size_t>(it - names.begin());
    }

    const std::size_t n = records.size() - first_data;
    const std::size_t d = width - (label_index ? 1 : 0);
    std::vector<double> values;
    values.reserve(n * d);
    std::vector<std::uint8_t> labels;
    if (label_index) {
        labels.reserve(n);
    }

    for (std::size_t r = first_data; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.fields.size() != width) {
            throw StructuralError("line " + std::to_string(rec.line) + ": expected " + std::to_string(width) +
                                  " fields, found " + std::to_string(rec.fields.size()));
        }
        for (std::size_t j = 0; j < width; ++j) {
            const double v = detail::parse_cell(rec.fields[j], rec.line, j);
            if (label_index && j == *label_index) {
                if (v != 0.0 && v != 1.0) {
                    throw ParseError("line " + std::to_string(rec.line) + ", column " + std::to_string(j + 1) +
                                     ": label must be 0 or 1");
                }
                labels.push_back(static_cast<std::uint8_t>(v));
            } else {
                values.push_back(v);
            }
        }
    }

    LabeledDataset ds;
    ds.features = Matrix(n, d, std::move(values));
    if (label_index) {
        names.erase(names.begin() + static_cast<std::ptrdiff_t>(*label_index));
        ds.labels = std::move(labels);
    }
    ds.column_names = std::move(names);
    ds.row_ids.resize(n);
    std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
    return ds;
}

inline LabeledDataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    return read_csv(in, options);
}

/// Writes features (shortest round-trip formatting) followed by the label
/// column, if present, under `label_name`.
inline void write_csv(std::ostream& out, const LabeledDataset& ds, char delimiter = ',',
                      const std::string& label_name = "label") {
    for (std::size_t j = 0; j < ds.dims(); ++j) {
        if (j != 0) {
            out << delimiter;
        }
        out << ds.column_names[j];
    }
    if (ds.labels) {
        out << (ds.dims() ? std::string(1, delimiter) : std::string()) << label_name;
    }
    out << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto row = ds.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j != 0) {
                out << delimiter;
            }
            out << detail::format_double(row[j]);
        }
        if (ds.labels) {
            out << (ds.dims() ? std::string(1, delimiter) : std::string()) << int((*ds.labels)[i]);
        }
        out << '\n';
    }
}

inline void save_csv(const std::filesystem::path& path, const LabeledDataset& ds, char delimiter = ',',
                     const std::string& label_name = "label") {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    write_csv(out, ds, delimiter, label_name);
}

// ---------------------------------------------------------------------------
// Column selection and normalization
// ---------------------------------------------------------------------------

/// Removes the named columns. Unknown names are a ConfigError.
inline LabeledDataset drop_columns(const LabeledDataset& ds, std::span<const std::string> names) {
    std::vector<bool> keep(ds.dims(), true);
    for (const auto& name : names) {
        const auto it = std::find(ds.column_names.begin(), ds.column_names.end(), name);
        if (it == ds.column_names.end()) {
            throw ConfigError("cannot drop unknown column '" + name + "'");
        }
        keep[static_cast<std::size_t>(it - ds.column_names.begin())] = false;
    }
    const auto kept = static_cast<std::size_t>(std::count(keep.begin(), keep.end(), true));
    LabeledDataset out;
    out.features = Matrix(ds.size(), kept);
    for (std::size_t j = 0; j < ds.dims(); ++j) {
        if (keep[j]) {
            out.column_names.push_back(ds.column_names[j]);
        }
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto src = ds.features.row(i);
        auto dst = out.features.row(i);
        std::size_t c = 0;
        for (std::size_t j = 0; j < ds.dims(); ++j) {
            if (keep[j]) {
                dst[c++] = src[j];
            }
        }
    }
    out.labels = ds.labels;
    out.row_ids = ds.row_ids;
    return out;
}

enum class Normalization { none, zscore, minmax };

inline std::string_view to_string(Normalization scheme) noexcept {
    switch (scheme) {
        case Normalization::none: return "none";
        case Normalization::zscore: return "zscore";
        case Normalization::minmax: return "minmax";
    }
    return "none";
}

inline Normalization parse_normalization(std::string_view name) {
    if (name == "zscore") return Normalization::zscore;
    if (name == "minmax") return Normalization::minmax;
    if (name == "none") return Normalization::none;
    throw ConfigError("unknown normalization scheme '" + std::string(name) + "'");
}

/// Per-column normalization. zscore uses the population standard deviation.
/// Constant columns become all zeros under either scheme.
inline LabeledDataset normalize(LabeledDataset ds, Normalization scheme) {
    if (scheme == Normalization::none) {
        return ds;
    }
    const std::size_t n = ds.size();
    if (n < 2) {
        throw UsageError("normalization needs at least 2 rows");
    }
    for (std::size_t j = 0; j < ds.dims(); ++j) {
        double lo = ds.features(0, j);
        double hi = lo;
        for (std::size_t i = 1; i < n; ++i) {
            lo = std::min(lo, ds.features(i, j));
            hi = std::max(hi, ds.features(i, j));
        }
        if (lo == hi) {
            for (std::size_t i = 0; i < n; ++i) {
                ds.features(i, j) = 0.0;
            }
            continue;
        }
        if (scheme == Normalization::minmax) {
            const double range = hi - lo;
            for (std::size_t i = 0; i < n; ++i) {
                ds.features(i, j) = (ds.features(i, j) - lo) / range;
            }
            continue;
        }
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += ds.features(i, j);
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = ds.features(i, j) - mean;
            ss += c * c;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            ds.features(i, j) = (ds.features(i, j) - mean) / sd;
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Shuffling
// ---------------------------------------------------------------------------

/// Row i of the shuffled dataset is row order[i] of the input.
struct ShuffleSpec {
    std::uint64_t seed = 0;
    std::vector<std::size_t> order;
};

/// Fisher-Yates permutation of 0..n-1 driven by `seed`.
inline std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Engine engine(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = uniform_index(engine, i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

/// Applies a row permutation to features, labels and row ids alike.
inline LabeledDataset permute_rows(const LabeledDataset& ds, std::span<const std::size_t> order) {
    LabeledDataset out;
    out.features = Matrix(ds.size(), ds.dims());
    out.column_names = ds.column_names;
    out.row_ids.resize(ds.size());
    if (ds.labels) {
        out.labels.emplace(ds.size());
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t src = order[i];
        std::copy_n(ds.features.row(src).begin(), ds.dims(), out.features.row(i).begin());
        out.row_ids[i] = ds.row_ids[src];
        if (ds.labels) {
            (*out.labels)[i] = (*ds.labels)[src];
        }
    }
    return out;
}

inline std::pair<LabeledDataset, ShuffleSpec> shuffle(const LabeledDataset& ds, std::uint64_t seed) {
    ShuffleSpec spec{seed, permutation(ds.size(), seed)};
    auto shuffled = permute_rows(ds, spec.order);
    return {std::move(shuffled), std::move(spec)};
}

/// Maps per-row values computed on a shuffled dataset back to input order.
template <class T>
std::vector<T> restore_order(std::span<const T> shuffled_values, const ShuffleSpec& spec) {
    if (shuffled_values.size() != spec.order.size()) {
        throw UsageError("restore_order: value count does not match permutation length");
    }
    std::vector<T> out(shuffled_values.size());
    for (std::size_t i = 0; i < spec.order.size(); ++i) {
        out[spec.order[i]] = shuffled_values[i];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Benchmark recipes
// ---------------------------------------------------------------------------

/// UCI ann-thyroid training split: 21 attributes then a class code in {1,2,3}.
/// Keeps the six real-valued attributes (age, TSH, T3, TT4, T4U, FTI) and
/// labels class 1 (hyper-function) as the outlier class.
inline LabeledDataset prepare_thyroid(std::istream& raw) {
    constexpr std::size_t kColumns = 22;
    constexpr std::size_t kRealColumns[] = {0, 16, 17, 18, 19, 20};
    const std::string text{std::istreambuf_iterator<char>(raw), std::istreambuf_iterator<char>()};
    const auto records = detail::split_records(text, ' ');
    if (records.empty()) {
        throw StructuralError("thyroid input contains no rows");
    }

    std::vector<double> values;
    values.reserve(records.size() * std::size(kRealColumns));
    std::vector<std::uint8_t> labels;
    labels.reserve(records.size());
    for (const auto& rec : records) {
        if (rec.fields.size() != kColumns) {
            throw StructuralError("line " + std::to_string(rec.line) + ": expected " + std::to_string(kColumns) +
                                  " fields (21 attributes + class), found " + std::to_string(rec.fields.size()));
        }
        for (auto j : kRealColumns) {
            values.push_back(detail::parse_cell(rec.fields[j], rec.line, j));
        }
        const double cls = detail::parse_cell(rec.fields[kColumns - 1], rec.line, kColumns - 1);
        if (cls != 1.0 && cls != 2.0 && cls != 3.0) {
            throw ParseError("line " + std::to_string(rec.line) + ": class must be 1, 2 or 3");
        }
        labels.push_back(cls == 1.0 ? 1 : 0);
    }

    LabeledDataset ds;
    ds.features = Matrix(records.size(), std::size(kRealColumns), std::move(values));
    ds.labels = std::move(labels);
    ds.column_names = {"age", "TSH", "T3", "TT4", "T4U", "FTI"};
    ds.row_ids.resize(records.size());
    std::iota(ds.row_ids.begin(), ds.row_ids.end(), std::size_t{0});
    return ds;
}

inline LabeledDataset prepare_thyroid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    return prepare_thyroid(in);
}

// ---------------------------------------------------------------------------
// Sidecar metadata
// ---------------------------------------------------------------------------

struct DatasetMetadata {
    Normalization scheme = Normalization::none;
    std::optional<std::uint64_t> seed;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t positives = 0;
};

inline DatasetMetadata describe(const LabeledDataset& ds, Normalization scheme, std::optional<std::uint64_t> seed) {
    return {scheme, seed, ds.size(), ds.dims(), ds.positives()};
}

inline void write_metadata(std::ostream& out, const DatasetMetadata& meta) {
    out << "scheme=" << to_string(meta.scheme) << '\n';
    out << "seed=" << (meta.seed ? std::to_string(*meta.seed) : std::string("none")) << '\n';
    out << "n=" << meta.n << '\n';
    out << "d=" << meta.d << '\n';
    out << "positives=" << meta.positives << '\n';
}

}  // namespace consist
