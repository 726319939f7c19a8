#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "consist/analysis.hpp"
#include "consist/consistency.hpp"
#include "consist/dataset.hpp"
#include "consist/ensemble.hpp"
#include "consist/error.hpp"
#include "consist/iforest.hpp"
#include "consist/metrics.hpp"

namespace consist {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Method { consistency, iforest };
enum class DatasetFormat { csv, thyroid };

inline std::string_view to_string(Method m) noexcept { return m == Method::consistency ? "consistency" : "iforest"; }
inline std::string_view to_string(DatasetFormat f) noexcept { return f == DatasetFormat::csv ? "csv" : "thyroid"; }

inline Method parse_method(std::string_view name) {
    if (name == "consistency") return Method::consistency;
    if (name == "iforest") return Method::iforest;
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

inline DatasetFormat parse_format(std::string_view name) {
    if (name == "csv") return DatasetFormat::csv;
    if (name == "thyroid") return DatasetFormat::thyroid;
    throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

struct ExperimentSpec {
    std::filesystem::path input;
    DatasetFormat format = DatasetFormat::csv;
    CsvOptions csv{',', true, std::string("label")};
    std::vector<std::string> drop_columns;
    Normalization normalization = Normalization::zscore;

    Method method = Method::consistency;
    KSchedule schedule = KSchedule::range(2, 16, 1);
    KMeansConfig kmeans;
    std::size_t trees = 100;
    std::size_t subsample = 256;

    std::size_t repetitions = 10;
    std::uint64_t master_seed = 0;
    bool shuffle = true;
    std::vector<double> purity_thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t workers = 0;
    bool parallel_repetitions = false;
    /// Run directory; nothing is written when empty.
    std::filesystem::path out_dir;
};

namespace detail {

inline bool parse_bool(const std::string& text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(text);
    while (std::getline(ss, item, ',')) {
        const auto t = trim(item);
        if (!t.empty()) {
            out.emplace_back(t);
        }
    }
    return out;
}

inline char parse_delimiter(const std::string& text) {
    if (text == "tab" || text == "\\t") return '\t';
    if (text == "space" || text == "whitespace") return ' ';
    if (text == "comma") return ',';
    if (text.size() != 1) {
        throw ConfigError("delimiter must be a single character, 'tab' or 'space'");
    }
    return text[0];
}

inline std::string delimiter_name(char c) {
    if (c == '\t') return "tab";
    if (c == ' ') return "space";
    if (c == ',') return "comma";
    return std::string(1, c);
}

}  // namespace detail

/// Applies one key=value setting; shared by spec files and the CLI.
inline void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value) {
    auto size_value = [&] { return static_cast<std::size_t>(detail::parse_u64(value, key)); };
    if (key == "input") {
        spec.input = value;
    } else if (key == "format") {
        spec.format = parse_format(value);
    } else if (key == "label_column") {
        spec.csv.label_column = value.empty() || value == "none" ? std::nullopt : std::optional(value);
    } else if (key == "delimiter") {
        spec.csv.delimiter = detail::parse_delimiter(value);
    } else if (key == "header") {
        spec.csv.header = detail::parse_bool(value, key);
    } else if (key == "drop_columns") {
        spec.drop_columns = detail::split_list(value);
    } else if (key == "normalize") {
        spec.normalization = parse_normalization(value);
    } else if (key == "method") {
        spec.method = parse_method(value);
    } else if (key == "k_list") {
        spec.schedule = KSchedule::list(detail::parse_size_list(value, key));
    } else if (key == "k_range") {
        // "min..max" or "min..max:step"
        const auto dots = value.find("..");
        if (dots == std::string::npos) {
            throw ConfigError("k_range: expected min..max[:step]");
        }
        const auto colon = value.find(':', dots);
        const auto lo = detail::parse_u64(value.substr(0, dots), key);
        const auto hi = detail::parse_u64(value.substr(dots + 2, colon == std::string::npos ? std::string::npos
                                                                                             : colon - dots - 2),
                                          key);
        const auto step = colon == std::string::npos ? 1 : detail::parse_u64(value.substr(colon + 1), key);
        spec.schedule = KSchedule::range(lo, hi, step);
    } else if (key == "max_iterations") {
        spec.kmeans.max_iterations = size_value();
    } else if (key == "tolerance") {
        spec.kmeans.tolerance = detail::parse_cell(value, 0, 0);
    } else if (key == "init") {
        spec.kmeans.init = parse_init(value);
    } else if (key == "trees") {
        spec.trees = size_value();
    } else if (key == "subsample") {
        spec.subsample = size_value();
    } else if (key == "reps" || key == "repetitions") {
        spec.repetitions = size_value();
    } else if (key == "seed") {
        spec.master_seed = detail::parse_u64(value, key);
    } else if (key == "shuffle") {
        spec.shuffle = detail::parse_bool(value, key);
    } else if (key == "purity_thresholds") {
        spec.purity_thresholds.clear();
        for (const auto& t : detail::split_list(value)) {
            spec.purity_thresholds.push_back(detail::parse_cell(t, 0, 0));
        }
    } else if (key == "workers") {
        spec.workers = size_value();
    } else if (key == "parallel_reps") {
        spec.parallel_repetitions = detail::parse_bool(value, key);
    } else if (key == "out_dir") {
        spec.out_dir = value;
    } else {
        throw ConfigError("unknown experiment key '" + key + "'");
    }
}

/// Flat key=value text; '#' starts a comment line. Relative input/out_dir
/// paths are resolved against `base_dir` when given.
inline ExperimentSpec parse_spec(std::istream& in, const std::filesystem::path& base_dir = {}) {
    ExperimentSpec spec;
    std::optional<std::uint64_t> k_min, k_max;
    std::uint64_t k_step = 1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("spec line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key(detail::trim(t.substr(0, eq)));
        const std::string value(detail::trim(t.substr(eq + 1)));
        try {
            if (key == "k_min") {
                k_min = detail::parse_u64(value, key);
            } else if (key == "k_max") {
                k_max = detail::parse_u64(value, key);
            } else if (key == "k_step") {
                k_step = detail::parse_u64(value, key);
            } else {
                apply_setting(spec, key, value);
            }
        } catch (const ParseError& e) {
            // a malformed value is a configuration problem, not a data one
            throw ConfigError("spec line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (k_min || k_max) {
        if (!k_min || !k_max) {
            throw ConfigError("k_min and k_max must be given together");
        }
        spec.schedule = KSchedule::range(*k_min, *k_max, k_step);
    }
    if (!base_dir.empty()) {
        if (!spec.input.empty() && spec.input.is_relative()) spec.input = base_dir / spec.input;
        if (!spec.out_dir.empty() && spec.out_dir.is_relative()) spec.out_dir = base_dir / spec.out_dir;
    }
    return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open spec '" + path.string() + "'");
    }
    return parse_spec(in, path.parent_path());
}

inline void write_spec(std::ostream& out, const ExperimentSpec& spec) {
    out << "input=" << spec.input.string() << '\n';
    out << "format=" << to_string(spec.format) << '\n';
    out << "label_column=" << spec.csv.label_column.value_or("none") << '\n';
    out << "delimiter=" << detail::delimiter_name(spec.csv.delimiter) << '\n';
    out << "header=" << (spec.csv.header ? "true" : "false") << '\n';
    out << "drop_columns=";
    for (std::size_t i = 0; i < spec.drop_columns.size(); ++i) {
        out << (i ? "," : "") << spec.drop_columns[i];
    }
    out << '\n';
    out << "normalize=" << to_string(spec.normalization) << '\n';
    out << "method=" << to_string(spec.method) << '\n';
    out << "k_list=";
    for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
        out << (i ? "," : "") << spec.schedule.values()[i];
    }
    out << '\n';
    out << "max_iterations=" << spec.kmeans.max_iterations << '\n';
    out << "tolerance=" << detail::format_double(spec.kmeans.tolerance) << '\n';
    out << "init=" << to_string(spec.kmeans.init) << '\n';
    out << "trees=" << spec.trees << '\n';
    out << "subsample=" << spec.subsample << '\n';
    out << "reps=" << spec.repetitions << '\n';
    out << "seed=" << spec.master_seed << '\n';
    out << "shuffle=" << (spec.shuffle ? "true" : "false") << '\n';
    out << "purity_thresholds=";
    for (std::size_t i = 0; i < spec.purity_thresholds.size(); ++i) {
        out << (i ? "," : "") << detail::format_double(spec.purity_thresholds[i]);
    }
    out << '\n';
}

/// Load, drop columns and normalize as the ExperimentSpec says.
inline LabeledDataset load_experiment_data(const ExperimentSpec& spec) {
    LabeledDataset ds = spec.format == DatasetFormat::thyroid ? prepare_thyroid(spec.input)
                                                              : load_csv(spec.input, spec.csv);
    if (!spec.drop_columns.empty()) {
        ds = drop_columns(ds, spec.drop_columns);
    }
    ds = normalize(std::move(ds), spec.normalization);
    ds.validate();
    return ds;
}

struct RepetitionResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> shuffle_seed;
    double auprc = 0.0;
    double auroc = 0.0;
    Curve pr;
    Curve roc;
    /// Native scores of the method, in input row order.
    ScoreVector scores;
    std::vector<PurityRow> purity;
};

struct EvalReport {
    ExperimentSpec spec;
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t positives = 0;
    std::uint64_t dataset_fingerprint = 0;
    std::vector<RepetitionResult> repetitions;
    MetricSummary summary;

    std::vector<RepetitionMetrics> metrics() const {
        std::vector<RepetitionMetrics> out;
        for (const auto& r : repetitions) {
            out.push_back({r.auprc, r.auroc});
        }
        return out;
    }
};

inline std::uint64_t repetition_seed(std::uint64_t master, std::size_t rep) noexcept { return derive_seed(master, rep); }

namespace detail {

inline RepetitionResult run_repetition(const ExperimentSpec& spec, const LabeledDataset& data, std::size_t rep,
                                       std::size_t workers) {
    RepetitionResult result;
    result.index = rep;
    result.seed = repetition_seed(spec.master_seed, rep);

    const LabeledDataset* ds = &data;
    LabeledDataset shuffled;
    ShuffleSpec order;
    if (spec.shuffle) {
        result.shuffle_seed = derive_seed(result.seed, 0);
        std::tie(shuffled, order) = shuffle(data, *result.shuffle_seed);
        ds = &shuffled;
    }
    const std::uint64_t method_seed = derive_seed(result.seed, 1);

    ScoreVector native;
    ScoreVector outlier;
    if (spec.method == Method::consistency) {
        EnsembleOptions opts;
        opts.kmeans = spec.kmeans;
        opts.workers = workers;
        const auto er = run_ensemble(*ds, spec.schedule, method_seed, opts);
        native = consistency_scores(er, workers);
        outlier = outlier_scores(native);
    } else {
        const auto model = fit_iforest(*ds, spec.trees, spec.subsample, method_seed, workers);
        native = iforest_scores(model, *ds, workers);
        outlier = native;
    }

    if (spec.shuffle) {
        native.scores = restore_order<double>(native.scores, order);
        outlier.scores = restore_order<double>(outlier.scores, order);
    }
    const auto& labels = *data.labels;
    const auto s = sweep(outlier.scores, labels);
    result.pr = pr_curve(s);
    result.roc = roc_curve(s);
    result.auprc = result.pr.area;
    result.auroc = result.roc.area;
    if (native.direction == Direction::high_is_consistent) {
        result.purity = purity_table(native, labels, spec.purity_thresholds);
    }
    result.scores = std::move(native);
    return result;
}

}  // namespace detail

inline void write_report(std::ostream& out, const EvalReport& report) {
    const auto& spec = report.spec;
    out << "code_version=" << kVersion << '\n';
    out << "method=" << to_string(spec.method) << '\n';
    out << "input=" << spec.input.string() << '\n';
    out << "n=" << report.n << '\n';
    out << "d=" << report.d << '\n';
    out << "positives=" << report.positives << '\n';
    out << "fingerprint=" << report.dataset_fingerprint << '\n';
    out << "normalization=" << to_string(spec.normalization) << '\n';
    out << "shuffle=" << (spec.shuffle ? "true" : "false") << '\n';
    out << "master_seed=" << spec.master_seed << '\n';
    if (spec.method == Method::consistency) {
        out << "schedule=" << spec.schedule.description() << '\n';
        out << "kmeans.init=" << to_string(spec.kmeans.init) << '\n';
        out << "kmeans.max_iterations=" << spec.kmeans.max_iterations << '\n';
        out << "kmeans.tolerance=" << detail::format_double(spec.kmeans.tolerance) << '\n';
        out << "cosine_space=normalized_features_no_recentering\n";
        out << "zero_norm_cosine=0\n";
    } else {
        out << "iforest.trees=" << spec.trees << '\n';
        out << "iforest.subsample=" << spec.subsample << '\n';
    }
    out << "auprc_rule=" << kAuprcRule << '\n';
    out << "auroc_rule=" << kAurocRule << '\n';
    out << "repetitions=" << report.repetitions.size() << '\n';
    for (const auto& r : report.repetitions) {
        const std::string p = "rep." + std::to_string(r.index) + ".";
        out << p << "seed=" << r.seed << '\n';
        out << p << "shuffle_seed=" << (r.shuffle_seed ? std::to_string(*r.shuffle_seed) : std::string("none"))
            << '\n';
        out << p << "auprc=" << detail::format_double(r.auprc) << '\n';
        out << p << "auroc=" << detail::format_double(r.auroc) << '\n';
        if (spec.method == Method::consistency) {
            out << p << "zero_norm_centroids=" << r.scores.source.zero_norm_centroids << '\n';
        }
        for (const auto& row : r.purity) {
            out << p << "purity." << detail::format_double(row.threshold) << "=tn:" << row.tn_above
                << ",tp:" << row.tp_above << '\n';
        }
    }
    out << "auprc.mean=" << detail::format_double(report.summary.auprc.mean) << '\n';
    out << "auprc.std=" << detail::format_double(report.summary.auprc.stddev) << '\n';
    out << "auroc.mean=" << detail::format_double(report.summary.auroc.mean) << '\n';
    out << "auroc.std=" << detail::format_double(report.summary.auroc.stddev) << '\n';
}

/// Writes spec.txt, report.txt and per-repetition scores / curves.
inline void write_run_directory(const std::filesystem::path& dir, const EvalReport& report,
                                std::span<const std::size_t> row_ids) {
    std::filesystem::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) {
            throw ConfigError("cannot write '" + (dir / name).string() + "'");
        }
        return f;
    };
    {
        auto f = open("spec.txt");
        write_spec(f, report.spec);
    }
    for (const auto& r : report.repetitions) {
        std::ostringstream tag;
        tag << "rep_" << std::setw(2) << std::setfill('0') << r.index;
        auto scores = open(tag.str() + "_scores.csv");
        write_scores(scores, r.scores, row_ids);
        auto pr = open(tag.str() + "_pr.csv");
        write_curve_csv(pr, r.pr);
        auto roc = open(tag.str() + "_roc.csv");
        write_curve_csv(roc, r.roc);
    }
    auto f = open("report.txt");
    write_report(f, report);
}

/// Runs the protocol on already prepared data (see load_experiment_data).
inline EvalReport run_experiment(const ExperimentSpec& spec, const LabeledDataset& data) {
    if (spec.repetitions < 1) {
        throw ConfigError("repetitions must be at least 1");
    }
    if (!data.labels) {
        throw ConfigError("experiments need a labelled dataset");
    }
    if (spec.method == Method::consistency) {
        spec.schedule.validate(data.size());
    }

    EvalReport report;
    report.spec = spec;
    report.n = data.size();
    report.d = data.dims();
    report.positives = data.positives();
    report.dataset_fingerprint = fingerprint(data.features);
    report.repetitions.resize(spec.repetitions);

    auto prefix = [](std::size_t rep) { return "repetition " + std::to_string(rep) + ": "; };
    auto run_one = [&](std::size_t rep, std::size_t workers) {
        try {
            report.repetitions[rep] = detail::run_repetition(spec, data, rep, workers);
        } catch (const ConfigError& e) {
            throw ConfigError(prefix(rep) + e.what());
        } catch (const UsageError& e) {
            throw UsageError(prefix(rep) + e.what());
        } catch (const Error& e) {
            throw Error(prefix(rep) + e.what());
        }
    };
    if (spec.parallel_repetitions) {
        parallel_for(spec.repetitions, spec.workers, [&](std::size_t rep) { run_one(rep, 1); });
    } else {
        for (std::size_t rep = 0; rep < spec.repetitions; ++rep) {
            run_one(rep, spec.workers);
        }
    }
    const auto m = report.metrics();
    report.summary = summarize_runs(m, /*allow_single=*/true);

    if (!spec.out_dir.empty()) {
        write_run_directory(spec.out_dir, report, data.row_ids);
    }
    return report;
}

inline EvalReport run_experiment(const ExperimentSpec& spec) {
    return run_experiment(spec, load_experiment_data(spec));
}

}  // namespace consist
