// Command-line front end: prep, run, score, eval, analyze.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "consist/analysis.hpp"
#include "consist/consistency.hpp"
#include "consist/dataset.hpp"
#include "consist/ensemble.hpp"
#include "consist/experiment.hpp"
#include "consist/iforest.hpp"
#include "consist/metrics.hpp"

namespace fs = std::filesystem;
using namespace consist;

namespace {

constexpr int kUsageExit = 2;
constexpr int kFailureExit = 1;

struct DataFlags {
    std::string input;
    std::string label_column;
    std::string delimiter = ",";
    bool no_header = false;
    std::string normalize = "zscore";
    std::vector<std::string> drop;

    void add_to(CLI::App& app, bool label_required = false) {
        app.add_option("--input", input, "Delimited input file")->required()->check(CLI::ExistingFile);
        auto* label = app.add_option("--label-column", label_column, "Column holding 0/1 outlier labels");
        if (label_required) {
            label->required();
        }
        app.add_option("--delimiter", delimiter, "Field separator (a character, 'tab' or 'space')")
            ->capture_default_str();
        app.add_flag("--no-header", no_header, "Input has no header row (columns are named col0, col1, ...)");
        app.add_option("--normalize", normalize, "Feature scaling: zscore, minmax or none")
            ->check(CLI::IsMember({"zscore", "minmax", "none"}))
            ->capture_default_str();
        app.add_option("--drop-column", drop, "Column to remove before processing (repeatable)");
    }

    CsvOptions csv() const {
        CsvOptions opts;
        opts.delimiter = detail::parse_delimiter(delimiter);
        opts.header = !no_header;
        if (!label_column.empty()) {
            opts.label_column = label_column;
        }
        return opts;
    }

    LabeledDataset load() const {
        auto ds = load_csv(input, csv());
        if (!drop.empty()) {
            ds = drop_columns(ds, drop);
        }
        ds = consist::normalize(std::move(ds), parse_normalization(normalize));
        ds.validate();
        return ds;
    }
};

struct ScheduleFlags {
    std::optional<std::size_t> k_min;
    std::optional<std::size_t> k_max;
    std::size_t k_step = 1;
    std::vector<std::size_t> k_list;

    void add_to(CLI::App& app) {
        app.add_option("--k-min", k_min, "Smallest k of the schedule (default 2)");
        app.add_option("--k-max", k_max, "Largest k of the schedule (default 16)");
        app.add_option("--k-step", k_step, "Step between consecutive k values")->capture_default_str();
        app.add_option("--k-list", k_list, "Explicit comma-separated k values")->delimiter(',');
    }

    bool given() const { return k_min || k_max || !k_list.empty(); }

    KSchedule schedule() const {
        if (!k_list.empty()) {
            return KSchedule::list(k_list);
        }
        return KSchedule::range(k_min.value_or(2), k_max.value_or(16), k_step);
    }
};

std::string now_string() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream out;
    out << std::put_time(std::gmtime(&t), "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::ofstream open_output(const fs::path& path) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    return out;
}

/// Labels from a CSV file: the named column, or the only/last column.
std::vector<std::uint8_t> load_labels(const std::string& path, const std::string& column, bool header) {
    CsvOptions opts;
    opts.header = header;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    std::istringstream probe(text);
    auto table = read_csv(probe, opts);
    std::string name = column;
    if (name.empty()) {
        name = table.column_names.back();
    }
    opts.label_column = name;
    std::istringstream again(text);
    auto ds = read_csv(again, opts);
    return *ds.labels;
}

void print_summary(const EvalReport& report) {
    std::cout << std::setprecision(6);
    for (const auto& r : report.repetitions) {
        std::cout << "rep " << r.index << ": auprc=" << r.auprc << " auroc=" << r.auroc << '\n';
    }
    std::cout << "auprc mean=" << report.summary.auprc.mean << " std=" << report.summary.auprc.stddev << '\n';
    std::cout << "auroc mean=" << report.summary.auroc.mean << " std=" << report.summary.auroc.stddev << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Outlier detection by k-means ensemble consistency scoring"};
    app.require_subcommand(1);
    std::size_t workers = 0;
    app.add_option("--workers", workers, "Cap on worker threads (0 = all hardware threads)")->capture_default_str();

    // prep ------------------------------------------------------------------
    auto* prep = app.add_subcommand("prep", "Prepare a benchmark dataset and write it with a metadata sidecar");
    std::string recipe = "csv";
    std::string prep_input;
    std::string prep_out;
    std::string prep_label;
    std::string prep_delimiter = ",";
    bool prep_no_header = false;
    std::string prep_normalize = "none";
    std::vector<std::string> prep_drop;
    std::optional<std::uint64_t> prep_seed;
    prep->add_option("--recipe", recipe, "csv (generic delimited table) or thyroid (UCI ann-thyroid training file)")
        ->check(CLI::IsMember({"csv", "thyroid"}))
        ->capture_default_str();
    prep->add_option("--input", prep_input, "Raw input file")->required()->check(CLI::ExistingFile);
    prep->add_option("--out", prep_out, "Output CSV; '<out>.meta' receives the metadata")->required();
    prep->add_option("--label-column", prep_label, "Label column of a csv recipe input");
    prep->add_option("--delimiter", prep_delimiter, "Field separator of a csv recipe input")->capture_default_str();
    prep->add_flag("--no-header", prep_no_header, "csv recipe input has no header row");
    prep->add_option("--normalize", prep_normalize, "zscore, minmax or none")
        ->check(CLI::IsMember({"zscore", "minmax", "none"}))
        ->capture_default_str();
    prep->add_option("--drop-column", prep_drop, "Column to remove (repeatable)");
    prep->add_option("--seed", prep_seed, "Shuffle rows with this seed");

    // run -------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run a repeated experiment and write a run directory");
    std::string spec_path;
    std::vector<std::string> overrides;
    DataFlags run_data;
    ScheduleFlags run_schedule;
    std::optional<std::string> run_method;
    std::optional<std::uint64_t> run_seed_flag;
    std::optional<std::size_t> run_reps;
    std::optional<std::size_t> run_trees;
    std::optional<std::size_t> run_subsample;
    std::optional<std::string> run_out;
    std::optional<std::string> run_input;
    std::optional<std::string> run_label;
    std::optional<std::string> run_normalize;
    std::vector<std::string> run_drop;
    bool run_shuffle = false;
    bool run_no_shuffle = false;
    run->add_option("--spec", spec_path, "Experiment spec file (key=value lines)")->check(CLI::ExistingFile);
    run->add_option("--input", run_input, "Dataset file");
    run->add_option("--label-column", run_label, "Label column name");
    run->add_option("--normalize", run_normalize, "zscore, minmax or none")
        ->check(CLI::IsMember({"zscore", "minmax", "none"}));
    run->add_option("--drop-column", run_drop, "Column to remove (repeatable)");
    run->add_option("--method", run_method, "consistency or iforest")->check(CLI::IsMember({"consistency", "iforest"}));
    run_schedule.add_to(*run);
    run->add_option("--seed", run_seed_flag, "Master seed");
    run->add_option("--reps", run_reps, "Number of repetitions");
    run->add_flag("--shuffle", run_shuffle, "Shuffle rows before each repetition");
    run->add_flag("--no-shuffle", run_no_shuffle, "Keep input row order");
    run->add_option("--trees", run_trees, "Isolation Forest: number of trees");
    run->add_option("--subsample", run_subsample, "Isolation Forest: subsample size");
    run->add_option("--out-dir", run_out, "Run directory");
    run->add_option("--set", overrides, "Extra spec setting key=value (repeatable)");

    // score -----------------------------------------------------------------
    auto* score = app.add_subcommand("score", "Score every row of a CSV");
    DataFlags score_data;
    ScheduleFlags score_schedule;
    std::string score_method = "consistency";
    std::uint64_t score_seed = 0;
    std::size_t score_trees = 100;
    std::size_t score_subsample = 256;
    std::string score_out;
    std::string ensemble_dir;
    score_data.add_to(*score);
    score_schedule.add_to(*score);
    score->add_option("--method", score_method, "consistency or iforest")
        ->check(CLI::IsMember({"consistency", "iforest"}))
        ->capture_default_str();
    score->add_option("--seed", score_seed, "Seed")->capture_default_str();
    score->add_option("--trees", score_trees, "Isolation Forest: number of trees")->capture_default_str();
    score->add_option("--subsample", score_subsample, "Isolation Forest: subsample size")->capture_default_str();
    score->add_option("--out", score_out, "Score file (stdout when omitted)");
    score->add_option("--ensemble-dir", ensemble_dir, "Also persist the k-means ensemble here");

    // eval ------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "AUPRC / AUROC and curves from a score file and labels");
    std::string eval_scores;
    std::string eval_labels;
    std::string eval_label_column;
    bool eval_no_header = false;
    std::string eval_out;
    eval->add_option("--scores", eval_scores, "Score file (row_id,score,direction)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--labels", eval_labels, "CSV with the 0/1 labels in input row order")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--label-column", eval_label_column, "Label column (default: last column)");
    eval->add_flag("--no-header", eval_no_header, "Label file has no header row");
    eval->add_option("--out-dir", eval_out, "Write pr.csv and roc.csv here");

    // analyze ---------------------------------------------------------------
    auto* analyze = app.add_subcommand("analyze", "Diagnostic tables");
    analyze->require_subcommand(1);
    auto* sil = analyze->add_subcommand("silhouette", "Silhouette score of a k-means fit per k");
    DataFlags sil_data;
    ScheduleFlags sil_schedule;
    std::uint64_t sil_seed = 0;
    std::size_t sil_cap = kDefaultSilhouetteCap;
    sil_data.add_to(*sil);
    sil_schedule.add_to(*sil);
    sil->add_option("--seed", sil_seed, "Seed")->capture_default_str();
    sil->add_option("--max-points", sil_cap, "Refuse inputs larger than this")->capture_default_str();

    auto* var = analyze->add_subcommand("variance", "Per-column share of total variance in percent");
    DataFlags var_data;
    var_data.normalize = "none";
    var_data.add_to(*var);

    auto* pur = analyze->add_subcommand("purity", "Inliers/outliers above consistency thresholds");
    std::string pur_scores;
    std::string pur_labels;
    std::string pur_label_column;
    bool pur_no_header = false;
    std::vector<double> pur_thresholds = {0.5, 0.6, 0.7, 0.8, 0.9};
    pur->add_option("--scores", pur_scores, "Consistency score file")->required()->check(CLI::ExistingFile);
    pur->add_option("--labels", pur_labels, "CSV with the 0/1 labels")->required()->check(CLI::ExistingFile);
    pur->add_option("--label-column", pur_label_column, "Label column (default: last column)");
    pur->add_flag("--no-header", pur_no_header, "Label file has no header row");
    pur->add_option("--thresholds", pur_thresholds, "Comma-separated thresholds")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsageExit;
    }

    try {
        std::cout << std::setprecision(6);
        if (*prep) {
            LabeledDataset ds;
            if (recipe == "thyroid") {
                ds = prepare_thyroid(fs::path(prep_input));
            } else {
                CsvOptions opts;
                opts.delimiter = detail::parse_delimiter(prep_delimiter);
                opts.header = !prep_no_header;
                if (!prep_label.empty()) {
                    opts.label_column = prep_label;
                }
                ds = load_csv(prep_input, opts);
            }
            if (!prep_drop.empty()) {
                ds = drop_columns(ds, prep_drop);
            }
            const auto scheme = parse_normalization(prep_normalize);
            ds = normalize(std::move(ds), scheme);
            if (prep_seed) {
                ds = shuffle(ds, *prep_seed).first;
            }
            ds.validate();
            auto out = open_output(prep_out);
            write_csv(out, ds);
            auto meta = open_output(prep_out + ".meta");
            write_metadata(meta, describe(ds, scheme, prep_seed));
            std::cout << "n=" << ds.size() << " d=" << ds.dims() << " positives=" << ds.positives() << '\n';
            return 0;
        }

        if (*run) {
            ExperimentSpec spec = spec_path.empty() ? ExperimentSpec{} : load_spec(spec_path);
            if (run_input) spec.input = *run_input;
            if (run_label) apply_setting(spec, "label_column", *run_label);
            if (run_normalize) spec.normalization = parse_normalization(*run_normalize);
            if (!run_drop.empty()) spec.drop_columns = run_drop;
            if (run_method) spec.method = parse_method(*run_method);
            if (run_schedule.given()) spec.schedule = run_schedule.schedule();
            if (run_seed_flag) spec.master_seed = *run_seed_flag;
            if (run_reps) spec.repetitions = *run_reps;
            if (run_shuffle) spec.shuffle = true;
            if (run_no_shuffle) spec.shuffle = false;
            if (run_trees) spec.trees = *run_trees;
            if (run_subsample) spec.subsample = *run_subsample;
            if (run_out) spec.out_dir = *run_out;
            for (const auto& kv : overrides) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) {
                    throw ConfigError("--set expects key=value, got '" + kv + "'");
                }
                apply_setting(spec, kv.substr(0, eq), kv.substr(eq + 1));
            }
            if (workers != 0) spec.workers = workers;
            if (spec.input.empty()) {
                throw ConfigError("no input dataset: pass --spec or --input");
            }
            if (!fs::exists(spec.input)) {
                throw ConfigError("input '" + spec.input.string() + "' does not exist");
            }
            const std::string started = now_string();
            const auto report = run_experiment(spec);
            print_summary(report);
            if (!spec.out_dir.empty()) {
                std::ofstream log(spec.out_dir / "run.log", std::ios::app);
                log << "started=" << started << "\nfinished=" << now_string() << '\n';
                std::cout << "run directory: " << spec.out_dir.string() << '\n';
            }
            return 0;
        }

        if (*score) {
            const auto ds = score_data.load();
            ScoreVector sv;
            if (score_method == "consistency") {
                EnsembleOptions opts;
                opts.workers = workers;
                const auto er = run_ensemble(ds, score_schedule.schedule(), score_seed, opts);
                if (!ensemble_dir.empty()) {
                    save_ensemble(ensemble_dir, er);
                }
                sv = consistency_scores(er, workers);
            } else {
                const auto model = fit_iforest(ds, score_trees, score_subsample, score_seed, workers);
                sv = iforest_scores(model, ds, workers);
            }
            if (score_out.empty()) {
                write_scores(std::cout, sv, ds.row_ids);
            } else {
                auto out = open_output(score_out);
                write_scores(out, sv, ds.row_ids);
            }
            return 0;
        }

        if (*eval) {
            std::ifstream in(eval_scores, std::ios::binary);
            auto file = read_scores(in);
            auto labels = load_labels(eval_labels, eval_label_column, !eval_no_header);
            if (labels.size() != file.row_ids.size()) {
                throw UsageError("score file has " + std::to_string(file.row_ids.size()) + " rows, labels have " +
                                 std::to_string(labels.size()));
            }
            std::vector<std::uint8_t> aligned(labels.size());
            for (std::size_t i = 0; i < file.row_ids.size(); ++i) {
                if (file.row_ids[i] >= labels.size()) {
                    throw UsageError("row id " + std::to_string(file.row_ids[i]) + " has no label");
                }
                aligned[i] = labels[file.row_ids[i]];
            }
            ScoreVector sv = file.scores;
            if (sv.direction == Direction::high_is_consistent) {
                sv = outlier_scores(sv);
            }
            const auto s = sweep(sv.scores, aligned);
            const auto pr = pr_curve(s);
            const auto roc = roc_curve(s);
            std::cout << "auprc=" << pr.area << " auroc=" << roc.area << '\n';
            if (!eval_out.empty()) {
                auto pr_out = open_output(fs::path(eval_out) / "pr.csv");
                write_curve_csv(pr_out, pr);
                auto roc_out = open_output(fs::path(eval_out) / "roc.csv");
                write_curve_csv(roc_out, roc);
            }
            return 0;
        }

        if (*sil) {
            const auto ds = sil_data.load();
            std::cout << "k,silhouette\n";
            const auto schedule = sil_schedule.schedule();
            for (auto k : schedule.values()) {
                const auto fit = fit_kmeans(ds, k, sil_seed);
                std::cout << k << ',' << silhouette(ds.features, fit, sil_cap, workers) << '\n';
            }
            return 0;
        }

        if (*var) {
            const auto ds = var_data.load();
            const auto share = variance_share(ds.features);
            std::cout << "column,percent\n";
            for (std::size_t j = 0; j < share.size(); ++j) {
                std::cout << ds.column_names[j] << ',' << share[j] << '\n';
            }
            return 0;
        }

        if (*pur) {
            std::ifstream in(pur_scores, std::ios::binary);
            auto file = read_scores(in);
            auto labels = load_labels(pur_labels, pur_label_column, !pur_no_header);
            if (labels.size() != file.row_ids.size()) {
                throw UsageError("score file and label file differ in length");
            }
            std::vector<std::uint8_t> aligned(labels.size());
            for (std::size_t i = 0; i < file.row_ids.size(); ++i) {
                aligned[i] = labels.at(file.row_ids[i]);
            }
            const auto rows = purity_table(file.scores, aligned, pur_thresholds);
            std::cout << "threshold,tn_above,tp_above\n";
            for (const auto& r : rows) {
                std::cout << r.threshold << ',' << r.tn_above << ',' << r.tp_above << '\n';
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageExit;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageExit;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailureExit;
    }
    return kFailureExit;
}
