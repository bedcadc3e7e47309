// bintabl: train, evaluate and inspect BiN / TABL mid-price classifiers.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 data error, 4 numeric failure, 5 contract violation.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bintabl/checkpoint.hpp"
#include "bintabl/data.hpp"
#include "bintabl/error.hpp"
#include "bintabl/format.hpp"
#include "bintabl/gradcheck.hpp"
#include "bintabl/metrics.hpp"
#include "bintabl/network.hpp"
#include "bintabl/rng.hpp"
#include "bintabl/training.hpp"

namespace fs = std::filesystem;
using namespace bintabl;

namespace {

struct DataArgs {
    std::string data;
    std::string synthetic;
    std::string days_file;
    std::string layout = "fi2010";
    std::optional<std::size_t> feature_row;
    std::size_t train_days = 7;
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
    auto* data = cmd->add_option("--data", args.data,
                                 "Text matrix file, or a directory of per-day files "
                                 "(default: $BINTABL_DATA_DIR)");
    auto* synth = cmd->add_option("--synthetic", args.synthetic,
                                  "Synthetic order book: 'default' or a key=value config file");
    data->excludes(synth);
    cmd->add_option("--days", args.days_file,
                    "Day index file, one event count per line (default: <data>.days if present)");
    cmd->add_option("--layout", args.layout, "Row layout of data files")
        ->check(CLI::IsMember({"fi2010", "compact"}));
    cmd->add_option("--feature-row", args.feature_row,
                    "First of the 40 order-book rows (selects the feature block)");
    cmd->add_option("--train-days", args.train_days, "Leading days used for training")
        ->check(CLI::PositiveNumber);
}

/// fi2010: public file layout. compact: 40 feature rows then label rows for
/// horizons 10, 20, 50 with class ids 0/1/2 (what `synth` writes).
FileLayout make_layout(const DataArgs& args) {
    FileLayout layout;
    if (args.layout == "compact") {
        layout.feature_first_row = 0;
        layout.label_rows = {40, 41, 42};
        layout.horizons = {10, 20, 50};
        layout.encoding = LabelEncoding::ZeroBased;
    }
    if (args.feature_row) layout.feature_first_row = *args.feature_row;
    return layout;
}

fs::path resolve_data_path(const std::string& given) {
    const char* env = std::getenv("BINTABL_DATA_DIR");
    if (given.empty()) {
        if (!env || !*env)
            throw ConfigError("no data given: pass --data, --synthetic or set BINTABL_DATA_DIR");
        return fs::path(env);
    }
    fs::path p(given);
    if (!fs::exists(p) && p.is_relative() && env && *env && fs::exists(fs::path(env) / p))
        return fs::path(env) / p;
    return p;
}

LobDataset load_data(const DataArgs& args) {
    if (!args.synthetic.empty()) return generate_synthetic(load_synth_config(args.synthetic));

    const fs::path path = resolve_data_path(args.data);
    const FileLayout layout = make_layout(args);
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path))
            if (entry.is_regular_file() && entry.path().extension() != ".days")
                files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("no data files in '" + path.string() + "'");
        LobDataset all;
        for (const auto& f : files) {
            auto part = load_fi2010(f, {}, layout);
            for (auto& day : part.days) all.days.push_back(std::move(day));
        }
        return all;
    }
    if (!fs::exists(path)) throw DataError("data file '" + path.string() + "' does not exist");

    std::vector<std::size_t> lengths;
    fs::path index = args.days_file;
    if (index.empty() && fs::exists(path.string() + ".days")) index = path.string() + ".days";
    if (!index.empty()) lengths = read_day_index(index);
    return load_fi2010(path, lengths, layout);
}

void check_train_days(const LobDataset& data, std::size_t train_days) {
    if (train_days >= data.days.size()) {
        throw ConfigError("need more than " + std::to_string(train_days) +
                          " days for a train/test split, data has " +
                          std::to_string(data.days.size()));
    }
}

std::string norm_label(NormKind norm) {
    switch (norm) {
        case NormKind::Bin: return "BiN-";
        case NormKind::Dain: return "DAIN-";
        case NormKind::BatchNorm: return "BN-";
        case NormKind::None: return "";
    }
    return "";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
}

struct TrainArgs {
    std::string arch = "B";
    std::string norm = "bin";
    int horizon = 10;
    std::string reg = "maxnorm";
    int runs = 5;
    std::uint64_t seed = 0;
    std::string out;
    std::string report;
    std::string log;
    int epochs = 80;
    std::size_t batch_size = 256;
    unsigned threads = 0;
    double dropout = 0.1;
    bool literal_feature_scale = false;
    bool weighted = false;
    bool quiet = false;
    DataArgs data;
};

int run_train(const TrainArgs& a) {
    const Arch arch = parse_arch(a.arch);
    NetworkOptions net_opts;
    net_opts.norm = parse_norm(a.norm);
    net_opts.dropout = a.dropout;
    net_opts.bin_feature_scale =
        a.literal_feature_scale ? FeatureScale::TemporalStd : FeatureScale::FeatureStd;

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.reg = parse_weight_reg(a.reg);
    cfg.dropout = a.dropout;
    cfg.horizon = a.horizon;
    cfg.runs = a.runs;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    cfg.validate();

    const LobDataset data = load_data(a.data);
    check_train_days(data, a.data.train_days);
    const DataSplit split = split_days(data, a.data.train_days, kInputSteps, a.horizon);
    if (split.test.size() == 0) throw DataError("test split has no windows");

    const std::string label =
        norm_label(net_opts.norm) + to_string(arch) + "(TABL)/H" + std::to_string(a.horizon);
    const NetworkBuilder builder = [&](Rng& rng) { return build_network(arch, rng, net_opts); };
    auto result = run_protocol(builder, split.train, split.test, cfg, label,
                               a.weighted ? Averaging::Weighted : Averaging::Macro);

    const std::string records = to_records(result.report);
    if (!a.quiet) std::cout << to_table(result.report) << "\n";
    std::cout << records;
    if (!a.report.empty()) write_text(a.report, records);
    if (!a.log.empty()) {
        std::string text;
        for (std::size_t r = 0; r < result.logs.size(); ++r)
            for (const auto& e : result.logs[r]) text += "run=" + std::to_string(r) + " " + e.to_record() + "\n";
        write_text(a.log, text);
    }
    if (!a.out.empty()) {
        CheckpointMeta meta{
            {"horizon", std::to_string(a.horizon)},
            {"reg", a.reg},
            {"seed", std::to_string(a.seed)},
            {"run", std::to_string(result.median_run)},
            {"run_seed", std::to_string(result.report.runs[result.median_run].seed)},
            {"epochs", std::to_string(a.epochs)},
            {"batch_size", std::to_string(a.batch_size)},
            {"train_days", std::to_string(a.data.train_days)},
            {"label", label},
        };
        save_checkpoint(a.out, result.models[result.median_run], arch, meta);
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::optional<int> horizon;
    bool all_days = false;
    bool weighted = false;
    DataArgs data;
};

int run_eval(EvalArgs a) {
    Checkpoint ckpt = load_checkpoint(a.checkpoint);
    const auto meta_int = [&](const char* key, long fallback) {
        const auto it = ckpt.meta.find(key);
        if (it == ckpt.meta.end()) return fallback;
        try {
            return std::stol(it->second);
        } catch (const std::exception&) {
            throw DataError(std::string("checkpoint: bad meta '") + key + "'");
        }
    };
    const int horizon = a.horizon ? *a.horizon : static_cast<int>(meta_int("horizon", 10));

    const LobDataset data = load_data(a.data);
    SeriesBatch test;
    if (a.all_days) {
        test = make_windows(data.days, kInputSteps, horizon);
    } else {
        check_train_days(data, a.data.train_days);
        test = split_days(data, a.data.train_days, kInputSteps, horizon).test;
    }
    RunResult run;
    run.seed = static_cast<std::uint64_t>(meta_int("run_seed", 0));
    run.confusion = evaluate(ckpt.net, test);
    run.metrics = compute_metrics(run.confusion, a.weighted ? Averaging::Weighted : Averaging::Macro);
    const auto label_it = ckpt.meta.find("label");
    const EvalReport report =
        make_report(label_it == ckpt.meta.end() ? "eval" : label_it->second, {run});
    std::cout << to_table(report) << "\n" << to_records(report);
    return 0;
}

struct GradArgs {
    std::string layer = "full";
    double tol = 1e-5;
    double floor = 1e-3;
    std::uint64_t seed = 1;
    std::string arch = "B";
    std::string norm = "bin";
    std::size_t rows = 4;
    std::size_t cols = 5;
    std::size_t samples = 3;
    std::size_t max_entries = 0;
    bool literal_feature_scale = false;
};

int run_gradcheck(const GradArgs& a) {
    GradCheckOptions o;
    o.seed = a.seed;
    o.tolerance = a.tol;
    o.floor = a.floor;
    o.arch = parse_arch(a.arch);
    o.norm = parse_norm(a.norm);
    o.rows = a.rows;
    o.cols = a.cols;
    o.samples = a.samples;
    o.max_entries = a.max_entries;
    o.feature_scale = a.literal_feature_scale ? FeatureScale::TemporalStd : FeatureScale::FeatureStd;
    const GradCheckReport report = gradcheck(parse_grad_target(a.layer), o);
    for (const auto& g : report.groups) {
        std::printf("%s %s %s max_rel=%.3e max_abs=%.3e checked=%zu skipped=%zu\n",
                    g.pass ? "PASS" : "FAIL", report.target.c_str(), g.name.c_str(),
                    g.max_rel_error, g.max_abs_error, g.checked, g.skipped);
    }
    std::printf("%s %s\n", report.pass() ? "PASS" : "FAIL", report.target.c_str());
    return report.pass() ? 0 : 1;
}

int run_paramcount(const std::string& arch, const std::string& norm) {
    Rng rng(0);
    NetworkOptions opts;
    opts.norm = parse_norm(norm);
    std::cout << count_params(build_network(parse_arch(arch), rng, opts)) << "\n";
    return 0;
}

void print_class_stats(const LobDataset& data, std::size_t train_days) {
    const auto regimes_of = [&](std::size_t first, std::size_t last) {
        std::vector<LobDay> part(data.days.begin() + static_cast<long>(first),
                                 data.days.begin() + static_cast<long>(last));
        return part;
    };
    const std::size_t split = std::min(train_days, data.days.size());
    for (const auto& [h, track] : data.days.front().labels) {
        (void)track;
        for (int part = 0; part < 2; ++part) {
            const auto days = part == 0 ? regimes_of(0, split) : regimes_of(split, data.days.size());
            std::array<std::size_t, 3> counts{};
            for (const auto& day : days)
                for (int y : day.labels.at(h)) ++counts[static_cast<std::size_t>(y)];
            std::printf("horizon=%d split=%s down=%zu stationary=%zu up=%zu\n", h,
                        part == 0 ? "train" : "test", counts[0], counts[1], counts[2]);
        }
    }
}

int run_synth(const std::string& config, const std::string& out, bool print_config,
              bool stats, std::size_t train_days) {
    const SynthConfig cfg = load_synth_config(config);
    if (print_config) std::cout << to_string(cfg);
    if (out.empty() && !stats) {
        if (print_config) return 0;
        throw ConfigError("synth needs --out, --stats or --print-config");
    }
    const LobDataset data = generate_synthetic(cfg);
    if (stats) print_class_stats(data, train_days);
    if (out.empty()) return 0;
    DataArgs compact;
    compact.layout = "compact";
    write_fi2010(out, data, make_layout(compact));
    std::vector<std::size_t> lengths;
    for (const auto& day : data.days) lengths.push_back(day.frames.size());
    write_day_index(out + ".days", lengths);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bilinear-normalized TABL networks for limit order book mid-price classification"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train models and report median-of-runs metrics");
    train_cmd->add_option("--arch", train.arch, "Architecture")->check(CLI::IsMember({"B", "C"}));
    train_cmd->add_option("--norm", train.norm, "Input normalizer")
        ->check(CLI::IsMember({"bin", "dain", "bn", "none"}));
    train_cmd->add_option("--horizon", train.horizon, "Prediction horizon in events")
        ->check(CLI::IsMember({10, 20, 50}));
    add_data_options(train_cmd, train.data);
    train_cmd->add_option("--reg", train.reg, "Weight regularization")
        ->check(CLI::IsMember({"decay", "maxnorm"}));
    train_cmd->add_option("--runs", train.runs, "Independent runs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", train.seed, "Master seed");
    train_cmd->add_option("--out", train.out, "Checkpoint of the median run");
    train_cmd->add_option("--report", train.report, "Write the machine-readable report here");
    train_cmd->add_option("--log", train.log, "Write per-epoch records here");
    train_cmd->add_option("--epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size")
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--dropout", train.dropout, "Dropout after hidden layers")
        ->check(CLI::Range(0.0, 0.99));
    train_cmd->add_option("--threads", train.threads, "Concurrent runs (0 = all cores)");
    train_cmd->add_flag("--bin-eq6c-literal", train.literal_feature_scale,
                        "Divide the BiN feature path by the per-row temporal spread");
    train_cmd->add_flag("--weighted", train.weighted, "Support-weighted instead of macro averages");
    train_cmd->add_flag("--quiet", train.quiet, "Print only the machine-readable report");

    EvalArgs eval;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test days");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
    add_data_options(eval_cmd, eval.data);
    eval_cmd->add_option("--horizon", eval.horizon, "Override the checkpoint's horizon")
        ->check(CLI::IsMember({10, 20, 50}));
    eval_cmd->add_flag("--all-days", eval.all_days, "Evaluate on every day, not just the test days");
    eval_cmd->add_flag("--weighted", eval.weighted, "Support-weighted instead of macro averages");

    GradArgs grad;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    grad_cmd->add_option("--layer", grad.layer, "Component to check")
        ->check(CLI::IsMember({"bin", "dain", "bn", "bl", "tabl", "full"}));
    grad_cmd->add_option("--tol", grad.tol, "Maximum relative error");
    grad_cmd->add_option("--floor", grad.floor, "Lower bound on the relative-error denominator");
    grad_cmd->add_option("--seed", grad.seed, "Seed of the random instance");
    grad_cmd->add_option("--arch", grad.arch, "Architecture for --layer full")
        ->check(CLI::IsMember({"B", "C"}));
    grad_cmd->add_option("--norm", grad.norm, "Normalizer for --layer full")
        ->check(CLI::IsMember({"bin", "dain", "bn", "none"}));
    grad_cmd->add_option("--rows", grad.rows, "Input rows for layer checks")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--cols", grad.cols, "Input columns for layer checks")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--samples", grad.samples, "Batch size")->check(CLI::PositiveNumber);
    grad_cmd->add_option("--max-entries", grad.max_entries,
                         "Check at most this many random entries per group (0 = all)");
    grad_cmd->add_flag("--bin-eq6c-literal", grad.literal_feature_scale,
                       "Check the per-row-spread feature path of BiN");

    std::string pc_arch = "B";
    std::string pc_norm = "none";
    auto* pc_cmd = app.add_subcommand("paramcount", "Print the trainable parameter count");
    pc_cmd->add_option("--arch", pc_arch, "Architecture")->check(CLI::IsMember({"B", "C"}));
    pc_cmd->add_option("--norm", pc_norm, "Input normalizer")
        ->check(CLI::IsMember({"bin", "dain", "bn", "none"}));

    std::string synth_config = "default";
    std::string synth_out;
    bool synth_print = false;
    bool synth_stats = false;
    std::size_t synth_train_days = 7;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic order book in the compact layout");
    synth_cmd->add_option("--config", synth_config, "'default' or a key=value config file");
    synth_cmd->add_option("--out", synth_out, "Output matrix file (day index goes to <out>.days)");
    synth_cmd->add_flag("--print-config", synth_print, "Print the resolved configuration");
    synth_cmd->add_flag("--stats", synth_stats, "Print class counts per horizon and split");
    synth_cmd->add_option("--train-days", synth_train_days, "Leading days counted as training");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorCategory::Config);
    }

    try {
        if (*train_cmd) return run_train(train);
        if (*eval_cmd) return run_eval(eval);
        if (*grad_cmd) return run_gradcheck(grad);
        if (*pc_cmd) return run_paramcount(pc_arch, pc_norm);
        if (*synth_cmd) return run_synth(synth_config, synth_out, synth_print, synth_stats, synth_train_days);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
