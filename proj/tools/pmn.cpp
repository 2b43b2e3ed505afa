// pmn: dataset construction, training, evaluation and clustering for
// prototype matching networks.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "pmn/common/error.hpp"
#include "pmn/common/keyvalue.hpp"
#include "pmn/data/batch.hpp"
#include "pmn/data/genome.hpp"
#include "pmn/data/io.hpp"
#include "pmn/data/synth.hpp"
#include "pmn/eval/cluster.hpp"
#include "pmn/eval/report.hpp"
#include "pmn/eval/ttest.hpp"
#include "pmn/model/checkpoint.hpp"
#include "pmn/model/model_gradcheck.hpp"
#include "pmn/simd/kernels.hpp"
#include "pmn/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace pmn;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string precision = "f32";
    std::vector<std::string> overrides;
    bool f64() const { return precision == "f64"; }
};

class UsageError : public Error {
public:
    using Error::Error;
};

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

std::vector<KeyValueEntry> load_entries(const std::string& path, const Globals& g) {
    auto entries = path.empty() ? std::vector<KeyValueEntry>{} : parse_key_values_file(path);
    for (const auto& o : g.overrides) entries.push_back(parse_override(o));
    return entries;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Globals& g, const std::string& spec_file, const fs::path& out_dir) {
    KeyValueReader reader(load_entries(spec_file, g));
    data::SynthSpec spec = data::read_synth_spec(reader);
    reader.reject_unknown();
    if (g.seed) spec.seed = *g.seed;
    auto result = data::synth_generate(spec);
    data::write_dataset(out_dir, result.split);
    {
        auto out = open_out(out_dir / "synth_spec.txt");
        data::write_synth_spec(out, spec);
    }
    {
        auto out = open_out(out_dir / "ground_truth.tsv");
        data::write_ground_truth(out, spec, result.bookkeeping);
    }
    const std::string stats = data::stats_report(result.split);
    auto out = open_out(out_dir / "stats.tsv");
    out << stats;
    std::cout << stats;
    return 0;
}

// ---------------------------------------------------------------- build

std::set<std::string> chrom_set(const std::string& text) {
    std::set<std::string> out;
    for (const auto& item : split(text, ',')) {
        const auto id = trim(item);
        if (!id.empty()) out.insert(data::normalize_chrom(id));
    }
    return out;
}

struct BuildOptions {
    std::int64_t window = 200;
    std::int64_t stride = 50;
    double score_threshold = 1.0;
    std::string valid_chroms = "1,8,21";
    std::string test_chroms = "3,12,17";
};

int cmd_build(const std::string& peaks_file, const std::string& labels_file,
              const std::string& genome_file, const fs::path& out_dir, const BuildOptions& o) {
    if (o.window <= 0 || o.stride <= 0) throw ConfigError("--window and --stride must be positive");
    const auto names = data::read_label_list(fs::path(labels_file));
    if (names.empty()) throw ConfigError("label list " + labels_file + " is empty");
    const auto peaks = data::read_peaks(fs::path(peaks_file), names);
    const auto genome = data::read_genome(fs::path(genome_file));
    const auto lengths = data::chrom_lengths(genome);
    const auto windows = data::build_windows(lengths, o.window, o.stride);
    const auto labeled =
        data::label_windows(windows, peaks, names.size(), o.window, o.score_threshold, &lengths);
    if (labeled.peaks_unknown_chrom) {
        std::cerr << "warning: skipped " << labeled.peaks_unknown_chrom
                  << " peaks on chromosomes missing from the genome\n";
    }
    if (labeled.windows.empty()) std::cerr << "warning: no window has a positive label\n";
    std::vector<data::SequenceRecord> records;
    for (const auto& lw : labeled.windows) {
        const auto& seq = genome.at(lw.window.chrom);
        records.push_back({lw.window.chrom, lw.window.start,
                           seq.substr(static_cast<std::size_t>(lw.window.start),
                                      static_cast<std::size_t>(o.window)),
                           lw.labels});
    }
    data::ChromosomeSets sets{chrom_set(o.valid_chroms), chrom_set(o.test_chroms)};
    const auto split = data::split_by_chromosome(std::move(records), names, sets);
    data::write_dataset(out_dir, split);
    {
        auto out = open_out(out_dir / "build_config.txt");
        out << "peaks = " << peaks_file << "\nlabels = " << labels_file << "\ngenome = "
            << genome_file << "\nwindow = " << o.window << "\nstride = " << o.stride
            << "\nscore_threshold = " << format_double(o.score_threshold)
            << "\nvalid_chroms = " << o.valid_chroms << "\ntest_chroms = " << o.test_chroms
            << "\npeaks_used = " << labeled.peaks_used
            << "\npeaks_below_threshold = " << labeled.peaks_below_threshold
            << "\npeaks_unknown_chrom = " << labeled.peaks_unknown_chrom << '\n';
    }
    const std::string stats = data::stats_report(split);
    auto out = open_out(out_dir / "stats.tsv");
    out << stats;
    std::cout << stats;
    return 0;
}

// ---------------------------------------------------------------- train

train::TrainConfig load_train_config(const Globals& g, const std::string& config_file,
                                     const data::DatasetSplit& split) {
    train::TrainConfig defaults;
    defaults.model.labels = split.label_count();
    if (!split.train.empty()) defaults.model.seq_len = split.train.front().sequence.size();
    defaults.threads = g.threads;
    KeyValueReader reader(load_entries(config_file, g));
    train::TrainConfig cfg = train::read_train_config(reader, defaults);
    reader.reject_unknown();
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

train::TrainResult run_training(const Globals& g, const data::DatasetSplit& split,
                                const train::TrainConfig& cfg) {
    auto progress = [](const train::EpochLog& row) {
        std::cerr << train::epoch_log_row(row) << '\n';
    };
    return g.f64() ? train::train_model<double>(split, cfg, progress)
                   : train::train_model<float>(split, cfg, progress);
}

void write_run(const fs::path& dir, const train::TrainConfig& cfg, const train::TrainResult& r) {
    fs::create_directories(dir);
    {
        auto out = open_out(dir / "epoch_log.csv");
        train::write_epoch_log(out, r.logs);
    }
    auto out = open_out(dir / "summary.txt");
    out << "best_epoch = " << r.best_epoch << "\nbest_valid_auroc = "
        << format_double(r.best.valid_auroc) << "\nvariant = " << model::to_string(cfg.model.variant)
        << '\n';
}

int cmd_train(const Globals& g, const fs::path& dataset_dir, const std::string& config_file,
              const fs::path& out_dir) {
    const auto split = data::read_dataset(dataset_dir);
    train::TrainConfig cfg = load_train_config(g, config_file, split);
    fs::create_directories(out_dir);
    {
        auto out = open_out(out_dir / "effective_config.txt");
        out << "# precision " << g.precision << ", dataset " << dataset_dir.string() << '\n';
        train::write_train_config(out, cfg);
    }
    if (cfg.model.variant != model::Variant::cnn_single) {
        cfg.checkpoint_dir = out_dir;
        write_run(out_dir, cfg, run_training(g, split, cfg));
        return 0;
    }
    for (std::size_t label = 0; label < cfg.model.labels; ++label) {
        train::TrainConfig single = cfg;
        single.model.target_label = label;
        single.checkpoint_dir = out_dir / ("label_" + std::to_string(label));
        std::cerr << "# label " << label << '\n';
        write_run(single.checkpoint_dir, single, run_training(g, split, single));
    }
    return 0;
}

// ---------------------------------------------------------------- eval

std::vector<fs::path> single_label_checkpoints(const fs::path& dir) {
    std::vector<fs::path> out;
    for (std::size_t label = 0;; ++label) {
        const auto p = dir / ("label_" + std::to_string(label)) / "best.ckpt";
        if (!fs::exists(p)) break;
        out.push_back(p);
    }
    return out;
}

// A checkpoint file, a run directory with best.ckpt, or a cnn_single run
// directory with label_<i>/best.ckpt.
train::Evaluation evaluate_path(const Globals& g, const fs::path& path,
                                const std::vector<data::SequenceRecord>& records) {
    if (fs::is_directory(path)) {
        if (fs::exists(path / "best.ckpt")) {
            return train::evaluate_checkpoint(model::load_checkpoint(path / "best.ckpt"), records,
                                              g.threads, g.f64());
        }
        std::vector<model::Checkpoint> suite;
        for (const auto& p : single_label_checkpoints(path)) suite.push_back(model::load_checkpoint(p));
        if (suite.empty()) throw ConfigError("no checkpoint found under " + path.string());
        return train::evaluate_single_label_suite(suite, records, g.threads, g.f64());
    }
    return train::evaluate_checkpoint(model::load_checkpoint(path), records, g.threads, g.f64());
}

int cmd_eval(const Globals& g, const fs::path& checkpoint, const fs::path& dataset_dir,
             const std::string& split_name, const std::string& baseline, const std::string& out_dir) {
    const auto split = data::read_dataset(dataset_dir);
    data::SplitPart part;
    if (split_name == "train") part = data::SplitPart::train;
    else if (split_name == "valid") part = data::SplitPart::valid;
    else if (split_name == "test") part = data::SplitPart::test;
    else throw ConfigError("unknown split " + split_name);
    const auto& records = data::records(split, part);
    if (records.empty()) throw ConfigError("split " + split_name + " is empty");

    std::vector<std::size_t> sample_counts;
    for (std::size_t c : data::dataset_stats(split.train, split.label_count()).positives_per_label) {
        sample_counts.push_back(c);
    }
    auto report_for = [&](const fs::path& path, const eval::MetricReport* base) {
        const auto ev = evaluate_path(g, path, records);
        if (ev.per_label.size() != split.label_count()) {
            throw ConfigError(path.string() + " predicts " + std::to_string(ev.per_label.size()) +
                              " of " + std::to_string(split.label_count()) +
                              " labels; evaluate a cnn_single run directory instead");
        }
        return eval::summarize(path.filename().string(), split.label_names, ev.per_label, base,
                               &sample_counts);
    };
    std::optional<eval::MetricReport> base;
    if (!baseline.empty()) base = report_for(baseline, nullptr);
    const auto report = report_for(checkpoint, base ? &*base : nullptr);

    std::ostringstream text;
    eval::write_report_tsv(text, report);
    if (base) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < report.per_label.size(); ++i) {
            if (report.per_label[i].auroc && base->per_label[i].auroc) {
                a.push_back(*report.per_label[i].auroc);
                b.push_back(*base->per_label[i].auroc);
            }
        }
        if (a.size() >= 2) {
            const auto t = eval::paired_t_test_one_tailed(a, b);
            text << "\npaired_t_test_auroc\tt\t" << format_double(t.t) << "\tp\t"
                 << format_double(t.p) << "\tdf\t" << t.degrees_of_freedom
                 << (t.degenerate ? "\tdegenerate" : "") << '\n';
        }
    }
    std::cout << text.str();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        open_out(fs::path(out_dir) / "report.tsv") << text.str();
        auto per_label = open_out(fs::path(out_dir) / "per_label.tsv");
        eval::write_per_label_tsv(per_label, report);
    }
    return 0;
}

// ---------------------------------------------------------------- cluster

int cmd_cluster(const fs::path& checkpoint_path, std::size_t k, const std::string& groups_file,
                const std::string& labels_file, const std::string& out_dir) {
    fs::path path = checkpoint_path;
    if (fs::is_directory(path)) path /= "best.ckpt";
    const auto ckpt = model::load_checkpoint(path);
    if (!model::has_prototypes(ckpt.config.variant)) {
        throw ConfigError("a " + std::string(model::to_string(ckpt.config.variant)) +
                          " checkpoint has no prototypes to cluster");
    }
    const std::size_t labels = ckpt.config.labels;
    if (labels < 2) throw ConfigError("clustering needs at least two prototypes");
    const auto dendrogram = eval::cluster_prototypes(ckpt.params.prototypes);
    if (k == 0) k = labels;
    if (k > labels) throw ConfigError("k = " + std::to_string(k) + " exceeds " + std::to_string(labels) + " labels");
    const auto clusters = eval::cut_tree(dendrogram, k);
    std::vector<std::string> names;
    if (!labels_file.empty()) names = data::read_label_list(fs::path(labels_file));

    std::ostringstream merges, map;
    eval::write_dendrogram(merges, dendrogram);
    eval::write_cluster_map(map, names, clusters);
    std::cout << "# dendrogram\n" << merges.str() << "# clusters (k = " << k << ")\n" << map.str();
    if (!groups_file.empty()) {
        const auto groups = data::read_ground_truth_groups(groups_file);
        std::cout << "pair_recovery_score\t" << format_double(eval::pair_recovery_score(clusters, groups))
                  << "\ncluster_count\t" << eval::cluster_count(clusters) << '\n';
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        open_out(fs::path(out_dir) / "dendrogram.tsv") << merges.str();
        open_out(fs::path(out_dir) / "clusters.tsv") << map.str();
    }
    return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const Globals& g, const std::string& config_file, std::size_t seeds,
                  const std::string& variant_filter, double relative_step) {
    // Base configuration: the tiny config with file and --set overrides.
    KeyValueReader reader(load_entries(config_file, g));
    const model::PMNConfig base = model::read_model_config(reader, model::tiny_config());
    reader.reject_unknown();

    std::vector<model::PMNConfig> configs;
    for (auto v : {model::Variant::pmn, model::Variant::pmn_no_lstm, model::Variant::cnn_multi,
                   model::Variant::cnn_single}) {
        if (variant_filter != "all" && model::parse_variant(variant_filter) != v) continue;
        for (auto a : {model::AttentionMode::sigmoid, model::AttentionMode::softmax_hops}) {
            model::PMNConfig c = base;
            c.variant = v;
            c.attention = a;
            configs.push_back(c);
        }
    }
    const std::uint64_t first_seed = g.seed.value_or(1);
    bool ok = true;
    std::cout << "variant\tattention\tseed\tprobes\tkinks_skipped\tmax_relative_error\tresult\n";
    for (const auto& c : configs) {
        for (std::size_t s = 0; s < seeds; ++s) {
            model::ModelGradCheckOptions options;
            options.seed = first_seed + s;
            options.check.relative_step = relative_step;
            const auto report = model::model_grad_check(c, options);
            ok = ok && report.passed;
            std::cout << model::to_string(c.variant) << '\t' << model::to_string(c.attention) << '\t'
                      << options.seed << '\t' << report.total_probes << '\t' << report.kinks_skipped
                      << '\t' << format_double(report.max_relative_error) << '\t'
                      << (report.passed ? "pass" : "FAIL");
            if (!report.failure.empty()) std::cout << '\t' << report.failure;
            std::cout << '\n';
            if (!report.passed) {
                for (const auto& p : report.parameters) {
                    std::cout << "#   " << p.name << " probes " << p.probes << " max "
                              << format_double(p.max_relative_error) << " at " << p.worst_index
                              << " analytic " << format_double(p.worst_analytic) << " numeric "
                              << format_double(p.worst_numeric) << '\n';
                }
            }
        }
    }
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------- init

int cmd_init(const Globals& g, const std::string& config_file, const fs::path& dataset_dir,
             const fs::path& out_file) {
    const auto split = data::read_dataset(dataset_dir);
    const auto cfg = load_train_config(g, config_file, split);
    model::Checkpoint ckpt;
    ckpt.config = cfg.model;
    ckpt.params = model::init_params<float>(cfg.model, cfg.seed);
    ckpt.params.set_requires_grad(false);
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    model::save_checkpoint(out_file, ckpt);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prototype matching networks for transcription factor binding prediction"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Random seed (overrides config files)");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--precision", g.precision, "Arithmetic precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--set", g.overrides, "Configuration override key=value (repeatable)");
    std::string simd = "auto";
    app.add_option("--simd", simd, "Kernel backend")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    std::string a1, a2, a3, a4;
    auto* synth = app.add_subcommand("synth", "Generate a planted-motif dataset");
    synth->add_option("spec", a1, "SynthSpec key=value file")->required();
    synth->add_option("out_dir", a2, "Output directory")->required();

    BuildOptions build_opts;
    auto* build = app.add_subcommand("build", "Build a windowed dataset from peaks and a genome");
    build->add_option("peaks", a1, "Peak TSV")->required();
    build->add_option("labels", a2, "Label list")->required();
    build->add_option("genome", a3, "Per-chromosome sequence file")->required();
    build->add_option("out_dir", a4, "Output directory")->required();
    build->add_option("--window", build_opts.window, "Window length");
    build->add_option("--stride", build_opts.stride, "Window stride");
    build->add_option("--score-threshold", build_opts.score_threshold, "Minimum peak score");
    build->add_option("--valid-chroms", build_opts.valid_chroms, "Validation chromosomes");
    build->add_option("--test-chroms", build_opts.test_chroms, "Test chromosomes");

    auto* trainc = app.add_subcommand("train", "Train a model");
    trainc->add_option("dataset_dir", a1, "Dataset directory")->required();
    trainc->add_option("config", a2, "Training/model key=value file")->required();
    trainc->add_option("out_dir", a3, "Run directory")->required();

    std::string split_name = "test", baseline, out_dir;
    auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint or run directory");
    evalc->add_option("checkpoint", a1, "Checkpoint file or run directory")->required();
    evalc->add_option("dataset_dir", a2, "Dataset directory")->required();
    evalc->add_option("--split", split_name, "train, valid or test");
    evalc->add_option("--baseline", baseline, "Baseline checkpoint or run directory");
    evalc->add_option("--out", out_dir, "Directory for report.tsv and per_label.tsv");

    std::size_t k = 0;
    std::string groups, labels_file;
    auto* cluster = app.add_subcommand("cluster", "Cluster learned prototypes");
    cluster->add_option("checkpoint", a1, "Checkpoint file or run directory")->required();
    cluster->add_option("--k", k, "Clusters in the cut (default: one per label)");
    cluster->add_option("--groups", groups, "Ground-truth file with planted groups");
    cluster->add_option("--labels", labels_file, "Label list for naming");
    cluster->add_option("--out", out_dir, "Directory for dendrogram.tsv and clusters.tsv");

    std::size_t seeds = 5;
    std::string variant = "all";
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every variant");
    grad->add_option("config", a1, "Optional model key=value file");
    grad->add_option("--seeds", seeds, "Seeds per configuration")->check(CLI::PositiveNumber);
    grad->add_option("--variant", variant, "Restrict to one variant");
    double relative_step = model::ModelGradCheckOptions{}.check.relative_step;
    grad->add_option("--relative-step", relative_step, "Probe step relative to parameter scale")
        ->check(CLI::PositiveNumber);

    auto* init = app.add_subcommand("init", "Write an untrained checkpoint");
    init->add_option("config", a1, "Training/model key=value file")->required();
    init->add_option("dataset_dir", a2, "Dataset directory (label count, sequence length)")->required();
    init->add_option("out", a3, "Checkpoint path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (simd != "auto") simd::set_backend(simd::parse_backend(simd));
        if (*synth) return cmd_synth(g, a1, a2);
        if (*build) return cmd_build(a1, a2, a3, a4, build_opts);
        if (*trainc) return cmd_train(g, a1, a2, a3);
        if (*evalc) return cmd_eval(g, a1, a2, split_name, baseline, out_dir);
        if (*cluster) return cmd_cluster(a1, k, groups, labels_file, out_dir);
        if (*grad) return cmd_gradcheck(g, a1, seeds, variant, relative_step);
        if (*init) return cmd_init(g, a1, a2, a3);
    } catch (const ConfigError& e) {
        std::cerr << "pmn: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "pmn: " << e.what() << '\n';
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "pmn: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "pmn: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
