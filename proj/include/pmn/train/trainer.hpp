#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pmn/common/keyvalue.hpp"
#include "pmn/data/records.hpp"
#include "pmn/eval/metrics.hpp"
#include "pmn/model/checkpoint.hpp"
#include "pmn/model/params.hpp"

namespace pmn::train {

using model::Checkpoint;
using model::ModelParams;
using model::PMNConfig;

struct TrainConfig {
    std::size_t batch_size = 512;
    std::size_t epochs = 40;
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    /// Global gradient-norm clip; 0 disables it.
    double clip_norm = 0.0;
    /// Write measured seconds to the epoch log instead of 0.
    bool log_wall_time = false;
    /// Add a test row to the epoch log after every epoch.
    bool evaluate_test = true;
    /// Where best.ckpt and last.ckpt go; empty keeps checkpoints in memory only.
    std::filesystem::path checkpoint_dir;
    PMNConfig model;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// Reads batch_size, epochs, learning_rate, seed, threads, clip_norm,
/// log_wall_time, evaluate_test and every model key.
TrainConfig read_train_config(KeyValueReader& reader, const TrainConfig& defaults = {});
void write_train_config(std::ostream& out, const TrainConfig& config);

struct EpochLog {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    double mean_auroc = 0.0;
    double mean_aupr = 0.0;
    double mean_recall_fdr50 = 0.0;
    double seconds = 0.0;
    bool operator==(const EpochLog&) const = default;
};

inline constexpr const char* kEpochLogHeader =
    "epoch,split,loss,mean_auroc,mean_aupr,mean_recall_fdr50,seconds";
void write_epoch_log(std::ostream& out, const std::vector<EpochLog>& logs);
std::string epoch_log_row(const EpochLog& log);

/// Argmax of validation mean auROC; ties go to the earliest epoch, NaN ranks
/// last. Throws ContractError without validation rows.
std::size_t select_best_epoch(const std::vector<EpochLog>& logs);

struct Evaluation {
    /// scores[i][k]: prediction for record i, output k.
    std::vector<std::vector<double>> scores;
    /// Label index of each output column.
    std::vector<std::size_t> output_labels;
    std::vector<eval::LabelMetrics> per_label;  // one per output column
    double mean_loss = 0.0;
    /// Mean |w^K_i - y_i| over records and labels; NaN for CNN variants.
    double attention_gap = 0.0;
};

/// Evaluation-mode forward over `records`. Throws ConfigError when the
/// records do not match the configured label count or sequence length.
template <typename T>
Evaluation evaluate_model(const ModelParams<T>& params, const PMNConfig& config,
                          const std::vector<data::SequenceRecord>& records,
                          std::size_t threads = 1);

Evaluation evaluate_checkpoint(const Checkpoint& checkpoint,
                               const std::vector<data::SequenceRecord>& records,
                               std::size_t threads = 1, bool double_precision = false);

/// Joins per-label cnn_single checkpoints into one multi-label evaluation.
Evaluation evaluate_single_label_suite(const std::vector<Checkpoint>& checkpoints,
                                       const std::vector<data::SequenceRecord>& records,
                                       std::size_t threads = 1, bool double_precision = false);

struct TrainResult {
    Checkpoint best;
    Checkpoint last;
    std::size_t best_epoch = 0;
    std::vector<EpochLog> logs;
    /// Validation attention gap after each epoch (NaN for CNN variants).
    std::vector<double> valid_attention_gap;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Adam on the mean per-sample objective over shuffled batches. Per-sample
/// gradients are summed inside fixed blocks of samples and the blocks are
/// reduced in ascending order, so results do not depend on `threads`.
template <typename T>
TrainResult train_model(const data::DatasetSplit& split, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

inline constexpr std::size_t kGradientBlock = 16;

}  // namespace pmn::train
