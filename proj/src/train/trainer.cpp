#include "pmn/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "pmn/autodiff/adam.hpp"
#include "pmn/common/error.hpp"
#include "pmn/common/parallel.hpp"
#include "pmn/common/rng.hpp"
#include "pmn/data/batch.hpp"
#include "pmn/data/encode.hpp"
#include "pmn/eval/report.hpp"
#include "pmn/model/pmn.hpp"

namespace pmn::train {

using data::SequenceRecord;

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate must be positive");
    }
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (!(clip_norm >= 0) || !std::isfinite(clip_norm)) throw ConfigError("clip_norm must be >= 0");
    model.validate();
}

TrainConfig read_train_config(KeyValueReader& reader, const TrainConfig& defaults) {
    TrainConfig c = defaults;
    auto positive = [&](const char* key, std::size_t fallback) {
        const auto v = reader.get_int(key, static_cast<std::int64_t>(fallback));
        if (v < 1) throw ConfigError(std::string(key) + " must be at least 1");
        return static_cast<std::size_t>(v);
    };
    c.batch_size = positive("batch_size", c.batch_size);
    c.epochs = positive("epochs", c.epochs);
    c.learning_rate = reader.get_double("learning_rate", c.learning_rate);
    c.seed = static_cast<std::uint64_t>(reader.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.threads = positive("threads", c.threads);
    c.clip_norm = reader.get_double("clip_norm", c.clip_norm);
    c.log_wall_time = reader.get_bool("log_wall_time", c.log_wall_time);
    c.evaluate_test = reader.get_bool("evaluate_test", c.evaluate_test);
    c.model = model::read_model_config(reader, c.model);
    c.validate();
    return c;
}

void write_train_config(std::ostream& out, const TrainConfig& c) {
    out << "batch_size = " << c.batch_size << '\n'
        << "epochs = " << c.epochs << '\n'
        << "learning_rate = " << format_double(c.learning_rate) << '\n'
        << "seed = " << c.seed << '\n'
        << "threads = " << c.threads << '\n'
        << "clip_norm = " << format_double(c.clip_norm) << '\n'
        << "log_wall_time = " << (c.log_wall_time ? "true" : "false") << '\n'
        << "evaluate_test = " << (c.evaluate_test ? "true" : "false") << '\n';
    model::write_model_config(out, c.model);
}

std::string epoch_log_row(const EpochLog& log) {
    return std::to_string(log.epoch) + ',' + log.split + ',' + format_double(log.loss) + ',' +
           format_double(log.mean_auroc) + ',' + format_double(log.mean_aupr) + ',' +
           format_double(log.mean_recall_fdr50) + ',' + format_double(log.seconds);
}

void write_epoch_log(std::ostream& out, const std::vector<EpochLog>& logs) {
    out << kEpochLogHeader << '\n';
    for (const auto& log : logs) out << epoch_log_row(log) << '\n';
}

std::size_t select_best_epoch(const std::vector<EpochLog>& logs) {
    std::size_t best_epoch = 0;
    double best = -INFINITY;
    bool any = false;
    for (const auto& log : logs) {
        if (log.split != "valid") continue;
        const double v = std::isnan(log.mean_auroc) ? -INFINITY : log.mean_auroc;
        if (!any || v > best) {
            best = v;
            best_epoch = log.epoch;
            any = true;
        }
    }
    if (!any) throw ContractError("select_best_epoch: no validation rows");
    return best_epoch;
}

namespace {

void check_records(const PMNConfig& config, const std::vector<SequenceRecord>& records) {
    for (const auto& r : records) {
        if (r.labels.size() != config.labels) {
            throw ConfigError("model has " + std::to_string(config.labels) +
                              " labels but a record carries " + std::to_string(r.labels.size()));
        }
        if (r.sequence.size() != config.seq_len) {
            throw ConfigError("model expects sequences of length " +
                              std::to_string(config.seq_len) + ", got " +
                              std::to_string(r.sequence.size()));
        }
    }
}

std::vector<std::size_t> output_labels(const PMNConfig& config) {
    if (config.variant == model::Variant::cnn_single) return {config.target_label};
    std::vector<std::size_t> out(config.labels);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
}

template <typename T>
std::vector<T> label_values(const SequenceRecord& r) {
    return std::vector<T>(r.labels.begin(), r.labels.end());
}

std::vector<eval::LabelMetrics> column_metrics(const std::vector<std::vector<double>>& scores,
                                               const std::vector<SequenceRecord>& records,
                                               const std::vector<std::size_t>& labels) {
    std::vector<eval::LabelMetrics> out;
    std::vector<double> column(records.size());
    std::vector<std::uint8_t> truth(records.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
        for (std::size_t i = 0; i < records.size(); ++i) {
            column[i] = scores[i][k];
            truth[i] = records[i].labels[labels[k]];
        }
        out.push_back(eval::label_metrics(column, truth));
    }
    return out;
}

double metric_mean(const std::vector<eval::LabelMetrics>& per_label, eval::Metric metric) {
    std::vector<std::optional<double>> values;
    for (const auto& m : per_label) values.push_back(eval::metric_value(m, metric));
    return values.empty() ? NAN : eval::summarize_values(values).mean;
}

EpochLog make_log(std::size_t epoch, const char* split, double loss,
                  const std::vector<eval::LabelMetrics>& per_label, double seconds) {
    return {epoch,
            split,
            loss,
            metric_mean(per_label, eval::Metric::auroc),
            metric_mean(per_label, eval::Metric::aupr),
            metric_mean(per_label, eval::Metric::recall_fdr50),
            seconds};
}

template <typename T>
void copy_values(ModelParams<T>& dst, const ModelParams<T>& src) {
    auto d = dst.tensors();
    const auto s = src.named();
    for (std::size_t i = 0; i < d.size(); ++i) {
        std::copy(s[i].second->values().begin(), s[i].second->values().end(), d[i]->data());
    }
}

template <typename T>
Checkpoint snapshot(const ModelParams<T>& params, const PMNConfig& config, std::size_t epoch,
                    double valid_auroc) {
    Checkpoint c;
    c.config = config;
    c.params = model::convert_params<float>(params);
    c.params.set_requires_grad(false);
    c.epoch = static_cast<std::uint32_t>(epoch);
    c.valid_auroc = valid_auroc;
    return c;
}

}  // namespace

template <typename T>
Evaluation evaluate_model(const ModelParams<T>& params, const PMNConfig& config,
                          const std::vector<SequenceRecord>& records, std::size_t threads) {
    config.validate();
    check_records(config, records);
    Evaluation out;
    out.output_labels = output_labels(config);
    const std::size_t n = records.size();
    out.scores.assign(n, std::vector<double>(out.output_labels.size()));
    std::vector<double> losses(n), gaps(n);
    const bool prototypes = model::has_prototypes(config.variant);
    constexpr std::size_t kChunk = 32;
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t chunk, std::size_t) {
        ad::Tape<T> tape;
        tape.set_grad_enabled(false);
        const model::ForwardOptions options;
        for (std::size_t i = chunk * kChunk; i < std::min(n, (chunk + 1) * kChunk); ++i) {
            tape.clear();
            const auto x = data::one_hot_encode<T>(records[i].sequence);
            const auto y = label_values<T>(records[i]);
            const auto fwd = model::run_model(tape, x, params, config, options);
            for (std::size_t k = 0; k < out.output_labels.size(); ++k) {
                out.scores[i][k] = double((*fwd.prediction)[k]);
            }
            losses[i] = double(model::sample_loss(tape, fwd, std::span<const T>(y), config)[0]);
            if (prototypes) {
                double gap = 0.0;
                for (std::size_t l = 0; l < config.labels; ++l) {
                    gap += std::abs(double((*fwd.final_attention)[l]) - double(y[l]));
                }
                gaps[i] = gap / double(config.labels);
            }
        }
    });
    double loss_sum = 0.0, gap_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        loss_sum += losses[i];
        gap_sum += gaps[i];
    }
    out.mean_loss = n ? loss_sum / double(n) : NAN;
    out.attention_gap = prototypes && n ? gap_sum / double(n) : NAN;
    out.per_label = column_metrics(out.scores, records, out.output_labels);
    return out;
}

Evaluation evaluate_checkpoint(const Checkpoint& checkpoint,
                               const std::vector<SequenceRecord>& records, std::size_t threads,
                               bool double_precision) {
    if (double_precision) {
        return evaluate_model(model::convert_params<double>(checkpoint.params), checkpoint.config,
                              records, threads);
    }
    return evaluate_model(checkpoint.params, checkpoint.config, records, threads);
}

Evaluation evaluate_single_label_suite(const std::vector<Checkpoint>& checkpoints,
                                       const std::vector<SequenceRecord>& records,
                                       std::size_t threads, bool double_precision) {
    if (checkpoints.empty()) throw ConfigError("no single-label checkpoints given");
    const std::size_t labels = checkpoints.front().config.labels;
    std::vector<const Checkpoint*> by_label(labels, nullptr);
    for (const auto& c : checkpoints) {
        if (c.config.variant != model::Variant::cnn_single) {
            throw ConfigError("single-label suite given a " +
                              std::string(model::to_string(c.config.variant)) + " checkpoint");
        }
        if (c.config.labels != labels) throw ConfigError("single-label checkpoints disagree on labels");
        auto& slot = by_label.at(c.config.target_label);
        if (slot) {
            throw ConfigError("two checkpoints for label " + std::to_string(c.config.target_label));
        }
        slot = &c;
    }
    Evaluation out;
    out.scores.assign(records.size(), {});
    out.attention_gap = NAN;
    for (std::size_t l = 0; l < labels; ++l) {
        if (!by_label[l]) throw ConfigError("no checkpoint for label " + std::to_string(l));
        const auto part = evaluate_checkpoint(*by_label[l], records, threads, double_precision);
        out.output_labels.push_back(l);
        out.per_label.push_back(part.per_label.at(0));
        out.mean_loss += part.mean_loss;
        for (std::size_t i = 0; i < records.size(); ++i) out.scores[i].push_back(part.scores[i][0]);
    }
    return out;
}

template <typename T>
TrainResult train_model(const data::DatasetSplit& split, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
    config.validate();
    const PMNConfig& mc = config.model;
    if (split.train.empty()) throw ConfigError("training split is empty");
    if (split.valid.empty()) throw ConfigError("validation split is empty");
    if (split.label_count() != mc.labels) {
        throw ConfigError("dataset has " + std::to_string(split.label_count()) +
                          " labels, model expects " + std::to_string(mc.labels));
    }
    check_records(mc, split.train);

    ModelParams<T> params = model::init_params<T>(mc, config.seed);
    auto tensors = params.tensors();
    ad::AdamState<T> adam(std::span<ad::Tensor<T>* const>(tensors),
                          ad::AdamOptions{config.learning_rate});
    std::size_t flat_size = 0;
    for (auto* t : tensors) flat_size += t->size();

    const std::size_t workers = std::max<std::size_t>(1, config.threads);
    std::vector<ModelParams<T>> clones(workers, params);
    for (auto& c : clones) c.set_requires_grad(true);

    const auto outputs = output_labels(mc);
    const std::size_t n = split.train.size();
    const std::uint64_t dropout_seed = Rng::derive(config.seed, 0xd50);

    TrainResult result;
    double best_valid = -INFINITY;
    if (!config.checkpoint_dir.empty()) std::filesystem::create_directories(config.checkpoint_dir);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        const auto batches = data::batch_indices(n, config.batch_size, config.seed, epoch);
        std::vector<std::vector<double>> train_scores(n, std::vector<double>(outputs.size()));
        std::vector<double> sample_losses(n);
        const std::uint64_t epoch_seed = Rng::derive(dropout_seed, epoch);

        for (std::size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            const std::size_t blocks = (batch.size() + kGradientBlock - 1) / kGradientBlock;
            std::vector<std::vector<T>> block_grads(blocks, std::vector<T>(flat_size));
            for (auto& c : clones) copy_values(c, params);
            parallel_for(blocks, workers, [&](std::size_t block, std::size_t worker) {
                ModelParams<T>& local = clones[worker];
                local.zero_grad();
                ad::Tape<T> tape;
                const model::ForwardOptions base{true, nullptr, false};
                const std::size_t end = std::min(batch.size(), (block + 1) * kGradientBlock);
                for (std::size_t s = block * kGradientBlock; s < end; ++s) {
                    const std::size_t idx = batch[s];
                    const auto& record = split.train[idx];
                    tape.clear();
                    Rng rng(Rng::derive(epoch_seed, idx));
                    model::ForwardOptions options = base;
                    options.rng = &rng;
                    const auto x = data::one_hot_encode<T>(record.sequence);
                    const auto y = label_values<T>(record);
                    const auto fwd = model::run_model(tape, x, local, mc, options);
                    const auto& loss = model::sample_loss(tape, fwd, std::span<const T>(y), mc);
                    const double value = double(loss[0]);
                    if (!std::isfinite(value)) {
                        throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) +
                                             ", batch " + std::to_string(b + 1) + ", record " +
                                             std::to_string(idx));
                    }
                    sample_losses[idx] = value;
                    for (std::size_t k = 0; k < outputs.size(); ++k) {
                        train_scores[idx][k] = double((*fwd.prediction)[k]);
                    }
                    tape.backward(loss);
                }
                auto local_tensors = local.tensors();
                T* dst = block_grads[block].data();
                for (auto* t : local_tensors) {
                    const auto g = t->grad();
                    dst = std::copy(g.begin(), g.end(), dst);
                }
            });

            std::vector<T> total(flat_size, T(0));
            for (const auto& g : block_grads) {
                for (std::size_t i = 0; i < flat_size; ++i) total[i] += g[i];
            }
            const T inv = T(1) / static_cast<T>(batch.size());
            for (auto& v : total) v *= inv;
            if (config.clip_norm > 0) {
                double sq = 0.0;
                for (T v : total) sq += double(v) * double(v);
                const double norm = std::sqrt(sq);
                if (norm > config.clip_norm) {
                    const T factor = static_cast<T>(config.clip_norm / norm);
                    for (auto& v : total) v *= factor;
                }
            }
            std::vector<std::span<const T>> grads;
            std::size_t offset = 0;
            for (auto* t : tensors) {
                grads.emplace_back(total.data() + offset, t->size());
                offset += t->size();
            }
            try {
                ad::adam_step(std::span<ad::Tensor<T>* const>(tensors),
                              std::span<const std::span<const T>>(grads), adam);
            } catch (const NonFiniteError& e) {
                throw NonFiniteError("epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(b + 1) + ": " + e.what());
            }
        }

        double train_loss = 0.0;
        for (double v : sample_losses) train_loss += v;
        train_loss /= double(n);
        const auto train_metrics = column_metrics(train_scores, split.train, outputs);
        const auto valid = evaluate_model(params, mc, split.valid, workers);
        std::optional<Evaluation> test;
        if (config.evaluate_test && !split.test.empty()) {
            test = evaluate_model(params, mc, split.test, workers);
        }
        const double seconds =
            config.log_wall_time
                ? std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()
                : 0.0;

        std::vector<EpochLog> rows;
        rows.push_back(make_log(epoch, "train", train_loss, train_metrics, seconds));
        rows.push_back(make_log(epoch, "valid", valid.mean_loss, valid.per_label, seconds));
        if (test) rows.push_back(make_log(epoch, "test", test->mean_loss, test->per_label, seconds));
        for (const auto& row : rows) {
            result.logs.push_back(row);
            if (on_epoch) on_epoch(row);
        }
        result.valid_attention_gap.push_back(valid.attention_gap);

        const double valid_auroc = rows[1].mean_auroc;
        result.last = snapshot(params, mc, epoch, valid_auroc);
        const double ranked = std::isnan(valid_auroc) ? -INFINITY : valid_auroc;
        if (epoch == 1 || ranked > best_valid) {
            best_valid = ranked;
            result.best = result.last;
            result.best_epoch = epoch;
            if (!config.checkpoint_dir.empty()) {
                model::save_checkpoint(config.checkpoint_dir / "best.ckpt", result.best);
            }
        }
        if (!config.checkpoint_dir.empty()) {
            model::save_checkpoint(config.checkpoint_dir / "last.ckpt", result.last);
        }
    }
    return result;
}

template Evaluation evaluate_model(const ModelParams<float>&, const PMNConfig&,
                                   const std::vector<SequenceRecord>&, std::size_t);
template Evaluation evaluate_model(const ModelParams<double>&, const PMNConfig&,
                                   const std::vector<SequenceRecord>&, std::size_t);
template TrainResult train_model<float>(const data::DatasetSplit&, const TrainConfig&,
                                        const EpochCallback&);
template TrainResult train_model<double>(const data::DatasetSplit&, const TrainConfig&,
                                         const EpochCallback&);

}  // namespace pmn::train
