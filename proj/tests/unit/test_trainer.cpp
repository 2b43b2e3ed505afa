#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "pmn/common/error.hpp"
#include "pmn/data/synth.hpp"
#include "pmn/model/checkpoint.hpp"
#include "pmn/train/trainer.hpp"

using namespace pmn;
using namespace pmn::train;

namespace {

const data::DatasetSplit& small_split() {
    static const data::DatasetSplit split = [] {
        data::SynthSpec spec;
        spec.labels = 3;
        spec.seq_len = 40;
        spec.motif_len = 6;
        spec.solo_probability = 0.4;
        spec.groups = {{{0, 1}, 0.3}};
        spec.train_count = 160;
        spec.valid_count = 48;
        spec.test_count = 48;
        spec.seed = 3;
        return data::synth_generate(spec).split;
    }();
    return split;
}

TrainConfig small_config(model::Variant variant = model::Variant::pmn) {
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.epochs = 3;
    cfg.learning_rate = 5e-3;
    cfg.seed = 4;
    cfg.model.labels = 3;
    cfg.model.seq_len = 40;
    cfg.model.hops = 2;
    cfg.model.conv = {{8, 5}, {8, 3}};
    cfg.model.dropout = 0.1;
    cfg.model.variant = variant;
    return cfg;
}

std::string log_text(const std::vector<EpochLog>& logs) {
    std::ostringstream out;
    write_epoch_log(out, logs);
    return out.str();
}

EpochLog valid_log(std::size_t epoch, double auroc) {
    EpochLog l;
    l.epoch = epoch;
    l.split = "valid";
    l.mean_auroc = auroc;
    return l;
}

TEST(SelectBestEpoch, TiesGoEarliestAndNanRanksLast) {
    EXPECT_EQ(select_best_epoch({valid_log(1, 0.7), valid_log(2, 0.8), valid_log(3, 0.8)}), 2u);
    EXPECT_EQ(select_best_epoch({valid_log(1, NAN), valid_log(2, 0.1)}), 2u);
    EXPECT_EQ(select_best_epoch({valid_log(1, NAN), valid_log(2, NAN)}), 1u);
    EpochLog train_row = valid_log(1, 0.99);
    train_row.split = "train";
    EXPECT_EQ(select_best_epoch({train_row, valid_log(1, 0.5), valid_log(2, 0.6)}), 2u);
    EXPECT_THROW(select_best_epoch({train_row}), ContractError);
}

TEST(EpochLogFormat, HeaderAndRoundTripDigits) {
    EpochLog l = valid_log(3, 0.1 + 0.2);
    l.loss = 1.0 / 3.0;
    const std::string text = log_text({l});
    EXPECT_EQ(text.substr(0, text.find('\n')), kEpochLogHeader);
    EXPECT_NE(text.find("0.30000000000000004"), std::string::npos);
    EXPECT_EQ(epoch_log_row(l).back(), '0');
}

TEST(TrainConfigText, RoundTripAndValidation) {
    auto cfg = small_config();
    cfg.clip_norm = 2.5;
    std::ostringstream out;
    write_train_config(out, cfg);
    KeyValueReader reader(parse_key_values_string(out.str(), "cfg"));
    EXPECT_EQ(read_train_config(reader), cfg);
    reader.reject_unknown();
    cfg.batch_size = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.learning_rate = -1;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Training, IdenticalSeedsGiveIdenticalLogsAndParameters) {
    const auto a = train_model<float>(small_split(), small_config());
    const auto b = train_model<float>(small_split(), small_config());
    EXPECT_EQ(log_text(a.logs), log_text(b.logs));
    EXPECT_EQ(model::serialize_checkpoint(a.last), model::serialize_checkpoint(b.last));
    auto other = small_config();
    other.seed = 5;
    EXPECT_NE(log_text(train_model<float>(small_split(), other).logs), log_text(a.logs));
}

TEST(Training, ThreadCountDoesNotChangeResults) {
    auto cfg = small_config();
    cfg.epochs = 2;
    const auto one = train_model<float>(small_split(), cfg);
    cfg.threads = 3;
    const auto three = train_model<float>(small_split(), cfg);
    EXPECT_EQ(log_text(one.logs), log_text(three.logs));
    EXPECT_EQ(model::serialize_checkpoint(one.last), model::serialize_checkpoint(three.last));
}

TEST(Training, LossDecreasesAndLogsHaveAllSplits) {
    auto cfg = small_config();
    cfg.epochs = 6;
    const auto r = train_model<double>(small_split(), cfg);
    std::vector<double> train_loss;
    std::size_t valid_rows = 0, test_rows = 0;
    for (const auto& l : r.logs) {
        if (l.split == "train") train_loss.push_back(l.loss);
        valid_rows += l.split == "valid";
        test_rows += l.split == "test";
        EXPECT_EQ(l.seconds, 0.0);
    }
    ASSERT_EQ(train_loss.size(), 6u);
    EXPECT_EQ(valid_rows, 6u);
    EXPECT_EQ(test_rows, 6u);
    EXPECT_LT(train_loss.back(), train_loss.front());
    EXPECT_EQ(r.best.epoch, r.best_epoch);
    EXPECT_EQ(r.last.epoch, 6u);
    EXPECT_EQ(r.valid_attention_gap.size(), 6u);
    EXPECT_EQ(select_best_epoch(r.logs), r.best_epoch);
}

TEST(Training, WritesCheckpointsAndCallsBack) {
    const auto dir = std::filesystem::temp_directory_path() / "pmn_trainer_ckpt";
    std::filesystem::remove_all(dir);
    auto cfg = small_config(model::Variant::cnn_multi);
    cfg.epochs = 2;
    cfg.evaluate_test = false;
    cfg.checkpoint_dir = dir;
    std::size_t calls = 0;
    const auto r = train_model<float>(small_split(), cfg, [&](const EpochLog&) { ++calls; });
    EXPECT_EQ(calls, 4u);
    EXPECT_TRUE(std::isnan(r.valid_attention_gap.back()));
    const auto best = model::load_checkpoint(dir / "best.ckpt", cfg.model);
    EXPECT_EQ(best.epoch, r.best_epoch);
    EXPECT_EQ(model::load_checkpoint(dir / "last.ckpt").epoch, 2u);
    std::filesystem::remove_all(dir);
}

TEST(Training, SingleLabelModelUsesTargetColumn) {
    auto cfg = small_config(model::Variant::cnn_single);
    cfg.model.target_label = 2;
    cfg.epochs = 1;
    const auto r = train_model<float>(small_split(), cfg);
    const auto e = evaluate_checkpoint(r.best, small_split().test);
    ASSERT_EQ(e.output_labels, (std::vector<std::size_t>{2}));
    EXPECT_EQ(e.per_label.size(), 1u);
    EXPECT_EQ(e.scores.front().size(), 1u);
}

TEST(Training, RejectsEmptyOrMismatchedData) {
    auto split = small_split();
    split.valid.clear();
    EXPECT_THROW(train_model<float>(split, small_config()), ConfigError);
    auto cfg = small_config();
    cfg.model.labels = 4;
    EXPECT_THROW(train_model<float>(small_split(), cfg), ConfigError);
    const auto params = model::init_params<float>(small_config().model, 1);
    auto wrong = small_config().model;
    wrong.seq_len = 41;
    EXPECT_THROW(evaluate_model(params, wrong, small_split().test), ConfigError);
}

TEST(Training, TwoEpochsOnSixtyFourSamplesReduceLoss) {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto split = small_split();
        split.train.resize(64);
        auto cfg = small_config();
        cfg.epochs = 2;
        cfg.seed = seed;
        cfg.evaluate_test = false;
        const auto r = train_model<float>(split, cfg);
        wins += r.logs[2].loss < r.logs[0].loss;
    }
    EXPECT_GE(wins, 2);
}

TEST(Training, PrototypeLossShrinksAttentionGap) {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto cfg = small_config();
        cfg.epochs = 6;
        cfg.seed = seed;
        cfg.evaluate_test = false;
        const auto r = train_model<float>(small_split(), cfg);
        wins += r.valid_attention_gap[r.best_epoch - 1] < r.valid_attention_gap[0];
    }
    EXPECT_GE(wins, 2);
}

TEST(Training, DivergenceRaisesNonFiniteError) {
    auto cfg = small_config();
    cfg.learning_rate = 1e30;
    try {
        train_model<float>(small_split(), cfg);
        FAIL() << "expected NonFiniteError";
    } catch (const NonFiniteError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
}

TEST(Evaluation, RepeatedEvaluationIsBitIdenticalAndLeavesParameters) {
    model::Checkpoint ckpt;
    ckpt.config = small_config().model;
    ckpt.params = model::init_params<float>(ckpt.config, 3);
    const auto before = model::serialize_checkpoint(ckpt);
    const auto a = evaluate_checkpoint(ckpt, small_split().valid);
    const auto b = evaluate_checkpoint(ckpt, small_split().valid);
    EXPECT_EQ(a.scores, b.scores);
    EXPECT_EQ(a.mean_loss, b.mean_loss);
    EXPECT_EQ(model::serialize_checkpoint(ckpt), before);
}

TEST(Evaluation, FloatAndDoubleAgreeOnScores) {
    model::Checkpoint ckpt;
    ckpt.config = small_config().model;
    ckpt.params = model::init_params<float>(ckpt.config, 7);
    const auto f = evaluate_checkpoint(ckpt, small_split().test, 1, false);
    const auto d = evaluate_checkpoint(ckpt, small_split().test, 1, true);
    for (std::size_t i = 0; i < f.scores.size(); ++i) {
        for (std::size_t k = 0; k < f.scores[i].size(); ++k) EXPECT_NEAR(f.scores[i][k], d.scores[i][k], 1e-5);
    }
    const auto threaded = evaluate_checkpoint(ckpt, small_split().test, 3, false);
    EXPECT_EQ(threaded.scores, f.scores);
}

TEST(Evaluation, SingleLabelSuiteJoinsColumns) {
    std::vector<model::Checkpoint> suite;
    for (std::size_t label = 0; label < 3; ++label) {
        model::Checkpoint c;
        c.config = small_config(model::Variant::cnn_single).model;
        c.config.target_label = label;
        c.params = model::init_params<float>(c.config, label);
        suite.push_back(c);
    }
    const auto e = evaluate_single_label_suite(suite, small_split().test);
    EXPECT_EQ(e.output_labels, (std::vector<std::size_t>{0, 1, 2}));
    EXPECT_EQ(e.scores.front().size(), 3u);
}

}  // namespace
