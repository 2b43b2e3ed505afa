#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "oracle/reference_pmn.hpp"
#include "pmn/autodiff/ops.hpp"
#include "pmn/common/error.hpp"
#include "pmn/data/encode.hpp"
#include "pmn/model/checkpoint.hpp"
#include "pmn/model/config.hpp"
#include "pmn/model/model_gradcheck.hpp"
#include "pmn/model/params.hpp"
#include "pmn/model/pmn.hpp"

using namespace pmn;
using namespace pmn::model;

namespace {

std::string random_sequence(Rng& rng, std::size_t n) {
    std::string s(n, 'A');
    for (auto& c : s) c = "ACGTN"[rng.below(rng.uniform() < 0.05 ? 5 : 4)];
    return s;
}

// Init plus noise on every array, so biases and prototypes are non-trivial.
ModelParams<double> random_params(const PMNConfig& cfg, std::uint64_t seed) {
    auto p = init_params<double>(cfg, seed);
    Rng rng(Rng::derive(seed, 77));
    for (auto [name, t] : p.named()) {
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] += 0.3 * rng.normal();
    }
    return p;
}

struct Case {
    Variant variant;
    AttentionMode attention;
    bool residual;
};

void PrintTo(const Case& c, std::ostream* os) {
    *os << to_string(c.variant) << '/' << to_string(c.attention) << (c.residual ? "/residual" : "");
}

class ForwardOracle : public ::testing::TestWithParam<Case> {};

TEST_P(ForwardOracle, MatchesStraightLineReimplementation) {
    PMNConfig cfg = tiny_config(GetParam().variant, GetParam().attention);
    cfg.attend_on_residual = GetParam().residual;
    if (cfg.variant == Variant::cnn_single) cfg.target_label = 2;
    Rng rng(5);
    double worst = 0;
    for (std::uint64_t draw = 0; draw < 50; ++draw) {
        const auto params = random_params(cfg, 100 + draw);
        const std::string seq = random_sequence(rng, cfg.seq_len);
        const auto x = data::one_hot_encode<double>(seq);
        Tape<double> tape;
        const auto out = run_model(tape, x, params, cfg, {});
        const auto ref = oracle::forward(seq, params, cfg);
        ASSERT_EQ(out.prediction->size(), ref.prediction.size());
        for (std::size_t i = 0; i < ref.prediction.size(); ++i) {
            worst = std::max(worst, std::abs((*out.prediction)[i] - ref.prediction[i]));
        }
        for (std::size_t i = 0; i < ref.embedding.size(); ++i) {
            worst = std::max(worst, std::abs((*out.embedding)[i] - ref.embedding[i]));
        }
        if (cfg.variant == Variant::pmn_no_lstm) {
            ASSERT_EQ(ref.weights.size(), 1u);
            for (std::size_t i = 0; i < cfg.labels; ++i) {
                worst = std::max(worst, std::abs((*out.final_attention)[i] - ref.weights[0][i]));
            }
        } else {
            ASSERT_EQ(out.hops.size(), ref.weights.size());
        }
        for (std::size_t k = 0; k < out.hops.size(); ++k) {
            for (std::size_t i = 0; i < ref.weights[k].size(); ++i) {
                worst = std::max(worst, std::abs((*out.hops[k].attention)[i] - ref.weights[k][i]));
            }
            for (std::size_t i = 0; i < ref.reads[k].size(); ++i) {
                worst = std::max(worst, std::abs((*out.hops[k].read)[i] - ref.reads[k][i]));
            }
        }
        std::vector<double> y(cfg.labels);
        for (auto& v : y) v = rng.bernoulli(0.4) ? 1.0 : 0.0;
        const auto& loss = sample_loss(tape, out, std::span<const double>(y), cfg);
        const std::vector<double> seen = cfg.variant == Variant::cnn_single
                                             ? std::vector<double>{y[cfg.target_label]}
                                             : y;
        EXPECT_NEAR(loss.item(), oracle::loss(ref, seen, cfg), 1e-6 * std::max(1.0, loss.item()));
    }
    EXPECT_LT(worst, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(
    Variants, ForwardOracle,
    ::testing::Values(Case{Variant::pmn, AttentionMode::sigmoid, false},
                      Case{Variant::pmn, AttentionMode::softmax_hops, false},
                      Case{Variant::pmn, AttentionMode::sigmoid, true},
                      Case{Variant::pmn_no_lstm, AttentionMode::sigmoid, false},
                      Case{Variant::cnn_multi, AttentionMode::sigmoid, false},
                      Case{Variant::cnn_single, AttentionMode::sigmoid, false}),
    [](const ::testing::TestParamInfo<Case>& info) {
        return std::string(to_string(info.param.variant)) + "_" +
               std::string(to_string(info.param.attention)) + (info.param.residual ? "_residual" : "");
    });

class Invariants : public ::testing::Test {
protected:
    PMNConfig cfg = tiny_config();
    Rng rng{13};
};

TEST_F(Invariants, ResidualIdentityIsExactAtEveryHop) {
    cfg.hops = 4;
    for (int draw = 0; draw < 10; ++draw) {
        const auto params = random_params(cfg, draw);
        const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
        Tape<double> tape;
        const auto out = forward(tape, x, params, cfg, {});
        ASSERT_EQ(out.hops.size(), 4u);
        for (const auto& hop : out.hops) {
            for (std::size_t j = 0; j < hop.hidden->size(); ++j) {
                EXPECT_EQ((*hop.hidden)[j], (*hop.lstm_hidden)[j] + (*out.embedding)[j]);
            }
        }
    }
}

TEST_F(Invariants, SigmoidWeightsAreInOpenUnitInterval) {
    cfg.sharpness = 3.0;
    for (int draw = 0; draw < 20; ++draw) {
        const auto params = random_params(cfg, draw);
        const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
        Tape<double> tape;
        const auto out = forward(tape, x, params, cfg, {});
        for (const auto& hop : out.hops) {
            for (std::size_t i = 0; i < hop.attention->size(); ++i) {
                EXPECT_GT((*hop.attention)[i], 0.0);
                EXPECT_LT((*hop.attention)[i], 1.0);
            }
        }
    }
}

TEST_F(Invariants, SoftmaxHopWeightsSumToOne) {
    cfg = tiny_config(Variant::pmn, AttentionMode::softmax_hops);
    cfg.hops = 3;
    for (int draw = 0; draw < 20; ++draw) {
        const auto params = convert_params<float>(random_params(cfg, draw));
        const auto x = data::one_hot_encode<float>(random_sequence(rng, cfg.seq_len));
        Tape<float> tape;
        const auto out = forward(tape, x, params, cfg, {});
        for (std::size_t k = 0; k + 1 < out.hops.size(); ++k) {
            double total = 0;
            for (std::size_t i = 0; i < out.hops[k].attention->size(); ++i) total += (*out.hops[k].attention)[i];
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
        EXPECT_EQ(hop_attention(cfg, 3), AttentionKind::sigmoid);
    }
}

TEST_F(Invariants, ZeroLambdaLossIsBitwiseClassificationLoss) {
    for (int draw = 0; draw < 20; ++draw) {
        const auto params = random_params(cfg, draw);
        const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
        std::vector<double> y(cfg.labels);
        for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
        Tape<double> tape;
        const auto out = forward(tape, x, params, cfg, {});
        const auto& total = total_loss(tape, *out.prediction, *out.final_attention, std::span<const double>(y), 0.0);
        const auto& bce = classification_loss(tape, *out.prediction, std::span<const double>(y));
        EXPECT_EQ(std::memcmp(&total[0], &bce[0], sizeof(double)), 0);
    }
}

TEST_F(Invariants, ClassificationLossIsPositiveBce) {
    Tape<double> tape;
    const auto p = ad::Tensor<double>::vector({0.9, 0.2});
    const std::vector<double> y = {1, 0};
    const auto& l = classification_loss(tape, p, std::span<const double>(y));
    EXPECT_NEAR(l.item(), -std::log(0.9) - std::log(0.8), 1e-15);
    EXPECT_GT(l.item(), 0.0);
}

TEST_F(Invariants, InitialReadIsPrototypeMean) {
    ad::Tensor<double> protos({2, 3}, {1, 2, 3, 3, 4, 5});
    Tape<double> tape;
    const auto& r = init_read_vector(tape, protos);
    EXPECT_EQ(r[0], 2.0);
    EXPECT_EQ(r[1], 3.0);
    EXPECT_EQ(r[2], 4.0);
}

TEST_F(Invariants, HopFromHiddenMatchesSharpenedCosine) {
    // With a hand-chosen LSTM output the weights are sigmoid(eps * cos).
    cfg.sharpness = 2.0;
    auto params = random_params(cfg, 3);
    ad::Tensor<double> e({8}), hh({8}), c({8});
    for (std::size_t j = 0; j < 8; ++j) {
        e[j] = 0.1 * j;
        hh[j] = j % 2 ? 1.0 : -0.5;
    }
    Tape<double> tape;
    const auto state = hop_from_hidden(tape, e, hh, c, params, cfg, AttentionKind::sigmoid, {});
    for (std::size_t i = 0; i < cfg.labels; ++i) {
        double dot = 0, nu = 0, nv = 0;
        for (std::size_t j = 0; j < 8; ++j) {
            dot += hh[j] * params.prototypes(i, j);
            nu += hh[j] * hh[j];
            nv += params.prototypes(i, j) * params.prototypes(i, j);
        }
        const double expected = 1.0 / (1.0 + std::exp(-2.0 * dot / std::sqrt(nu * nv)));
        EXPECT_NEAR((*state.attention)[i], expected, 1e-12);
        EXPECT_EQ((*state.hidden)[i], hh[i] + e[i]);
    }
}

TEST_F(Invariants, EvaluationIgnoresDropoutAndTrainingAppliesIt) {
    cfg.dropout = 0.5;
    const auto params = random_params(cfg, 1);
    const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
    Tape<double> a, b, c;
    const auto ea = forward(a, x, params, cfg, {});
    const auto eb = forward(b, x, params, cfg, {});
    EXPECT_EQ((*ea.prediction)[0], (*eb.prediction)[0]);
    Rng drop(4);
    const auto tr = forward(c, x, params, cfg, {true, &drop, false});
    bool differs = false;
    for (std::size_t i = 0; i < cfg.labels; ++i) differs |= (*tr.prediction)[i] != (*ea.prediction)[i];
    EXPECT_TRUE(differs);
    Tape<double> d;
    EXPECT_THROW(forward(d, x, params, cfg, {true, nullptr, false}), ContractError);
}

TEST_F(Invariants, VariantDispatchChecksVariant) {
    const auto params = random_params(cfg, 1);
    const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
    Tape<double> tape;
    EXPECT_THROW(forward_cnn(tape, x, params, cfg, {}), ContractError);
    ad::Tensor<double> wrong({3, cfg.seq_len});
    EXPECT_THROW(forward(tape, wrong, params, cfg, {}), DimensionError);
}

// ---------------------------------------------------------------- gradients

TEST(ModelGradient, AllVariantsPassCentralDifferenceCheck) {
    for (auto variant : {Variant::pmn, Variant::pmn_no_lstm, Variant::cnn_multi, Variant::cnn_single}) {
        for (auto mode : {AttentionMode::sigmoid, AttentionMode::softmax_hops}) {
            const auto report = model_grad_check(tiny_config(variant, mode));
            EXPECT_TRUE(report.passed) << to_string(variant) << "/" << to_string(mode) << " "
                                       << report.max_relative_error << " " << report.failure;
            EXPECT_GE(report.total_probes, 200u);
        }
    }
}

TEST(ModelGradient, DetachedAttentionStillTrainsPrototypesThroughMatchingLoss) {
    auto cfg = tiny_config();
    auto params = random_params(cfg, 2);
    params.set_requires_grad(true);
    Rng rng(3);
    const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
    const std::vector<double> y = {1, 0, 0, 1};
    Tape<double> tape;
    const auto out = forward(tape, x, params, cfg, {false, nullptr, true});
    tape.backward(sample_loss(tape, out, std::span<const double>(y), cfg));
    double norm = 0;
    for (double g : params.prototypes.grad()) norm += g * g;
    EXPECT_GT(norm, 0.0);
}

TEST(ModelGradient, DetachedAttentionRoutesPrototypeGradientThroughRead) {
    // pmn_no_lstm, lambda = 0, w detached: d/dp_i = w_i * dL/dr, with dL/dr
    // taken by central differences on the oracle head.
    auto cfg = tiny_config(Variant::pmn_no_lstm);
    cfg.proto_weight = 0.0;
    auto params = random_params(cfg, 8);
    params.set_requires_grad(true);
    Rng rng(9);
    const auto seq = random_sequence(rng, cfg.seq_len);
    const std::vector<double> y = {1, 0, 1, 0};
    Tape<double> tape;
    const auto out = forward_no_lstm(tape, data::one_hot_encode<double>(seq), params, cfg, {false, nullptr, true});
    tape.backward(sample_loss(tape, out, std::span<const double>(y), cfg));

    const auto ref = oracle::forward(seq, params, cfg);
    const std::size_t d = cfg.embed_dim();
    auto head_loss = [&](const std::vector<double>& r) {
        double loss = 0;
        for (std::size_t i = 0; i < cfg.labels; ++i) {
            double z = params.head_bias[i];
            for (std::size_t j = 0; j < d; ++j) {
                z += params.head_weights(i, j) * ref.embedding[j] + params.head_weights(i, d + j) * r[j];
            }
            const double p = 1.0 / (1.0 + std::exp(-z));
            loss -= y[i] * std::log(p) + (1 - y[i]) * std::log(1 - p);
        }
        return loss;
    };
    std::vector<double> dr(d);
    for (std::size_t j = 0; j < d; ++j) {
        auto up = ref.reads[0], down = ref.reads[0];
        up[j] += 1e-6;
        down[j] -= 1e-6;
        dr[j] = (head_loss(up) - head_loss(down)) / 2e-6;
    }
    for (std::size_t i = 0; i < cfg.labels; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            EXPECT_NEAR(params.prototypes.grad()[i * d + j], ref.weights[0][i] * dr[j], 1e-7);
        }
    }
}

TEST(ModelEquivariance, PermutingLabelsPermutesPredictions) {
    auto cfg = tiny_config();
    const auto params = random_params(cfg, 12);
    const std::size_t perm[] = {2, 0, 3, 1};
    auto permuted = params;
    const std::size_t d = cfg.embed_dim();
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < d; ++j) permuted.prototypes(i, j) = params.prototypes(perm[i], j);
        for (std::size_t j = 0; j < 2 * d; ++j) permuted.head_weights(i, j) = params.head_weights(perm[i], j);
        permuted.head_bias[i] = params.head_bias[perm[i]];
    }
    Rng rng(1);
    const std::vector<double> y = {1, 0, 0, 1};
    std::vector<double> py(4);
    for (std::size_t i = 0; i < 4; ++i) py[i] = y[perm[i]];
    for (int draw = 0; draw < 10; ++draw) {
        const auto x = data::one_hot_encode<double>(random_sequence(rng, cfg.seq_len));
        Tape<double> ta, tb;
        const auto a = forward(ta, x, params, cfg, {});
        const auto b = forward(tb, x, permuted, cfg, {});
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR((*b.prediction)[i], (*a.prediction)[perm[i]], 1e-12);
        EXPECT_NEAR(sample_loss(ta, a, std::span<const double>(y), cfg).item(),
                    sample_loss(tb, b, std::span<const double>(py), cfg).item(), 1e-12);
    }
}

// ---------------------------------------------------------------- params

TEST(Params, SpecsFollowConfiguration) {
    auto cfg = tiny_config();
    const auto specs = parameter_specs(cfg);
    std::size_t total = 0;
    for (const auto& s : specs) total += ad::shape_size(s.shape);
    EXPECT_EQ(total, parameter_count(cfg));
    // conv: 8*4*9+8 + 8*8*5+8 + 8*8*3+8, lstm: 32*8 + 32*16 + 32, head 4*16+4, protos 4*8
    EXPECT_EQ(total, 296u + 328u + 200u + 256u + 512u + 32u + 68u + 32u);
    cfg.variant = Variant::cnn_multi;
    EXPECT_EQ(parameter_count(cfg), 296u + 328u + 200u + 4u * 8u + 4u);
}

TEST(Params, InitIsDeterministicAndSetsForgetBias) {
    const auto cfg = tiny_config();
    const auto a = init_params<double>(cfg, 9), b = init_params<double>(cfg, 9), c = init_params<double>(cfg, 10);
    EXPECT_TRUE(std::equal(a.lstm_input.values().begin(), a.lstm_input.values().end(), b.lstm_input.values().begin()));
    EXPECT_FALSE(std::equal(a.lstm_input.values().begin(), a.lstm_input.values().end(), c.lstm_input.values().begin()));
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_EQ(a.lstm_bias[j], 0.0);
        EXPECT_EQ(a.lstm_bias[8 + j], 1.0);
    }
}

// ---------------------------------------------------------------- config

TEST(Config, TextRoundTrip) {
    PMNConfig cfg = tiny_config(Variant::pmn, AttentionMode::softmax_hops);
    cfg.sharpness = 12.5;
    cfg.proto_weight = 0.25;
    cfg.attend_on_residual = true;
    KeyValueReader reader(parse_key_values_string(model_config_text(cfg), "text"));
    EXPECT_EQ(read_model_config(reader), cfg);
    reader.reject_unknown();
}

TEST(Config, ValidationRejectsBadValues) {
    auto bad = [](auto mutate) {
        PMNConfig cfg = tiny_config();
        mutate(cfg);
        EXPECT_THROW(cfg.validate(), ConfigError);
    };
    bad([](PMNConfig& c) { c.labels = 0; });
    bad([](PMNConfig& c) { c.conv[0].width = 4; });
    bad([](PMNConfig& c) { c.hops = 0; });
    bad([](PMNConfig& c) { c.dropout = 1.0; });
    bad([](PMNConfig& c) { c.sharpness = 0; });
    bad([](PMNConfig& c) { c.proto_weight = -1; });
    bad([](PMNConfig& c) { c.seq_len = 5; });
    bad([](PMNConfig& c) { c.variant = Variant::cnn_single; c.target_label = 4; });
}

TEST(Config, UnknownAndMalformedKeysAreReported) {
    KeyValueReader reader(parse_key_values_string("hops = 3\nhopz = 4\n", "cfg"));
    read_model_config(reader);
    EXPECT_THROW(reader.reject_unknown(), ConfigError);
    KeyValueReader bad(parse_key_values_string("hops = three\n", "cfg"));
    EXPECT_THROW(read_model_config(bad), ConfigError);
    EXPECT_THROW(parse_key_values_string("no equals sign\n", "cfg"), ParseError);
    EXPECT_THROW(parse_variant("rnn"), ConfigError);
}

TEST(Config, LaterEntriesOverrideEarlier) {
    auto entries = parse_key_values_string("hops = 3 # comment\n", "cfg");
    entries.push_back(parse_override("hops=7"));
    KeyValueReader reader(entries);
    EXPECT_EQ(read_model_config(reader).hops, 7u);
    EXPECT_THROW(parse_override("=3"), ConfigError);
}

TEST(Config, FormatDoubleRoundTrips) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678}) {
        EXPECT_EQ(std::stod(format_double(v)), v);
    }
}

// ---------------------------------------------------------------- checkpoint

class CheckpointTest : public ::testing::Test {
protected:
    Checkpoint make() {
        Checkpoint c;
        c.config = tiny_config();
        c.params = convert_params<float>(random_params(c.config, 4));
        c.epoch = 7;
        c.valid_auroc = 0.8125;
        return c;
    }
    std::filesystem::path dir = std::filesystem::temp_directory_path() / "pmn_ckpt_test";
    void SetUp() override { std::filesystem::create_directories(dir); }
    void TearDown() override { std::filesystem::remove_all(dir); }

    CheckpointError::Kind kind_of(const std::vector<std::uint8_t>& bytes) {
        try {
            deserialize_checkpoint(bytes);
        } catch (const CheckpointError& e) {
            return e.kind();
        }
        ADD_FAILURE() << "no error";
        return CheckpointError::Kind::io;
    }
};

TEST_F(CheckpointTest, RoundTripIsBitExact) {
    const auto original = make();
    const auto path = dir / "a.ckpt";
    save_checkpoint(path, original);
    const auto loaded = load_checkpoint(path);
    EXPECT_EQ(loaded.config, original.config);
    EXPECT_EQ(loaded.epoch, 7u);
    EXPECT_EQ(loaded.valid_auroc, 0.8125);
    const auto a = original.params.named();
    const auto b = loaded.params.named();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].first, b[i].first);
        EXPECT_EQ(a[i].second->shape(), b[i].second->shape());
        EXPECT_EQ(std::memcmp(a[i].second->data(), b[i].second->data(), a[i].second->size() * sizeof(float)), 0);
    }
    EXPECT_EQ(serialize_checkpoint(loaded), serialize_checkpoint(original));
    EXPECT_FALSE(std::filesystem::exists(dir / "a.ckpt.tmp"));
}

TEST_F(CheckpointTest, CorruptionKindsAreDistinguished) {
    const auto bytes = serialize_checkpoint(make());
    auto magic = bytes;
    magic[0] = 'X';
    EXPECT_EQ(kind_of(magic), CheckpointError::Kind::bad_magic);
    auto version = bytes;
    version[4] = 9;
    EXPECT_EQ(kind_of(version), CheckpointError::Kind::version_mismatch);
    auto truncated = bytes;
    truncated.resize(bytes.size() / 2);
    EXPECT_EQ(kind_of(truncated), CheckpointError::Kind::truncated);
    EXPECT_EQ(kind_of({'P', 'M', 'N', '1'}), CheckpointError::Kind::truncated);
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    EXPECT_EQ(kind_of(flipped), CheckpointError::Kind::checksum);
}

TEST_F(CheckpointTest, ConfigMismatchNamesTheKey) {
    const auto path = dir / "b.ckpt";
    save_checkpoint(path, make());
    auto other = tiny_config();
    EXPECT_NO_THROW(load_checkpoint(path, other));
    other.hops = 3;
    try {
        load_checkpoint(path, other);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("hops"), std::string::npos);
    }
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
}

TEST_F(CheckpointTest, ManifestListsArrays) {
    const auto text = checkpoint_manifest(make());
    EXPECT_NE(text.find("prototypes"), std::string::npos);
    EXPECT_NE(text.find("lstm"), std::string::npos);
}

TEST(Fnv, KnownVectors) {
    const std::uint8_t a[] = {'a'};
    EXPECT_EQ(fnv1a64(nullptr, 0), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64(a, 1), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
