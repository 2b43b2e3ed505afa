#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "pmn/autodiff/adam.hpp"
#include "pmn/autodiff/gradcheck.hpp"
#include "pmn/autodiff/ops.hpp"
#include "pmn/common/error.hpp"
#include "pmn/common/rng.hpp"

using namespace pmn;
using namespace pmn::ad;

namespace {

Tensor<double> random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
    Tensor<double> t(shape, true);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

// Projects an op output onto fixed random weights so any shape reduces to a
// scalar with a non-trivial upstream gradient.
using OpBuilder = std::function<const Tensor<double>&(Tape<double>&)>;

GradCheckReport check_op(const OpBuilder& build, std::vector<Tensor<double>*> leaves,
                         std::uint64_t seed = 11, double tolerance = 1e-5) {
    std::vector<double> weights;
    auto loss = [&](bool with_gradient) {
        Tape<double> tape;
        const auto& out = build(tape);
        if (weights.empty()) {
            Rng rng(seed);
            for (std::size_t i = 0; i < out.size(); ++i) weights.push_back(rng.normal());
        }
        const auto& prod = tape.emit(
            "project", Tensor<double>::scalar([&] {
                double s = 0;
                for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
                return s;
            }()),
            {&out}, [&out, &weights](Tensor<double>& r) {
                auto g = out.grad_sink();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += r.grad()[0] * weights[i];
            });
        if (with_gradient) {
            for (auto* l : leaves) l->zero_grad();
            tape.backward(prod);
        }
        return LossEvaluation{prod[0], tape.branch_signature()};
    };
    std::vector<NamedParameter> named;
    for (std::size_t i = 0; i < leaves.size(); ++i) named.push_back({"leaf" + std::to_string(i), leaves[i]});
    GradCheckOptions options;
    options.richardson = true;
    options.max_probes_per_parameter = 64;
    options.tolerance = tolerance;
    return grad_check(loss, named, options);
}

// ---------------------------------------------------------------- tensor

TEST(Tensor, ShapesAndAccessors) {
    Tensor<float> t({2, 3}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.rank(), 2u);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t(1, 2), 6.0f);
    EXPECT_THROW(Tensor<float>({2, 0}), DimensionError);
    EXPECT_THROW(Tensor<float>({2, 2}, {1, 2, 3}), DimensionError);
}

TEST(Tensor, ItemRequiresSingleElement) {
    EXPECT_EQ(Tensor<double>::scalar(4.5).item(), 4.5);
    EXPECT_THROW(Tensor<double>::vector({1, 2}).item(), ContractError);
}

TEST(Tensor, GradientBufferFollowsRequiresGrad) {
    Tensor<double> t({3});
    EXPECT_THROW(t.grad(), ContractError);
    t.set_requires_grad(true);
    EXPECT_EQ(t.grad().size(), 3u);
    t.set_requires_grad(false);
    EXPECT_THROW(t.grad(), ContractError);
}

// ---------------------------------------------------------------- tape

TEST(Tape, BackwardTwiceDoublesLeafGradients) {
    Tensor<double> x = Tensor<double>::vector({0.5, -1.5}, true);
    Tape<double> tape;
    const auto& y = sum(tape, tanh(tape, x));
    tape.backward(y);
    const std::vector<double> once(x.grad().begin(), x.grad().end());
    tape.backward(y);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(x.grad()[i], 2.0 * once[i]);
}

TEST(Tape, BackwardRejectsNonScalarAndForeignLoss) {
    Tensor<double> x = Tensor<double>::vector({1, 2}, true);
    Tape<double> tape, other;
    const auto& y = tanh(tape, x);
    EXPECT_THROW(tape.backward(y), ContractError);
    const auto& z = sum(other, x);
    EXPECT_THROW(tape.backward(z), ContractError);
}

TEST(Tape, NoNodesWhenGradientsDisabled) {
    Tensor<double> x = Tensor<double>::vector({1, 2}, true);
    Tape<double> tape;
    tape.set_grad_enabled(false);
    const auto& y = sum(tape, tanh(tape, x));
    EXPECT_TRUE(tape.nodes().empty());
    EXPECT_FALSE(y.requires_grad());
}

TEST(Tape, NodesAreTopologicallyOrdered) {
    Rng rng(1);
    auto x = random_tensor(rng, {4});
    auto w = random_tensor(rng, {3, 4});
    auto b = random_tensor(rng, {3});
    Tape<double> tape;
    sum(tape, sigmoid(tape, affine(tape, relu(tape, x), w, b)));
    EXPECT_TRUE(tape.topologically_ordered());
    EXPECT_EQ(tape.nodes().size(), 4u);
}

TEST(Tape, DetachBlocksGradient) {
    Tensor<double> x = Tensor<double>::vector({0.3, 0.4}, true);
    Tape<double> tape;
    const auto& y = sum(tape, add(tape, x, detach(tape, x)));
    tape.backward(y);
    EXPECT_EQ(x.grad()[0], 1.0);
    EXPECT_EQ(x.grad()[1], 1.0);
}

// ---------------------------------------------------------------- op values

TEST(OpValues, ConvolutionUsesSamePaddingCrossCorrelation) {
    // One channel, kernel (1, 2, 3) over (1, 0, 0, 1): hand-computed padded sums.
    Tensor<double> x({1, 4}, {1, 0, 0, 1});
    Tensor<double> k({1, 1, 3}, {1, 2, 3});
    Tensor<double> b = Tensor<double>::vector({0.5});
    Tape<double> tape;
    const auto& y = conv1d(tape, x, k, b);
    const double expected[] = {2.5, 1.5, 3.5, 2.5};
    for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(y[t], expected[t]);
}

TEST(OpValues, ConvolutionRejectsBadShapes) {
    Tape<double> tape;
    Tensor<double> x({2, 4}), b({1});
    EXPECT_THROW(conv1d(tape, x, Tensor<double>({1, 2, 2}), b), DimensionError);
    EXPECT_THROW(conv1d(tape, x, Tensor<double>({1, 3, 3}), b), DimensionError);
    EXPECT_THROW(conv1d(tape, x, Tensor<double>({1, 2, 5}), b), DimensionError);
}

TEST(OpValues, IdentityKernelIsIdentityMap) {
    Rng rng(2);
    auto x = random_tensor(rng, {3, 10});
    Tensor<double> k({3, 3, 3}), b({3});
    for (std::size_t c = 0; c < 3; ++c) k(c, c, 1) = 1.0;
    Tape<double> tape;
    const auto& y = conv1d(tape, x, k, b);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(OpValues, MaxPoolIsChannelPermutationEquivariant) {
    Rng rng(6);
    auto x = random_tensor(rng, {4, 7});
    const std::size_t perm[] = {2, 0, 3, 1};
    Tensor<double> px({4, 7});
    for (std::size_t c = 0; c < 4; ++c) {
        for (std::size_t t = 0; t < 7; ++t) px(c, t) = x(perm[c], t);
    }
    Tape<double> tape;
    const auto& a = global_maxpool(tape, x);
    const auto& b = global_maxpool(tape, px);
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(b[c], a[perm[c]]);
}

TEST(OpValues, CosineStaysInUnitRange) {
    Rng rng(7);
    Tape<double> tape;
    for (int i = 0; i < 200; ++i) {
        auto u = random_tensor(rng, {5}, 1e3);
        Tensor<double> v = u;
        for (std::size_t j = 0; j < 5; ++j) v[j] = (i % 2 ? 3.0 : -3.0) * u[j];
        const double c = cosine_similarity(tape, u, v)[0];
        EXPECT_GE(c, -1.0);
        EXPECT_LE(c, 1.0);
    }
}

TEST(OpValues, MaxPoolTakesFirstArgmax) {
    Tensor<double> x({2, 3}, {1, 5, 5, -2, -1, -3}, true);
    Tape<double> tape;
    const auto& y = global_maxpool(tape, x);
    EXPECT_EQ(y[0], 5.0);
    EXPECT_EQ(y[1], -1.0);
    tape.backward(sum(tape, y));
    EXPECT_EQ(x.grad()[1], 1.0);
    EXPECT_EQ(x.grad()[2], 0.0);
    EXPECT_EQ(x.grad()[4], 1.0);
}

TEST(OpValues, CosineIsClampedAndFloorsZeroNorm) {
    Tape<double> tape;
    Tensor<double> u = Tensor<double>::vector({1, 2, 3});
    Tensor<double> rows({3, 3}, {2, 4, 6, -1, -2, -3, 0, 0, 0});
    const auto& c = cosine_rows(tape, u, rows);
    EXPECT_LE(c[0], 1.0);
    EXPECT_NEAR(c[0], 1.0, 1e-15);
    EXPECT_NEAR(c[1], -1.0, 1e-15);
    EXPECT_EQ(c[2], 0.0);
}

TEST(OpValues, SoftmaxSumsToOneAndSigmoidIsStable) {
    Tape<double> tape;
    const auto& s = softmax(tape, Tensor<double>::vector({1000, 0, -1000}));
    EXPECT_NEAR(s[0] + s[1] + s[2], 1.0, 1e-15);
    const auto& g = sigmoid(tape, Tensor<double>::vector({-800, 0, 800}));
    EXPECT_EQ(g[0], 0.0);
    EXPECT_EQ(g[1], 0.5);
    EXPECT_EQ(g[2], 1.0);
}

TEST(OpValues, BinaryCrossEntropyMatchesFormulaAndClamps) {
    Tape<double> tape;
    const std::vector<double> y = {1, 0};
    const auto& l = binary_cross_entropy(tape, Tensor<double>::vector({0.8, 0.3}), std::span<const double>(y));
    EXPECT_NEAR(l[0], -std::log(0.8) - std::log(0.7), 1e-15);
    const auto& c = binary_cross_entropy(tape, Tensor<double>::vector({0.0, 1.0}), std::span<const double>(y));
    EXPECT_NEAR(c[0], -2.0 * std::log(1e-7), 1e-9);
}

TEST(OpValues, EmbeddingLookupChecksIndex) {
    Tape<double> tape;
    Tensor<double> table({3, 2}, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(embedding_lookup(tape, table, 2)[1], 6.0);
    EXPECT_THROW(embedding_lookup(tape, table, 3), IndexError);
}

TEST(OpValues, DropoutIsIdentityOutsideTrainingAndInvertedInside) {
    Rng rng(3);
    Tensor<double> x({1000});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = 1.0;
    Tape<double> tape;
    EXPECT_EQ(&dropout(tape, x, 0.5, false, rng), &x);
    EXPECT_EQ(&dropout(tape, x, 0.0, true, rng), &x);
    const auto& y = dropout(tape, x, 0.25, true, rng);
    double total = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_TRUE(y[i] == 0.0 || std::abs(y[i] - 1.0 / 0.75) < 1e-15);
        total += y[i];
    }
    EXPECT_NEAR(total / 1000.0, 1.0, 0.1);
    EXPECT_THROW(dropout(tape, x, 1.0, true, rng), ContractError);
}

TEST(OpValues, ShapeMismatchesThrow) {
    Tape<double> tape;
    EXPECT_THROW(add(tape, Tensor<double>({2}), Tensor<double>({3})), DimensionError);
    EXPECT_THROW(affine(tape, Tensor<double>({2}), Tensor<double>({3, 3}), Tensor<double>({3})),
                 DimensionError);
    EXPECT_THROW(slice(tape, Tensor<double>({4}), 3, 2), DimensionError);
}

// ---------------------------------------------------------------- op gradients

// Each op is checked on 20 random instances: 1e-5 for smooth ops, 1e-4 for
// compositions through relu or max-pool.
class OpGradient : public ::testing::Test {
protected:
    Rng rng{42};
    void expect_pass(const GradCheckReport& r) {
        EXPECT_TRUE(r.passed) << "max relative error " << r.max_relative_error << " " << r.failure;
        EXPECT_GT(r.total_probes, 0u);
    }
    template <typename Fn>
    void repeat(Fn fn) {
        for (int instance = 0; instance < 20; ++instance) fn();
    }
};

TEST_F(OpGradient, Convolution) {
    repeat([&] {
        auto x = random_tensor(rng, {3, 11});
        auto k = random_tensor(rng, {4, 3, 5}, 0.5);
        auto b = random_tensor(rng, {4});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& { return conv1d(t, x, k, b); }, {&x, &k, &b}));
        Tape<double> tape;
        const auto& y = conv1d(tape, x, k, b);
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_TRUE(std::isfinite(y[i]));
    });
}

TEST_F(OpGradient, ReluMaxPoolTanhSigmoid) {
    repeat([&] {
        auto x = random_tensor(rng, {3, 7});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            return sigmoid(t, tanh(t, global_maxpool(t, relu(t, x))));
        }, {&x}, 11, 1e-4));
    });
}

TEST_F(OpGradient, LstmCell) {
    repeat([&] {
        const std::size_t d = 3;
        auto x = random_tensor(rng, {d});
        auto h = random_tensor(rng, {2 * d});
        auto c = random_tensor(rng, {d});
        auto w = random_tensor(rng, {4 * d, d}, 0.5);
        auto u = random_tensor(rng, {4 * d, 2 * d}, 0.5);
        auto b = random_tensor(rng, {4 * d}, 0.5);
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            auto out = lstm_cell(t, x, h, c, LstmWeights<double>{w, u, b});
            return concat(t, out.hidden, out.cell);
        }, {&x, &h, &c, &w, &u, &b}));
    });
}

TEST_F(OpGradient, CosineRowsAndSoftmax) {
    repeat([&] {
        auto u = random_tensor(rng, {5});
        auto rows = random_tensor(rng, {4, 5});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            return softmax(t, scale(t, cosine_rows(t, u, rows), 3.0));
        }, {&u, &rows}));
    });
}

TEST_F(OpGradient, CosineSimilarity) {
    repeat([&] {
        auto u = random_tensor(rng, {6});
        auto v = random_tensor(rng, {6});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& { return cosine_similarity(t, u, v); }, {&u, &v}));
    });
}

TEST_F(OpGradient, AffineConcatSliceAdd) {
    repeat([&] {
        auto x = random_tensor(rng, {4});
        auto y = random_tensor(rng, {3});
        auto w = random_tensor(rng, {5, 7});
        auto b = random_tensor(rng, {5});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            const auto& z = affine(t, concat(t, x, y), w, b);
            return add(t, slice(t, z, 1, 3), slice(t, z, 2, 3));
        }, {&x, &y, &w, &b}));
    });
}

TEST_F(OpGradient, MeanRowsAndWeightedRowSum) {
    repeat([&] {
        auto w = random_tensor(rng, {4});
        auto rows = random_tensor(rng, {4, 3});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            return add(t, mean_rows(t, rows), weighted_row_sum(t, w, rows));
        }, {&w, &rows}));
    });
}

TEST_F(OpGradient, EmbeddingLookup) {
    repeat([&] {
        auto table = random_tensor(rng, {4, 3});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& { return embedding_lookup(t, table, 2); }, {&table}));
    });
}

TEST_F(OpGradient, LossesAndScaledSum) {
    repeat([&] {
        auto logits = random_tensor(rng, {5});
        auto x = random_tensor(rng, {5});
        const std::vector<double> y = {1, 0, 1, 1, 0};
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            const auto& bce = binary_cross_entropy(t, sigmoid(t, logits), std::span<const double>(y));
            const auto& se = squared_error(t, x, std::span<const double>(y));
            return add_scaled(t, bce, se, 0.7);
        }, {&logits, &x}));
    });
}

TEST_F(OpGradient, DropoutWithFixedMask) {
    repeat([&] {
        auto x = random_tensor(rng, {20});
        expect_pass(check_op([&](Tape<double>& t) -> const Tensor<double>& {
            Rng mask(9);
            return dropout(t, x, 0.3, true, mask);
        }, {&x}));
    });
}

TEST(GradCheck, DetectsAWrongGradient) {
    Tensor<double> x = Tensor<double>::vector({0.7, -0.2}, true);
    auto loss = [&](bool with_gradient) {
        const double v = x[0] * x[0] + 3 * x[1];
        if (with_gradient) {
            x.grad()[0] = 2 * x[0];
            x.grad()[1] = 2.5;  // should be 3
        }
        return LossEvaluation{v, 0};
    };
    const auto report = grad_check(loss, {{"x", &x}});
    EXPECT_FALSE(report.passed);
    EXPECT_GT(report.max_relative_error, 0.1);
}

TEST(GradCheck, SkipsProbesThatCrossAKink) {
    // |x| at x = 1e-6: every probe flips the recorded sign branch.
    Tensor<double> x = Tensor<double>::vector({1e-6}, true);
    auto loss = [&](bool with_gradient) {
        if (with_gradient) x.grad()[0] = x[0] > 0 ? 1.0 : -1.0;
        return LossEvaluation{std::abs(x[0]), x[0] > 0 ? 1u : 2u};
    };
    GradCheckOptions options;
    options.min_scale = 1.0;
    const auto report = grad_check(loss, {{"x", &x}}, options);
    EXPECT_EQ(report.total_probes, 0u);
    EXPECT_EQ(report.kinks_skipped, 1u);
}

TEST(GradCheck, RelativeErrorUsesFloor) {
    EXPECT_NEAR(relative_error(1.0, 1.1, 1e-7), 0.1 / 1.1, 1e-15);
    EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-9, 1e-7), 1e-2);
}

// ---------------------------------------------------------------- adam

TEST(Adam, FirstStepMovesByLearningRate) {
    // With bias correction the first update is lr * g / (|g| + eps').
    Tensor<double> p = Tensor<double>::vector({1.0, -2.0}, true);
    p.grad()[0] = 0.5;
    p.grad()[1] = -3.0;
    std::vector<Tensor<double>*> params{&p};
    AdamState<double> state(std::span<Tensor<double>* const>(params), AdamOptions{0.1});
    adam_step(std::span<Tensor<double>* const>(params), state);
    EXPECT_NEAR(p[0], 1.0 - 0.1, 1e-7);
    EXPECT_NEAR(p[1], -2.0 + 0.1, 1e-7);
    EXPECT_EQ(state.step, 1u);
}

TEST(Adam, MatchesHandRolledRecurrence) {
    Tensor<double> p = Tensor<double>::vector({0.3}, true);
    std::vector<Tensor<double>*> params{&p};
    AdamState<double> state(std::span<Tensor<double>* const>(params), AdamOptions{0.01});
    double ref = 0.3, m = 0, v = 0;
    for (int t = 1; t <= 5; ++t) {
        const double g = std::sin(t) + ref;
        p.grad()[0] = g;
        adam_step(std::span<Tensor<double>* const>(params), state);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        ref -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
        EXPECT_NEAR(p[0], ref, 1e-12);
    }
}

TEST(Adam, QuadraticBowlConverges) {
    // f(theta) = theta^2 from 1 with lr 0.05; the Adam recurrence run by
    // hand is the oracle.
    Tensor<double> p = Tensor<double>::vector({1.0}, true);
    std::vector<Tensor<double>*> params{&p};
    AdamState<double> state(std::span<Tensor<double>* const>(params), AdamOptions{0.05});
    double ref = 1.0, m = 0, v = 0, previous = 1.0;
    for (int t = 1; t <= 100; ++t) {
        p.grad()[0] = 2 * p[0];
        adam_step(std::span<Tensor<double>* const>(params), state);
        const double g = 2 * ref;
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        ref -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
        EXPECT_NEAR(p[0], ref, 1e-12);
        if (t > 1 && t <= 20) {
            EXPECT_LT(std::abs(p[0]), previous);
        }
        previous = std::abs(p[0]);
    }
    EXPECT_LT(std::abs(p[0]), 0.2);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
    Tensor<double> p = Tensor<double>::vector({1.0, 2.0}, true);
    std::vector<Tensor<double>*> params{&p};
    AdamState<double> state(std::span<Tensor<double>* const>(params), AdamOptions{});
    p.grad()[0] = 1.0;
    p.grad()[1] = NAN;
    EXPECT_THROW(adam_step(std::span<Tensor<double>* const>(params), state), NonFiniteError);
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(state.step, 0u);
}

// ---------------------------------------------------------------- precision

TEST(Precision, FloatAndDoubleForwardAgree) {
    Rng rng(8);
    auto x = random_tensor(rng, {2, 9});
    auto k = random_tensor(rng, {3, 2, 3});
    auto b = random_tensor(rng, {3});
    Tape<double> td;
    Tape<float> tf;
    const auto xf = convert<float>(x), kf = convert<float>(k), bf = convert<float>(b);
    const auto& yd = global_maxpool(td, relu(td, conv1d(td, x, k, b)));
    const auto& yf = global_maxpool(tf, relu(tf, conv1d(tf, xf, kf, bf)));
    for (std::size_t i = 0; i < yd.size(); ++i) EXPECT_NEAR(yd[i], yf[i], 1e-5);
}

}  // namespace
