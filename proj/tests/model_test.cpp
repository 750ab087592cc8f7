// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradient_check.hpp"

namespace {

using namespace muonrec;
using model::ModelKind;
using oracle::tiny_batch;
using oracle::tiny_model_spec;

class EveryModel : public ::testing::TestWithParam<ModelKind> {};

INSTANTIATE_TEST_SUITE_P(Kinds, EveryModel,
                         ::testing::Values(ModelKind::SASRecLite, ModelKind::PoolRec, ModelKind::EmbeddingBag),
                         [](const auto& info) { return std::string(model::to_string(info.param)); });

ParamList spread_model(const model::ModelSpec& spec) {
    ParamList params = model::init_model(spec);
    oracle::spread_parameters(params, spec.seed + 100);
    return params;
}

TEST(Init, SasRecShapesAndRoles) {
    model::ModelSpec spec = tiny_model_spec(ModelKind::SASRecLite);
    const ParamList params = model::init_model(spec);
    const std::vector<std::pair<std::string, std::vector<std::size_t>>> expected{
        {"E", {10, 4}},   {"P", {5, 4}},       {"W_Q", {4, 4}},      {"W_K", {4, 4}},  {"W_V", {4, 4}},
        {"W_O", {4, 4}},  {"ln1_gain", {4}},   {"ln1_bias", {4}},    {"W_1", {4, 8}},  {"b_1", {8}},
        {"W_2", {8, 4}},  {"b_2", {4}},        {"ln2_gain", {4}},    {"ln2_bias", {4}}};
    ASSERT_EQ(params.size(), expected.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        EXPECT_EQ(params[i].name, expected[i].first);
        EXPECT_EQ(params[i].value.shape(), expected[i].second) << params[i].name;
        EXPECT_TRUE(params[i].grad.same_shape(params[i].value));
    }
    for (const auto& p : params) EXPECT_NE(p.role, ParamRole::OutputHead) << "output is tied to E";
    EXPECT_EQ(find_param(params, "ln1_gain").value, Tensor::vector(4, 1.0));
    EXPECT_EQ(find_param(params, "b_1").value, Tensor::vector(8, 0.0));
}

TEST(Init, PoolRecShapes) {
    const ParamList params = model::init_model(tiny_model_spec(ModelKind::PoolRec));
    ASSERT_EQ(params.size(), 5u);
    EXPECT_EQ(find_param(params, "W_1").value.shape(), (std::vector<std::size_t>{4, 4}));
    EXPECT_EQ(find_param(params, "b_2").role, ParamRole::Bias);
}

TEST_P(EveryModel, InitDeterministicWithZeroPaddingRow) {
    auto spec = tiny_model_spec(GetParam());
    spec.vocab_size = 400;
    spec.embed_dim = 16;
    const ParamList a = model::init_model(spec);
    const ParamList b = model::init_model(spec);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);

    const Tensor& e = find_param(a, "E").value;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (i < e.cols()) {
            EXPECT_EQ(e[i], 0.0);
        } else {
            sum_sq += e[i] * e[i];
        }
    }
    EXPECT_NEAR(std::sqrt(sum_sq / static_cast<double>(e.size() - e.cols())), model::kInitStd, 0.002);

    spec.seed += 1;
    EXPECT_NE(model::init_model(spec)[0].value, a[0].value);
}

TEST(Spec, Validation) {
    auto spec = tiny_model_spec(ModelKind::SASRecLite);
    spec.vocab_size = 1;
    EXPECT_THROW(model::init_model(spec), Error);
    spec = tiny_model_spec(ModelKind::SASRecLite);
    spec.embed_dim = 0;
    EXPECT_THROW(model::init_model(spec), Error);
}

TEST_P(EveryModel, GradientsMatchFiniteDifferences) {
    const auto spec = tiny_model_spec(GetParam());
    const auto check = oracle::check_gradients(spread_model(spec), spec, tiny_batch(), 77);
    for (const auto& [name, err] : check.max_relative_error) EXPECT_LE(err, 1e-4) << name;
}

TEST_P(EveryModel, GradientsMatchAtDefaultInit) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList params = model::init_model(spec);
    // Same check at the real initialization scale, judged against an
    // absolute floor since most entries are tiny there. Zero biases put some
    // relu inputs exactly on the kink, so they get a small offset.
    for (auto& p : params) {
        if (p.role == ParamRole::Bias) p.value.fill(1e-3);
    }
    const auto check = oracle::check_gradients(params, spec, tiny_batch(), 78, 1e-6, 50, 1e-4);
    for (const auto& [name, err] : check.max_relative_error) EXPECT_LE(err, 1e-4) << name;
}

TEST_P(EveryModel, LogitsAreHiddenTimesEmbeddingTranspose) {
    const auto spec = tiny_model_spec(GetParam());
    const ParamList params = spread_model(spec);
    const auto out = model::forward(params, spec, tiny_batch());
    const Tensor& e = find_param(params, "E").value;
    ASSERT_EQ(out.logits.shape(), (std::vector<std::size_t>{10, 10}));
    for (std::size_t r = 0; r < 10; ++r) {
        for (std::size_t v = 0; v < 10; ++v) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 4; ++k) dot += out.hidden[r * 4 + k] * e[v * 4 + k];
            EXPECT_NEAR(out.logits[r * 10 + v], dot, 1e-12);
        }
    }
}

TEST_P(EveryModel, SupervisedLogitsSelectRows) {
    const auto spec = tiny_model_spec(GetParam());
    const ParamList params = spread_model(spec);
    const auto batch = tiny_batch();
    const auto full = model::forward(params, spec, batch).logits;
    const Tensor sel = model::supervised_logits(params, spec, batch);
    ASSERT_EQ(sel.rows(), batch.supervised_count());
    std::size_t out_row = 0;
    for (std::size_t r = 0; r < batch.targets.size(); ++r) {
        if (batch.targets[r] == 0) continue;
        for (std::size_t v = 0; v < 10; ++v) EXPECT_NEAR(sel[out_row * 10 + v], full[r * 10 + v], 1e-12);
        ++out_row;
    }
}

TEST_P(EveryModel, CausalUnderSuffixPerturbation) {
    const auto spec = tiny_model_spec(GetParam());
    const ParamList params = spread_model(spec);
    const auto base = tiny_batch();
    const auto ref = model::forward(params, spec, base).logits;
    for (std::size_t j = 1; j < 5; ++j) {
        model::Batch changed = base;
        for (std::size_t t = j; t < 5; ++t) changed.inputs[5 + t] = static_cast<std::int32_t>(1 + (t * 7 + j) % 9);
        const auto out = model::forward(params, spec, changed).logits;
        for (std::size_t t = 0; t < j; ++t) {
            for (std::size_t v = 0; v < 10; ++v) {
                EXPECT_EQ(out[(5 + t) * 10 + v], ref[(5 + t) * 10 + v]) << "j=" << j << " t=" << t;
            }
        }
    }
}

TEST_P(EveryModel, AllPaddingRowIsNeutral) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList a = spread_model(spec);
    ParamList b = a;
    const auto batch = tiny_batch();
    model::Batch padded(3, 5);
    std::copy(batch.inputs.begin(), batch.inputs.end(), padded.inputs.begin());
    std::copy(batch.targets.begin(), batch.targets.end(), padded.targets.begin());

    const double la = model::loss_and_backward(a, spec, batch);
    const double lb = model::loss_and_backward(b, spec, padded);
    EXPECT_NEAR(la, lb, 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < a[i].grad.size(); ++k) EXPECT_NEAR(a[i].grad[k], b[i].grad[k], 1e-12);
    }
}

TEST(Padding, LongerWindowIsNeutralForPooling) {
    for (auto kind : {ModelKind::PoolRec, ModelKind::EmbeddingBag}) {
        auto spec = tiny_model_spec(kind);
        ParamList a = spread_model(spec);
        ParamList b = a;
        const auto batch = tiny_batch();
        auto wide_spec = spec;
        wide_spec.max_len = 8;
        model::Batch wide(2, 8);
        for (std::size_t r = 0; r < 2; ++r) {
            for (std::size_t t = 0; t < 5; ++t) {
                wide.inputs[r * 8 + 3 + t] = batch.input(r, t);
                wide.targets[r * 8 + 3 + t] = batch.target(r, t);
            }
        }
        const double la = model::loss_and_backward(a, spec, batch);
        const double lb = model::loss_and_backward(b, wide_spec, wide);
        EXPECT_NEAR(la, lb, 1e-12);
        for (std::size_t i = 0; i < a.size(); ++i) {
            for (std::size_t k = 0; k < a[i].grad.size(); ++k) EXPECT_NEAR(a[i].grad[k], b[i].grad[k], 1e-12);
        }
    }
}

TEST_P(EveryModel, UniformLogitsGiveLogVocab) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList params = spread_model(spec);
    find_param(params, "E").value.fill(0.0);
    EXPECT_NEAR(model::loss(params, spec, tiny_batch()), std::log(10.0), 1e-14);
}

TEST_P(EveryModel, AllPaddingBatchHasZeroLossAndGrads) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList params = spread_model(spec);
    for (auto& p : params) p.grad.fill(3.0);
    EXPECT_EQ(model::loss_and_backward(params, spec, model::Batch(2, 5)), 0.0);
    for (const auto& p : params) {
        for (double g : p.grad.data()) EXPECT_EQ(g, 0.0);
    }
}

TEST_P(EveryModel, SingleItemSequence) {
    const auto spec = tiny_model_spec(GetParam());
    model::Batch batch(1, 5);
    batch.inputs[4] = 6;
    batch.targets[4] = 2;
    EXPECT_EQ(batch.supervised_count(), 1u);
    const ParamList params = spread_model(spec);
    const auto out = model::forward(params, spec, batch);
    EXPECT_EQ(out.logits.shape(), (std::vector<std::size_t>{5, 10}));
    EXPECT_EQ(model::supervised_logits(params, spec, batch).rows(), 1u);
}

TEST_P(EveryModel, DuplicatedBatchKeepsMeanLossAndGrads) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList a = spread_model(spec);
    ParamList b = a;
    const auto batch = tiny_batch();
    model::Batch doubled(4, 5);
    for (std::size_t copy = 0; copy < 2; ++copy) {
        std::copy(batch.inputs.begin(), batch.inputs.end(), doubled.inputs.begin() + static_cast<long>(copy * 10));
        std::copy(batch.targets.begin(), batch.targets.end(), doubled.targets.begin() + static_cast<long>(copy * 10));
    }
    EXPECT_NEAR(model::loss_and_backward(a, spec, batch), model::loss_and_backward(b, spec, doubled), 1e-12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < a[i].grad.size(); ++k) EXPECT_NEAR(a[i].grad[k], b[i].grad[k], 1e-12);
    }
}

TEST_P(EveryModel, RepeatedCallsAreBitIdentical) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList a = spread_model(spec);
    ParamList b = a;
    EXPECT_EQ(model::loss_and_backward(a, spec, tiny_batch()), model::loss_and_backward(b, spec, tiny_batch()));
    model::loss_and_backward(b, spec, tiny_batch());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].grad, b[i].grad);
}

TEST_P(EveryModel, PaddingRowOfEmbeddingGetsNoGradient) {
    const auto spec = tiny_model_spec(GetParam());
    ParamList params = spread_model(spec);
    model::loss_and_backward(params, spec, tiny_batch());
    const Tensor& g = find_param(params, "E").grad;
    for (std::size_t c = 0; c < g.cols(); ++c) EXPECT_EQ(g[c], 0.0);
}

TEST_P(EveryModel, RejectsBadBatches) {
    const auto spec = tiny_model_spec(GetParam());
    const ParamList params = model::init_model(spec);
    model::Batch wrong_len(1, 4);
    EXPECT_THROW(model::loss(params, spec, wrong_len), Error);
    model::Batch out_of_range(1, 5);
    out_of_range.inputs[2] = 10;
    EXPECT_THROW(model::loss(params, spec, out_of_range), Error);
}

TEST(LayerNorm, TracesAreCentredAndMatchVarianceIdentity) {
    const auto spec = tiny_model_spec(ModelKind::SASRecLite);
    const auto out = model::forward(spread_model(spec), spec, tiny_batch());
    ASSERT_EQ(out.layer_norms.size(), 2u);
    for (const auto& trace : out.layer_norms) {
        const std::size_t d = trace.normalized.cols();
        for (std::size_t r = 0; r < trace.normalized.rows(); ++r) {
            double in_mean = 0.0, mean = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                in_mean += trace.input[r * d + k];
                mean += trace.normalized[r * d + k];
            }
            in_mean /= static_cast<double>(d);
            mean /= static_cast<double>(d);
            double in_var = 0.0, var = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                in_var += std::pow(trace.input[r * d + k] - in_mean, 2);
                var += std::pow(trace.normalized[r * d + k] - mean, 2);
            }
            in_var /= static_cast<double>(d);
            var /= static_cast<double>(d);
            EXPECT_LE(std::abs(mean), 1e-10);
            // eps keeps the variance just under one: exactly s / (s + eps)
            EXPECT_NEAR(var, in_var / (in_var + model::kLayerNormEps), 1e-12);
        }
    }
}

TEST(LayerNorm, UnitVarianceContract) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t rows = 64, d = 32;
    Tensor x = Tensor::matrix(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double scale = 100.0 * (1.0 + static_cast<double>(r));
        for (std::size_t k = 0; k < d; ++k) x[r * d + k] = 5.0 + scale * normal(rng);
    }
    const Tensor n = model::layer_norm_normalize(x);
    for (std::size_t r = 0; r < rows; ++r) {
        double mean = 0.0, var = 0.0;
        for (std::size_t k = 0; k < d; ++k) mean += n[r * d + k];
        mean /= static_cast<double>(d);
        for (std::size_t k = 0; k < d; ++k) var += std::pow(n[r * d + k] - mean, 2);
        var /= static_cast<double>(d);
        EXPECT_LE(std::abs(mean), 1e-10);
        EXPECT_LE(std::abs(var - 1.0), 1e-8);
    }
}

}  // namespace
