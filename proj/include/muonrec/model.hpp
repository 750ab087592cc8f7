// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "muonrec/param.hpp"
#include "muonrec/tensor.hpp"

namespace muonrec::model {

enum class ModelKind {
    SASRecLite,
    PoolRec,
    // Mean-pooled embeddings scored against the tied embedding table. Has no
    // hidden matrices, so its Muon group is empty.
    EmbeddingBag,
};

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
    ModelKind kind = ModelKind::SASRecLite;
    std::size_t vocab_size = 2;  // item catalog plus the padding id 0
    std::size_t embed_dim = 64;
    std::size_t max_len = 50;
    std::size_t ffn_dim = 128;  // SASRecLite only
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

inline constexpr double kInitStd = 0.02;
inline constexpr double kLayerNormEps = 1e-5;

/// Left-padded item-id sequences. Row b, position t is at index b * max_len + t.
/// targets hold the next item for supervised positions and 0 elsewhere.
struct Batch {
    std::size_t rows = 0;
    std::size_t max_len = 0;
    std::vector<std::int32_t> inputs;
    std::vector<std::int32_t> targets;

    Batch() = default;
    Batch(std::size_t rows, std::size_t max_len);

    std::int32_t input(std::size_t b, std::size_t t) const { return inputs[b * max_len + t]; }
    std::int32_t target(std::size_t b, std::size_t t) const { return targets[b * max_len + t]; }
    std::size_t supervised_count() const;
};

ParamList init_model(const ModelSpec& spec);

struct LayerNormTrace {
    Tensor input;       // residual sum fed to the norm, (rows*len) x d
    Tensor normalized;  // (x - mean) / sqrt(var + eps), before gain/bias
};

struct ForwardOutput {
    Tensor logits;  // (rows*max_len) x vocab_size
    Tensor hidden;  // (rows*max_len) x embed_dim
    std::vector<LayerNormTrace> layer_norms;
};

ForwardOutput forward(const ParamList& params, const ModelSpec& spec, const Batch& batch);

/// Mean next-item cross-entropy over supervised positions. Gradients are
/// written (overwritten, not accumulated) into every ParamTensor's grad.
/// The padding row of the embedding table is frozen and gets a zero gradient.
double loss_and_backward(ParamList& params, const ModelSpec& spec, const Batch& batch);

/// Loss without gradients.
double loss(const ParamList& params, const ModelSpec& spec, const Batch& batch);

/// Logits at the supervised positions only, in row-major position order:
/// N x vocab_size where N = batch.supervised_count().
Tensor supervised_logits(const ParamList& params, const ModelSpec& spec, const Batch& batch);

/// Row-wise layer normalization without gain/bias, eps = kLayerNormEps.
Tensor layer_norm_normalize(const Tensor& x);

}  // namespace muonrec::model
