// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "model_internal.hpp"

namespace muonrec::model {

using detail::Mat;
using detail::mat;

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::SASRecLite: return "sasrec_lite";
        case ModelKind::PoolRec: return "pool_rec";
        case ModelKind::EmbeddingBag: return "embedding_bag";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    for (auto kind : {ModelKind::SASRecLite, ModelKind::PoolRec, ModelKind::EmbeddingBag}) {
        if (name == to_string(kind)) return kind;
    }
    throw Error(ErrorKind::Config, fmt::format("unknown model kind '{}'", name));
}

void ModelSpec::validate() const {
    if (vocab_size < 2) throw Error(ErrorKind::Config, fmt::format("model: vocab_size must be >= 2, got {}", vocab_size));
    if (embed_dim < 1) throw Error(ErrorKind::Config, "model: embed_dim must be >= 1");
    if (max_len < 1) throw Error(ErrorKind::Config, "model: max_len must be >= 1");
    if (kind == ModelKind::SASRecLite && ffn_dim < 1) throw Error(ErrorKind::Config, "model: ffn_dim must be >= 1");
}

Batch::Batch(std::size_t rows_, std::size_t max_len_) :
    rows(rows_), max_len(max_len_), inputs(rows_ * max_len_, 0), targets(rows_ * max_len_, 0) {}

std::size_t Batch::supervised_count() const {
    std::size_t n = 0;
    for (auto t : targets) n += (t != 0);
    return n;
}

ParamList init_model(const ModelSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, kInitStd);
    const std::size_t d = spec.embed_dim;

    ParamList params;
    auto add = [&](std::string name, ParamRole role, Tensor value, bool random) {
        if (random) {
            for (double& x : value.data()) x = normal(rng);
        }
        Tensor grad = value;
        grad.fill(0.0);
        params.push_back({std::move(name), role, std::move(value), std::move(grad)});
    };

    add("E", ParamRole::Embedding, Tensor::matrix(spec.vocab_size, d), true);
    for (std::size_t c = 0; c < d; ++c) params.back().value[c] = 0.0;

    switch (spec.kind) {
        case ModelKind::SASRecLite:
            add("P", ParamRole::PositionalEmbedding, Tensor::matrix(spec.max_len, d), true);
            add("W_Q", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("W_K", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("W_V", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("W_O", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("ln1_gain", ParamRole::LayerNormGain, Tensor::vector(d, 1.0), false);
            add("ln1_bias", ParamRole::LayerNormBias, Tensor::vector(d), false);
            add("W_1", ParamRole::HiddenMatrix, Tensor::matrix(d, spec.ffn_dim), true);
            add("b_1", ParamRole::Bias, Tensor::vector(spec.ffn_dim), false);
            add("W_2", ParamRole::HiddenMatrix, Tensor::matrix(spec.ffn_dim, d), true);
            add("b_2", ParamRole::Bias, Tensor::vector(d), false);
            add("ln2_gain", ParamRole::LayerNormGain, Tensor::vector(d, 1.0), false);
            add("ln2_bias", ParamRole::LayerNormBias, Tensor::vector(d), false);
            break;
        case ModelKind::PoolRec:
            add("W_1", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("b_1", ParamRole::Bias, Tensor::vector(d), false);
            add("W_2", ParamRole::HiddenMatrix, Tensor::matrix(d, d), true);
            add("b_2", ParamRole::Bias, Tensor::vector(d), false);
            break;
        case ModelKind::EmbeddingBag:
            break;
    }
    return params;
}

namespace detail {

void layer_norm_rows(const Mat& x, Mat& normalized, Eigen::VectorXd& rstd) {
    const auto d = static_cast<double>(x.cols());
    normalized.resize(x.rows(), x.cols());
    rstd.resize(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mean = x.row(r).sum() / d;
        const auto centered = x.row(r).array() - mean;
        const double var = centered.square().sum() / d;
        rstd(r) = 1.0 / std::sqrt(var + kLayerNormEps);
        normalized.row(r) = (centered * rstd(r)).matrix();
    }
}

void layer_norm_backward(const Mat& d_normalized, const Mat& normalized, const Eigen::VectorXd& rstd, Mat& d_input) {
    const auto d = static_cast<double>(normalized.cols());
    d_input.resize(normalized.rows(), normalized.cols());
    for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
        const double mean_dn = d_normalized.row(r).sum() / d;
        const double mean_dn_n = d_normalized.row(r).dot(normalized.row(r)) / d;
        d_input.row(r) =
            (rstd(r) * (d_normalized.row(r).array() - mean_dn - normalized.row(r).array() * mean_dn_n)).matrix();
    }
}

Tensor to_tensor(const Mat& m) {
    Tensor t = Tensor::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    mat(t) = m;
    return t;
}

}  // namespace detail

namespace {

void validate_batch(const ModelSpec& spec, const Batch& batch) {
    if (batch.max_len != spec.max_len) {
        throw Error(ErrorKind::Shape,
                    fmt::format("batch sequence length {} does not match model max_len {}", batch.max_len, spec.max_len));
    }
    if (batch.inputs.size() != batch.rows * batch.max_len || batch.targets.size() != batch.inputs.size()) {
        throw Error(ErrorKind::Shape, "batch buffers do not match rows * max_len");
    }
    const auto vocab = static_cast<std::int64_t>(spec.vocab_size);
    for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
        if (batch.inputs[i] < 0 || batch.inputs[i] >= vocab || batch.targets[i] < 0 || batch.targets[i] >= vocab) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("item id out of range [0, {}) at flat position {}: input {} target {}", vocab, i,
                                    batch.inputs[i], batch.targets[i]));
        }
    }
}

std::unique_ptr<detail::Encoder> make_encoder(const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::SASRecLite: return detail::make_sasrec_encoder(spec);
        case ModelKind::PoolRec:
        case ModelKind::EmbeddingBag: return detail::make_pool_encoder(spec);
    }
    throw Error(ErrorKind::Config, "unknown model kind");
}

std::vector<Eigen::Index> supervised_rows(const Batch& batch) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < batch.targets.size(); ++i) {
        if (batch.targets[i] != 0) rows.push_back(static_cast<Eigen::Index>(i));
    }
    return rows;
}

// Rows of the softmax are processed in blocks so the logits buffer stays
// small and is reused across blocks.
constexpr Eigen::Index kLossBlockRows = 128;

double compute_loss(ParamList* mutable_params, const ParamList& params, const ModelSpec& spec, const Batch& batch) {
    validate_batch(spec, batch);
    auto encoder = make_encoder(spec);
    Mat hidden;
    encoder->encode(params, batch, hidden);

    const auto rows = supervised_rows(batch);
    if (rows.empty()) {
        if (mutable_params != nullptr) zero_grads(*mutable_params);
        return 0.0;
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    Mat selected(n, hidden.cols());
    for (Eigen::Index i = 0; i < n; ++i) selected.row(i) = hidden.row(rows[static_cast<std::size_t>(i)]);

    const bool backward = mutable_params != nullptr;
    if (backward) zero_grads(*mutable_params);
    const auto emb = mat(find_param(params, "E").value);
    Mat d_selected;
    if (backward) d_selected.resize(n, hidden.cols());

    const double inv_n = 1.0 / static_cast<double>(n);
    double total = 0.0;
    Mat block(std::min(n, kLossBlockRows), emb.rows());
    for (Eigen::Index start = 0; start < n; start += kLossBlockRows) {
        const Eigen::Index count = std::min(kLossBlockRows, n - start);
        auto logits = block.topRows(count);
        const auto sel = selected.middleRows(start, count);
        logits.noalias() = sel * emb.transpose();
        for (Eigen::Index i = 0; i < count; ++i) {
            const auto target = batch.targets[static_cast<std::size_t>(rows[static_cast<std::size_t>(start + i)])];
            const double max_logit = logits.row(i).maxCoeff();
            const double target_logit = logits(i, target);
            logits.row(i) = (logits.row(i).array() - max_logit).exp().matrix();
            const double sum = logits.row(i).sum();
            total += max_logit + std::log(sum) - target_logit;
            if (backward) {
                // d(loss)/d(logits) = (softmax - onehot) / n
                logits.row(i) *= inv_n / sum;
                logits(i, target) -= inv_n;
            }
        }
        if (!backward) continue;
        mat(find_param(*mutable_params, "E").grad).noalias() += logits.transpose() * sel;
        d_selected.middleRows(start, count).noalias() = logits * emb;
    }
    const double mean_loss = total * inv_n;
    if (!backward) return mean_loss;

    ParamList& out = *mutable_params;
    Mat d_hidden = Mat::Zero(hidden.rows(), hidden.cols());
    for (Eigen::Index i = 0; i < n; ++i) d_hidden.row(rows[static_cast<std::size_t>(i)]) = d_selected.row(i);
    encoder->backward(out, batch, d_hidden);

    // padding row is frozen
    mat(find_param(out, "E").grad).row(0).setZero();
    return mean_loss;
}

}  // namespace

ForwardOutput forward(const ParamList& params, const ModelSpec& spec, const Batch& batch) {
    validate_batch(spec, batch);
    auto encoder = make_encoder(spec);
    Mat hidden;
    encoder->encode(params, batch, hidden);
    Mat logits;
    logits.noalias() = hidden * mat(find_param(params, "E").value).transpose();
    return ForwardOutput{detail::to_tensor(logits), detail::to_tensor(hidden), encoder->layer_norm_traces()};
}

double loss_and_backward(ParamList& params, const ModelSpec& spec, const Batch& batch) {
    return compute_loss(&params, params, spec, batch);
}

double loss(const ParamList& params, const ModelSpec& spec, const Batch& batch) {
    return compute_loss(nullptr, params, spec, batch);
}

Tensor supervised_logits(const ParamList& params, const ModelSpec& spec, const Batch& batch) {
    validate_batch(spec, batch);
    const auto rows = supervised_rows(batch);
    if (rows.empty()) throw Error(ErrorKind::InvalidArgument, "supervised_logits: batch has no supervised positions");
    auto encoder = make_encoder(spec);
    Mat hidden;
    encoder->encode(params, batch, hidden);
    Mat selected(static_cast<Eigen::Index>(rows.size()), hidden.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) selected.row(static_cast<Eigen::Index>(i)) = hidden.row(rows[i]);
    Mat logits;
    logits.noalias() = selected * mat(find_param(params, "E").value).transpose();
    return detail::to_tensor(logits);
}

Tensor layer_norm_normalize(const Tensor& x) {
    Mat normalized;
    Eigen::VectorXd rstd;
    detail::layer_norm_rows(Mat(mat(x)), normalized, rstd);
    return detail::to_tensor(normalized);
}

}  // namespace muonrec::model
