// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include <fmt/format.h>

#include "muonrec/param.hpp"
#include "muonrec/tensor.hpp"

namespace muonrec {

Tensor Tensor::vector(std::size_t n, double fill) {
    if (n == 0) throw Error(ErrorKind::Shape, "tensor dimensions must be positive");
    Tensor t;
    t.m_shape = {n};
    t.m_data.assign(n, fill);
    return t;
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
    if (rows == 0 || cols == 0) throw Error(ErrorKind::Shape, "tensor dimensions must be positive");
    Tensor t;
    t.m_shape = {rows, cols};
    t.m_data.assign(rows * cols, fill);
    return t;
}

Tensor Tensor::from_matrix(const linalg::Matrix& m) {
    Tensor t;
    t.m_shape = {m.rows(), m.cols()};
    t.m_data.assign(m.data().begin(), m.data().end());
    return t;
}

linalg::Matrix Tensor::to_matrix() const {
    if (rank() != 2) {
        throw Error(ErrorKind::Shape, fmt::format("expected a rank-2 tensor, got shape {}", shape_string()));
    }
    return linalg::Matrix(m_shape[0], m_shape[1], std::vector<double>(m_data.begin(), m_data.end()));
}

void Tensor::fill(double value) {
    std::fill(m_data.begin(), m_data.end(), value);
}

std::string Tensor::shape_string() const {
    return fmt::format("[{}]", fmt::join(m_shape, "x"));
}

const char* to_string(ParamRole role) {
    switch (role) {
        case ParamRole::HiddenMatrix: return "hidden_matrix";
        case ParamRole::Bias: return "bias";
        case ParamRole::LayerNormGain: return "layer_norm_gain";
        case ParamRole::LayerNormBias: return "layer_norm_bias";
        case ParamRole::Embedding: return "embedding";
        case ParamRole::PositionalEmbedding: return "positional_embedding";
        case ParamRole::OutputHead: return "output_head";
    }
    return "unknown";
}

ParamRole parse_param_role(std::string_view name) {
    for (auto role : {ParamRole::HiddenMatrix, ParamRole::Bias, ParamRole::LayerNormGain, ParamRole::LayerNormBias,
                      ParamRole::Embedding, ParamRole::PositionalEmbedding, ParamRole::OutputHead}) {
        if (name == to_string(role)) return role;
    }
    throw Error(ErrorKind::InvalidArgument, fmt::format("unknown parameter role '{}'", name));
}

const ParamTensor& find_param(const ParamList& params, std::string_view name) {
    for (const auto& p : params) {
        if (p.name == name) return p;
    }
    throw Error(ErrorKind::InvalidArgument, fmt::format("no parameter named '{}'", name));
}

ParamTensor& find_param(ParamList& params, std::string_view name) {
    return const_cast<ParamTensor&>(find_param(static_cast<const ParamList&>(params), name));
}

void zero_grads(ParamList& params) {
    for (auto& p : params) p.grad.fill(0.0);
}

}  // namespace muonrec
