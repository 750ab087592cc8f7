// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "muonrec/tensor.hpp"

namespace muonrec {

enum class ParamRole {
    HiddenMatrix,
    Bias,
    LayerNormGain,
    LayerNormBias,
    Embedding,
    PositionalEmbedding,
    OutputHead,
};

const char* to_string(ParamRole role);
ParamRole parse_param_role(std::string_view name);

/// A named model parameter with its gradient buffer.
struct ParamTensor {
    std::string name;
    ParamRole role = ParamRole::Bias;
    Tensor value;
    Tensor grad;
};

using ParamList = std::vector<ParamTensor>;

const ParamTensor& find_param(const ParamList& params, std::string_view name);
ParamTensor& find_param(ParamList& params, std::string_view name);

void zero_grads(ParamList& params);

}  // namespace muonrec
