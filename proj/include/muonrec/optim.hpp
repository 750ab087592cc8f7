// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "muonrec/linalg.hpp"
#include "muonrec/param.hpp"
#include "muonrec/tensor.hpp"

namespace muonrec::optim {

/// Adam hyperparameters. `lambda` > 0 turns on decoupled (AdamW) decay.
struct AdamSpec {
    double eta = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double lambda = 0.0;

    void validate() const;
    bool operator==(const AdamSpec&) const = default;
};

struct AdamState {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;

    static AdamState zeros_like(const Tensor& param);
};

struct MuonSpec {
    double eta = 2e-2;
    double mu = 0.95;
    double lambda = 0.0;
    int ns_iters = linalg::kDefaultNewtonSchulzIters;
    // Scale the orthogonalized update by 0.2 * sqrt(max(rows, cols)).
    bool rms_scale = false;
    // Orthogonalize mu * M_t + G_t instead of M_t.
    bool nesterov = false;

    void validate() const;
    bool operator==(const MuonSpec&) const = default;
};

struct MuonState {
    linalg::Matrix momentum;

    static MuonState zeros_like(const Tensor& param);
};

using OptimizerState = std::variant<AdamState, MuonState>;
using StateMap = std::map<std::string, OptimizerState, std::less<>>;

enum class ParamGroup { Muon, Adam };

const char* to_string(ParamGroup group);

struct ParamGroupAssignment {
    std::string param_name;
    ParamGroup group = ParamGroup::Adam;

    bool operator==(const ParamGroupAssignment&) const = default;
};

/// One Adam/AdamW step. Throws on shape mismatch or a non-finite gradient;
/// `name` is used in error messages.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamSpec& spec,
               std::string_view name = {});

/// momentum <- mu * momentum + grad.
void sgd_momentum_accumulate(const linalg::Matrix& grad, MuonState& state, double mu);

/// One Muon step on a rank-2 parameter.
void muon_step(Tensor& param, const Tensor& grad, MuonState& state, const MuonSpec& spec,
               std::string_view name = {});

/// Hidden matrices go to the Muon group; biases, LayerNorm parameters,
/// embeddings and output heads go to the Adam group. Output order follows
/// the input order.
std::vector<ParamGroupAssignment> classify_params(const ParamList& params);

/// Fresh state per parameter: MuonState for Muon-group params, AdamState
/// otherwise.
StateMap init_hybrid_states(const ParamList& params);

/// Fresh AdamState for every parameter.
StateMap init_adam_states(const ParamList& params);

/// Steps every parameter with the optimizer of its group, in name order.
void hybrid_step(ParamList& params, StateMap& states, const MuonSpec& muon_spec, const AdamSpec& adam_spec);

/// Steps every parameter with Adam, in name order.
void adam_step_all(ParamList& params, StateMap& states, const AdamSpec& spec);

}  // namespace muonrec::optim
