// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/optim.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace muonrec::optim {

namespace {

void require_finite_grad(const Tensor& grad, std::string_view name) {
    for (double g : grad.data()) {
        if (!std::isfinite(g)) {
            throw Error(ErrorKind::NonFinite,
                        fmt::format("non-finite gradient for parameter '{}'", name.empty() ? "<unnamed>" : name));
        }
    }
}

std::vector<std::string> sorted_names(const ParamList& params) {
    std::vector<std::string> names;
    names.reserve(params.size());
    for (const auto& p : params) names.push_back(p.name);
    std::sort(names.begin(), names.end());
    if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
        throw Error(ErrorKind::InvalidArgument, "parameter names must be unique");
    }
    return names;
}

template <typename State>
State& state_for(StateMap& states, const std::string& name, const char* expected) {
    auto it = states.find(name);
    if (it == states.end()) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("no optimizer state for parameter '{}'", name));
    }
    auto* state = std::get_if<State>(&it->second);
    if (state == nullptr) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("parameter '{}' needs {} but carries a different state kind", name, expected));
    }
    return *state;
}

}  // namespace

void AdamSpec::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::Config, fmt::format("adam: eta must be > 0, got {}", eta));
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw Error(ErrorKind::Config, fmt::format("adam: beta1 must be in [0,1), got {}", beta1));
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw Error(ErrorKind::Config, fmt::format("adam: beta2 must be in [0,1), got {}", beta2));
    if (!(epsilon > 0.0)) throw Error(ErrorKind::Config, fmt::format("adam: epsilon must be > 0, got {}", epsilon));
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, fmt::format("adam: lambda must be >= 0, got {}", lambda));
}

void MuonSpec::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw Error(ErrorKind::Config, fmt::format("muon: eta must be > 0, got {}", eta));
    if (!(mu >= 0.0 && mu < 1.0)) throw Error(ErrorKind::Config, fmt::format("muon: mu must be in [0,1), got {}", mu));
    if (!(lambda >= 0.0)) throw Error(ErrorKind::Config, fmt::format("muon: lambda must be >= 0, got {}", lambda));
    if (ns_iters < 1) throw Error(ErrorKind::Config, fmt::format("muon: ns_iters must be >= 1, got {}", ns_iters));
}

AdamState AdamState::zeros_like(const Tensor& param) {
    AdamState s{param, param, 0};
    s.m.fill(0.0);
    s.v.fill(0.0);
    return s;
}

MuonState MuonState::zeros_like(const Tensor& param) {
    if (param.rank() != 2) {
        throw Error(ErrorKind::Shape, fmt::format("muon state needs a 2D parameter, got {}", param.shape_string()));
    }
    return MuonState{linalg::Matrix(param.rows(), param.cols())};
}

const char* to_string(ParamGroup group) {
    return group == ParamGroup::Muon ? "muon" : "adam";
}

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamSpec& spec, std::string_view name) {
    if (!param.same_shape(grad) || !param.same_shape(state.m) || !param.same_shape(state.v)) {
        throw Error(ErrorKind::Shape,
                    fmt::format("adam_step '{}': param {} grad {} m {} v {}", name, param.shape_string(),
                                grad.shape_string(), state.m.shape_string(), state.v.shape_string()));
    }
    require_finite_grad(grad, name);

    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double bias1 = 1.0 - std::pow(spec.beta1, t);
    const double bias2 = 1.0 - std::pow(spec.beta2, t);
    const double decay = 1.0 - spec.eta * spec.lambda;

    double* p = param.raw();
    const double* g = grad.raw();
    double* m = state.m.raw();
    double* v = state.v.raw();
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = spec.beta1 * m[i] + (1.0 - spec.beta1) * g[i];
        v[i] = spec.beta2 * v[i] + (1.0 - spec.beta2) * g[i] * g[i];
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        p[i] = p[i] * decay - spec.eta * (m_hat / (std::sqrt(v_hat) + spec.epsilon));
    }
}

void sgd_momentum_accumulate(const linalg::Matrix& grad, MuonState& state, double mu) {
    if (grad.rows() != state.momentum.rows() || grad.cols() != state.momentum.cols()) {
        throw Error(ErrorKind::Shape, fmt::format("sgd_momentum_accumulate: grad {} vs momentum {}",
                                                  grad.shape_string(), state.momentum.shape_string()));
    }
    auto mom = state.momentum.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < mom.size(); ++i) mom[i] = mu * mom[i] + g[i];
}

void muon_step(Tensor& param, const Tensor& grad, MuonState& state, const MuonSpec& spec, std::string_view name) {
    if (param.rank() != 2) {
        throw Error(ErrorKind::Shape, fmt::format("muon_step '{}': Muon needs a 2D parameter, got {}", name,
                                                  param.shape_string()));
    }
    if (!param.same_shape(grad)) {
        throw Error(ErrorKind::Shape, fmt::format("muon_step '{}': param {} vs grad {}", name,
                                                  param.shape_string(), grad.shape_string()));
    }
    require_finite_grad(grad, name);

    const linalg::Matrix g = grad.to_matrix();
    sgd_momentum_accumulate(g, state, spec.mu);

    const double decay = 1.0 - spec.eta * spec.lambda;
    double* p = param.raw();

    linalg::Matrix direction = spec.nesterov ? linalg::add(linalg::scale(state.momentum, spec.mu), g)
                                             : state.momentum;
    if (linalg::is_all_zero(direction)) {
        for (std::size_t i = 0; i < param.size(); ++i) p[i] *= decay;
        return;
    }
    const linalg::Matrix ortho = linalg::newton_schulz(direction, spec.ns_iters);
    const double scale =
        spec.rms_scale ? 0.2 * std::sqrt(static_cast<double>(std::max(param.rows(), param.cols()))) : 1.0;
    const auto o = ortho.data();
    for (std::size_t i = 0; i < param.size(); ++i) {
        p[i] = p[i] * decay - spec.eta * (scale * o[i]);
    }
}

std::vector<ParamGroupAssignment> classify_params(const ParamList& params) {
    std::vector<ParamGroupAssignment> out;
    out.reserve(params.size());
    sorted_names(params);
    for (const auto& p : params) {
        ParamGroup group = ParamGroup::Adam;
        switch (p.role) {
            case ParamRole::HiddenMatrix:
                if (p.value.rank() != 2) {
                    throw Error(ErrorKind::Shape,
                                fmt::format("hidden matrix '{}' must be 2D, got {}", p.name, p.value.shape_string()));
                }
                group = ParamGroup::Muon;
                break;
            case ParamRole::Bias:
            case ParamRole::LayerNormGain:
            case ParamRole::LayerNormBias:
            case ParamRole::Embedding:
            case ParamRole::PositionalEmbedding:
            case ParamRole::OutputHead:
                group = ParamGroup::Adam;
                break;
            default:
                throw Error(ErrorKind::InvalidArgument,
                            fmt::format("parameter '{}' has unknown role tag {}", p.name, static_cast<int>(p.role)));
        }
        out.push_back({p.name, group});
    }
    return out;
}

StateMap init_hybrid_states(const ParamList& params) {
    StateMap states;
    const auto groups = classify_params(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (groups[i].group == ParamGroup::Muon) {
            states.emplace(params[i].name, MuonState::zeros_like(params[i].value));
        } else {
            states.emplace(params[i].name, AdamState::zeros_like(params[i].value));
        }
    }
    return states;
}

StateMap init_adam_states(const ParamList& params) {
    StateMap states;
    sorted_names(params);
    for (const auto& p : params) states.emplace(p.name, AdamState::zeros_like(p.value));
    return states;
}

void hybrid_step(ParamList& params, StateMap& states, const MuonSpec& muon_spec, const AdamSpec& adam_spec) {
    const auto groups = classify_params(params);
    std::vector<std::size_t> order(params.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return params[a].name < params[b].name; });

    for (std::size_t i : order) {
        auto& p = params[i];
        if (groups[i].group == ParamGroup::Muon) {
            muon_step(p.value, p.grad, state_for<MuonState>(states, p.name, "MuonState"), muon_spec, p.name);
        } else {
            adam_step(p.value, p.grad, state_for<AdamState>(states, p.name, "AdamState"), adam_spec, p.name);
        }
    }
}

void adam_step_all(ParamList& params, StateMap& states, const AdamSpec& spec) {
    std::vector<std::size_t> order(params.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return params[a].name < params[b].name; });
    for (std::size_t i : order) {
        auto& p = params[i];
        adam_step(p.value, p.grad, state_for<AdamState>(states, p.name, "AdamState"), spec, p.name);
    }
}

}  // namespace muonrec::optim
