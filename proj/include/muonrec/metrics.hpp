// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace muonrec::metrics {

/// 1-based rank of `target` among candidate items. scores[i] is the score of
/// item id i; id 0 is padding and never a candidate, nor is any id in
/// `exclude`. Ties go to the smaller item id.
std::size_t rank_of_target(std::span<const double> scores, std::int32_t target,
                           std::span<const std::int32_t> exclude = {});

struct EvalResult {
    std::map<int, double> recall;
    std::map<int, double> ndcg;
    std::size_t num_users_evaluated = 0;

    bool operator==(const EvalResult&) const = default;
};

/// Single-relevant-item Recall@K and NDCG@K averaged over users.
EvalResult recall_ndcg(std::span<const std::size_t> ranks, std::span<const int> ks);

inline constexpr int kTargetCutoff = 10;

struct ConvergenceSpec {
    std::size_t eval_every = 10;
    std::size_t patience = 5;

    void validate() const;
    bool operator==(const ConvergenceSpec&) const = default;
};

enum class Decision { Continue, Stop };

/// Early-stopping bookkeeping on validation NDCG@10.
class ConvergenceTracker {
public:
    explicit ConvergenceTracker(ConvergenceSpec spec);

    /// Stops after `patience` consecutive observations without a strict
    /// improvement. Steps must increase.
    Decision observe(std::size_t step, double metric);

    bool improved_last() const { return m_improved_last; }
    bool has_observation() const { return m_count > 0; }
    std::size_t best_step() const;
    double best_metric() const;
    std::size_t since_improvement() const { return m_since_improvement; }

private:
    ConvergenceSpec m_spec;
    std::size_t m_count = 0;
    std::size_t m_last_step = 0;
    std::size_t m_best_step = 0;
    double m_best_metric = 0.0;
    std::size_t m_since_improvement = 0;
    bool m_improved_last = false;
};

}  // namespace muonrec::metrics
