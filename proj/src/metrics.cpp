// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "muonrec/error.hpp"

namespace muonrec::metrics {

std::size_t rank_of_target(std::span<const double> scores, std::int32_t target, std::span<const std::int32_t> exclude) {
    if (target <= 0 || static_cast<std::size_t>(target) >= scores.size()) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("rank_of_target: target {} outside candidate ids 1..{}", target, scores.size() - 1));
    }
    if (std::find(exclude.begin(), exclude.end(), target) != exclude.end()) {
        throw Error(ErrorKind::InvalidArgument, fmt::format("rank_of_target: target {} is excluded", target));
    }
    const double target_score = scores[static_cast<std::size_t>(target)];
    if (!std::isfinite(target_score)) {
        throw Error(ErrorKind::NonFinite, "rank_of_target: non-finite target score");
    }

    std::size_t ahead = 0;
    for (std::size_t id = 1; id < scores.size(); ++id) {
        const double s = scores[id];
        if (s > target_score || (s == target_score && id < static_cast<std::size_t>(target))) ++ahead;
    }
    // Excluded items that would have ranked ahead are taken back out.
    std::vector<std::int32_t> unique_excluded(exclude.begin(), exclude.end());
    std::sort(unique_excluded.begin(), unique_excluded.end());
    unique_excluded.erase(std::unique(unique_excluded.begin(), unique_excluded.end()), unique_excluded.end());
    for (std::int32_t id : unique_excluded) {
        if (id <= 0 || static_cast<std::size_t>(id) >= scores.size()) continue;
        const double s = scores[static_cast<std::size_t>(id)];
        if (s > target_score || (s == target_score && id < target)) --ahead;
    }
    return ahead + 1;
}

EvalResult recall_ndcg(std::span<const std::size_t> ranks, std::span<const int> ks) {
    if (ranks.empty()) throw Error(ErrorKind::InvalidArgument, "recall_ndcg: no ranks to evaluate");
    EvalResult result;
    result.num_users_evaluated = ranks.size();
    for (int k : ks) {
        if (k < 1) throw Error(ErrorKind::InvalidArgument, fmt::format("recall_ndcg: cutoff must be >= 1, got {}", k));
        double hits = 0.0;
        double gain = 0.0;
        for (std::size_t rank : ranks) {
            if (rank < 1) throw Error(ErrorKind::InvalidArgument, "recall_ndcg: ranks are 1-based");
            if (rank <= static_cast<std::size_t>(k)) {
                hits += 1.0;
                gain += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
            }
        }
        result.recall[k] = hits / static_cast<double>(ranks.size());
        result.ndcg[k] = gain / static_cast<double>(ranks.size());
    }
    return result;
}

void ConvergenceSpec::validate() const {
    if (eval_every == 0 || patience == 0) {
        throw Error(ErrorKind::Config, "convergence: eval_every and patience must be positive");
    }
}

ConvergenceTracker::ConvergenceTracker(ConvergenceSpec spec) : m_spec(spec) {
    m_spec.validate();
}

Decision ConvergenceTracker::observe(std::size_t step, double metric) {
    if (m_count > 0 && step <= m_last_step) {
        throw Error(ErrorKind::InvalidArgument,
                    fmt::format("convergence tracker: step {} observed after step {}", step, m_last_step));
    }
    m_last_step = step;
    m_improved_last = m_count == 0 || metric > m_best_metric;
    ++m_count;
    if (m_improved_last) {
        m_best_metric = metric;
        m_best_step = step;
        m_since_improvement = 0;
        return Decision::Continue;
    }
    ++m_since_improvement;
    return m_since_improvement >= m_spec.patience ? Decision::Stop : Decision::Continue;
}

std::size_t ConvergenceTracker::best_step() const {
    if (m_count == 0) throw Error(ErrorKind::InvalidArgument, "convergence tracker: no observations");
    return m_best_step;
}

double ConvergenceTracker::best_metric() const {
    if (m_count == 0) throw Error(ErrorKind::InvalidArgument, "convergence tracker: no observations");
    return m_best_metric;
}

}  // namespace muonrec::metrics
