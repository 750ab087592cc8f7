// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "muonrec/harness.hpp"

namespace muonrec::harness {

namespace {

Json cell_to_json(const SweepCell& cell) {
    Json j = {{"stage", cell.stage}, {"lr", cell.lr}, {"wd", cell.wd}, {"ok", cell.ok}};
    if (cell.ok) {
        j["summary"] = summary_to_json(cell.summary, false);
    } else {
        j["error"] = cell.error;
    }
    return j;
}

void run_cells(std::vector<SweepCell>& cells, const std::vector<RunConfig>& configs,
               const data::InteractionDataset& dataset, std::size_t parallelism) {
    parallel_for(cells.size(), parallelism, [&](std::size_t i) {
        try {
            cells[i].summary = run_experiment(configs[i], dataset).summary;
            cells[i].ok = true;
        } catch (const std::exception& e) {
            cells[i].error = e.what();
        }
    });
}

}  // namespace

void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& job) {
    const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    if (failure) std::rethrow_exception(failure);
}

Grid default_adam_grid() {
    return {{1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3}, {1e-5, 1e-4, 1e-3, 1e-2}};
}

Grid default_muon_grid() {
    return {{1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2}, {1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3}};
}

std::optional<std::size_t> select_best(const std::vector<SweepCell>& cells) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (!c.ok || c.summary.diverged || !std::isfinite(c.summary.best_val_ndcg10)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = cells[*best];
        const double cm = c.summary.best_val_ndcg10;
        const double bm = b.summary.best_val_ndcg10;
        if (cm > bm || (cm == bm && (c.lr < b.lr || (c.lr == b.lr && c.wd < b.wd)))) best = i;
    }
    return best;
}

SweepReport two_stage_sweep(const RunConfig& base, const Grid& adam_grid, const Grid& muon_grid,
                            std::size_t parallelism) {
    base.validate();
    return two_stage_sweep(base, build_dataset(base.dataset), adam_grid, muon_grid, parallelism);
}

SweepReport two_stage_sweep(const RunConfig& base, const data::InteractionDataset& dataset, const Grid& adam_grid,
                            const Grid& muon_grid, std::size_t parallelism) {
    if (adam_grid.lrs.empty() || adam_grid.wds.empty() || muon_grid.lrs.empty() || muon_grid.wds.empty()) {
        throw Error(ErrorKind::InvalidArgument, "sweep: grids must be non-empty");
    }
    SweepReport report;

    std::vector<RunConfig> configs;
    for (double lr : adam_grid.lrs) {
        for (double wd : adam_grid.wds) {
            RunConfig c = base;
            c.optimizer = OptimizerKind::AdamW;
            c.muon.reset();
            c.adam.eta = lr;
            c.adam.lambda = wd;
            c.save_checkpoint = false;
            configs.push_back(std::move(c));
            report.stage1.push_back({"adam", lr, wd, false, {}, {}});
        }
    }
    run_cells(report.stage1, configs, dataset, parallelism);
    report.best_stage1 = select_best(report.stage1);
    if (!report.best_stage1) throw Error(ErrorKind::Convergence, "sweep: every stage-1 cell failed or diverged");
    report.selected_adam = configs[*report.best_stage1].adam;

    configs.clear();
    const optim::MuonSpec muon_defaults = base.muon.value_or(optim::MuonSpec{});
    for (double lr : muon_grid.lrs) {
        for (double wd : muon_grid.wds) {
            RunConfig c = base;
            c.optimizer = OptimizerKind::MuonRec;
            c.adam = report.selected_adam;
            c.muon = muon_defaults;
            c.muon->eta = lr;
            c.muon->lambda = wd;
            c.save_checkpoint = false;
            configs.push_back(std::move(c));
            report.stage2.push_back({"muon", lr, wd, false, {}, {}});
        }
    }
    run_cells(report.stage2, configs, dataset, parallelism);
    report.best_stage2 = select_best(report.stage2);
    if (report.best_stage2) report.selected_muon = configs[*report.best_stage2].muon;
    return report;
}

Json to_json(const SweepReport& report) {
    Json stage1 = Json::array();
    Json stage2 = Json::array();
    for (const auto& c : report.stage1) stage1.push_back(cell_to_json(c));
    for (const auto& c : report.stage2) stage2.push_back(cell_to_json(c));
    Json j = {{"stage1", stage1},
              {"stage2", stage2},
              {"best_stage1", report.best_stage1 ? Json(*report.best_stage1) : Json(nullptr)},
              {"best_stage2", report.best_stage2 ? Json(*report.best_stage2) : Json(nullptr)},
              {"selected_adam", {{"lr", report.selected_adam.eta}, {"weight_decay", report.selected_adam.lambda}}}};
    j["selected_muon"] = report.selected_muon
                             ? Json{{"lr", report.selected_muon->eta}, {"weight_decay", report.selected_muon->lambda}}
                             : Json(nullptr);
    return j;
}

std::vector<LrSweepRow> lr_sweep(const RunConfig& base, const std::vector<double>& lrs, std::size_t parallelism) {
    base.validate();
    return lr_sweep(base, build_dataset(base.dataset), lrs, parallelism);
}

std::vector<LrSweepRow> lr_sweep(const RunConfig& base, const data::InteractionDataset& dataset,
                                 const std::vector<double>& lrs, std::size_t parallelism) {
    if (lrs.size() < 3) throw Error(ErrorKind::InvalidArgument, "lr sweep: need at least three learning rates");
    std::vector<LrSweepRow> rows(lrs.size());
    parallel_for(lrs.size(), parallelism, [&](std::size_t i) {
        RunConfig c = base;
        c.save_checkpoint = false;
        if (c.optimizer == OptimizerKind::MuonRec) {
            c.muon->eta = lrs[i];
        } else {
            c.adam.eta = lrs[i];
        }
        LrSweepRow& row = rows[i];
        row.lr = lrs[i];
        try {
            const RunSummary s = run_experiment(c, dataset).summary;
            row.ok = true;
            row.best_val_ndcg10 = s.best_val_ndcg10;
            row.initial_loss = s.initial_train_loss;
            row.final_loss = s.final_train_loss;
            row.diverged = s.diverged;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
    });
    return rows;
}

std::string lr_sweep_csv(const std::vector<LrSweepRow>& rows) {
    std::ostringstream out;
    out << "lr,ok,best_val_ndcg10,initial_loss,final_loss,diverged,regressed\n";
    for (const auto& r : rows) {
        out << fmt::format("{},{},{},{},{},{},{}\n", r.lr, r.ok ? 1 : 0, r.best_val_ndcg10, r.initial_loss,
                           r.final_loss, r.diverged ? 1 : 0, r.regressed() ? 1 : 0);
    }
    return out.str();
}

}  // namespace muonrec::harness
