// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "muonrec/data.hpp"
#include "muonrec/metrics.hpp"
#include "muonrec/model.hpp"
#include "muonrec/optim.hpp"

namespace muonrec::harness {

using Json = nlohmann::json;

enum class OptimizerKind { Adam, AdamW, MuonRec };

const char* to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct SyntheticSource {
    data::SynthParams params;
};

struct CsvSource {
    std::string path;
    bool five_core = true;
};

using DatasetSource = std::variant<SyntheticSource, CsvSource>;

/// Model architecture as configured; vocab_size and seed are filled in from
/// the dataset and the run seed.
struct ModelConfig {
    model::ModelKind kind = model::ModelKind::SASRecLite;
    std::size_t embed_dim = 64;
    std::size_t max_len = 50;
    std::size_t ffn_dim = 64;
};

struct RunConfig {
    DatasetSource dataset = SyntheticSource{};
    ModelConfig model;
    OptimizerKind optimizer = OptimizerKind::Adam;
    optim::AdamSpec adam;
    std::optional<optim::MuonSpec> muon;  // present iff optimizer == MuonRec
    std::size_t batch_size = 256;
    std::size_t max_steps = 2000;
    metrics::ConvergenceSpec convergence;
    std::vector<int> eval_ks{1, 3, 5, 10};
    bool exclude_history = true;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    bool save_checkpoint = false;

    void validate() const;
};

/// Parses a config document; unknown keys are rejected.
RunConfig parse_run_config(const Json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully resolved config, defaults filled in.
Json to_json(const RunConfig& config);

struct EvalRow {
    std::size_t step = 0;
    double train_loss = 0.0;  // mean train loss since the previous row
    metrics::EvalResult validation;
};

struct RunSummary {
    std::string optimizer;  // "adam", "adamw" or "muonrec"
    std::size_t converged_step = 0;
    double best_val_ndcg10 = 0.0;
    metrics::EvalResult test;
    double initial_train_loss = 0.0;
    double final_train_loss = 0.0;
    bool diverged = false;
    std::size_t steps_run = 0;
    double epochs = 0.0;
    std::uint64_t dataset_fingerprint = 0;
    double wall_time_seconds = 0.0;
    Json config;
};

struct RunRecord {
    std::vector<EvalRow> rows;
    RunSummary summary;
    std::optional<ParamList> best_params;  // only when save_checkpoint is set
};

data::InteractionDataset build_dataset(const DatasetSource& source);

/// Trains, early-stops on validation NDCG@10, restores the best checkpoint
/// and evaluates on test. Deterministic for a fixed config.
RunRecord run_experiment(const RunConfig& config);
RunRecord run_experiment(const RunConfig& config, const data::InteractionDataset& dataset);

/// Validation or test metrics for every user of the dataset.
metrics::EvalResult evaluate(const ParamList& params, const model::ModelSpec& spec,
                             const data::InteractionDataset& dataset, data::Split split, std::span<const int> ks,
                             bool exclude_history, std::size_t batch_size = 256);

std::string metrics_csv(const RunRecord& record, std::span<const int> ks);
Json summary_to_json(const RunSummary& summary, bool include_run_metadata = true);
RunSummary summary_from_json(const Json& doc);

/// Writes metrics.csv, summary.json and, if requested, checkpoint.bin with
/// its checkpoint.json shape manifest.
void write_run_outputs(const RunRecord& record, const RunConfig& config, const std::filesystem::path& dir);

void write_checkpoint(const ParamList& params, const std::filesystem::path& dir);
ParamList read_checkpoint(const std::filesystem::path& dir);

struct Grid {
    std::vector<double> lrs;
    std::vector<double> wds;
};

Grid default_adam_grid();
Grid default_muon_grid();

struct SweepCell {
    std::string stage;  // "adam" or "muon"
    double lr = 0.0;
    double wd = 0.0;
    bool ok = false;
    std::string error;
    RunSummary summary;
};

struct SweepReport {
    std::vector<SweepCell> stage1;
    std::vector<SweepCell> stage2;
    std::optional<std::size_t> best_stage1;
    std::optional<std::size_t> best_stage2;
    optim::AdamSpec selected_adam;
    std::optional<optim::MuonSpec> selected_muon;
};

/// Stage 1 tunes the whole model with AdamW over adam_grid; stage 2 fixes
/// the Adam group at the stage-1 optimum and tunes only the Muon group.
/// Cells run on `parallelism` threads; results do not depend on it.
SweepReport two_stage_sweep(const RunConfig& base, const Grid& adam_grid, const Grid& muon_grid,
                            std::size_t parallelism = 1);
SweepReport two_stage_sweep(const RunConfig& base, const data::InteractionDataset& dataset, const Grid& adam_grid,
                            const Grid& muon_grid, std::size_t parallelism = 1);

/// Best cell by validation NDCG@10; ties go to the smaller lr, then the
/// smaller wd. Failed cells never win.
std::optional<std::size_t> select_best(const std::vector<SweepCell>& cells);

Json to_json(const SweepReport& report);

struct LrSweepRow {
    double lr = 0.0;
    bool ok = false;
    std::string error;
    double best_val_ndcg10 = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    bool diverged = false;

    bool regressed() const { return diverged || !(final_loss < initial_loss); }
};

/// One run per learning rate. For MuonRec bases the lr is the Muon-group lr,
/// otherwise the Adam lr. Needs at least three rates.
std::vector<LrSweepRow> lr_sweep(const RunConfig& base, const std::vector<double>& lrs, std::size_t parallelism = 1);
std::vector<LrSweepRow> lr_sweep(const RunConfig& base, const data::InteractionDataset& dataset,
                                 const std::vector<double>& lrs, std::size_t parallelism = 1);
std::string lr_sweep_csv(const std::vector<LrSweepRow>& rows);

struct ComparisonRow {
    std::string label;
    std::string optimizer;
    std::size_t converged_step = 0;
    metrics::EvalResult test;
    double step_reduction_pct = 0.0;
    std::map<std::string, double> improvement_pct;  // "recall@K" / "ndcg@K" -> %
};

struct ComparisonReport {
    std::size_t baseline = 0;
    std::vector<ComparisonRow> rows;
};

/// Relative improvements against the baseline record (the first Adam/AdamW
/// record, or the first record): step reduction (base - x) / base and metric
/// improvement (x - base) / base, both in percent.
ComparisonReport compare(const std::vector<RunSummary>& records, const std::vector<std::string>& labels = {});
Json to_json(const ComparisonReport& report);

/// Runs `count` independent jobs on up to `parallelism` threads.
void parallel_for(std::size_t count, std::size_t parallelism, const std::function<void(std::size_t)>& job);

struct NsCheckReport {
    std::size_t cases = 0;
    double max_relative_error = 0.0;
    double min_singular_value = 0.0;
    double max_singular_value = 0.0;
    double max_scale_error = 0.0;
    double max_sign_error = 0.0;
    double max_transpose_error = 0.0;
};

/// Newton-Schulz against the SVD oracle on seeded matrices with condition
/// number <= 10 and shapes 4x4, 16x8, 8x16, 64x64.
NsCheckReport ns_check(std::uint64_t seed, std::size_t cases);

}  // namespace muonrec::harness
