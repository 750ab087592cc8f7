// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: dataset prep, training, sweeps and comparisons.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "muonrec/harness.hpp"

namespace fs = std::filesystem;
using namespace muonrec;
using harness::Json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
    out << text;
}

Json dataset_stats(const data::InteractionDataset& ds) {
    return Json{{"users", ds.num_users},
                {"items", ds.num_items},
                {"interactions", ds.num_interactions()},
                {"fingerprint", fmt::format("{:016x}", ds.fingerprint())}};
}

int report_error(std::string_view kind, std::string_view message) {
    std::cerr << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"muonrec: hybrid Muon/Adam training for sequential recommenders"};
    app.require_subcommand(1);

    // prep
    auto* prep = app.add_subcommand("prep", "Filter and split a user_id,item_id,timestamp CSV");
    std::string prep_in;
    std::string prep_out;
    bool prep_no_filter = false;
    prep->add_option("--input", prep_in, "Raw interaction CSV")->required();
    prep->add_option("--output", prep_out, "Re-indexed dataset CSV")->required();
    prep->add_flag("--no-five-core", prep_no_filter, "Skip the 5-core filter");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the synthetic dataset and export it as CSV");
    data::SynthParams synth_params;
    std::string synth_out;
    synth->add_option("--output", synth_out, "Output CSV")->required();
    synth->add_option("--users", synth_params.num_users)->capture_default_str();
    synth->add_option("--items", synth_params.num_items)->capture_default_str();
    synth->add_option("--factors", synth_params.factors)->capture_default_str();
    synth->add_option("--temperature", synth_params.temperature)->capture_default_str();
    synth->add_option("--min-len", synth_params.min_len)->capture_default_str();
    synth->add_option("--max-len", synth_params.max_len)->capture_default_str();
    synth->add_option("--seed", synth_params.seed)->capture_default_str();

    // train
    auto* train = app.add_subcommand("train", "Run one experiment from a JSON config");
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed_override;
    train->add_option("--config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "Output directory (defaults to the config's output_dir)");
    train->add_option("--seed", seed_override, "Override the run seed");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Two-stage Adam then Muon grid search");
    std::size_t parallelism = 1;
    std::vector<double> adam_lrs = harness::default_adam_grid().lrs;
    std::vector<double> adam_wds = harness::default_adam_grid().wds;
    std::vector<double> muon_lrs = harness::default_muon_grid().lrs;
    std::vector<double> muon_wds = harness::default_muon_grid().wds;
    sweep->add_option("--config", config_path, "Base run config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--seed", seed_override, "Override the run seed");
    sweep->add_option("--parallelism", parallelism, "Concurrent runs")->capture_default_str();
    sweep->add_option("--adam-lrs", adam_lrs)->delimiter(',');
    sweep->add_option("--adam-wds", adam_wds)->delimiter(',');
    sweep->add_option("--muon-lrs", muon_lrs)->delimiter(',');
    sweep->add_option("--muon-wds", muon_wds)->delimiter(',');

    // lr-sweep
    auto* lr = app.add_subcommand("lr-sweep", "One run per learning rate; CSV table");
    std::vector<double> lrs;
    lr->add_option("--config", config_path, "Base run config (JSON)")->required()->check(CLI::ExistingFile);
    lr->add_option("--lrs", lrs, "Learning rates (at least three)")->required()->delimiter(',');
    lr->add_option("--out", out_dir, "Output directory")->required();
    lr->add_option("--seed", seed_override, "Override the run seed");
    lr->add_option("--parallelism", parallelism, "Concurrent runs")->capture_default_str();

    // compare
    auto* cmp = app.add_subcommand("compare", "Relative improvements between run summaries");
    std::vector<std::string> summaries;
    std::vector<std::string> labels;
    cmp->add_option("summaries", summaries, "summary.json files")->required()->check(CLI::ExistingFile);
    cmp->add_option("--labels", labels, "One label per summary")->delimiter(',');

    // ns-check
    auto* ns = app.add_subcommand("ns-check", "Newton-Schulz against the SVD oracle");
    std::uint64_t ns_seed = 0;
    std::size_t ns_cases = 100;
    ns->add_option("--seed", ns_seed)->capture_default_str();
    ns->add_option("--cases", ns_cases)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    auto load_config = [&] {
        harness::RunConfig config = harness::load_run_config(config_path);
        if (seed_override) config.seed = *seed_override;
        return config;
    };

    try {
        if (prep->parsed()) {
            auto ingested = data::ingest_csv(prep_in);
            auto records = prep_no_filter ? std::move(ingested.records) : data::five_core_filter(std::move(ingested.records));
            const auto dataset = data::leave_one_out_split(records);
            data::write_csv(dataset, prep_out);
            Json stats = dataset_stats(dataset);
            stats["malformed_lines"] = ingested.malformed;
            std::cout << stats.dump(2) << '\n';
        } else if (synth->parsed()) {
            const auto dataset = data::synth_generate(synth_params);
            data::write_csv(dataset, synth_out);
            std::cout << dataset_stats(dataset).dump(2) << '\n';
        } else if (train->parsed()) {
            const auto config = load_config();
            const fs::path dir = out_dir.empty() ? fs::path(config.output_dir) : fs::path(out_dir);
            const auto record = harness::run_experiment(config);
            harness::write_run_outputs(record, config, dir);
            std::cout << harness::summary_to_json(record.summary, false).dump(2) << '\n';
        } else if (sweep->parsed()) {
            const auto config = load_config();
            const auto report = harness::two_stage_sweep(config, {adam_lrs, adam_wds}, {muon_lrs, muon_wds}, parallelism);
            const std::string text = harness::to_json(report).dump(2) + "\n";
            write_text(fs::path(out_dir) / "sweep.json", text);
            std::cout << text;
        } else if (lr->parsed()) {
            const auto config = load_config();
            const std::string csv = harness::lr_sweep_csv(harness::lr_sweep(config, lrs, parallelism));
            write_text(fs::path(out_dir) / "lr_sweep.csv", csv);
            std::cout << csv;
        } else if (cmp->parsed()) {
            std::vector<harness::RunSummary> records;
            for (const auto& path : summaries) {
                std::ifstream in(path);
                Json doc;
                try {
                    in >> doc;
                } catch (const Json::exception& e) {
                    throw Error(ErrorKind::Data, fmt::format("'{}' is not valid JSON: {}", path, e.what()));
                }
                records.push_back(harness::summary_from_json(doc));
            }
            std::cout << harness::to_json(harness::compare(records, labels)).dump(2) << '\n';
        } else if (ns->parsed()) {
            const auto r = harness::ns_check(ns_seed, ns_cases);
            std::cout << Json{{"cases", r.cases},
                              {"max_relative_error", r.max_relative_error},
                              {"min_singular_value", r.min_singular_value},
                              {"max_singular_value", r.max_singular_value},
                              {"max_scale_error", r.max_scale_error},
                              {"max_sign_error", r.max_sign_error},
                              {"max_transpose_error", r.max_transpose_error}}
                             .dump(2)
                      << '\n';
        }
    } catch (const Error& e) {
        return report_error(to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
        return report_error("internal", e.what());
    }
    return 0;
}
