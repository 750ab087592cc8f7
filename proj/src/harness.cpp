// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace muonrec::harness {

namespace {

void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw Error(ErrorKind::Config, fmt::format("config: '{}' must be an object", where));
    for (const auto& item : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw Error(ErrorKind::Config, fmt::format("config: unknown key '{}' in '{}'", item.key(), where));
        }
    }
}

template <typename T>
void read_field(const Json& obj, const char* key, T& out, std::string_view where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, fmt::format("config: bad value for '{}.{}': {}", where, key, e.what()));
    }
}

Json eval_to_json(const metrics::EvalResult& r) {
    Json recall = Json::object();
    Json ndcg = Json::object();
    for (const auto& [k, v] : r.recall) recall[std::to_string(k)] = v;
    for (const auto& [k, v] : r.ndcg) ndcg[std::to_string(k)] = v;
    return Json{{"recall", recall}, {"ndcg", ndcg}, {"num_users", r.num_users_evaluated}};
}

metrics::EvalResult eval_from_json(const Json& j) {
    metrics::EvalResult r;
    for (const auto& item : j.at("recall").items()) r.recall[std::stoi(item.key())] = item.value().get<double>();
    for (const auto& item : j.at("ndcg").items()) r.ndcg[std::stoi(item.key())] = item.value().get<double>();
    r.num_users_evaluated = j.value("num_users", std::size_t{0});
    return r;
}

// JSON has no NaN/Inf; they are written as null.
Json number_or_null(double x) {
    return std::isfinite(x) ? Json(x) : Json(nullptr);
}

double number_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.at(key).get<double>();
}

class TrainingOptimizer {
public:
    TrainingOptimizer(const RunConfig& config, const ParamList& params) :
        m_kind(config.optimizer), m_adam(config.adam), m_muon(config.muon) {
        m_states = m_kind == OptimizerKind::MuonRec ? optim::init_hybrid_states(params)
                                                    : optim::init_adam_states(params);
    }

    void step(ParamList& params) {
        if (m_kind == OptimizerKind::MuonRec) {
            optim::hybrid_step(params, m_states, *m_muon, m_adam);
        } else {
            optim::adam_step_all(params, m_states, m_adam);
        }
    }

private:
    OptimizerKind m_kind;
    optim::AdamSpec m_adam;
    std::optional<optim::MuonSpec> m_muon;
    optim::StateMap m_states;
};

// Pre-built held-out batches with per-row targets and exclusion lists.
class Evaluator {
public:
    Evaluator(const model::ModelSpec& spec, const data::InteractionDataset& dataset, data::Split split,
              std::vector<int> ks, bool exclude_history, std::size_t batch_size) :
        m_spec(spec), m_ks(std::move(ks)) {
        m_batches = data::make_batches(dataset, spec.max_len, batch_size, split, 0);
        for (std::size_t u = 0; u < dataset.num_users; ++u) {
            const auto& s = dataset.splits[u];
            const std::int32_t target = split == data::Split::Test ? s.test : s.validation;
            m_targets.push_back(target);
            std::vector<std::int32_t> exclude;
            if (exclude_history) {
                for (auto id : s.train) {
                    if (id != target) exclude.push_back(id);
                }
                std::sort(exclude.begin(), exclude.end());
                exclude.erase(std::unique(exclude.begin(), exclude.end()), exclude.end());
            }
            m_exclude.push_back(std::move(exclude));
        }
    }

    metrics::EvalResult operator()(const ParamList& params) const {
        std::vector<std::size_t> ranks;
        ranks.reserve(m_targets.size());
        std::size_t user = 0;
        for (const auto& batch : m_batches) {
            const Tensor logits = model::supervised_logits(params, m_spec, batch);
            const std::size_t vocab = logits.cols();
            for (std::size_t r = 0; r < logits.rows(); ++r, ++user) {
                const std::span<const double> scores(logits.raw() + r * vocab, vocab);
                ranks.push_back(metrics::rank_of_target(scores, m_targets[user], m_exclude[user]));
            }
        }
        return metrics::recall_ndcg(ranks, m_ks);
    }

private:
    model::ModelSpec m_spec;
    std::vector<int> m_ks;
    std::vector<model::Batch> m_batches;
    std::vector<std::int32_t> m_targets;
    std::vector<std::vector<std::int32_t>> m_exclude;
};

bool all_finite(const ParamList& params) {
    for (const auto& p : params) {
        for (double x : p.value.data()) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

double ndcg_at_target(const metrics::EvalResult& r) {
    return r.ndcg.at(metrics::kTargetCutoff);
}

}  // namespace

const char* to_string(OptimizerKind kind) {
    switch (kind) {
        case OptimizerKind::Adam: return "adam";
        case OptimizerKind::AdamW: return "adamw";
        case OptimizerKind::MuonRec: return "muonrec";
    }
    return "unknown";
}

OptimizerKind parse_optimizer_kind(std::string_view name) {
    for (auto kind : {OptimizerKind::Adam, OptimizerKind::AdamW, OptimizerKind::MuonRec}) {
        if (name == to_string(kind)) return kind;
    }
    throw Error(ErrorKind::Config, fmt::format("unknown optimizer kind '{}'", name));
}

void RunConfig::validate() const {
    if (const auto* csv = std::get_if<CsvSource>(&dataset); csv != nullptr && csv->path.empty()) {
        throw Error(ErrorKind::Config, "config: dataset.csv.path must not be empty");
    }
    if (const auto* synth = std::get_if<SyntheticSource>(&dataset)) synth->params.validate();
    if (model.embed_dim == 0 || model.max_len == 0 || model.ffn_dim == 0) {
        throw Error(ErrorKind::Config, "config: model dimensions must be positive");
    }
    adam.validate();
    if (optimizer == OptimizerKind::Adam && adam.lambda != 0.0) {
        throw Error(ErrorKind::Config, "config: optimizer 'adam' has no weight decay; use 'adamw'");
    }
    if ((optimizer == OptimizerKind::MuonRec) != muon.has_value()) {
        throw Error(ErrorKind::Config, "config: a muon section is required for 'muonrec' and only for it");
    }
    if (muon) muon->validate();
    if (batch_size == 0) throw Error(ErrorKind::Config, "config: batch_size must be positive");
    convergence.validate();
    if (std::find(eval_ks.begin(), eval_ks.end(), metrics::kTargetCutoff) == eval_ks.end()) {
        throw Error(ErrorKind::Config, "config: eval_ks must include 10 (early stopping tracks NDCG@10)");
    }
    for (int k : eval_ks) {
        if (k < 1) throw Error(ErrorKind::Config, fmt::format("config: eval cutoff must be >= 1, got {}", k));
    }
}

RunConfig parse_run_config(const Json& doc) {
    reject_unknown_keys(doc, {"dataset", "model", "optimizer", "batch_size", "max_steps", "convergence", "eval_ks",
                              "exclude_history", "seed", "output_dir", "save_checkpoint"},
                        "<root>");
    RunConfig c;

    if (doc.contains("dataset")) {
        const Json& ds = doc.at("dataset");
        reject_unknown_keys(ds, {"synthetic", "csv"}, "dataset");
        if (ds.contains("synthetic") == ds.contains("csv")) {
            throw Error(ErrorKind::Config, "config: dataset needs exactly one of 'synthetic' or 'csv'");
        }
        if (ds.contains("synthetic")) {
            const Json& s = ds.at("synthetic");
            reject_unknown_keys(s, {"num_users", "num_items", "factors", "temperature", "min_len", "max_len", "seed"},
                                "dataset.synthetic");
            data::SynthParams p;
            read_field(s, "num_users", p.num_users, "dataset.synthetic");
            read_field(s, "num_items", p.num_items, "dataset.synthetic");
            read_field(s, "factors", p.factors, "dataset.synthetic");
            read_field(s, "temperature", p.temperature, "dataset.synthetic");
            read_field(s, "min_len", p.min_len, "dataset.synthetic");
            read_field(s, "max_len", p.max_len, "dataset.synthetic");
            read_field(s, "seed", p.seed, "dataset.synthetic");
            c.dataset = SyntheticSource{p};
        } else {
            const Json& s = ds.at("csv");
            reject_unknown_keys(s, {"path", "five_core"}, "dataset.csv");
            CsvSource src;
            read_field(s, "path", src.path, "dataset.csv");
            read_field(s, "five_core", src.five_core, "dataset.csv");
            c.dataset = src;
        }
    }

    bool ffn_given = false;
    if (doc.contains("model")) {
        const Json& m = doc.at("model");
        reject_unknown_keys(m, {"kind", "embed_dim", "max_len", "ffn_dim"}, "model");
        std::string kind = model::to_string(c.model.kind);
        read_field(m, "kind", kind, "model");
        c.model.kind = model::parse_model_kind(kind);
        read_field(m, "embed_dim", c.model.embed_dim, "model");
        read_field(m, "max_len", c.model.max_len, "model");
        ffn_given = m.contains("ffn_dim");
        read_field(m, "ffn_dim", c.model.ffn_dim, "model");
    }
    if (!ffn_given) c.model.ffn_dim = c.model.embed_dim;

    if (doc.contains("optimizer")) {
        const Json& o = doc.at("optimizer");
        reject_unknown_keys(o, {"kind", "adam", "muon"}, "optimizer");
        std::string kind = to_string(c.optimizer);
        read_field(o, "kind", kind, "optimizer");
        c.optimizer = parse_optimizer_kind(kind);
        if (o.contains("adam")) {
            const Json& a = o.at("adam");
            reject_unknown_keys(a, {"lr", "beta1", "beta2", "epsilon", "weight_decay"}, "optimizer.adam");
            read_field(a, "lr", c.adam.eta, "optimizer.adam");
            read_field(a, "beta1", c.adam.beta1, "optimizer.adam");
            read_field(a, "beta2", c.adam.beta2, "optimizer.adam");
            read_field(a, "epsilon", c.adam.epsilon, "optimizer.adam");
            read_field(a, "weight_decay", c.adam.lambda, "optimizer.adam");
        }
        if (o.contains("muon")) {
            if (c.optimizer != OptimizerKind::MuonRec) {
                throw Error(ErrorKind::Config, "config: optimizer.muon is only valid with kind 'muonrec'");
            }
            const Json& mu = o.at("muon");
            reject_unknown_keys(mu, {"lr", "momentum", "weight_decay", "ns_iters", "rms_scale", "nesterov"},
                                "optimizer.muon");
            optim::MuonSpec spec;
            read_field(mu, "lr", spec.eta, "optimizer.muon");
            read_field(mu, "momentum", spec.mu, "optimizer.muon");
            read_field(mu, "weight_decay", spec.lambda, "optimizer.muon");
            read_field(mu, "ns_iters", spec.ns_iters, "optimizer.muon");
            read_field(mu, "rms_scale", spec.rms_scale, "optimizer.muon");
            read_field(mu, "nesterov", spec.nesterov, "optimizer.muon");
            c.muon = spec;
        }
    }
    if (c.optimizer == OptimizerKind::MuonRec && !c.muon) c.muon = optim::MuonSpec{};

    read_field(doc, "batch_size", c.batch_size, "<root>");
    read_field(doc, "max_steps", c.max_steps, "<root>");
    if (doc.contains("convergence")) {
        const Json& cv = doc.at("convergence");
        reject_unknown_keys(cv, {"eval_every", "patience"}, "convergence");
        read_field(cv, "eval_every", c.convergence.eval_every, "convergence");
        read_field(cv, "patience", c.convergence.patience, "convergence");
    }
    read_field(doc, "eval_ks", c.eval_ks, "<root>");
    read_field(doc, "exclude_history", c.exclude_history, "<root>");
    read_field(doc, "seed", c.seed, "<root>");
    read_field(doc, "output_dir", c.output_dir, "<root>");
    read_field(doc, "save_checkpoint", c.save_checkpoint, "<root>");

    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config '{}'", path.string()));
    Json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Config, fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return parse_run_config(doc);
}

Json to_json(const RunConfig& c) {
    Json ds;
    if (const auto* synth = std::get_if<SyntheticSource>(&c.dataset)) {
        const auto& p = synth->params;
        ds["synthetic"] = {{"num_users", p.num_users}, {"num_items", p.num_items}, {"factors", p.factors},
                           {"temperature", p.temperature}, {"min_len", p.min_len},    {"max_len", p.max_len},
                           {"seed", p.seed}};
    } else {
        const auto& csv = std::get<CsvSource>(c.dataset);
        ds["csv"] = {{"path", csv.path}, {"five_core", csv.five_core}};
    }
    Json opt = {{"kind", to_string(c.optimizer)},
                {"adam",
                 {{"lr", c.adam.eta},
                  {"beta1", c.adam.beta1},
                  {"beta2", c.adam.beta2},
                  {"epsilon", c.adam.epsilon},
                  {"weight_decay", c.adam.lambda}}}};
    if (c.muon) {
        opt["muon"] = {{"lr", c.muon->eta},           {"momentum", c.muon->mu},
                       {"weight_decay", c.muon->lambda}, {"ns_iters", c.muon->ns_iters},
                       {"rms_scale", c.muon->rms_scale}, {"nesterov", c.muon->nesterov}};
    }
    return Json{{"dataset", ds},
                {"model",
                 {{"kind", model::to_string(c.model.kind)},
                  {"embed_dim", c.model.embed_dim},
                  {"max_len", c.model.max_len},
                  {"ffn_dim", c.model.ffn_dim}}},
                {"optimizer", opt},
                {"batch_size", c.batch_size},
                {"max_steps", c.max_steps},
                {"convergence", {{"eval_every", c.convergence.eval_every}, {"patience", c.convergence.patience}}},
                {"eval_ks", c.eval_ks},
                {"exclude_history", c.exclude_history},
                {"seed", c.seed},
                {"output_dir", c.output_dir},
                {"save_checkpoint", c.save_checkpoint}};
}

data::InteractionDataset build_dataset(const DatasetSource& source) {
    if (const auto* synth = std::get_if<SyntheticSource>(&source)) return data::synth_generate(synth->params);
    const auto& csv = std::get<CsvSource>(source);
    auto ingested = data::ingest_csv(csv.path);
    auto records = csv.five_core ? data::five_core_filter(std::move(ingested.records)) : std::move(ingested.records);
    return data::leave_one_out_split(records);
}

metrics::EvalResult evaluate(const ParamList& params, const model::ModelSpec& spec,
                             const data::InteractionDataset& dataset, data::Split split, std::span<const int> ks,
                             bool exclude_history, std::size_t batch_size) {
    const Evaluator eval(spec, dataset, split, std::vector<int>(ks.begin(), ks.end()), exclude_history, batch_size);
    return eval(params);
}

RunRecord run_experiment(const RunConfig& config) {
    config.validate();
    return run_experiment(config, build_dataset(config.dataset));
}

RunRecord run_experiment(const RunConfig& config, const data::InteractionDataset& dataset) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    model::ModelSpec spec;
    spec.kind = config.model.kind;
    spec.vocab_size = dataset.num_items + 1;
    spec.embed_dim = config.model.embed_dim;
    spec.max_len = config.model.max_len;
    spec.ffn_dim = config.model.ffn_dim;
    spec.seed = config.seed;

    ParamList params = model::init_model(spec);
    TrainingOptimizer optimizer(config, params);
    data::TrainBatchStream stream(dataset, spec.max_len, config.batch_size, config.seed);
    const Evaluator validation(spec, dataset, data::Split::Validation, config.eval_ks, config.exclude_history,
                               config.batch_size);
    metrics::ConvergenceTracker tracker(config.convergence);

    RunRecord record;
    const model::Batch first = stream.next();
    const double initial_loss = model::loss(params, spec, first);
    record.rows.push_back({0, initial_loss, validation(params)});
    tracker.observe(0, ndcg_at_target(record.rows.back().validation));
    ParamList best = params;

    bool diverged = false;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t steps_run = 0;
    for (std::size_t step = 1; step <= config.max_steps; ++step) {
        const model::Batch& batch = step == 1 ? first : stream.next();
        const double loss = model::loss_and_backward(params, spec, batch);
        if (!std::isfinite(loss)) {
            diverged = true;
            break;
        }
        try {
            optimizer.step(params);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NonFinite) throw;
            diverged = true;
            break;
        }
        steps_run = step;
        if (!all_finite(params)) {
            diverged = true;
            break;
        }
        loss_sum += loss;
        ++loss_count;

        if (step % config.convergence.eval_every == 0 || step == config.max_steps) {
            record.rows.push_back({step, loss_sum / static_cast<double>(loss_count), validation(params)});
            loss_sum = 0.0;
            loss_count = 0;
            const auto decision = tracker.observe(step, ndcg_at_target(record.rows.back().validation));
            if (tracker.improved_last()) best = params;
            if (decision == metrics::Decision::Stop) break;
        }
    }

    const Evaluator test(spec, dataset, data::Split::Test, config.eval_ks, config.exclude_history, config.batch_size);

    RunSummary& s = record.summary;
    s.optimizer = to_string(config.optimizer);
    s.converged_step = tracker.best_step();
    s.best_val_ndcg10 = tracker.best_metric();
    s.test = test(best);
    s.initial_train_loss = initial_loss;
    s.diverged = diverged;
    s.final_train_loss = diverged ? std::numeric_limits<double>::quiet_NaN() : record.rows.back().train_loss;
    s.steps_run = steps_run;
    s.epochs = static_cast<double>(steps_run) / static_cast<double>(stream.batches_per_epoch());
    s.dataset_fingerprint = dataset.fingerprint();
    s.config = to_json(config);
    s.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (config.save_checkpoint) record.best_params = std::move(best);
    return record;
}

std::string metrics_csv(const RunRecord& record, std::span<const int> ks) {
    std::ostringstream out;
    out << "step,train_loss";
    for (int k : ks) out << ",recall@" << k;
    for (int k : ks) out << ",ndcg@" << k;
    out << '\n';
    for (const auto& row : record.rows) {
        out << row.step << ',' << fmt::format("{}", row.train_loss);
        for (int k : ks) out << ',' << fmt::format("{}", row.validation.recall.at(k));
        for (int k : ks) out << ',' << fmt::format("{}", row.validation.ndcg.at(k));
        out << '\n';
    }
    return out.str();
}

Json summary_to_json(const RunSummary& s, bool include_run_metadata) {
    Json j = {{"optimizer", s.optimizer},
              {"converged_step", s.converged_step},
              {"best_val_ndcg10", s.best_val_ndcg10},
              {"test", eval_to_json(s.test)},
              {"initial_train_loss", number_or_null(s.initial_train_loss)},
              {"final_train_loss", number_or_null(s.final_train_loss)},
              {"diverged", s.diverged},
              {"steps_run", s.steps_run},
              {"epochs", s.epochs},
              {"dataset_fingerprint", fmt::format("{:016x}", s.dataset_fingerprint)}};
    if (include_run_metadata) {
        j["wall_time_seconds"] = s.wall_time_seconds;
        j["config"] = s.config;
    }
    return j;
}

RunSummary summary_from_json(const Json& j) {
    try {
        RunSummary s;
        s.optimizer = j.value("optimizer", std::string{});
        s.converged_step = j.at("converged_step").get<std::size_t>();
        s.best_val_ndcg10 = j.value("best_val_ndcg10", 0.0);
        s.test = eval_from_json(j.at("test"));
        s.initial_train_loss = number_from(j, "initial_train_loss");
        s.final_train_loss = number_from(j, "final_train_loss");
        s.diverged = j.value("diverged", false);
        s.steps_run = j.value("steps_run", std::size_t{0});
        s.epochs = j.value("epochs", 0.0);
        s.dataset_fingerprint = std::stoull(j.at("dataset_fingerprint").get<std::string>(), nullptr, 16);
        s.wall_time_seconds = j.value("wall_time_seconds", 0.0);
        if (j.contains("config")) s.config = j.at("config");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Data, fmt::format("malformed run summary: {}", e.what()));
    } catch (const std::logic_error& e) {
        throw Error(ErrorKind::Data, fmt::format("malformed run summary: {}", e.what()));
    }
}

void write_run_outputs(const RunRecord& record, const RunConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "metrics.csv", std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", (dir / "metrics.csv").string()));
        out << metrics_csv(record, config.eval_ks);
    }
    {
        std::ofstream out(dir / "summary.json", std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", (dir / "summary.json").string()));
        out << summary_to_json(record.summary).dump(2) << '\n';
    }
    if (config.save_checkpoint && record.best_params) write_checkpoint(*record.best_params, dir);
}

void write_checkpoint(const ParamList& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream bin(dir / "checkpoint.bin", std::ios::binary);
    if (!bin) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", (dir / "checkpoint.bin").string()));
    Json manifest = Json::array();
    std::size_t offset = 0;
    for (const auto& p : params) {
        for (double x : p.value.data()) {
            auto bits = std::bit_cast<std::uint64_t>(x);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            char bytes[8];
            std::memcpy(bytes, &bits, 8);
            bin.write(bytes, 8);
        }
        manifest.push_back({{"name", p.name},
                            {"role", to_string(p.role)},
                            {"shape", p.value.shape()},
                            {"offset", offset}});
        offset += p.value.size();
    }
    std::ofstream js(dir / "checkpoint.json", std::ios::binary);
    js << Json{{"dtype", "float64-le"}, {"params", manifest}}.dump(2) << '\n';
}

ParamList read_checkpoint(const std::filesystem::path& dir) {
    std::ifstream js(dir / "checkpoint.json");
    std::ifstream bin(dir / "checkpoint.bin", std::ios::binary);
    if (!js || !bin) throw Error(ErrorKind::Io, fmt::format("no checkpoint in '{}'", dir.string()));
    Json manifest;
    js >> manifest;
    ParamList params;
    for (const auto& entry : manifest.at("params")) {
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        Tensor value = shape.size() == 1 ? Tensor::vector(shape[0]) : Tensor::matrix(shape.at(0), shape.at(1));
        for (double& x : value.data()) {
            char bytes[8];
            if (!bin.read(bytes, 8)) throw Error(ErrorKind::Io, "checkpoint.bin is truncated");
            std::uint64_t bits = 0;
            std::memcpy(&bits, bytes, 8);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            x = std::bit_cast<double>(bits);
        }
        Tensor grad = value;
        grad.fill(0.0);
        params.push_back({entry.at("name").get<std::string>(), parse_param_role(entry.at("role").get<std::string>()),
                          std::move(value), std::move(grad)});
    }
    return params;
}

ComparisonReport compare(const std::vector<RunSummary>& records, const std::vector<std::string>& labels) {
    if (records.size() < 2) throw Error(ErrorKind::InvalidArgument, "compare: need at least two run records");
    if (!labels.empty() && labels.size() != records.size()) {
        throw Error(ErrorKind::InvalidArgument, "compare: one label per record");
    }
    for (const auto& r : records) {
        if (r.dataset_fingerprint != records.front().dataset_fingerprint) {
            throw Error(ErrorKind::InvalidArgument,
                        fmt::format("compare: dataset fingerprints differ ({:016x} vs {:016x})",
                                    records.front().dataset_fingerprint, r.dataset_fingerprint));
        }
    }

    ComparisonReport report;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].optimizer == "adam" || records[i].optimizer == "adamw") {
            report.baseline = i;
            break;
        }
    }
    const auto& base = records[report.baseline];
    auto pct_gain = [](double value, double reference) {
        return reference != 0.0 ? (value - reference) / reference * 100.0 : std::numeric_limits<double>::quiet_NaN();
    };

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        ComparisonRow row;
        row.label = labels.empty() ? fmt::format("{}#{}", r.optimizer, i) : labels[i];
        row.optimizer = r.optimizer;
        row.converged_step = r.converged_step;
        row.test = r.test;
        const auto base_step = static_cast<double>(base.converged_step);
        row.step_reduction_pct = base.converged_step != 0
                                     ? (base_step - static_cast<double>(r.converged_step)) / base_step * 100.0
                                     : std::numeric_limits<double>::quiet_NaN();
        for (const auto& [k, v] : base.test.recall) {
            if (r.test.recall.contains(k)) row.improvement_pct[fmt::format("recall@{}", k)] = pct_gain(r.test.recall.at(k), v);
        }
        for (const auto& [k, v] : base.test.ndcg) {
            if (r.test.ndcg.contains(k)) row.improvement_pct[fmt::format("ndcg@{}", k)] = pct_gain(r.test.ndcg.at(k), v);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

Json to_json(const ComparisonReport& report) {
    Json rows = Json::array();
    for (const auto& r : report.rows) {
        Json improvements = Json::object();
        for (const auto& [key, v] : r.improvement_pct) improvements[key] = number_or_null(v);
        rows.push_back({{"label", r.label},
                        {"optimizer", r.optimizer},
                        {"converged_step", r.converged_step},
                        {"test", eval_to_json(r.test)},
                        {"step_reduction_pct", number_or_null(r.step_reduction_pct)},
                        {"improvement_pct", improvements}});
    }
    return Json{{"baseline", report.baseline}, {"rows", rows}};
}

}  // namespace muonrec::harness
