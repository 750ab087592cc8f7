// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#include "muonrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <fmt/format.h>

namespace muonrec::data {

namespace {

constexpr std::string_view kHeader = "user_id,item_id,timestamp";

std::string_view trim_line(std::string_view line) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.remove_suffix(1);
    return line;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    std::int64_t value = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return value;
}

std::optional<Interaction> parse_record(std::string_view line) {
    const auto first = line.find(',');
    if (first == std::string_view::npos) return std::nullopt;
    const auto second = line.find(',', first + 1);
    if (second == std::string_view::npos || line.find(',', second + 1) != std::string_view::npos) return std::nullopt;
    const auto user = line.substr(0, first);
    const auto item = line.substr(first + 1, second - first - 1);
    const auto ts = parse_int(line.substr(second + 1));
    if (user.empty() || item.empty() || !ts) return std::nullopt;
    return Interaction{std::string(user), std::string(item), *ts};
}

// Sorted distinct keys: numeric order when every key is an integer,
// lexicographic otherwise.
std::vector<std::string> ordered_keys(std::vector<std::string> keys) {
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::vector<std::int64_t> numeric;
    numeric.reserve(keys.size());
    for (const auto& k : keys) {
        auto v = parse_int(k);
        if (!v) return keys;
        numeric.push_back(*v);
    }
    std::vector<std::size_t> idx(keys.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return numeric[a] < numeric[b]; });
    std::vector<std::string> out;
    out.reserve(keys.size());
    for (auto i : idx) out.push_back(std::move(keys[i]));
    return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void place_left_padded(model::Batch& batch, std::size_t row, const std::vector<std::int32_t>& inputs,
                       const std::vector<std::int32_t>& targets) {
    const std::size_t len = batch.max_len;
    const std::size_t offset = len - inputs.size();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        batch.inputs[row * len + offset + i] = inputs[i];
        batch.targets[row * len + offset + i] = targets[i];
    }
}

}  // namespace

IngestResult parse_csv(std::istream& in, std::string_view source) {
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::Data, fmt::format("{}: missing header '{}'", source, kHeader));
    }
    std::string_view header = trim_line(line);
    if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
    if (header != kHeader) {
        throw Error(ErrorKind::Data, fmt::format("{}: expected header '{}', got '{}'", source, kHeader, header));
    }

    IngestResult result;
    std::size_t line_no = 1;
    std::size_t data_lines = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = trim_line(line);
        if (view.empty()) continue;
        ++data_lines;
        if (auto rec = parse_record(view)) {
            result.records.push_back(std::move(*rec));
        } else {
            ++result.malformed;
            result.malformed_lines.push_back(line_no);
        }
    }
    if (result.malformed * 100 > data_lines) {
        throw Error(ErrorKind::Data, fmt::format("{}: {} of {} lines malformed (limit 1%), first at line {}", source,
                                                 result.malformed, data_lines, result.malformed_lines.front()));
    }
    return result;
}

IngestResult ingest_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open '{}'", path.string()));
    return parse_csv(in, path.string());
}

std::vector<Interaction> five_core_filter(std::vector<Interaction> records, std::size_t min_count) {
    for (;;) {
        std::unordered_map<std::string_view, std::size_t> users;
        std::unordered_map<std::string_view, std::size_t> items;
        for (const auto& r : records) {
            ++users[r.user];
            ++items[r.item];
        }
        std::vector<Interaction> kept;
        kept.reserve(records.size());
        for (const auto& r : records) {
            if (users[r.user] >= min_count && items[r.item] >= min_count) kept.push_back(r);
        }
        if (kept.size() == records.size()) return records;
        records = std::move(kept);
    }
}

InteractionDataset leave_one_out_split(const std::vector<Interaction>& records) {
    if (records.empty()) throw Error(ErrorKind::Data, "leave_one_out_split: no interactions");

    std::map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < records.size(); ++i) by_user[records[i].user].push_back(i);

    std::vector<std::string> user_keys;
    std::vector<std::string> item_keys;
    for (auto& [user, idx] : by_user) {
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return records[a].timestamp < records[b].timestamp; });
        if (idx.size() < 3) continue;
        user_keys.push_back(user);
        for (auto i : idx) item_keys.push_back(records[i].item);
    }
    if (user_keys.empty()) throw Error(ErrorKind::Data, "leave_one_out_split: no user has 3 or more interactions");

    user_keys = ordered_keys(std::move(user_keys));
    item_keys = ordered_keys(std::move(item_keys));
    std::unordered_map<std::string_view, std::int32_t> item_id;
    for (std::size_t i = 0; i < item_keys.size(); ++i) item_id[item_keys[i]] = static_cast<std::int32_t>(i + 1);

    InteractionDataset ds;
    ds.num_users = user_keys.size();
    ds.num_items = item_keys.size();
    for (const auto& user : user_keys) {
        std::vector<std::int32_t> seq;
        for (auto i : by_user.at(user)) seq.push_back(item_id.at(records[i].item));
        UserSplit split;
        split.test = seq[seq.size() - 1];
        split.validation = seq[seq.size() - 2];
        split.train.assign(seq.begin(), seq.end() - 2);
        ds.sequences.push_back(std::move(seq));
        ds.splits.push_back(std::move(split));
    }
    return ds;
}

std::size_t InteractionDataset::num_interactions() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
}

std::uint64_t InteractionDataset::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    mix(num_users);
    mix(num_items);
    for (const auto& s : sequences) {
        mix(s.size());
        for (auto id : s) mix(static_cast<std::uint64_t>(id));
    }
    return h;
}

void write_csv(const InteractionDataset& dataset, std::ostream& out) {
    out << kHeader << '\n';
    for (std::size_t u = 0; u < dataset.sequences.size(); ++u) {
        const auto& seq = dataset.sequences[u];
        for (std::size_t k = 0; k < seq.size(); ++k) out << (u + 1) << ',' << seq[k] << ',' << k << '\n';
    }
}

void write_csv(const InteractionDataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", path.string()));
    write_csv(dataset, out);
    if (!out) throw Error(ErrorKind::Io, fmt::format("failed writing '{}'", path.string()));
}

void SynthParams::validate() const {
    if (num_users == 0 || num_items == 0 || factors == 0) {
        throw Error(ErrorKind::Config, "synthetic: num_users, num_items and factors must be positive");
    }
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorKind::Config, fmt::format("synthetic: temperature must be finite and >= 0, got {}", temperature));
    }
    if (min_len < 5 || max_len < min_len) {
        throw Error(ErrorKind::Config,
                    fmt::format("synthetic: need 5 <= min_len <= max_len, got [{}, {}]", min_len, max_len));
    }
}

SyntheticWorld::SyntheticWorld(const SynthParams& params) : m_params(params) {
    params.validate();
    std::mt19937_64 rng(params.seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(params.factors)));
    m_users.resize(params.num_users * params.factors);
    m_items.resize(params.num_items * params.factors);
    for (double& x : m_users) x = normal(rng);
    for (double& x : m_items) x = normal(rng);
}

std::vector<double> SyntheticWorld::next_item_probabilities(std::size_t user,
                                                            std::optional<std::size_t> previous) const {
    const std::size_t k = m_params.factors;
    const double* u = &m_users[user * k];
    const double* prev = previous ? &m_items[*previous * k] : nullptr;
    std::vector<double> logits(m_params.num_items);
    for (std::size_t j = 0; j < m_params.num_items; ++j) {
        const double* v = &m_items[j * k];
        double s = 0.0;
        for (std::size_t f = 0; f < k; ++f) s += (prev != nullptr ? u[f] + prev[f] : u[f]) * v[f];
        logits[j] = m_params.temperature * s;
    }
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& x : logits) {
        x = std::exp(x - max_logit);
        total += x;
    }
    for (double& x : logits) x /= total;
    return logits;
}

std::size_t SyntheticWorld::sample_next_item(std::size_t user, std::optional<std::size_t> previous,
                                             std::mt19937_64& rng) const {
    const auto probs = next_item_probabilities(user, previous);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const double draw = uniform(rng);
    double cumulative = 0.0;
    for (std::size_t j = 0; j < probs.size(); ++j) {
        cumulative += probs[j];
        if (draw < cumulative) return j;
    }
    return probs.size() - 1;
}

InteractionDataset synth_generate(const SynthParams& params) {
    const SyntheticWorld world(params);
    std::mt19937_64 rng(splitmix64(params.seed));
    std::uniform_int_distribution<std::size_t> length(params.min_len, params.max_len);

    std::vector<Interaction> records;
    for (std::size_t u = 0; u < params.num_users; ++u) {
        const std::size_t n = length(rng);
        std::optional<std::size_t> prev;
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t item = world.sample_next_item(u, prev, rng);
            records.push_back({std::to_string(u + 1), std::to_string(item + 1), static_cast<std::int64_t>(t)});
            prev = item;
        }
    }
    return leave_one_out_split(records);
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(epoch));
}

std::vector<std::size_t> batch_user_order(const InteractionDataset& dataset, Split split, std::uint64_t seed) {
    std::vector<std::size_t> order(dataset.num_users);
    std::iota(order.begin(), order.end(), 0);
    if (split == Split::Train) {
        std::mt19937_64 rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

std::vector<model::Batch> make_batches(const InteractionDataset& dataset, std::size_t max_len, std::size_t batch_size,
                                       Split split, std::uint64_t seed) {
    if (max_len == 0 || batch_size == 0) throw Error(ErrorKind::Config, "make_batches: max_len and batch_size must be positive");
    const auto order = batch_user_order(dataset, split, seed);

    std::vector<model::Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t rows = std::min(batch_size, order.size() - start);
        model::Batch batch(rows, max_len);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto& s = dataset.splits[order[start + r]];
            std::vector<std::int32_t> inputs;
            std::vector<std::int32_t> targets;
            if (split == Split::Train) {
                const std::size_t pairs = s.train.size() - 1;
                const std::size_t keep = std::min(pairs, max_len);
                for (std::size_t i = pairs - keep; i < pairs; ++i) {
                    inputs.push_back(s.train[i]);
                    targets.push_back(s.train[i + 1]);
                }
            } else {
                std::vector<std::int32_t> context = s.train;
                if (split == Split::Test) context.push_back(s.validation);
                const std::size_t keep = std::min(context.size(), max_len);
                inputs.assign(context.end() - static_cast<std::ptrdiff_t>(keep), context.end());
                targets.assign(keep, 0);
                targets.back() = split == Split::Test ? s.test : s.validation;
            }
            place_left_padded(batch, r, inputs, targets);
        }
        batches.push_back(std::move(batch));
    }
    return batches;
}

TrainBatchStream::TrainBatchStream(const InteractionDataset& dataset, std::size_t max_len, std::size_t batch_size,
                                   std::uint64_t seed) :
    m_dataset(&dataset), m_max_len(max_len), m_batch_size(batch_size), m_seed(seed) {
    m_batches = make_batches(*m_dataset, m_max_len, m_batch_size, Split::Train, epoch_seed(m_seed, m_epoch));
}

std::size_t TrainBatchStream::batches_per_epoch() const {
    return m_batches.size();
}

void TrainBatchStream::refill() {
    ++m_epoch;
    m_cursor = 0;
    m_batches = make_batches(*m_dataset, m_max_len, m_batch_size, Split::Train, epoch_seed(m_seed, m_epoch));
}

const model::Batch& TrainBatchStream::next() {
    if (m_cursor == m_batches.size()) refill();
    return m_batches[m_cursor++];
}

}  // namespace muonrec::data
