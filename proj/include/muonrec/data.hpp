// SPDX-FileCopyrightText: © 2026 The muonrec authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "muonrec/model.hpp"

namespace muonrec::data {

struct Interaction {
    std::string user;
    std::string item;
    std::int64_t timestamp = 0;

    bool operator==(const Interaction&) const = default;
};

struct IngestResult {
    std::vector<Interaction> records;
    std::size_t malformed = 0;
    std::vector<std::size_t> malformed_lines;  // 1-based line numbers
};

/// Reads `user_id,item_id,timestamp` CSV. Fails on a missing header or when
/// more than 1% of the data lines are malformed.
IngestResult ingest_csv(const std::filesystem::path& path);
IngestResult parse_csv(std::istream& in, std::string_view source = "<stream>");

/// Iteratively drops users and items with fewer than `min_count`
/// interactions until nothing changes. Keeps the input order.
std::vector<Interaction> five_core_filter(std::vector<Interaction> records, std::size_t min_count = 5);

struct UserSplit {
    std::vector<std::int32_t> train;
    std::int32_t validation = 0;
    std::int32_t test = 0;

    bool operator==(const UserSplit&) const = default;
};

/// Chronological per-user sequences over dense item ids 1..num_items
/// (0 is padding) and their leave-one-out splits.
struct InteractionDataset {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::vector<std::vector<std::int32_t>> sequences;
    std::vector<UserSplit> splits;

    std::size_t num_interactions() const;
    std::uint64_t fingerprint() const;

    bool operator==(const InteractionDataset&) const = default;
};

/// Sorts each user's records by timestamp (stable, so file order breaks
/// ties), holds out the last item for test and the second-to-last for
/// validation, and re-indexes items densely. Users and items are ordered
/// numerically when every key is an integer, lexicographically otherwise.
InteractionDataset leave_one_out_split(const std::vector<Interaction>& records);

/// Writes one row per interaction with user ids 1..num_users, dense item ids
/// and the in-sequence position as timestamp. Ingesting the file and
/// splitting it again reproduces the dataset.
void write_csv(const InteractionDataset& dataset, const std::filesystem::path& path);
void write_csv(const InteractionDataset& dataset, std::ostream& out);

struct SynthParams {
    std::size_t num_users = 2000;
    std::size_t num_items = 3000;
    std::size_t factors = 16;
    double temperature = 3.0;
    std::size_t min_len = 8;
    std::size_t max_len = 40;
    std::uint64_t seed = 42;

    void validate() const;
    bool operator==(const SynthParams&) const = default;
};

/// Latent user/item factors driving synthetic sequences.
class SyntheticWorld {
public:
    explicit SyntheticWorld(const SynthParams& params);

    /// Probabilities over items 0..num_items-1 (raw ids, before re-indexing).
    /// With no previous item the first-item distribution is returned.
    std::vector<double> next_item_probabilities(std::size_t user, std::optional<std::size_t> previous) const;

    std::size_t sample_next_item(std::size_t user, std::optional<std::size_t> previous, std::mt19937_64& rng) const;

    const SynthParams& params() const { return m_params; }

private:
    SynthParams m_params;
    std::vector<double> m_users;  // num_users x factors
    std::vector<double> m_items;  // num_items x factors
};

/// Generates sequences from a SyntheticWorld and splits them leave-one-out.
/// Items that are never drawn are dropped by the dense re-indexing.
InteractionDataset synth_generate(const SynthParams& params);

enum class Split { Train, Validation, Test };

/// One pass over the users of `split`. Train batches use a seeded
/// permutation of the users and supervise every position of the
/// (truncated, left-padded) train prefix. Validation and test batches keep
/// user order and supervise exactly the last slot with the held-out item.
std::vector<model::Batch> make_batches(const InteractionDataset& dataset, std::size_t max_len, std::size_t batch_size,
                                       Split split, std::uint64_t seed);

/// Users covered by each row of make_batches(..., split, ...) in the same order.
std::vector<std::size_t> batch_user_order(const InteractionDataset& dataset, Split split, std::uint64_t seed);

/// Endless stream of train batches; epoch e is shuffled with a seed derived
/// from (seed, e).
class TrainBatchStream {
public:
    TrainBatchStream(const InteractionDataset& dataset, std::size_t max_len, std::size_t batch_size,
                     std::uint64_t seed);

    const model::Batch& next();
    std::size_t epoch() const { return m_epoch; }
    std::size_t batches_per_epoch() const;

private:
    void refill();

    const InteractionDataset* m_dataset;
    std::size_t m_max_len;
    std::size_t m_batch_size;
    std::uint64_t m_seed;
    std::size_t m_epoch = 0;
    std::size_t m_cursor = 0;
    std::vector<model::Batch> m_batches;
};

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

}  // namespace muonrec::data
