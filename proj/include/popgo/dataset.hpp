#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

namespace popgo {

constexpr std::int64_t kNoTimestamp = std::numeric_limits<std::int64_t>::min();

struct Interaction {
    int user = 0;
    int item = 0;
    std::int64_t ts = kNoTimestamp;

    bool has_timestamp() const { return ts != kNoTimestamp; }
    friend bool operator==(const Interaction& a, const Interaction& b) {
        return a.user == b.user && a.item == b.item && a.ts == b.ts;
    }
};

// Indexed implicit-feedback log. Indices are dense and 0-based, assigned in
// first-seen order; (user, item) pairs are unique.
struct InteractionDataset {
    int n_users = 0;
    int n_items = 0;
    std::vector<Interaction> interactions;
    std::vector<std::vector<int>> user_items;  // per user, sorted ascending
    std::vector<std::string> user_tokens;
    std::vector<std::string> item_tokens;
    std::unordered_map<std::string, int> user_ids;
    std::unordered_map<std::string, int> item_ids;

    bool has_timestamps() const;
};

enum class InteractionFormat { Tsv };

enum class SplitKind { IdOod, Temporal };

struct DatasetSplits {
    std::vector<Interaction> train;
    std::vector<Interaction> id_valid;
    std::vector<Interaction> id_test;
    std::vector<Interaction> ood_test;  // empty for temporal splits
    SplitKind kind = SplitKind::IdOod;
    std::uint64_t seed = 0;
};

// Training-set popularity counts plus the frequency -> category vocabularies.
// Categories index the shortcut model's embedding rows: every distinct
// observed frequency gets one row, so two entities with the same count share
// a representation.
struct PopularityTable {
    std::vector<int> user_pop;  // d_u
    std::vector<int> item_pop;  // d_i
    std::vector<int> user_freq_values;  // ascending distinct counts; position = category
    std::vector<int> item_freq_values;
    std::unordered_map<int, int> user_freq_vocab;  // count -> category
    std::unordered_map<int, int> item_freq_vocab;
};

// --- ingestion ---------------------------------------------------------

// One interaction per line: user<TAB>item[<TAB>timestamp]. '#' starts a
// comment line. Duplicate (user, item) pairs are collapsed, keeping the
// earliest timestamp. Throws std::runtime_error with the offending line
// number on malformed input, and on an empty dataset.
InteractionDataset load_interactions(const std::string& path,
                                     InteractionFormat format = InteractionFormat::Tsv);
InteractionDataset parse_interactions(std::istream& in, const std::string& origin);

// Iteratively removes users and items with fewer than k interactions until
// fixpoint. Surviving indices are re-densified in first-seen order. The
// result may be empty.
InteractionDataset apply_k_core(const InteractionDataset& ds, int k);

PopularityTable build_popularity_table(const std::vector<Interaction>& train,
                                       int n_users, int n_items);

// OOD-first split: round(0.2*N) interactions are drawn with a per-item quota
// (uniform w.r.t. items), then the remainder is split uniformly at random
// into round(0.5*N) train / round(0.1*N) validation / rest ID test.
// Deterministic given seed.
DatasetSplits split_id_ood(const InteractionDataset& ds, std::uint64_t seed);

// Global sort by (timestamp, user, item), then a 70/10/20 slice. Requires
// timestamps on every interaction.
DatasetSplits split_temporal(const InteractionDataset& ds,
                             double train_frac = 0.7, double valid_frac = 0.1);

// D_KL(p || uniform) of the empirical item distribution, natural log.
// Zero iff the list covers all n_items items exactly uniformly.
double kl_to_uniform(const std::vector<Interaction>& interactions, int n_items);

// --- split persistence --------------------------------------------------

// Writes train.tsv / id_valid.tsv / id_test.tsv / ood_test.tsv (token-level)
// plus split_manifest.txt with seed, fractions, counts and per-split KL.
void save_splits(const std::string& dir, const InteractionDataset& ds,
                 const DatasetSplits& splits);

// Token-level dump of a whole dataset in the load_interactions format.
void save_interactions(const std::string& path, const InteractionDataset& ds);

struct LoadedSplits {
    InteractionDataset dataset;  // union of the four files
    DatasetSplits splits;
};
LoadedSplits load_splits(const std::string& dir);

// --- helpers ------------------------------------------------------------

std::vector<std::vector<int>> adjacency_from(const std::vector<Interaction>& interactions,
                                             int n_users);

}  // namespace popgo
