#pragma once

#include <cstdint>
#include <vector>

#include "popgo/dataset.hpp"
#include "popgo/model.hpp"

namespace popgo {

// Popularity-only clone of the target architecture. Its embedding rows are
// indexed by frequency category, not by entity id: every user with the same
// d_u gathers the same row, and likewise for items. The sigmoid-inner score
// of the gathered (and, for LightGCN, propagated) representations is the
// interaction-wise shortcut degree beta in (0, 1).
struct ShortcutModel {
    Model inner;               // user rows = |user vocab|, item rows = |item vocab|
    PopularityTable pops;
    std::vector<int> user_cat;  // per-entity category of d_u
    std::vector<int> item_cat;
    bool frozen = false;

    // per-entity representations; rebuilt by refresh_representations()
    EmbeddingTable user_reps;
    EmbeddingTable item_reps;
};

// Maps a frequency to its category, falling back to the nearest observed
// frequency (ties toward the smaller one) when the value was never seen in
// training.
int frequency_category(const std::vector<int>& freq_values, int freq);

ShortcutModel build_shortcut_model(Arch arch, const PopularityTable& pops,
                                   int n_users, int n_items, int dim, std::uint64_t seed,
                                   const NormalizedAdjacency* graph = nullptr,
                                   int n_layers = 0);

// Gathers each entity's category row and, for LightGCN, propagates the
// gathered tables over the train graph. Must be called after any mutation of
// the inner tables; build and freeze call it themselves.
void refresh_representations(ShortcutModel& sm);

double shortcut_degree(const ShortcutModel& sm, int u, int i);

void freeze(ShortcutModel& sm);

// FNV-1a over the raw bytes of both embedding tables.
std::uint64_t param_hash(const ShortcutModel& sm);
std::uint64_t param_hash(const Model& m);

}  // namespace popgo
