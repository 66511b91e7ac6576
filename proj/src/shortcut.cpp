#include "popgo/shortcut.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "popgo/hashing.hpp"

namespace popgo {

int frequency_category(const std::vector<int>& freq_values, int freq) {
    if (freq_values.empty()) throw std::logic_error("empty frequency vocabulary");
    auto it = std::lower_bound(freq_values.begin(), freq_values.end(), freq);
    if (it != freq_values.end() && *it == freq) {
        return static_cast<int>(it - freq_values.begin());
    }
    // nearest observed frequency; ties toward the smaller value
    if (it == freq_values.begin()) return 0;
    if (it == freq_values.end()) return static_cast<int>(freq_values.size()) - 1;
    int hi = static_cast<int>(it - freq_values.begin());
    int lo = hi - 1;
    return (freq - freq_values[lo] <= freq_values[hi] - freq) ? lo : hi;
}

ShortcutModel build_shortcut_model(Arch arch, const PopularityTable& pops,
                                   int n_users, int n_items, int dim, std::uint64_t seed,
                                   const NormalizedAdjacency* graph, int n_layers) {
    ShortcutModel sm;
    sm.pops = pops;
    sm.inner = init_model(static_cast<int>(pops.user_freq_values.size()),
                          static_cast<int>(pops.item_freq_values.size()),
                          dim, arch, seed, ScoreKind::SigmoidInner,
                          arch == Arch::LightGCN ? n_layers : 0);
    if (arch == Arch::LightGCN) {
        if (graph == nullptr) {
            throw std::invalid_argument("LightGCN shortcut model needs the train adjacency");
        }
        sm.inner.graph = *graph;
    }
    sm.user_cat.resize(n_users);
    sm.item_cat.resize(n_items);
    for (int u = 0; u < n_users; ++u) {
        sm.user_cat[u] = frequency_category(pops.user_freq_values, pops.user_pop[u]);
    }
    for (int i = 0; i < n_items; ++i) {
        sm.item_cat[i] = frequency_category(pops.item_freq_values, pops.item_pop[i]);
    }
    refresh_representations(sm);
    return sm;
}

void refresh_representations(ShortcutModel& sm) {
    const int dim = sm.inner.user_table.dim;
    const int n_users = static_cast<int>(sm.user_cat.size());
    const int n_items = static_cast<int>(sm.item_cat.size());
    EmbeddingTable gathered_u(n_users, dim), gathered_i(n_items, dim);
    for (int u = 0; u < n_users; ++u) {
        auto src = sm.inner.user_table.row(sm.user_cat[u]);
        std::copy(src.begin(), src.end(), gathered_u.row(u).begin());
    }
    for (int i = 0; i < n_items; ++i) {
        auto src = sm.inner.item_table.row(sm.item_cat[i]);
        std::copy(src.begin(), src.end(), gathered_i.row(i).begin());
    }
    if (sm.inner.arch == Arch::LightGCN && sm.inner.n_layers > 0) {
        // entities share category rows but occupy distinct graph nodes
        propagate_layers(sm.inner.graph, sm.inner.n_layers, gathered_u, gathered_i,
                         sm.user_reps, sm.item_reps);
    } else {
        sm.user_reps = std::move(gathered_u);
        sm.item_reps = std::move(gathered_i);
    }
}

double shortcut_degree(const ShortcutModel& sm, int u, int i) {
    if (u < 0 || u >= sm.user_reps.rows || i < 0 || i >= sm.item_reps.rows) {
        throw std::out_of_range("shortcut_degree: index out of range");
    }
    return score_pair(ScoreKind::SigmoidInner, sm.user_reps.row(u), sm.item_reps.row(i));
}

void freeze(ShortcutModel& sm) {
    refresh_representations(sm);
    sm.frozen = true;
}

std::uint64_t param_hash(const Model& m) {
    std::uint64_t h = fnv1a64(m.user_table.values.data(),
                              m.user_table.values.size() * sizeof(double));
    return fnv1a64(m.item_table.values.data(),
                   m.item_table.values.size() * sizeof(double), h);
}

std::uint64_t param_hash(const ShortcutModel& sm) {
    return param_hash(sm.inner);
}

}  // namespace popgo
