#include "popgo/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "popgo/rng.hpp"

namespace popgo {

namespace {

struct TokenInteraction {
    std::string user;
    std::string item;
    std::int64_t ts = kNoTimestamp;
};

// Assigns dense ids in first-seen order and deduplicates (user, item) pairs,
// keeping the earliest timestamp seen for the pair.
InteractionDataset build_dataset(const std::vector<TokenInteraction>& rows,
                                 const std::string& origin) {
    InteractionDataset ds;
    std::map<std::pair<int, int>, std::size_t> seen;  // pair -> position
    for (const auto& row : rows) {
        auto [uit, u_inserted] = ds.user_ids.try_emplace(
            row.user, static_cast<int>(ds.user_tokens.size()));
        if (u_inserted) ds.user_tokens.push_back(row.user);
        auto [iit, i_inserted] = ds.item_ids.try_emplace(
            row.item, static_cast<int>(ds.item_tokens.size()));
        if (i_inserted) ds.item_tokens.push_back(row.item);
        int u = uit->second;
        int i = iit->second;
        auto key = std::make_pair(u, i);
        auto found = seen.find(key);
        if (found == seen.end()) {
            seen.emplace(key, ds.interactions.size());
            ds.interactions.push_back({u, i, row.ts});
        } else {
            Interaction& kept = ds.interactions[found->second];
            if (row.ts != kNoTimestamp &&
                (kept.ts == kNoTimestamp || row.ts < kept.ts)) {
                kept.ts = row.ts;
            }
        }
    }
    if (ds.interactions.empty()) {
        throw std::runtime_error(origin + ": empty dataset");
    }
    ds.n_users = static_cast<int>(ds.user_tokens.size());
    ds.n_items = static_cast<int>(ds.item_tokens.size());
    ds.user_items = adjacency_from(ds.interactions, ds.n_users);
    return ds;
}

std::vector<TokenInteraction> read_tsv_rows(std::istream& in, const std::string& origin) {
    std::vector<TokenInteraction> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos || tab1 == 0) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected user<TAB>item[<TAB>timestamp]");
        }
        std::size_t tab2 = line.find('\t', tab1 + 1);
        TokenInteraction row;
        row.user = line.substr(0, tab1);
        row.item = (tab2 == std::string::npos)
                       ? line.substr(tab1 + 1)
                       : line.substr(tab1 + 1, tab2 - tab1 - 1);
        if (row.item.empty()) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": empty item token");
        }
        if (tab2 != std::string::npos) {
            std::string ts_str = line.substr(tab2 + 1);
            try {
                std::size_t used = 0;
                row.ts = std::stoll(ts_str, &used);
                if (used != ts_str.size()) throw std::invalid_argument(ts_str);
            } catch (const std::exception&) {
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": bad timestamp '" + ts_str + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_split_file(const std::string& path, const InteractionDataset& ds,
                      const std::vector<Interaction>& list) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const Interaction& x : list) {
        out << ds.user_tokens[x.user] << '\t' << ds.item_tokens[x.item];
        if (x.has_timestamp()) out << '\t' << x.ts;
        out << '\n';
    }
}

}  // namespace

bool InteractionDataset::has_timestamps() const {
    for (const Interaction& x : interactions) {
        if (!x.has_timestamp()) return false;
    }
    return !interactions.empty();
}

std::vector<std::vector<int>> adjacency_from(const std::vector<Interaction>& interactions,
                                             int n_users) {
    std::vector<std::vector<int>> adj(n_users);
    for (const Interaction& x : interactions) adj[x.user].push_back(x.item);
    for (auto& items : adj) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
    return adj;
}

InteractionDataset parse_interactions(std::istream& in, const std::string& origin) {
    return build_dataset(read_tsv_rows(in, origin), origin);
}

InteractionDataset load_interactions(const std::string& path, InteractionFormat format) {
    (void)format;  // Tsv is the only wire format
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_interactions(in, path);
}

InteractionDataset apply_k_core(const InteractionDataset& ds, int k) {
    if (k < 1) throw std::invalid_argument("k-core requires k >= 1");
    std::vector<int> user_deg(ds.n_users, 0), item_deg(ds.n_items, 0);
    for (const Interaction& x : ds.interactions) {
        ++user_deg[x.user];
        ++item_deg[x.item];
    }
    std::vector<char> user_dead(ds.n_users, 0), item_dead(ds.n_items, 0);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int u = 0; u < ds.n_users; ++u) {
            if (!user_dead[u] && user_deg[u] < k) {
                user_dead[u] = 1;
                changed = true;
            }
        }
        for (int i = 0; i < ds.n_items; ++i) {
            if (!item_dead[i] && item_deg[i] < k) {
                item_dead[i] = 1;
                changed = true;
            }
        }
        if (!changed) break;
        std::fill(user_deg.begin(), user_deg.end(), 0);
        std::fill(item_deg.begin(), item_deg.end(), 0);
        for (const Interaction& x : ds.interactions) {
            if (user_dead[x.user] || item_dead[x.item]) continue;
            ++user_deg[x.user];
            ++item_deg[x.item];
        }
    }

    InteractionDataset out;
    for (const Interaction& x : ds.interactions) {
        if (user_dead[x.user] || item_dead[x.item]) continue;
        const std::string& ut = ds.user_tokens[x.user];
        const std::string& it = ds.item_tokens[x.item];
        auto [uit, u_new] = out.user_ids.try_emplace(ut, static_cast<int>(out.user_tokens.size()));
        if (u_new) out.user_tokens.push_back(ut);
        auto [iit, i_new] = out.item_ids.try_emplace(it, static_cast<int>(out.item_tokens.size()));
        if (i_new) out.item_tokens.push_back(it);
        out.interactions.push_back({uit->second, iit->second, x.ts});
    }
    out.n_users = static_cast<int>(out.user_tokens.size());
    out.n_items = static_cast<int>(out.item_tokens.size());
    out.user_items = adjacency_from(out.interactions, out.n_users);
    return out;
}

PopularityTable build_popularity_table(const std::vector<Interaction>& train,
                                       int n_users, int n_items) {
    PopularityTable pt;
    pt.user_pop.assign(n_users, 0);
    pt.item_pop.assign(n_items, 0);
    for (const Interaction& x : train) {
        if (x.user < 0 || x.user >= n_users || x.item < 0 || x.item >= n_items) {
            throw std::out_of_range("interaction index outside dataset bounds");
        }
        ++pt.user_pop[x.user];
        ++pt.item_pop[x.item];
    }
    auto make_vocab = [](const std::vector<int>& pop, std::vector<int>& values,
                         std::unordered_map<int, int>& vocab) {
        values = pop;
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t c = 0; c < values.size(); ++c) {
            vocab.emplace(values[c], static_cast<int>(c));
        }
    };
    make_vocab(pt.user_pop, pt.user_freq_values, pt.user_freq_vocab);
    make_vocab(pt.item_pop, pt.item_freq_values, pt.item_freq_vocab);
    return pt;
}

DatasetSplits split_id_ood(const InteractionDataset& ds, std::uint64_t seed) {
    const std::size_t n = ds.interactions.size();
    const int n_items = ds.n_items;
    Rng rng(seed);

    const std::size_t t_ood = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));
    std::vector<std::size_t> quota(n_items, t_ood / n_items);
    std::size_t rem = t_ood - (t_ood / n_items) * n_items;
    {
        std::vector<int> items(n_items);
        for (int i = 0; i < n_items; ++i) items[i] = i;
        rng.shuffle(items);
        for (std::size_t r = 0; r < rem; ++r) ++quota[items[r]];
    }

    // interaction positions grouped by item, each group shuffled
    std::vector<std::vector<std::size_t>> by_item(n_items);
    for (std::size_t p = 0; p < n; ++p) by_item[ds.interactions[p].item].push_back(p);
    for (auto& group : by_item) rng.shuffle(group);

    std::vector<std::size_t> taken(n_items, 0);
    std::size_t shortfall = 0;
    for (int i = 0; i < n_items; ++i) {
        taken[i] = std::min(quota[i], by_item[i].size());
        shortfall += quota[i] - taken[i];
    }
    // Items short of their quota push the deficit onto items that still have
    // untaken interactions, one uniform draw at a time.
    std::vector<int> spare;
    for (int i = 0; i < n_items; ++i) {
        if (by_item[i].size() > taken[i]) spare.push_back(i);
    }
    while (shortfall > 0) {
        if (spare.empty()) break;  // unreachable: t_ood <= n
        std::size_t pick = rng.uniform_index(spare.size());
        int i = spare[pick];
        ++taken[i];
        --shortfall;
        if (taken[i] == by_item[i].size()) {
            spare[pick] = spare.back();
            spare.pop_back();
        }
    }

    std::vector<char> in_ood(n, 0);
    DatasetSplits out;
    out.kind = SplitKind::IdOod;
    out.seed = seed;
    for (int i = 0; i < n_items; ++i) {
        for (std::size_t j = 0; j < taken[i]; ++j) in_ood[by_item[i][j]] = 1;
    }
    for (std::size_t p = 0; p < n; ++p) {
        if (in_ood[p]) out.ood_test.push_back(ds.interactions[p]);
    }

    std::vector<std::size_t> rest;
    rest.reserve(n - out.ood_test.size());
    for (std::size_t p = 0; p < n; ++p) {
        if (!in_ood[p]) rest.push_back(p);
    }
    rng.shuffle(rest);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.5 * static_cast<double>(n)));
    const std::size_t n_valid = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    for (std::size_t idx = 0; idx < rest.size(); ++idx) {
        const Interaction& x = ds.interactions[rest[idx]];
        if (idx < n_train) {
            out.train.push_back(x);
        } else if (idx < n_train + n_valid) {
            out.id_valid.push_back(x);
        } else {
            out.id_test.push_back(x);
        }
    }
    return out;
}

DatasetSplits split_temporal(const InteractionDataset& ds,
                             double train_frac, double valid_frac) {
    for (std::size_t p = 0; p < ds.interactions.size(); ++p) {
        if (!ds.interactions[p].has_timestamp()) {
            const Interaction& x = ds.interactions[p];
            throw std::runtime_error("temporal split: interaction (" +
                                     ds.user_tokens[x.user] + ", " + ds.item_tokens[x.item] +
                                     ") has no timestamp");
        }
    }
    std::vector<Interaction> sorted = ds.interactions;
    // timestamp ties break on tokens, not indices: index assignment depends
    // on input order and would make the slice depend on file layout
    std::sort(sorted.begin(), sorted.end(), [&ds](const Interaction& a, const Interaction& b) {
        if (a.ts != b.ts) return a.ts < b.ts;
        if (ds.user_tokens[a.user] != ds.user_tokens[b.user]) {
            return ds.user_tokens[a.user] < ds.user_tokens[b.user];
        }
        return ds.item_tokens[a.item] < ds.item_tokens[b.item];
    });
    const std::size_t n = sorted.size();
    const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const std::size_t n_valid = static_cast<std::size_t>(std::llround(valid_frac * static_cast<double>(n)));
    DatasetSplits out;
    out.kind = SplitKind::Temporal;
    for (std::size_t p = 0; p < n; ++p) {
        if (p < n_train) {
            out.train.push_back(sorted[p]);
        } else if (p < n_train + n_valid) {
            out.id_valid.push_back(sorted[p]);
        } else {
            out.id_test.push_back(sorted[p]);
        }
    }
    return out;
}

double kl_to_uniform(const std::vector<Interaction>& interactions, int n_items) {
    if (interactions.empty()) {
        throw std::invalid_argument("kl_to_uniform: empty interaction list");
    }
    std::vector<std::size_t> counts(n_items, 0);
    for (const Interaction& x : interactions) ++counts[x.item];
    const double total = static_cast<double>(interactions.size());
    double kl = 0.0;
    for (int i = 0; i < n_items; ++i) {
        if (counts[i] == 0) continue;
        double p = static_cast<double>(counts[i]) / total;
        kl += p * std::log(p * static_cast<double>(n_items));
    }
    return std::max(kl, 0.0);
}

void save_splits(const std::string& dir, const InteractionDataset& ds,
                 const DatasetSplits& splits) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    write_split_file(dir + "/train.tsv", ds, splits.train);
    write_split_file(dir + "/id_valid.tsv", ds, splits.id_valid);
    write_split_file(dir + "/id_test.tsv", ds, splits.id_test);
    write_split_file(dir + "/ood_test.tsv", ds, splits.ood_test);

    std::ofstream man(dir + "/split_manifest.txt");
    if (!man) throw std::runtime_error("cannot write " + dir + "/split_manifest.txt");
    const std::size_t n = ds.interactions.size();
    man << "split_kind=" << (splits.kind == SplitKind::IdOod ? "id_ood" : "temporal") << '\n';
    man << "seed=" << splits.seed << '\n';
    man << "fractions=" << (splits.kind == SplitKind::IdOod ? "0.5/0.1/0.2/0.2" : "0.7/0.1/0.2") << '\n';
    man << "n_users=" << ds.n_users << '\n';
    man << "n_items=" << ds.n_items << '\n';
    man << "n_interactions=" << n << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.5f",
                  static_cast<double>(n) / (static_cast<double>(ds.n_users) * ds.n_items));
    man << "sparsity=" << buf << '\n';
    auto block = [&](const char* name, const std::vector<Interaction>& list) {
        man << "n_" << name << '=' << list.size() << '\n';
        if (!list.empty()) {
            std::snprintf(buf, sizeof(buf), "%.3f", kl_to_uniform(list, ds.n_items));
            man << "kl_" << name << '=' << buf << '\n';
        }
    };
    block("train", splits.train);
    block("id_valid", splits.id_valid);
    block("id_test", splits.id_test);
    block("ood_test", splits.ood_test);
}

void save_interactions(const std::string& path, const InteractionDataset& ds) {
    write_split_file(path, ds, ds.interactions);
}

LoadedSplits load_splits(const std::string& dir) {
    struct Part {
        const char* file;
        std::vector<TokenInteraction> rows;
    };
    Part parts[4] = {{"train.tsv", {}}, {"id_valid.tsv", {}}, {"id_test.tsv", {}}, {"ood_test.tsv", {}}};
    std::vector<TokenInteraction> all;
    for (Part& part : parts) {
        std::string path = dir + "/" + part.file;
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open " + path);
        part.rows = read_tsv_rows(in, path);
        all.insert(all.end(), part.rows.begin(), part.rows.end());
    }
    LoadedSplits out;
    out.dataset = build_dataset(all, dir);
    auto to_indexed = [&](const std::vector<TokenInteraction>& rows) {
        std::vector<Interaction> list;
        list.reserve(rows.size());
        for (const TokenInteraction& row : rows) {
            list.push_back({out.dataset.user_ids.at(row.user),
                            out.dataset.item_ids.at(row.item), row.ts});
        }
        return list;
    };
    out.splits.train = to_indexed(parts[0].rows);
    out.splits.id_valid = to_indexed(parts[1].rows);
    out.splits.id_test = to_indexed(parts[2].rows);
    out.splits.ood_test = to_indexed(parts[3].rows);
    out.splits.kind = out.splits.ood_test.empty() ? SplitKind::Temporal : SplitKind::IdOod;

    std::ifstream man(dir + "/split_manifest.txt");
    if (man) {
        std::string line;
        while (std::getline(man, line)) {
            if (line.rfind("seed=", 0) == 0) {
                out.splits.seed = std::stoull(line.substr(5));
            } else if (line == "split_kind=temporal") {
                out.splits.kind = SplitKind::Temporal;
            } else if (line == "split_kind=id_ood") {
                out.splits.kind = SplitKind::IdOod;
            }
        }
    }
    return out;
}

}  // namespace popgo
