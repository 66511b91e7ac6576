#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "popgo/dataset.hpp"
#include "popgo/rng.hpp"

using namespace popgo;

namespace {

InteractionDataset from_string(const std::string& text) {
    std::istringstream in(text);
    return parse_interactions(in, "<test>");
}

using PairSet = std::multiset<std::pair<int, int>>;

PairSet pairs_of(const std::vector<Interaction>& list) {
    PairSet s;
    for (const Interaction& x : list) s.insert({x.user, x.item});
    return s;
}

// independent fixpoint oracle: recompute degrees from scratch and drop
// offenders until nothing changes, on raw (user, item) pairs
PairSet k_core_oracle(PairSet pairs, int k) {
    for (;;) {
        std::map<int, int> du, di;
        for (const auto& [u, i] : pairs) {
            ++du[u];
            ++di[i];
        }
        PairSet kept;
        for (const auto& p : pairs) {
            if (du[p.first] >= k && di[p.second] >= k) kept.insert(p);
        }
        if (kept.size() == pairs.size()) return pairs;
        pairs = std::move(kept);
    }
}

}  // namespace

TEST_CASE("load assigns dense first-seen indices") {
    InteractionDataset ds = from_string("a\tx\na\ty\nb\tx\n");
    CHECK(ds.n_users == 2);
    CHECK(ds.n_items == 2);
    CHECK(ds.interactions.size() == 3);
    CHECK(ds.user_ids.at("a") == 0);
    CHECK(ds.item_ids.at("y") == 1);
}

TEST_CASE("duplicate pairs collapse, earliest timestamp wins") {
    InteractionDataset ds = from_string("a\tx\na\tx\n");
    CHECK(ds.interactions.size() == 1);

    InteractionDataset ts = from_string("a\tx\t9\na\tx\t4\n");
    REQUIRE(ts.interactions.size() == 1);
    CHECK(ts.interactions[0].ts == 4);
}

TEST_CASE("malformed line reports its number") {
    std::istringstream in("a\n");
    CHECK_THROWS_WITH_AS(parse_interactions(in, "f"), doctest::Contains("f:1"),
                         std::runtime_error);
    std::istringstream in2("a\tx\nb\n");
    CHECK_THROWS_WITH_AS(parse_interactions(in2, "f"), doctest::Contains("f:2"),
                         std::runtime_error);
}

TEST_CASE("empty input is an error") {
    std::istringstream in("# comment only\n");
    CHECK_THROWS_AS(parse_interactions(in, "f"), std::runtime_error);
}

TEST_CASE("comments and blank lines are skipped") {
    InteractionDataset ds = from_string("# header\na\tx\n\nb\ty\n");
    CHECK(ds.interactions.size() == 2);
}

TEST_CASE("k-core empties a star below threshold") {
    std::string text;
    for (int i = 0; i < 10; ++i) text += "u\ti" + std::to_string(i) + "\n";
    InteractionDataset ds = from_string(text);
    InteractionDataset cored = apply_k_core(ds, 2);
    CHECK(cored.interactions.empty());
    CHECK(cored.n_users == 0);
    CHECK(cored.n_items == 0);
}

TEST_CASE("k-core keeps a complete bipartite graph") {
    std::string text;
    for (int u = 0; u < 3; ++u) {
        for (int i = 0; i < 3; ++i) {
            text += "u" + std::to_string(u) + "\ti" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    InteractionDataset cored = apply_k_core(ds, 3);
    CHECK(cored.interactions.size() == 9);
    CHECK(pairs_of(cored.interactions) == pairs_of(ds.interactions));
}

TEST_CASE("k-core cascades match the brute-force oracle") {
    // chain-ish 20-node instance where removals trigger further removals
    Rng rng(17);
    std::string text;
    std::set<std::pair<int, int>> used;
    for (int u = 0; u < 10; ++u) {
        int fan = 1 + u % 4;
        for (int f = 0; f < fan; ++f) {
            int i = (u + f) % 10;
            if (used.insert({u, i}).second) {
                text += "u" + std::to_string(u) + "\ti" + std::to_string(i) + "\n";
            }
        }
    }
    InteractionDataset ds = from_string(text);
    for (int k = 1; k <= 4; ++k) {
        CAPTURE(k);
        InteractionDataset cored = apply_k_core(ds, k);
        // compare token-level pair sets: oracle works on original indices
        PairSet got;
        for (const Interaction& x : cored.interactions) {
            got.insert({ds.user_ids.at(cored.user_tokens[x.user]),
                        ds.item_ids.at(cored.item_tokens[x.item])});
        }
        CHECK(got == k_core_oracle(pairs_of(ds.interactions), k));
    }
}

TEST_CASE("k-core is a fixpoint") {
    Rng rng(23);
    std::string text;
    std::set<std::pair<int, int>> used;
    for (int e = 0; e < 120; ++e) {
        int u = rng.uniform_int(15);
        int i = rng.uniform_int(12);
        if (used.insert({u, i}).second) {
            text += "u" + std::to_string(u) + "\ti" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    InteractionDataset once = apply_k_core(ds, 3);
    if (!once.interactions.empty()) {
        InteractionDataset twice = apply_k_core(once, 3);
        CHECK(pairs_of(once.interactions) == pairs_of(twice.interactions));
    }
}

TEST_CASE("popularity counts and vocabularies") {
    std::vector<Interaction> train = {{0, 0}, {0, 1}, {1, 0}};
    PopularityTable pt = build_popularity_table(train, 2, 2);
    CHECK(pt.user_pop == std::vector<int>{2, 1});
    CHECK(pt.item_pop == std::vector<int>{2, 1});
    CHECK(pt.user_freq_values == std::vector<int>{1, 2});
    CHECK(pt.user_freq_vocab.at(2) == 1);
}

TEST_CASE("uniform degrees give a single-entry vocabulary") {
    std::vector<Interaction> train = {{0, 0}, {1, 1}, {2, 2}};
    PopularityTable pt = build_popularity_table(train, 3, 3);
    CHECK(pt.user_freq_values.size() == 1);
    CHECK(pt.item_freq_values.size() == 1);
}

TEST_CASE("zero-frequency entities keep category zero") {
    // entity 1 never appears in train: d = 0 joins the vocabulary
    std::vector<Interaction> train = {{0, 0}};
    PopularityTable pt = build_popularity_table(train, 2, 2);
    CHECK(pt.user_pop == std::vector<int>{1, 0});
    CHECK(pt.user_freq_values == std::vector<int>{0, 1});
    CHECK(pt.user_freq_vocab.at(0) == 0);
}

TEST_CASE("vocabulary sizes equal independent distinct-count histograms") {
    Rng rng(99);
    std::vector<Interaction> train;
    std::set<std::pair<int, int>> used;
    while (train.size() < 500) {
        int u = rng.uniform_int(60);
        int i = rng.uniform_int(50);
        if (used.insert({u, i}).second) train.push_back({u, i});
    }
    PopularityTable pt = build_popularity_table(train, 60, 50);
    std::set<int> distinct_u(pt.user_pop.begin(), pt.user_pop.end());
    std::set<int> distinct_i(pt.item_pop.begin(), pt.item_pop.end());
    CHECK(pt.user_freq_values.size() == distinct_u.size());
    CHECK(pt.item_freq_values.size() == distinct_i.size());

    long su = 0, si = 0;
    for (int d : pt.user_pop) su += d;
    for (int d : pt.item_pop) si += d;
    CHECK(su == static_cast<long>(train.size()));
    CHECK(si == static_cast<long>(train.size()));
}

TEST_CASE("id/ood split with exact uniform quotas") {
    // 10 items x 10 interactions each; T = 20 -> 2 per item
    std::string text;
    for (int u = 0; u < 10; ++u) {
        for (int i = 0; i < 10; ++i) {
            text += "u" + std::to_string(u) + "\ti" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    DatasetSplits sp = split_id_ood(ds, 1);
    REQUIRE(sp.ood_test.size() == 20);
    std::vector<int> per_item(10, 0);
    for (const Interaction& x : sp.ood_test) ++per_item[x.item];
    for (int c : per_item) CHECK(c == 2);
    CHECK(kl_to_uniform(sp.ood_test, ds.n_items) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sp.train.size() == 50);
    CHECK(sp.id_valid.size() == 10);
    CHECK(sp.id_test.size() == 20);
}

TEST_CASE("splits partition the source interactions") {
    Rng rng(5);
    std::string text;
    std::set<std::pair<int, int>> used;
    for (int e = 0; e < 400; ++e) {
        int u = rng.uniform_int(40);
        int i = rng.uniform_int(25);
        if (used.insert({u, i}).second) {
            text += "u" + std::to_string(u) + "\ti" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    DatasetSplits sp = split_id_ood(ds, 7);

    PairSet all = pairs_of(sp.train);
    PairSet valid = pairs_of(sp.id_valid), test = pairs_of(sp.id_test), ood = pairs_of(sp.ood_test);
    all.insert(valid.begin(), valid.end());
    all.insert(test.begin(), test.end());
    all.insert(ood.begin(), ood.end());
    CHECK(all == pairs_of(ds.interactions));
    CHECK(all.size() == sp.train.size() + sp.id_valid.size() + sp.id_test.size() + sp.ood_test.size());

    // same seed, byte-identical; different seed differs
    DatasetSplits sp2 = split_id_ood(ds, 7);
    CHECK(sp.train == sp2.train);
    CHECK(sp.id_valid == sp2.id_valid);
    CHECK(sp.id_test == sp2.id_test);
    CHECK(sp.ood_test == sp2.ood_test);
    DatasetSplits sp3 = split_id_ood(ds, 8);
    CHECK(pairs_of(sp3.ood_test) != pairs_of(sp.ood_test));
}

TEST_CASE("ood split flattens a zipf-skewed item distribution") {
    // item i receives roughly C / (i+1)^1.2 interactions from distinct users
    std::string text;
    for (int i = 0; i < 20; ++i) {
        int count = std::max(2, static_cast<int>(120.0 / std::pow(i + 1.0, 1.2)));
        for (int c = 0; c < count; ++c) {
            text += "u" + std::to_string(c) + "\ti" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    DatasetSplits sp = split_id_ood(ds, 3);
    double kl_train = kl_to_uniform(sp.train, ds.n_items);
    double kl_ood = kl_to_uniform(sp.ood_test, ds.n_items);
    CHECK(kl_ood < kl_train);
}

TEST_CASE("quota handles more items than ood slots") {
    std::string text;
    for (int i = 0; i < 30; ++i) {
        text += "u" + std::to_string(i % 3) + "\ti" + std::to_string(i) + "\n";
    }
    InteractionDataset ds = from_string(text);  // 30 interactions, T = 6 < 30 items
    DatasetSplits sp = split_id_ood(ds, 2);
    CHECK(sp.ood_test.size() == 6);
    std::vector<int> per_item(30, 0);
    for (const Interaction& x : sp.ood_test) ++per_item[x.item];
    for (int c : per_item) CHECK(c <= 1);
}

TEST_CASE("temporal split slices by time") {
    std::string text;
    for (int t = 1; t <= 10; ++t) {
        text += "u" + std::to_string(t % 4) + "\ti" + std::to_string(t) + "\t" + std::to_string(t) + "\n";
    }
    InteractionDataset ds = from_string(text);
    DatasetSplits sp = split_temporal(ds);
    REQUIRE(sp.train.size() == 7);
    REQUIRE(sp.id_valid.size() == 1);
    REQUIRE(sp.id_test.size() == 2);
    CHECK(sp.ood_test.empty());
    for (const Interaction& x : sp.train) CHECK(x.ts <= 7);
    CHECK(sp.id_valid[0].ts == 8);
}

TEST_CASE("temporal split rejects missing timestamps") {
    InteractionDataset ds = from_string("a\tx\t1\nb\ty\n");
    CHECK_THROWS_WITH_AS(split_temporal(ds), doctest::Contains("no timestamp"),
                         std::runtime_error);
}

TEST_CASE("temporal split is invariant to input order") {
    Rng rng(31);
    std::vector<std::string> lines;
    for (int e = 0; e < 100; ++e) {
        lines.push_back("u" + std::to_string(rng.uniform_int(12)) + "\ti" +
                        std::to_string(e) + "\t" + std::to_string(rng.uniform_int(40)));
    }
    std::string a, b;
    for (const auto& l : lines) a += l + "\n";
    std::vector<std::string> shuffled = lines;
    rng.shuffle(shuffled);
    for (const auto& l : shuffled) b += l + "\n";

    InteractionDataset da = from_string(a), db = from_string(b);
    DatasetSplits sa = split_temporal(da), sb = split_temporal(db);
    auto tokens = [](const InteractionDataset& ds, const std::vector<Interaction>& list) {
        std::multiset<std::pair<std::string, std::string>> s;
        for (const Interaction& x : list) s.insert({ds.user_tokens[x.user], ds.item_tokens[x.item]});
        return s;
    };
    CHECK(tokens(da, sa.train) == tokens(db, sb.train));
    CHECK(tokens(da, sa.id_valid) == tokens(db, sb.id_valid));
    CHECK(tokens(da, sa.id_test) == tokens(db, sb.id_test));
}

TEST_CASE("kl_to_uniform closed forms") {
    std::vector<Interaction> uniform;
    for (int i = 0; i < 8; ++i) uniform.push_back({0, i});
    CHECK(kl_to_uniform(uniform, 8) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<Interaction> point = {{0, 2}, {1, 2}, {2, 2}};
    CHECK(kl_to_uniform(point, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-9));

    std::vector<Interaction> skew;
    for (int c = 0; c < 3; ++c) skew.push_back({c, 0});
    skew.push_back({3, 1});
    // 0.75 ln 1.5 + 0.25 ln 0.5
    CHECK(kl_to_uniform(skew, 2) == doctest::Approx(0.130812).epsilon(1e-5));

    CHECK_THROWS_AS(kl_to_uniform({}, 4), std::invalid_argument);
}

TEST_CASE("kl_to_uniform is non-negative and zero only at exact uniformity") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Interaction> list;
        int n_items = 2 + rng.uniform_int(10);
        int n = 1 + rng.uniform_int(60);
        for (int e = 0; e < n; ++e) list.push_back({0, rng.uniform_int(n_items)});
        double kl = kl_to_uniform(list, n_items);
        CHECK(kl >= 0.0);
        std::vector<int> counts(n_items, 0);
        for (const Interaction& x : list) ++counts[x.item];
        bool exactly_uniform =
            std::all_of(counts.begin(), counts.end(), [&](int c) { return c == counts[0]; }) &&
            counts[0] > 0;
        if (exactly_uniform) {
            CHECK(kl == doctest::Approx(0.0).epsilon(1e-12));
        } else {
            CHECK(kl > 1e-12);
        }
    }
}

TEST_CASE("splits survive a save/load round trip") {
    Rng rng(41);
    std::string text;
    std::set<std::pair<int, int>> used;
    for (int e = 0; e < 200; ++e) {
        int u = rng.uniform_int(20);
        int i = rng.uniform_int(15);
        if (used.insert({u, i}).second) {
            text += "user" + std::to_string(u) + "\titem" + std::to_string(i) + "\n";
        }
    }
    InteractionDataset ds = from_string(text);
    DatasetSplits sp = split_id_ood(ds, 11);

    std::string dir = (std::filesystem::temp_directory_path() / "popgo_split_rt").string();
    std::filesystem::remove_all(dir);
    save_splits(dir, ds, sp);
    LoadedSplits loaded = load_splits(dir);

    auto tokens = [](const InteractionDataset& d, const std::vector<Interaction>& list) {
        std::multiset<std::pair<std::string, std::string>> s;
        for (const Interaction& x : list) s.insert({d.user_tokens[x.user], d.item_tokens[x.item]});
        return s;
    };
    CHECK(tokens(ds, sp.train) == tokens(loaded.dataset, loaded.splits.train));
    CHECK(tokens(ds, sp.ood_test) == tokens(loaded.dataset, loaded.splits.ood_test));
    CHECK(loaded.splits.seed == 11);
    CHECK(loaded.dataset.interactions.size() == ds.interactions.size());
    std::filesystem::remove_all(dir);
}
