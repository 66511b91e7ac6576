#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "popgo/dataset.hpp"
#include "popgo/model.hpp"
#include "popgo/shortcut.hpp"

namespace popgo {

struct UserMetrics {
    int user = 0;
    bool hit = false;
    double recall = 0.0;
    double ndcg = 0.0;
};

struct RankingReport {
    int k = 20;
    std::string split_label;
    int n_evaluated_users = 0;
    double hr = 0.0;
    double recall = 0.0;
    double ndcg = 0.0;
    std::vector<UserMetrics> per_user;
};

enum class EvalSplit { IdValid, IdTest, OodTest };

std::string to_string(EvalSplit s);

// Fills scores for every item of one user. Model- and baseline-backed rankers
// share this shape so evaluate() does not care which it is ranking.
using Scorer = std::function<void(int user, std::vector<double>& scores)>;

// Precomputes the (propagated) representation tables once; each call then
// scores all items for one user.
Scorer model_scorer(const Model& m);

// ItemPop: every user sees items ranked by training frequency d_i.
Scorer itempop_scorer(const PopularityTable& pops);

// All non-excluded items by descending score, ties broken by ascending index.
std::vector<int> rank_items(const std::vector<double>& scores,
                            const std::vector<char>& excluded);
std::vector<int> rank_all_items(const Model& m, int u, const std::vector<int>& exclude);

// hit / recall / ndcg at cutoff k against a sorted relevant set.
UserMetrics metrics_at_k(const std::vector<int>& ranked,
                         const std::vector<int>& relevant_sorted, int k);

// Per-user metrics over users with at least one positive in the chosen
// split. Exclusion set: train positives, plus id_valid positives when
// evaluating a test split. Aggregates are unweighted user means.
RankingReport evaluate(const Scorer& scorer, int n_users, int n_items,
                       const DatasetSplits& splits, EvalSplit which, int k,
                       int threads = 1);

void write_report(const std::string& path, const RankingReport& report);

struct CorrelationReport {
    double r_alpha = 0.0;   // corr(per-interaction shortcut loss, alpha loss)
    double r_masked = 0.0;  // corr(per-interaction shortcut loss, alpha*beta loss)
    std::size_t n = 0;
};

// Per-train-interaction losses under one shared seeded negative sample:
// shortcut loss, plain alpha loss and masked alpha*beta loss; returns the two
// Pearson correlations against the shortcut loss. Throws on degenerate
// variance ("undefined correlation").
CorrelationReport correlation_analysis(const Model& m, const ShortcutModel& sm,
                                       const DatasetSplits& splits, double tau,
                                       int n_negatives, std::uint64_t seed);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace popgo
