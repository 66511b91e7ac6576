#include "popgo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "popgo/loss.hpp"
#include "popgo/rng.hpp"
#include "popgo/trainer.hpp"

namespace popgo {

std::string to_string(EvalSplit s) {
    switch (s) {
        case EvalSplit::IdValid: return "id_valid";
        case EvalSplit::IdTest: return "id_test";
        case EvalSplit::OodTest: return "ood_test";
    }
    return "?";
}

Scorer model_scorer(const Model& m) {
    auto reps = std::make_shared<Representations>(representations(m));
    ScoreKind kind = m.score_kind;
    return [reps, kind](int user, std::vector<double>& scores) {
        scores.assign(reps->items.rows, 0.0);
        auto xu = reps->users.row(user);
        for (int i = 0; i < reps->items.rows; ++i) {
            scores[i] = score_pair(kind, xu, reps->items.row(i));
        }
    };
}

Scorer itempop_scorer(const PopularityTable& pops) {
    auto pop = std::make_shared<std::vector<int>>(pops.item_pop);
    return [pop](int, std::vector<double>& scores) {
        scores.assign(pop->size(), 0.0);
        for (std::size_t i = 0; i < pop->size(); ++i) scores[i] = (*pop)[i];
    };
}

std::vector<int> rank_items(const std::vector<double>& scores,
                            const std::vector<char>& excluded) {
    std::vector<int> order;
    order.reserve(scores.size());
    for (int i = 0; i < static_cast<int>(scores.size()); ++i) {
        if (excluded.empty() || !excluded[i]) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

std::vector<int> rank_all_items(const Model& m, int u, const std::vector<int>& exclude) {
    std::vector<double> scores;
    model_scorer(m)(u, scores);
    std::vector<char> excluded(scores.size(), 0);
    for (int i : exclude) excluded[i] = 1;
    return rank_items(scores, excluded);
}

UserMetrics metrics_at_k(const std::vector<int>& ranked,
                         const std::vector<int>& relevant_sorted, int k) {
    if (relevant_sorted.empty()) {
        throw std::invalid_argument("metrics_at_k: empty relevant set");
    }
    UserMetrics um;
    const int cutoff = std::min<int>(k, static_cast<int>(ranked.size()));
    int hits = 0;
    double dcg = 0.0;
    for (int r = 0; r < cutoff; ++r) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[r])) {
            ++hits;
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
    }
    double idcg = 0.0;
    const int ideal = std::min<int>(k, static_cast<int>(relevant_sorted.size()));
    for (int r = 0; r < ideal; ++r) {
        idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
    um.hit = hits > 0;
    um.recall = static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
    um.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
    return um;
}

RankingReport evaluate(const Scorer& scorer, int n_users, int n_items,
                       const DatasetSplits& splits, EvalSplit which, int k,
                       int threads) {
    const std::vector<Interaction>* target = nullptr;
    switch (which) {
        case EvalSplit::IdValid: target = &splits.id_valid; break;
        case EvalSplit::IdTest: target = &splits.id_test; break;
        case EvalSplit::OodTest: target = &splits.ood_test; break;
    }
    if (target->empty()) {
        throw std::runtime_error("evaluate: split '" + to_string(which) + "' is empty");
    }

    std::vector<std::vector<int>> relevant(n_users);
    for (const Interaction& x : *target) relevant[x.user].push_back(x.item);
    for (auto& r : relevant) {
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
    }

    // train positives always excluded; validation positives additionally
    // excluded on test splits so they cannot pad the rankings
    std::vector<std::vector<char>> excluded(n_users, std::vector<char>(n_items, 0));
    for (const Interaction& x : splits.train) excluded[x.user][x.item] = 1;
    if (which == EvalSplit::IdTest || which == EvalSplit::OodTest) {
        for (const Interaction& x : splits.id_valid) excluded[x.user][x.item] = 1;
    }

    std::vector<int> users;
    for (int u = 0; u < n_users; ++u) {
        if (!relevant[u].empty()) users.push_back(u);
    }

    std::vector<UserMetrics> per_user(users.size());
    auto worker = [&](std::size_t begin, std::size_t end) {
        std::vector<double> scores;
        for (std::size_t idx = begin; idx < end; ++idx) {
            const int u = users[idx];
            scorer(u, scores);
            std::vector<int> ranked = rank_items(scores, excluded[u]);
            per_user[idx] = metrics_at_k(ranked, relevant[u], k);
            per_user[idx].user = u;
        }
    };
    if (threads <= 1 || users.size() < 2) {
        worker(0, users.size());
    } else {
        const std::size_t n_workers = std::min<std::size_t>(threads, users.size());
        std::vector<std::thread> pool;
        const std::size_t chunk = (users.size() + n_workers - 1) / n_workers;
        for (std::size_t w = 0; w < n_workers; ++w) {
            std::size_t begin = w * chunk;
            std::size_t end = std::min(users.size(), begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    RankingReport rep;
    rep.k = k;
    rep.split_label = to_string(which);
    rep.per_user = std::move(per_user);
    rep.n_evaluated_users = static_cast<int>(rep.per_user.size());
    // fixed-order reduction keeps aggregates identical across worker counts
    for (const UserMetrics& um : rep.per_user) {
        rep.hr += um.hit ? 1.0 : 0.0;
        rep.recall += um.recall;
        rep.ndcg += um.ndcg;
    }
    if (rep.n_evaluated_users > 0) {
        rep.hr /= rep.n_evaluated_users;
        rep.recall /= rep.n_evaluated_users;
        rep.ndcg /= rep.n_evaluated_users;
    }
    return rep;
}

void write_report(const std::string& path, const RankingReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[64];
    out << "# split=" << report.split_label << " k=" << report.k
        << " n_evaluated_users=" << report.n_evaluated_users << '\n';
    std::snprintf(buf, sizeof(buf), "%.6f", report.hr);
    out << "# HR@" << report.k << '=' << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.6f", report.recall);
    out << "# Recall@" << report.k << '=' << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.6f", report.ndcg);
    out << "# NDCG@" << report.k << '=' << buf << '\n';
    out << "user\thit\trecall\tndcg\n";
    for (const UserMetrics& um : report.per_user) {
        std::snprintf(buf, sizeof(buf), "%d\t%d\t%.6f\t%.6f", um.user, um.hit ? 1 : 0,
                      um.recall, um.ndcg);
        out << buf << '\n';
    }
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("pearson: need two same-length vectors");
    }
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double da = a[k] - ma;
        const double db = b[k] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        throw std::runtime_error("undefined correlation: zero variance input");
    }
    return sab / std::sqrt(saa * sbb);
}

CorrelationReport correlation_analysis(const Model& m, const ShortcutModel& sm,
                                       const DatasetSplits& splits, double tau,
                                       int n_negatives, std::uint64_t seed) {
    Representations reps = representations(m);
    const int n_items = reps.items.rows;
    std::vector<std::vector<int>> train_adj =
        adjacency_from(splits.train, reps.users.rows);

    Rng rng(seed);
    std::vector<double> loss_b, loss_alpha, loss_masked;
    loss_b.reserve(splits.train.size());
    std::vector<double> alpha, beta;
    for (const Interaction& x : splits.train) {
        std::vector<int> negs = sample_negatives(train_adj, n_items, x.user, n_negatives, rng);
        alpha.assign(1, score(m, reps.users.row(x.user), reps.items.row(x.item)));
        beta.assign(1, shortcut_degree(sm, x.user, x.item));
        for (int j : negs) {
            alpha.push_back(score(m, reps.users.row(x.user), reps.items.row(j)));
            beta.push_back(shortcut_degree(sm, x.user, j));
        }
        loss_b.push_back(sampled_softmax_loss(beta, tau).loss);
        loss_alpha.push_back(sampled_softmax_loss(alpha, tau).loss);
        loss_masked.push_back(popgo_loss(alpha, beta, tau).loss);
    }
    CorrelationReport rep;
    rep.n = loss_b.size();
    rep.r_alpha = pearson(loss_b, loss_alpha);
    rep.r_masked = pearson(loss_b, loss_masked);
    return rep;
}

}  // namespace popgo
