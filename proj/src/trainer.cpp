#include "popgo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "popgo/adam.hpp"
#include "popgo/eval.hpp"
#include "popgo/loss.hpp"

namespace popgo {

namespace {

double elapsed_s(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

bool interacted(const std::vector<int>& items_sorted, int item) {
    return std::binary_search(items_sorted.begin(), items_sorted.end(), item);
}

std::vector<int> in_batch_negatives_for(const TrainingBatch& batch, std::size_t self,
                                        const std::vector<int>& user_train_items) {
    std::vector<int> negs;
    negs.reserve(batch.positives.size() - 1);
    for (std::size_t c = 0; c < batch.positives.size(); ++c) {
        if (c == self) continue;
        const int j = batch.positives[c].item;
        if (!interacted(user_train_items, j)) negs.push_back(j);
    }
    return negs;
}

}  // namespace

void TrainingConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    if (l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
    if (dim < 1) throw std::invalid_argument("dim must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (n_negatives < 0) throw std::invalid_argument("n_negatives must be >= 0");
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (shortcut_pretrain_epochs < 1) {
        throw std::invalid_argument("shortcut_pretrain_epochs must be >= 1");
    }
}

ParsedTrainingConfig parse_training_config(std::istream& in, const std::string& origin) {
    ParsedTrainingConfig out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            std::size_t b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            std::size_t e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        if (strip(line).empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        }
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));
        auto bad_value = [&]() {
            return std::runtime_error(origin + ":" + std::to_string(lineno) +
                                      ": bad value '" + value + "' for key '" + key + "'");
        };
        try {
            if (key == "tau") {
                out.config.tau = std::stod(value);
            } else if (key == "lr") {
                out.config.lr = std::stod(value);
            } else if (key == "l2") {
                out.config.l2 = std::stod(value);
            } else if (key == "dim") {
                out.config.dim = std::stoi(value);
            } else if (key == "batch_size") {
                out.config.batch_size = std::stoi(value);
            } else if (key == "n_negatives") {
                out.config.n_negatives = std::stoi(value);
            } else if (key == "in_batch_negatives") {
                if (value == "true" || value == "1") {
                    out.config.in_batch_negatives = true;
                } else if (value == "false" || value == "0") {
                    out.config.in_batch_negatives = false;
                } else {
                    throw bad_value();
                }
            } else if (key == "max_epochs") {
                out.config.max_epochs = std::stoi(value);
            } else if (key == "patience") {
                out.config.patience = std::stoi(value);
            } else if (key == "shortcut_pretrain_epochs") {
                out.config.shortcut_pretrain_epochs = std::stoi(value);
            } else if (key == "seed") {
                out.config.seed = std::stoull(value);
            } else {
                throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw bad_value();
        } catch (const std::out_of_range&) {
            throw bad_value();
        }
        out.keys_present.insert(key);
    }
    out.config.validate();
    return out;
}

ParsedTrainingConfig load_training_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_training_config(in, path);
}

void write_training_config(const std::string& path, const TrainingConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "tau = " << cfg.tau << '\n'
        << "lr = " << cfg.lr << '\n'
        << "l2 = " << cfg.l2 << '\n'
        << "dim = " << cfg.dim << '\n'
        << "batch_size = " << cfg.batch_size << '\n'
        << "n_negatives = " << cfg.n_negatives << '\n'
        << "in_batch_negatives = " << (cfg.in_batch_negatives ? "true" : "false") << '\n'
        << "max_epochs = " << cfg.max_epochs << '\n'
        << "patience = " << cfg.patience << '\n'
        << "shortcut_pretrain_epochs = " << cfg.shortcut_pretrain_epochs << '\n'
        << "seed = " << cfg.seed << '\n';
}

std::vector<int> sample_negatives(const std::vector<std::vector<int>>& train_adjacency,
                                  int n_items, int u, int n, Rng& rng) {
    const std::vector<int>& mine = train_adjacency[u];
    if (static_cast<int>(mine.size()) >= n_items) {
        throw std::runtime_error("user " + std::to_string(u) +
                                 " interacted with every item; cannot sample negatives");
    }
    std::vector<int> negs;
    negs.reserve(n);
    while (static_cast<int>(negs.size()) < n) {
        int j = rng.uniform_int(n_items);
        if (!interacted(mine, j)) negs.push_back(j);
    }
    return negs;
}

void write_training_log(const std::string& path, const TrainLog& log) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "epoch\ttrain_loss\tvalid_recall@20\twallclock_s\n";
    char buf[96];
    for (const EpochLog& e : log.epochs) {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.3f", e.epoch, e.train_loss,
                      e.valid_recall, e.wall_s);
        out << buf << '\n';
    }
}

namespace {

// One optimization pass shared by the shortcut and target loops: scores the
// batch candidates on (possibly propagated) representations, pushes softmax
// gradients back into the layer-0 tables, and applies Adam.
struct SgdContext {
    std::vector<std::vector<int>> train_adjacency;
    AdamState user_state;
    AdamState item_state;
    Rng rng;

    SgdContext(const DatasetSplits& splits, int n_users, std::uint64_t seed,
               std::size_t user_params, std::size_t item_params)
        : train_adjacency(adjacency_from(splits.train, n_users)),
          user_state(user_params),
          item_state(item_params),
          rng(seed) {}
};

TrainingBatch make_batch(const std::vector<Interaction>& train,
                         const std::vector<std::size_t>& order, std::size_t begin,
                         std::size_t end, const TrainingConfig& cfg,
                         const std::vector<std::vector<int>>& adj, int n_items, Rng& rng) {
    TrainingBatch batch;
    batch.positives.reserve(end - begin);
    for (std::size_t p = begin; p < end; ++p) batch.positives.push_back(train[order[p]]);
    batch.negatives.resize(batch.positives.size());
    for (std::size_t p = 0; p < batch.positives.size(); ++p) {
        const Interaction& pos = batch.positives[p];
        if (cfg.in_batch_negatives) {
            batch.negatives[p] = in_batch_negatives_for(batch, p, adj[pos.user]);
        } else {
            batch.negatives[p] =
                sample_negatives(adj, n_items, pos.user, cfg.n_negatives, rng);
        }
    }
    return batch;
}

}  // namespace

std::vector<double> train_shortcut(ShortcutModel& sm, const DatasetSplits& splits,
                                   const TrainingConfig& cfg) {
    if (sm.frozen) throw std::logic_error("train_shortcut: model already frozen");
    cfg.validate();
    const int n_users = static_cast<int>(sm.user_cat.size());
    const int n_items = static_cast<int>(sm.item_cat.size());
    const int dim = sm.inner.user_table.dim;
    SgdContext ctx(splits, n_users, cfg.seed, sm.inner.user_table.values.size(),
                   sm.inner.item_table.values.size());

    std::vector<std::size_t> order(splits.train.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;

    std::vector<double> epoch_losses;
    EmbeddingTable grad_u(n_users, dim), grad_i(n_items, dim);
    for (int epoch = 0; epoch < cfg.shortcut_pretrain_epochs; ++epoch) {
        ctx.rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t n_positives = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            TrainingBatch batch = make_batch(splits.train, order, begin, end, cfg,
                                             ctx.train_adjacency, n_items, ctx.rng);
            refresh_representations(sm);
            grad_u.zero();
            grad_i.zero();
            std::vector<double> beta;
            for (std::size_t p = 0; p < batch.positives.size(); ++p) {
                const Interaction& pos = batch.positives[p];
                const std::vector<int>& negs = batch.negatives[p];
                beta.assign(1, shortcut_degree(sm, pos.user, pos.item));
                for (int j : negs) beta.push_back(shortcut_degree(sm, pos.user, j));
                LossGrad lg = sampled_softmax_loss(beta, cfg.tau);
                loss_sum += lg.loss;
                ++n_positives;
                auto xu = sm.user_reps.row(pos.user);
                score_backward(ScoreKind::SigmoidInner, xu, sm.item_reps.row(pos.item),
                               lg.dscore[0], grad_u.row(pos.user), grad_i.row(pos.item));
                for (std::size_t k = 0; k < negs.size(); ++k) {
                    score_backward(ScoreKind::SigmoidInner, xu, sm.item_reps.row(negs[k]),
                                   lg.dscore[k + 1], grad_u.row(pos.user),
                                   grad_i.row(negs[k]));
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(batch.positives.size());
            // per-entity gradients; LightGCN pushes them back through the
            // propagation (the stacked operator is symmetric)
            EmbeddingTable back_u, back_i;
            if (sm.inner.arch == Arch::LightGCN && sm.inner.n_layers > 0) {
                propagate_layers(sm.inner.graph, sm.inner.n_layers, grad_u, grad_i,
                                 back_u, back_i);
            } else {
                back_u = std::move(grad_u);
                back_i = std::move(grad_i);
            }
            // entities sharing a frequency category sum into the same row
            EmbeddingTable row_grad_u(sm.inner.user_table.rows, dim);
            EmbeddingTable row_grad_i(sm.inner.item_table.rows, dim);
            for (int u = 0; u < n_users; ++u) {
                auto src = back_u.row(u);
                auto dst = row_grad_u.row(sm.user_cat[u]);
                for (int d = 0; d < dim; ++d) dst[d] += src[d] * inv_batch;
            }
            for (int i = 0; i < n_items; ++i) {
                auto src = back_i.row(i);
                auto dst = row_grad_i.row(sm.item_cat[i]);
                for (int d = 0; d < dim; ++d) dst[d] += src[d] * inv_batch;
            }
            adam_step(sm.inner.user_table.values, row_grad_u.values, ctx.user_state,
                      cfg.lr, cfg.l2);
            adam_step(sm.inner.item_table.values, row_grad_i.values, ctx.item_state,
                      cfg.lr, cfg.l2);
            if (sm.inner.arch == Arch::LightGCN && sm.inner.n_layers > 0) {
                grad_u = EmbeddingTable(n_users, dim);
                grad_i = EmbeddingTable(n_items, dim);
            } else {
                grad_u = std::move(back_u);
                grad_i = std::move(back_i);
            }
        }
        epoch_losses.push_back(loss_sum / static_cast<double>(n_positives));
    }
    freeze(sm);
    return epoch_losses;
}

TrainLog train_with_mask(Model& m, const MaskFn& mask, const DatasetSplits& splits,
                         const TrainingConfig& cfg, int eval_k, const EpochObserver& observer) {
    cfg.validate();
    const int n_users = m.user_table.rows;
    const int n_items = m.item_table.rows;
    const int dim = m.user_table.dim;
    SgdContext ctx(splits, n_users, cfg.seed, m.user_table.values.size(),
                   m.item_table.values.size());

    std::vector<std::size_t> order(splits.train.size());
    for (std::size_t p = 0; p < order.size(); ++p) order[p] = p;

    TrainLog log;
    EmbeddingTable best_user, best_item;
    int epochs_since_best = 0;
    EmbeddingTable grad_u(n_users, dim), grad_i(n_items, dim);
    const auto t0 = std::chrono::steady_clock::now();

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        ctx.rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t n_positives = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            TrainingBatch batch = make_batch(splits.train, order, begin, end, cfg,
                                             ctx.train_adjacency, n_items, ctx.rng);
            Representations reps = representations(m);
            grad_u.zero();
            grad_i.zero();
            std::vector<double> alpha, beta;
            for (std::size_t p = 0; p < batch.positives.size(); ++p) {
                const Interaction& pos = batch.positives[p];
                const std::vector<int>& negs = batch.negatives[p];
                auto xu = reps.users.row(pos.user);
                alpha.assign(1, score_pair(m.score_kind, xu, reps.items.row(pos.item)));
                for (int j : negs) {
                    alpha.push_back(score_pair(m.score_kind, xu, reps.items.row(j)));
                }
                LossGrad lg;
                if (mask) {
                    beta.assign(1, mask(pos.user, pos.item));
                    for (int j : negs) beta.push_back(mask(pos.user, j));
                    lg = popgo_loss(alpha, beta, cfg.tau);
                } else {
                    lg = sampled_softmax_loss(alpha, cfg.tau);
                }
                loss_sum += lg.loss;
                ++n_positives;
                score_backward(m.score_kind, xu, reps.items.row(pos.item), lg.dscore[0],
                               grad_u.row(pos.user), grad_i.row(pos.item));
                for (std::size_t k = 0; k < negs.size(); ++k) {
                    score_backward(m.score_kind, xu, reps.items.row(negs[k]),
                                   lg.dscore[k + 1], grad_u.row(pos.user),
                                   grad_i.row(negs[k]));
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(batch.positives.size());
            for (double& g : grad_u.values) g *= inv_batch;
            for (double& g : grad_i.values) g *= inv_batch;
            if (m.arch == Arch::LightGCN && m.n_layers > 0) {
                EmbeddingTable back_u, back_i;
                propagate_layers(m.graph, m.n_layers, grad_u, grad_i, back_u, back_i);
                adam_step(m.user_table.values, back_u.values, ctx.user_state, cfg.lr, cfg.l2);
                adam_step(m.item_table.values, back_i.values, ctx.item_state, cfg.lr, cfg.l2);
            } else {
                adam_step(m.user_table.values, grad_u.values, ctx.user_state, cfg.lr, cfg.l2);
                adam_step(m.item_table.values, grad_i.values, ctx.item_state, cfg.lr, cfg.l2);
            }
        }

        RankingReport valid = evaluate(model_scorer(m), n_users, n_items, splits,
                                       EvalSplit::IdValid, eval_k);
        EpochLog el;
        el.epoch = epoch;
        el.train_loss = loss_sum / static_cast<double>(n_positives);
        el.valid_recall = valid.recall;
        el.wall_s = elapsed_s(t0);
        log.epochs.push_back(el);
        if (observer) observer(epoch, m);

        if (log.best_epoch < 0 || valid.recall > log.best_valid_recall) {
            log.best_epoch = epoch;
            log.best_valid_recall = valid.recall;
            best_user = m.user_table;
            best_item = m.item_table;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }
    // best-validation checkpoint, not the final epoch
    m.user_table = std::move(best_user);
    m.item_table = std::move(best_item);
    return log;
}

TrainLog train_plain(Model& m, const DatasetSplits& splits, const TrainingConfig& cfg,
                     int eval_k) {
    return train_with_mask(m, nullptr, splits, cfg, eval_k);
}

TrainLog train_popgo(Model& m, const ShortcutModel& sm, const DatasetSplits& splits,
                     const TrainingConfig& cfg, int eval_k) {
    if (!sm.frozen) throw std::logic_error("train_popgo: shortcut model must be frozen");
    MaskFn mask = [&sm](int u, int i) { return shortcut_degree(sm, u, i); };
    return train_with_mask(m, mask, splits, cfg, eval_k);
}

}  // namespace popgo
