#include "popgo/model.hpp"

#include <cmath>
#include <stdexcept>

#include "popgo/rng.hpp"

namespace popgo {

Arch arch_from_string(const std::string& s) {
    if (s == "mf") return Arch::MF;
    if (s == "lightgcn") return Arch::LightGCN;
    throw std::invalid_argument("unknown arch '" + s + "' (expected mf|lightgcn)");
}

std::string to_string(Arch a) {
    return a == Arch::MF ? "mf" : "lightgcn";
}

ScoreKind score_kind_from_string(const std::string& s) {
    if (s == "cosine") return ScoreKind::Cosine;
    if (s == "inner") return ScoreKind::Inner;
    if (s == "sigmoid_inner") return ScoreKind::SigmoidInner;
    throw std::invalid_argument("unknown score kind '" + s +
                                "' (expected cosine|inner|sigmoid_inner)");
}

std::string to_string(ScoreKind k) {
    switch (k) {
        case ScoreKind::Cosine: return "cosine";
        case ScoreKind::Inner: return "inner";
        case ScoreKind::SigmoidInner: return "sigmoid_inner";
    }
    return "?";
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) s += a[d] * b[d];
    return s;
}

NormalizedAdjacency build_normalized_adjacency(const std::vector<Interaction>& train,
                                               int n_users, int n_items) {
    if (train.empty()) throw std::invalid_argument("adjacency from empty train split");
    NormalizedAdjacency adj;
    adj.n_users = n_users;
    adj.n_items = n_items;
    std::vector<int> du(n_users, 0), di(n_items, 0);
    for (const Interaction& x : train) {
        ++du[x.user];
        ++di[x.item];
    }
    adj.user.reserve(train.size());
    adj.item.reserve(train.size());
    adj.weight.reserve(train.size());
    for (const Interaction& x : train) {
        adj.user.push_back(x.user);
        adj.item.push_back(x.item);
        adj.weight.push_back(1.0 / std::sqrt(static_cast<double>(du[x.user]) * di[x.item]));
    }
    return adj;
}

Model init_model(int n_users, int n_items, int dim, Arch arch, std::uint64_t seed,
                 ScoreKind score_kind, int n_layers) {
    if (n_users <= 0 || n_items <= 0 || dim <= 0) {
        throw std::invalid_argument("init_model: dimensions must be positive");
    }
    Model m;
    m.arch = arch;
    m.n_layers = (arch == Arch::LightGCN) ? n_layers : 0;
    m.score_kind = score_kind;
    m.user_table = EmbeddingTable(n_users, dim);
    m.item_table = EmbeddingTable(n_items, dim);
    Rng rng(seed);
    const double scale = 0.1 / std::sqrt(static_cast<double>(dim));
    for (double& v : m.user_table.values) v = rng.normal() * scale;
    for (double& v : m.item_table.values) v = rng.normal() * scale;
    return m;
}

void propagate_once(const NormalizedAdjacency& adj,
                    const EmbeddingTable& in_user, const EmbeddingTable& in_item,
                    EmbeddingTable& out_user, EmbeddingTable& out_item) {
    const int dim = in_user.dim;
    out_user = EmbeddingTable(in_user.rows, dim);
    out_item = EmbeddingTable(in_item.rows, dim);
    for (std::size_t e = 0; e < adj.user.size(); ++e) {
        const int u = adj.user[e];
        const int i = adj.item[e];
        const double w = adj.weight[e];
        double* ou = out_user.values.data() + static_cast<std::size_t>(u) * dim;
        double* oi = out_item.values.data() + static_cast<std::size_t>(i) * dim;
        const double* iu = in_user.values.data() + static_cast<std::size_t>(u) * dim;
        const double* ii = in_item.values.data() + static_cast<std::size_t>(i) * dim;
        for (int d = 0; d < dim; ++d) {
            ou[d] += w * ii[d];
            oi[d] += w * iu[d];
        }
    }
}

void propagate_layers(const NormalizedAdjacency& adj, int n_layers,
                      const EmbeddingTable& user_in, const EmbeddingTable& item_in,
                      EmbeddingTable& user_out, EmbeddingTable& item_out) {
    user_out = user_in;
    item_out = item_in;
    if (n_layers <= 0) return;
    EmbeddingTable cur_u = user_in, cur_i = item_in, next_u, next_i;
    for (int layer = 1; layer <= n_layers; ++layer) {
        propagate_once(adj, cur_u, cur_i, next_u, next_i);
        for (std::size_t p = 0; p < user_out.values.size(); ++p) user_out.values[p] += next_u.values[p];
        for (std::size_t p = 0; p < item_out.values.size(); ++p) item_out.values[p] += next_i.values[p];
        cur_u = std::move(next_u);
        cur_i = std::move(next_i);
    }
    const double inv = 1.0 / (n_layers + 1);
    for (double& v : user_out.values) v *= inv;
    for (double& v : item_out.values) v *= inv;
}

Representations representations(const Model& m) {
    Representations reps;
    if (m.arch == Arch::MF || m.n_layers == 0) {
        reps.users = m.user_table;
        reps.items = m.item_table;
        return reps;
    }
    propagate_layers(m.graph, m.n_layers, m.user_table, m.item_table, reps.users, reps.items);
    return reps;
}

std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>
representations(const Model& m, const std::vector<int>& users, const std::vector<int>& items) {
    for (int u : users) {
        if (u < 0 || u >= m.user_table.rows) throw std::out_of_range("user index out of range");
    }
    for (int i : items) {
        if (i < 0 || i >= m.item_table.rows) throw std::out_of_range("item index out of range");
    }
    Representations full = representations(m);
    std::vector<std::vector<double>> uvecs, ivecs;
    uvecs.reserve(users.size());
    ivecs.reserve(items.size());
    for (int u : users) {
        auto r = full.users.row(u);
        uvecs.emplace_back(r.begin(), r.end());
    }
    for (int i : items) {
        auto r = full.items.row(i);
        ivecs.emplace_back(r.begin(), r.end());
    }
    return {std::move(uvecs), std::move(ivecs)};
}

double score_pair(ScoreKind kind, std::span<const double> xu, std::span<const double> xi) {
    if (xu.size() != xi.size()) throw std::invalid_argument("score: dim mismatch");
    const double d = dot(xu, xi);
    switch (kind) {
        case ScoreKind::Inner:
            return d;
        case ScoreKind::SigmoidInner:
            return 1.0 / (1.0 + std::exp(-d));
        case ScoreKind::Cosine: {
            const double nu = std::sqrt(dot(xu, xu));
            const double ni = std::sqrt(dot(xi, xi));
            if (nu == 0.0 || ni == 0.0) {
                throw std::domain_error("cosine score of a zero-norm vector");
            }
            return d / (nu * ni);
        }
    }
    throw std::logic_error("unreachable");
}

double score(const Model& m, std::span<const double> xu, std::span<const double> xi) {
    return score_pair(m.score_kind, xu, xi);
}

void score_backward(ScoreKind kind, std::span<const double> xu, std::span<const double> xi,
                    double dalpha, std::span<double> gu, std::span<double> gi) {
    const std::size_t dim = xu.size();
    switch (kind) {
        case ScoreKind::Inner: {
            for (std::size_t d = 0; d < dim; ++d) {
                gu[d] += dalpha * xi[d];
                gi[d] += dalpha * xu[d];
            }
            return;
        }
        case ScoreKind::SigmoidInner: {
            const double s = 1.0 / (1.0 + std::exp(-dot(xu, xi)));
            const double g = dalpha * s * (1.0 - s);
            for (std::size_t d = 0; d < dim; ++d) {
                gu[d] += g * xi[d];
                gi[d] += g * xu[d];
            }
            return;
        }
        case ScoreKind::Cosine: {
            const double nu2 = dot(xu, xu);
            const double ni2 = dot(xi, xi);
            const double nu = std::sqrt(nu2);
            const double ni = std::sqrt(ni2);
            if (nu == 0.0 || ni == 0.0) {
                throw std::domain_error("cosine gradient of a zero-norm vector");
            }
            const double dp = dot(xu, xi);
            const double inv = 1.0 / (nu * ni);
            const double c = dp * inv;
            for (std::size_t d = 0; d < dim; ++d) {
                gu[d] += dalpha * (xi[d] * inv - c * xu[d] / nu2);
                gi[d] += dalpha * (xu[d] * inv - c * xi[d] / ni2);
            }
            return;
        }
    }
}

}  // namespace popgo
