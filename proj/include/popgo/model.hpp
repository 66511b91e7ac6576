#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "popgo/dataset.hpp"

namespace popgo {

struct EmbeddingTable {
    int rows = 0;
    int dim = 0;
    std::vector<double> values;  // row-major

    EmbeddingTable() = default;
    EmbeddingTable(int rows_, int dim_) : rows(rows_), dim(dim_), values(static_cast<std::size_t>(rows_) * dim_, 0.0) {}

    std::span<double> row(int r) {
        return {values.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)};
    }
    std::span<const double> row(int r) const {
        return {values.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)};
    }
    void zero() { std::fill(values.begin(), values.end(), 0.0); }
};

enum class Arch { MF, LightGCN };
enum class ScoreKind { Cosine, Inner, SigmoidInner };

Arch arch_from_string(const std::string& s);
std::string to_string(Arch a);
ScoreKind score_kind_from_string(const std::string& s);
std::string to_string(ScoreKind k);

// Bipartite train-graph edges with symmetric sqrt-degree weights
// 1/sqrt(deg(u) * deg(i)). One entry per distinct (u, i) train pair.
struct NormalizedAdjacency {
    int n_users = 0;
    int n_items = 0;
    std::vector<int> user;
    std::vector<int> item;
    std::vector<double> weight;

    bool empty() const { return user.empty(); }
};

NormalizedAdjacency build_normalized_adjacency(const std::vector<Interaction>& train,
                                               int n_users, int n_items);

struct Model {
    EmbeddingTable user_table;
    EmbeddingTable item_table;
    Arch arch = Arch::MF;
    int n_layers = 0;  // LightGCN depth L; ignored for MF
    ScoreKind score_kind = ScoreKind::Cosine;
    NormalizedAdjacency graph;  // present iff arch == LightGCN
};

// Entries i.i.d. normal with scale 0.1/sqrt(dim); deterministic per seed.
Model init_model(int n_users, int n_items, int dim, Arch arch, std::uint64_t seed,
                 ScoreKind score_kind = ScoreKind::Cosine, int n_layers = 0);

// One propagation sweep: out_user[u] = sum_{(u,i)} w * in_item[i] and the
// mirrored item side. The stacked operator is symmetric, so this same
// function also pushes gradients backwards.
void propagate_once(const NormalizedAdjacency& adj,
                    const EmbeddingTable& in_user, const EmbeddingTable& in_item,
                    EmbeddingTable& out_user, EmbeddingTable& out_item);

// Layer-averaged tables over layers 0..L: mean_k A^k E. For L = 0 this is a
// copy of the input tables.
void propagate_layers(const NormalizedAdjacency& adj, int n_layers,
                      const EmbeddingTable& user_in, const EmbeddingTable& item_in,
                      EmbeddingTable& user_out, EmbeddingTable& item_out);

struct Representations {
    EmbeddingTable users;
    EmbeddingTable items;
};

// Full-table final representations: MF returns the tables, LightGCN the
// layer average of propagated embeddings.
Representations representations(const Model& m);

// Gathered per-index representations (spec surface over the full-table form).
std::pair<std::vector<std::vector<double>>, std::vector<std::vector<double>>>
representations(const Model& m, const std::vector<int>& users, const std::vector<int>& items);

double score_pair(ScoreKind kind, std::span<const double> xu, std::span<const double> xi);
double score(const Model& m, std::span<const double> xu, std::span<const double> xi);

// Accumulates d(score)/d(xu), d(score)/d(xi) scaled by dalpha into gu, gi.
void score_backward(ScoreKind kind, std::span<const double> xu, std::span<const double> xi,
                    double dalpha, std::span<double> gu, std::span<double> gi);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace popgo
