#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "popgo/dataset.hpp"

namespace popgo {

// Generator with a planted popularity shortcut. Training interactions mix a
// latent-factor preference with a Zipf exposure:
//
//   p(i|u) ∝ exp(z_u . v_i)          (true preference)
//   q(i)   ∝ rank_i^(-s)             (exposure; ranks are a seeded permutation)
//   train  ~ (1-gamma) p(i|u) + gamma q(i)
//
// The OOD test split is generated from the same ground truth with uniform
// exposure: every item gets an equal quota, and each slot picks its user
// preference-proportionally. The four emitted splits are globally disjoint.
struct SynthConfig {
    int n_users = 500;
    int n_items = 300;
    int latent_dim = 8;
    double conformity = 0.6;   // gamma in [0, 1]
    double zipf_exponent = 1.2;  // s >= 0
    int interactions_per_user = 40;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthData {
    InteractionDataset dataset;   // union of the four splits
    DatasetSplits splits;
    std::vector<double> truth;    // row-major n_users x n_items preference p(i|u)

    double truth_at(int u, int i) const {
        return truth[static_cast<std::size_t>(u) * dataset.n_items + i];
    }
};

SynthData generate(const SynthConfig& cfg);

// truth.bin: magic + dims header, row-major float64 preference matrix.
void save_truth(const std::string& path, int n_users, int n_items,
                const std::vector<double>& truth);
std::vector<double> load_truth(const std::string& path, int* n_users_out = nullptr,
                               int* n_items_out = nullptr);

}  // namespace popgo
