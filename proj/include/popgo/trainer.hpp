#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "popgo/dataset.hpp"
#include "popgo/model.hpp"
#include "popgo/rng.hpp"
#include "popgo/shortcut.hpp"

namespace popgo {

struct TrainingConfig {
    double tau = 0.07;
    double lr = 1e-3;
    double l2 = 1e-5;
    int dim = 64;
    int batch_size = 2048;
    int n_negatives = 64;
    bool in_batch_negatives = false;
    int max_epochs = 400;
    int patience = 10;
    int shortcut_pretrain_epochs = 5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ParsedTrainingConfig {
    TrainingConfig config;
    std::unordered_set<std::string> keys_present;
};

// Flat `key = value` text; '#' comments; unknown keys rejected.
ParsedTrainingConfig parse_training_config(std::istream& in, const std::string& origin);
ParsedTrainingConfig load_training_config(const std::string& path);
void write_training_config(const std::string& path, const TrainingConfig& cfg);

// n items uniform with replacement from the items user u never interacted
// with in train. Throws if no such item exists.
std::vector<int> sample_negatives(const std::vector<std::vector<int>>& train_adjacency,
                                  int n_items, int u, int n, Rng& rng);

struct TrainingBatch {
    std::vector<Interaction> positives;
    std::vector<std::vector<int>> negatives;  // parallel to positives
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double valid_recall = 0.0;
    double wall_s = 0.0;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_valid_recall = 0.0;
};

void write_training_log(const std::string& path, const TrainLog& log);

// beta* source for the masked objective; values are treated as constants.
using MaskFn = std::function<double(int u, int i)>;

// read-only observer invoked after each epoch's validation pass
using EpochObserver = std::function<void(int epoch, const Model& m)>;

// Minimizes the sampled softmax loss over beta logits for
// shortcut_pretrain_epochs epochs, then freezes the model. Returns mean
// per-positive loss per epoch.
std::vector<double> train_shortcut(ShortcutModel& sm, const DatasetSplits& splits,
                                   const TrainingConfig& cfg);

// Target-model loop: masked sampled softmax over train batches, Recall@20 on
// id_valid after each epoch, early stopping with `patience`, best-validation
// checkpoint restored into m on return. mask == nullptr trains the plain
// backbone (identical to a constant mask of 1).
TrainLog train_with_mask(Model& m, const MaskFn& mask, const DatasetSplits& splits,
                         const TrainingConfig& cfg, int eval_k = 20,
                         const EpochObserver& observer = nullptr);

TrainLog train_plain(Model& m, const DatasetSplits& splits, const TrainingConfig& cfg,
                     int eval_k = 20);

// Requires a frozen shortcut model; beta* never receives gradient.
TrainLog train_popgo(Model& m, const ShortcutModel& sm, const DatasetSplits& splits,
                     const TrainingConfig& cfg, int eval_k = 20);

}  // namespace popgo
