#pragma once

#include <optional>
#include <string>
#include <vector>

#include "popgo/dataset.hpp"
#include "popgo/eval.hpp"
#include "popgo/model.hpp"
#include "popgo/shortcut.hpp"
#include "popgo/trainer.hpp"

namespace popgo {

enum class TrainMode { Plain, PopGo, PopGoS };

TrainMode train_mode_from_string(const std::string& s);
std::string to_string(TrainMode m);

struct PipelineResult {
    Model model;
    std::optional<ShortcutModel> shortcut;  // present iff mode == PopGo
    TrainLog log;
    std::vector<double> shortcut_epoch_losses;
};

// End-to-end training for one mode: builds the train adjacency for LightGCN,
// initializes from cfg.seed, pretrains + freezes the shortcut model for
// PopGo, and runs the target loop. PopGoS is the identity-mask variant and
// follows the plain backbone trajectory exactly.
PipelineResult run_training(TrainMode mode, Arch arch, ScoreKind score_kind, int n_layers,
                            const InteractionDataset& ds, const DatasetSplits& splits,
                            const TrainingConfig& cfg, int eval_k = 20);

struct AblationReports {
    RankingReport popgo_id;
    RankingReport popgo_ood;
    RankingReport popgo_s_id;
    RankingReport popgo_s_ood;
};

struct AblationResult {
    PipelineResult popgo;
    PipelineResult popgo_s;
    AblationReports reports;
};

// Trains full PopGo and the PopGo-S variant under identical seed/config and
// evaluates both on the ID and OOD test splits.
AblationResult run_ablation_popgo_s(Arch arch, ScoreKind score_kind, int n_layers,
                                    const InteractionDataset& ds, const DatasetSplits& splits,
                                    const TrainingConfig& cfg, int k = 20);

struct TauSweepRow {
    double tau = 0.0;
    double id_recall = 0.0;
    double ood_recall = 0.0;
};

std::vector<TauSweepRow> tau_sweep(Arch arch, ScoreKind score_kind, int n_layers,
                                   const InteractionDataset& ds, const DatasetSplits& splits,
                                   const TrainingConfig& base_cfg,
                                   const std::vector<double>& taus, int k = 20);

}  // namespace popgo
