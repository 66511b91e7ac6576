#include "popgo/pipeline.hpp"

#include <stdexcept>

namespace popgo {

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "plain") return TrainMode::Plain;
    if (s == "popgo") return TrainMode::PopGo;
    if (s == "popgo_s") return TrainMode::PopGoS;
    throw std::invalid_argument("unknown mode '" + s + "' (expected plain|popgo|popgo_s)");
}

std::string to_string(TrainMode m) {
    switch (m) {
        case TrainMode::Plain: return "plain";
        case TrainMode::PopGo: return "popgo";
        case TrainMode::PopGoS: return "popgo_s";
    }
    return "?";
}

PipelineResult run_training(TrainMode mode, Arch arch, ScoreKind score_kind, int n_layers,
                            const InteractionDataset& ds, const DatasetSplits& splits,
                            const TrainingConfig& cfg, int eval_k) {
    cfg.validate();
    PipelineResult out;
    NormalizedAdjacency graph;
    if (arch == Arch::LightGCN) {
        graph = build_normalized_adjacency(splits.train, ds.n_users, ds.n_items);
    }
    out.model = init_model(ds.n_users, ds.n_items, cfg.dim, arch, cfg.seed, score_kind,
                           arch == Arch::LightGCN ? n_layers : 0);
    if (arch == Arch::LightGCN) out.model.graph = graph;

    if (mode == TrainMode::PopGo) {
        PopularityTable pops = build_popularity_table(splits.train, ds.n_users, ds.n_items);
        ShortcutModel sm = build_shortcut_model(arch, pops, ds.n_users, ds.n_items, cfg.dim,
                                                cfg.seed, arch == Arch::LightGCN ? &graph : nullptr,
                                                n_layers);
        out.shortcut_epoch_losses = train_shortcut(sm, splits, cfg);
        out.shortcut = std::move(sm);
        out.log = train_popgo(out.model, *out.shortcut, splits, cfg, eval_k);
    } else {
        out.log = train_plain(out.model, splits, cfg, eval_k);
    }
    return out;
}

AblationResult run_ablation_popgo_s(Arch arch, ScoreKind score_kind, int n_layers,
                                    const InteractionDataset& ds, const DatasetSplits& splits,
                                    const TrainingConfig& cfg, int k) {
    AblationResult out;
    out.popgo = run_training(TrainMode::PopGo, arch, score_kind, n_layers, ds, splits, cfg, k);
    out.popgo_s = run_training(TrainMode::PopGoS, arch, score_kind, n_layers, ds, splits, cfg, k);
    Scorer popgo_scorer = model_scorer(out.popgo.model);
    Scorer popgo_s_scorer = model_scorer(out.popgo_s.model);
    out.reports.popgo_id = evaluate(popgo_scorer, ds.n_users, ds.n_items, splits,
                                    EvalSplit::IdTest, k);
    out.reports.popgo_ood = evaluate(popgo_scorer, ds.n_users, ds.n_items, splits,
                                     EvalSplit::OodTest, k);
    out.reports.popgo_s_id = evaluate(popgo_s_scorer, ds.n_users, ds.n_items, splits,
                                      EvalSplit::IdTest, k);
    out.reports.popgo_s_ood = evaluate(popgo_s_scorer, ds.n_users, ds.n_items, splits,
                                       EvalSplit::OodTest, k);
    return out;
}

std::vector<TauSweepRow> tau_sweep(Arch arch, ScoreKind score_kind, int n_layers,
                                   const InteractionDataset& ds, const DatasetSplits& splits,
                                   const TrainingConfig& base_cfg,
                                   const std::vector<double>& taus, int k) {
    std::vector<TauSweepRow> rows;
    rows.reserve(taus.size());
    for (double tau : taus) {
        TrainingConfig cfg = base_cfg;
        cfg.tau = tau;
        PipelineResult res = run_training(TrainMode::PopGo, arch, score_kind, n_layers,
                                          ds, splits, cfg, k);
        Scorer scorer = model_scorer(res.model);
        TauSweepRow row;
        row.tau = tau;
        row.id_recall = evaluate(scorer, ds.n_users, ds.n_items, splits,
                                 EvalSplit::IdTest, k).recall;
        row.ood_recall = evaluate(scorer, ds.n_users, ds.n_items, splits,
                                  EvalSplit::OodTest, k).recall;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace popgo
