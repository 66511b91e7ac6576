#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "popgo/checkpoint.hpp"
#include "popgo/dataset.hpp"
#include "popgo/eval.hpp"
#include "popgo/hashing.hpp"
#include "popgo/manifest.hpp"
#include "popgo/pipeline.hpp"
#include "popgo/synth.hpp"
#include "popgo/trainer.hpp"

namespace fs = std::filesystem;
using namespace popgo;

namespace {

struct CommonOpts {
    std::string out_dir;
    bool force = false;
    bool strict = false;
    int threads = 1;
};

double now_s(std::chrono::steady_clock::time_point from) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - from).count();
}

void ensure_out_dir(const std::string& dir, bool force) {
    fs::path p(dir);
    if (fs::exists(p) && !fs::is_empty(p) && !force) {
        throw std::runtime_error("output directory '" + dir +
                                 "' is not empty; pass --force to overwrite");
    }
    fs::create_directories(p);
}

// POPGO_SEED wins over flags and config files
std::uint64_t effective_seed(std::uint64_t configured) {
    const char* env = std::getenv("POPGO_SEED");
    if (env == nullptr || *env == '\0') return configured;
    std::uint64_t seed = std::stoull(env);
    std::cout << "seed=" << seed << " (from POPGO_SEED)\n";
    return seed;
}

std::string hash_splits_dir(const std::string& dir) {
    std::uint64_t h = kFnvOffset;
    for (const char* name : {"train.tsv", "id_valid.tsv", "id_test.tsv", "ood_test.tsv"}) {
        h ^= fnv1a64_file(dir + "/" + name);
        h *= kFnvPrime;
    }
    return hex_string(h);
}

std::string hash_config(const TrainingConfig& cfg) {
    std::ostringstream os;
    os << cfg.tau << '|' << cfg.lr << '|' << cfg.l2 << '|' << cfg.dim << '|'
       << cfg.batch_size << '|' << cfg.n_negatives << '|' << cfg.in_batch_negatives << '|'
       << cfg.max_epochs << '|' << cfg.patience << '|' << cfg.shortcut_pretrain_epochs << '|'
       << cfg.seed;
    return hex_string(fnv1a64(os.str()));
}

void print_split_diagnostics(const InteractionDataset& ds, const DatasetSplits& splits) {
    std::printf("users=%d items=%d interactions=%zu sparsity=%.5f\n", ds.n_users, ds.n_items,
                ds.interactions.size(),
                static_cast<double>(ds.interactions.size()) /
                    (static_cast<double>(ds.n_users) * ds.n_items));
    auto line = [&](const char* name, const std::vector<Interaction>& list) {
        if (list.empty()) {
            std::printf("%-10s n=%-8zu kl_to_uniform=-\n", name, list.size());
        } else {
            std::printf("%-10s n=%-8zu kl_to_uniform=%.3f\n", name, list.size(),
                        kl_to_uniform(list, ds.n_items));
        }
    };
    line("train", splits.train);
    line("id_valid", splits.id_valid);
    line("id_test", splits.id_test);
    line("ood_test", splits.ood_test);
}

TrainingConfig resolve_config(const std::string& config_path, Arch arch) {
    TrainingConfig cfg;
    std::unordered_set<std::string> present;
    if (!config_path.empty()) {
        ParsedTrainingConfig parsed = load_training_config(config_path);
        cfg = parsed.config;
        present = parsed.keys_present;
    }
    const char* all_keys[] = {"tau", "lr", "l2", "dim", "batch_size",
                              "n_negatives", "in_batch_negatives", "max_epochs",
                              "patience", "shortcut_pretrain_epochs", "seed"};
    for (const char* key : all_keys) {
        if (!present.count(key)) {
            std::cout << "config: '" << key << "' not set, using default\n";
        }
    }
    if (arch == Arch::LightGCN && !present.count("in_batch_negatives")) {
        cfg.in_batch_negatives = true;
        std::cout << "config: in_batch_negatives defaulted to true for lightgcn\n";
    }
    cfg.seed = effective_seed(cfg.seed);
    cfg.validate();
    return cfg;
}

int cmd_prepare(const std::string& input, int k_core, const std::string& split_kind,
                std::uint64_t seed, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_out_dir(opts.out_dir, opts.force);
    seed = effective_seed(seed);

    InteractionDataset ds = load_interactions(input);
    if (k_core > 1) {
        ds = apply_k_core(ds, k_core);
        if (ds.interactions.empty()) {
            std::cerr << "error: " << k_core << "-core filtering removed every interaction\n";
            return 1;
        }
    }
    DatasetSplits splits;
    if (split_kind == "id_ood") {
        splits = split_id_ood(ds, seed);
    } else {
        splits = split_temporal(ds);
        splits.seed = seed;
    }
    std::string splits_dir = opts.out_dir + "/splits";
    save_splits(splits_dir, ds, splits);
    print_split_diagnostics(ds, splits);

    RunManifest man;
    man.command = "prepare";
    man.config_hash = hex_string(fnv1a64(split_kind + "|" + std::to_string(k_core)));
    man.data_hash = hex_string(fnv1a64_file(input));
    man.seed = seed;
    man.wallclock_s = opts.strict ? 0.0 : now_s(t0);
    man.outputs = {"splits/train.tsv", "splits/id_valid.tsv", "splits/id_test.tsv",
                   "splits/ood_test.tsv", "splits/split_manifest.txt"};
    write_run_manifest(opts.out_dir + "/run_manifest.txt", man);
    return 0;
}

int cmd_synth(const SynthConfig& base, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_out_dir(opts.out_dir, opts.force);
    SynthConfig cfg = base;
    cfg.seed = effective_seed(cfg.seed);

    SynthData data = generate(cfg);
    save_interactions(opts.out_dir + "/interactions.tsv", data.dataset);
    save_splits(opts.out_dir + "/splits", data.dataset, data.splits);
    save_truth(opts.out_dir + "/truth.bin", cfg.n_users, cfg.n_items, data.truth);
    print_split_diagnostics(data.dataset, data.splits);

    RunManifest man;
    man.command = "synth";
    std::ostringstream os;
    os << cfg.n_users << '|' << cfg.n_items << '|' << cfg.latent_dim << '|'
       << cfg.conformity << '|' << cfg.zipf_exponent << '|' << cfg.interactions_per_user;
    man.config_hash = hex_string(fnv1a64(os.str()));
    man.data_hash = hex_string(fnv1a64(os.str() + "|" + std::to_string(cfg.seed)));
    man.seed = cfg.seed;
    man.wallclock_s = opts.strict ? 0.0 : now_s(t0);
    man.outputs = {"interactions.tsv", "splits/", "truth.bin"};
    write_run_manifest(opts.out_dir + "/run_manifest.txt", man);
    return 0;
}

int cmd_train(const std::string& arch_name, const std::string& mode_name,
              const std::string& config_path, const std::string& splits_dir, int layers,
              const std::string& score_name, int k, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Arch arch = arch_from_string(arch_name);
    TrainMode mode = train_mode_from_string(mode_name);
    ScoreKind score = score_kind_from_string(score_name);
    ensure_out_dir(opts.out_dir, opts.force);
    TrainingConfig cfg = resolve_config(config_path, arch);

    LoadedSplits loaded = load_splits(splits_dir);
    PipelineResult res = run_training(mode, arch, score, layers, loaded.dataset,
                                      loaded.splits, cfg, k);

    save_model(opts.out_dir + "/target.ckpt", res.model);
    if (opts.strict) {
        for (EpochLog& e : res.log.epochs) e.wall_s = 0.0;
    }
    write_training_log(opts.out_dir + "/training_log.tsv", res.log);
    write_training_config(opts.out_dir + "/config_used.txt", cfg);
    RunManifest man;
    man.command = "train";
    man.config_hash = hash_config(cfg);
    man.data_hash = hash_splits_dir(splits_dir);
    man.seed = cfg.seed;
    man.outputs = {"target.ckpt", "model_manifest.txt", "training_log.tsv", "config_used.txt"};
    if (mode == TrainMode::PopGo) {
        save_shortcut(opts.out_dir, *res.shortcut);
        std::ofstream slog(opts.out_dir + "/shortcut_pretrain_log.tsv");
        slog << "epoch\ttrain_loss\n";
        for (std::size_t e = 0; e < res.shortcut_epoch_losses.size(); ++e) {
            char buf[48];
            std::snprintf(buf, sizeof(buf), "%zu\t%.6f", e, res.shortcut_epoch_losses[e]);
            slog << buf << '\n';
        }
        man.outputs.insert(man.outputs.end(),
                           {"shortcut.ckpt", "shortcut_manifest.txt", "user_pop_vocab.txt",
                            "item_pop_vocab.txt", "shortcut_pretrain_log.tsv"});
    }
    man.wallclock_s = opts.strict ? 0.0 : now_s(t0);
    write_run_manifest(opts.out_dir + "/run_manifest.txt", man);

    std::printf("best_epoch=%d best_valid_recall@%d=%.6f epochs_run=%zu\n", res.log.best_epoch,
                k, res.log.best_valid_recall, res.log.epochs.size());
    return 0;
}

bool report_invariants_hold(const RankingReport& rep, const RankingReport& rep_half_k) {
    auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0 + 1e-12; };
    if (!in_unit(rep.hr) || !in_unit(rep.recall) || !in_unit(rep.ndcg)) return false;
    for (const UserMetrics& um : rep.per_user) {
        if (!in_unit(um.recall) || !in_unit(um.ndcg)) return false;
    }
    // cutting k must not increase hit rate or recall
    if (rep_half_k.hr > rep.hr + 1e-12) return false;
    if (rep_half_k.recall > rep.recall + 1e-12) return false;
    return true;
}

int cmd_eval(const std::string& model_path, bool itempop, const std::string& splits_dir,
             const std::string& which_name, int k, bool check, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_out_dir(opts.out_dir, opts.force);
    LoadedSplits loaded = load_splits(splits_dir);
    EvalSplit which;
    if (which_name == "id_test") {
        which = EvalSplit::IdTest;
    } else if (which_name == "ood_test") {
        which = EvalSplit::OodTest;
    } else if (which_name == "id_valid") {
        which = EvalSplit::IdValid;
    } else {
        throw std::runtime_error("unknown split '" + which_name + "'");
    }

    Scorer scorer;
    std::string model_id;
    if (itempop) {
        PopularityTable pops = build_popularity_table(loaded.splits.train,
                                                      loaded.dataset.n_users,
                                                      loaded.dataset.n_items);
        scorer = itempop_scorer(pops);
        model_id = "itempop";
    } else {
        Model m = load_model(model_path);
        if (m.user_table.rows != loaded.dataset.n_users ||
            m.item_table.rows != loaded.dataset.n_items) {
            throw std::runtime_error("checkpoint shape does not match the splits directory");
        }
        if (m.arch == Arch::LightGCN) {
            m.graph = build_normalized_adjacency(loaded.splits.train, loaded.dataset.n_users,
                                                 loaded.dataset.n_items);
        }
        scorer = model_scorer(m);
        model_id = hex_string(fnv1a64_file(model_path));
    }

    RankingReport rep = evaluate(scorer, loaded.dataset.n_users, loaded.dataset.n_items,
                                 loaded.splits, which, k, opts.threads);
    std::string report_name = "report_" + to_string(which) + ".tsv";
    write_report(opts.out_dir + "/" + report_name, rep);
    std::printf("%s k=%d users=%d HR=%.6f Recall=%.6f NDCG=%.6f\n", to_string(which).c_str(),
                k, rep.n_evaluated_users, rep.hr, rep.recall, rep.ndcg);

    RunManifest man;
    man.command = "eval";
    man.config_hash = hex_string(fnv1a64(model_id + "|" + which_name + "|" + std::to_string(k)));
    man.data_hash = hash_splits_dir(splits_dir);
    man.seed = loaded.splits.seed;
    man.wallclock_s = opts.strict ? 0.0 : now_s(t0);
    man.outputs = {report_name};
    write_run_manifest(opts.out_dir + "/run_manifest.txt", man);

    if (check) {
        RankingReport rep_half = evaluate(scorer, loaded.dataset.n_users,
                                          loaded.dataset.n_items, loaded.splits, which,
                                          std::max(1, k / 2), opts.threads);
        if (!report_invariants_hold(rep, rep_half)) {
            std::cerr << "error: ranking-report invariants violated\n";
            return 2;
        }
        std::cout << "check: report invariants hold\n";
    }
    return 0;
}

int cmd_analyze(const std::string& arch_name, const std::string& config_path,
                const std::string& splits_dir, int layers, const std::string& score_name,
                const std::string& target_path, const std::string& shortcut_dir,
                std::vector<double> taus, int k, const CommonOpts& opts) {
    const auto t0 = std::chrono::steady_clock::now();
    Arch arch = arch_from_string(arch_name);
    ScoreKind score = score_kind_from_string(score_name);
    ensure_out_dir(opts.out_dir, opts.force);
    TrainingConfig cfg = resolve_config(config_path, arch);
    LoadedSplits loaded = load_splits(splits_dir);
    const InteractionDataset& ds = loaded.dataset;

    // ablation: PopGo vs PopGo-S under the same seed
    AblationResult ablation = run_ablation_popgo_s(arch, score, layers, ds, loaded.splits,
                                                   cfg, k);
    {
        std::ofstream out(opts.out_dir + "/ablation.tsv");
        out << "model\tsplit\thr@" << k << "\trecall@" << k << "\tndcg@" << k << '\n';
        auto row = [&](const char* name, const char* split, const RankingReport& r) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "%s\t%s\t%.6f\t%.6f\t%.6f", name, split, r.hr,
                          r.recall, r.ndcg);
            out << buf << '\n';
        };
        row("popgo", "id", ablation.reports.popgo_id);
        row("popgo", "ood", ablation.reports.popgo_ood);
        row("popgo_s", "id", ablation.reports.popgo_s_id);
        row("popgo_s", "ood", ablation.reports.popgo_s_ood);
    }

    // correlation: supplied checkpoints win; otherwise the ablation's models
    CorrelationReport corr;
    if (!target_path.empty() && !shortcut_dir.empty()) {
        Model m = load_model(target_path);
        NormalizedAdjacency graph;
        const NormalizedAdjacency* graph_ptr = nullptr;
        if (m.arch == Arch::LightGCN) {
            graph = build_normalized_adjacency(loaded.splits.train, ds.n_users, ds.n_items);
            m.graph = graph;
            graph_ptr = &graph;
        }
        ShortcutModel sm = load_shortcut(shortcut_dir, loaded.splits.train, ds.n_users,
                                         ds.n_items, graph_ptr);
        corr = correlation_analysis(m, sm, loaded.splits, cfg.tau, cfg.n_negatives, cfg.seed);
    } else {
        corr = correlation_analysis(ablation.popgo.model, *ablation.popgo.shortcut,
                                    loaded.splits, cfg.tau, cfg.n_negatives, cfg.seed);
    }
    {
        std::ofstream out(opts.out_dir + "/correlation.tsv");
        char buf[96];
        out << "r_alpha\tr_masked\tn\n";
        std::snprintf(buf, sizeof(buf), "%.6f\t%.6f\t%zu", corr.r_alpha, corr.r_masked, corr.n);
        out << buf << '\n';
    }

    std::vector<TauSweepRow> sweep = tau_sweep(arch, score, layers, ds, loaded.splits, cfg,
                                               taus, k);
    {
        std::ofstream out(opts.out_dir + "/tau_sweep.tsv");
        out << "tau\tid_recall@" << k << "\tood_recall@" << k << '\n';
        for (const TauSweepRow& row : sweep) {
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%.4f\t%.6f\t%.6f", row.tau, row.id_recall,
                          row.ood_recall);
            out << buf << '\n';
        }
    }

    RunManifest man;
    man.command = "analyze";
    man.config_hash = hash_config(cfg);
    man.data_hash = hash_splits_dir(splits_dir);
    man.seed = cfg.seed;
    man.wallclock_s = opts.strict ? 0.0 : now_s(t0);
    man.outputs = {"ablation.tsv", "correlation.tsv", "tau_sweep.tsv"};
    write_run_manifest(opts.out_dir + "/run_manifest.txt", man);

    std::printf("r_alpha=%.4f r_masked=%.4f popgo_ood_recall=%.6f popgo_s_ood_recall=%.6f\n",
                corr.r_alpha, corr.r_masked, ablation.reports.popgo_ood.recall,
                ablation.reports.popgo_s_ood.recall);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PopGo: popularity-shortcut debiasing for collaborative filtering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    // prepare
    auto* prepare = app.add_subcommand("prepare", "k-core filter and split an interaction log");
    std::string prep_input, prep_split = "id_ood";
    int prep_kcore = 10;
    std::uint64_t prep_seed = 0;
    CommonOpts prep_opts;
    prepare->add_option("--input", prep_input, "interactions.tsv")->required();
    prepare->add_option("--k-core", prep_kcore, "minimum user/item degree (default 10)");
    prepare->add_option("--split", prep_split, "id_ood|temporal")
        ->check(CLI::IsMember({"id_ood", "temporal"}));
    prepare->add_option("--seed", prep_seed, "split seed");
    prepare->add_option("--out", prep_opts.out_dir, "output directory")->required();
    prepare->add_flag("--force", prep_opts.force, "overwrite existing outputs");
    prepare->add_flag("--strict-determinism", prep_opts.strict, "byte-identical reruns");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a shortcut-planted synthetic dataset");
    SynthConfig synth_cfg;
    CommonOpts synth_opts;
    synth->add_option("--users", synth_cfg.n_users, "number of users");
    synth->add_option("--items", synth_cfg.n_items, "number of items");
    synth->add_option("--latent-dim", synth_cfg.latent_dim, "latent preference dimension");
    synth->add_option("--gamma", synth_cfg.conformity, "conformity weight in [0,1]");
    synth->add_option("--zipf-s", synth_cfg.zipf_exponent, "exposure Zipf exponent");
    synth->add_option("--per-user", synth_cfg.interactions_per_user, "interactions per user");
    synth->add_option("--seed", synth_cfg.seed, "generator seed");
    synth->add_option("--out", synth_opts.out_dir, "output directory")->required();
    synth->add_flag("--force", synth_opts.force, "overwrite existing outputs");
    synth->add_flag("--strict-determinism", synth_opts.strict, "byte-identical reruns");

    // train
    auto* train = app.add_subcommand("train", "train a plain, PopGo or PopGo-S model");
    std::string train_arch = "mf", train_mode = "popgo", train_config, train_splits;
    std::string train_score = "cosine";
    int train_layers = 2, train_k = 20;
    CommonOpts train_opts;
    train->add_option("--arch", train_arch, "mf|lightgcn")
        ->check(CLI::IsMember({"mf", "lightgcn"}));
    train->add_option("--mode", train_mode, "plain|popgo|popgo_s")
        ->check(CLI::IsMember({"plain", "popgo", "popgo_s"}));
    train->add_option("--config", train_config, "key = value training config");
    train->add_option("--splits", train_splits, "splits directory")->required();
    train->add_option("--layers", train_layers, "LightGCN propagation layers (default 2)");
    train->add_option("--score", train_score, "cosine|inner|sigmoid_inner")
        ->check(CLI::IsMember({"cosine", "inner", "sigmoid_inner"}));
    train->add_option("--k", train_k, "validation cutoff (default 20)");
    train->add_option("--threads", train_opts.threads, "worker cap");
    train->add_option("--out", train_opts.out_dir, "output directory")->required();
    train->add_flag("--force", train_opts.force, "overwrite existing outputs");
    train->add_flag("--strict-determinism", train_opts.strict, "byte-identical reruns");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "all-ranking evaluation of a checkpoint");
    std::string eval_model, eval_splits, eval_which = "id_test";
    bool eval_itempop = false, eval_check = false;
    int eval_k = 20;
    CommonOpts eval_opts;
    eval_cmd->add_option("--model", eval_model, "target checkpoint path");
    eval_cmd->add_flag("--itempop", eval_itempop, "evaluate the ItemPop baseline");
    eval_cmd->add_option("--splits", eval_splits, "splits directory")->required();
    eval_cmd->add_option("--which", eval_which, "id_test|ood_test|id_valid")
        ->check(CLI::IsMember({"id_test", "ood_test", "id_valid"}));
    eval_cmd->add_option("--k", eval_k, "ranking cutoff (default 20)");
    eval_cmd->add_flag("--check", eval_check, "verify report invariants; nonzero exit on failure");
    eval_cmd->add_option("--threads", eval_opts.threads, "worker cap");
    eval_cmd->add_option("--out", eval_opts.out_dir, "output directory")->required();
    eval_cmd->add_flag("--force", eval_opts.force, "overwrite existing outputs");
    eval_cmd->add_flag("--strict-determinism", eval_opts.strict, "byte-identical reruns");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "ablation, loss correlation and tau sweep");
    std::string an_arch = "mf", an_config, an_splits, an_score = "cosine";
    std::string an_target, an_shortcut;
    std::vector<double> an_taus = {0.05, 0.06, 0.07, 0.08, 0.1};
    int an_layers = 2, an_k = 20;
    CommonOpts an_opts;
    analyze->add_option("--arch", an_arch, "mf|lightgcn")
        ->check(CLI::IsMember({"mf", "lightgcn"}));
    analyze->add_option("--config", an_config, "key = value training config");
    analyze->add_option("--splits", an_splits, "splits directory")->required();
    analyze->add_option("--layers", an_layers, "LightGCN propagation layers");
    analyze->add_option("--score", an_score, "cosine|inner|sigmoid_inner")
        ->check(CLI::IsMember({"cosine", "inner", "sigmoid_inner"}));
    analyze->add_option("--target", an_target, "existing target checkpoint for correlation");
    analyze->add_option("--shortcut", an_shortcut, "existing shortcut checkpoint directory");
    analyze->add_option("--taus", an_taus, "temperatures to sweep")->expected(-1);
    analyze->add_option("--k", an_k, "ranking cutoff");
    analyze->add_option("--threads", an_opts.threads, "worker cap");
    analyze->add_option("--out", an_opts.out_dir, "output directory")->required();
    analyze->add_flag("--force", an_opts.force, "overwrite existing outputs");
    analyze->add_flag("--strict-determinism", an_opts.strict, "byte-identical reruns");

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) {
            return cmd_prepare(prep_input, prep_kcore, prep_split, prep_seed, prep_opts);
        }
        if (synth->parsed()) {
            return cmd_synth(synth_cfg, synth_opts);
        }
        if (train->parsed()) {
            if (train_opts.strict) train_opts.threads = 1;
            return cmd_train(train_arch, train_mode, train_config, train_splits, train_layers,
                             train_score, train_k, train_opts);
        }
        if (eval_cmd->parsed()) {
            if (eval_opts.strict) eval_opts.threads = 1;
            if (!eval_itempop && eval_model.empty()) {
                std::cerr << "error: pass --model or --itempop\n";
                return 1;
            }
            return cmd_eval(eval_model, eval_itempop, eval_splits, eval_which, eval_k,
                            eval_check, eval_opts);
        }
        if (analyze->parsed()) {
            if (an_opts.strict) an_opts.threads = 1;
            return cmd_analyze(an_arch, an_config, an_splits, an_layers, an_score, an_target,
                               an_shortcut, an_taus, an_k, an_opts);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
