// End-to-end checks of the command-line surface: runs the real binary
// through synth -> prepare -> train -> eval -> analyze and verifies exit
// codes, artifacts and the documented error contracts.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = POPGO_CLI_PATH;

struct RunResult {
    int exit_code;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string out_file = "/tmp/popgo_cli_out.txt";
    const std::string cmd = kCli + " " + args + " > " + out_file + " 2>&1";
    int status = std::system(cmd.c_str());
    std::ifstream in(out_file);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    int code = -1;
    if (WIFEXITED(status)) code = WEXITSTATUS(status);
    return {code, text};
}

struct Workspace {
    fs::path root;
    Workspace() : root(fs::temp_directory_path() / "popgo_cli_ws") {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~Workspace() { fs::remove_all(root); }
    std::string path(const std::string& rel) const { return (root / rel).string(); }
};

std::string tiny_config(const Workspace& ws) {
    std::string path = ws.path("config.txt");
    std::ofstream out(path);
    out << "dim = 8\n"
           "batch_size = 64\n"
           "n_negatives = 8\n"
           "max_epochs = 3\n"
           "patience = 2\n"
           "shortcut_pretrain_epochs = 2\n"
           "seed = 7\n";
    return path;
}

std::string synth_args(const Workspace& ws, const std::string& out) {
    return "synth --users 60 --items 40 --per-user 8 --seed 3 --out " + ws.path(out);
}

}  // namespace

TEST_CASE("synth emits dataset, splits, truth and manifest") {
    Workspace ws;
    RunResult res = run(synth_args(ws, "synth"));
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(ws.path("synth/interactions.tsv")));
    CHECK(fs::exists(ws.path("synth/splits/train.tsv")));
    CHECK(fs::exists(ws.path("synth/splits/ood_test.tsv")));
    CHECK(fs::exists(ws.path("synth/truth.bin")));
    CHECK(fs::exists(ws.path("synth/run_manifest.txt")));
    CHECK(res.output.find("kl_to_uniform") != std::string::npos);

    // refuses to overwrite without --force
    RunResult again = run(synth_args(ws, "synth"));
    CHECK(again.exit_code != 0);
    CHECK(again.output.find("--force") != std::string::npos);
    RunResult forced = run(synth_args(ws, "synth") + " --force");
    CHECK(forced.exit_code == 0);
}

TEST_CASE("prepare splits a raw interaction file and prints diagnostics") {
    Workspace ws;
    // k-core friendly grid: 12 users x 10 items, every pair
    std::string input = ws.path("interactions.tsv");
    {
        std::ofstream out(input);
        for (int u = 0; u < 12; ++u) {
            for (int i = 0; i < 10; ++i) out << "u" << u << "\ti" << i << "\n";
        }
    }
    RunResult res = run("prepare --input " + input + " --k-core 2 --seed 5 --out " +
                        ws.path("prep"));
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(ws.path("prep/splits/train.tsv")));
    CHECK(fs::exists(ws.path("prep/splits/split_manifest.txt")));
    CHECK(res.output.find("train") != std::string::npos);

    // manifest names the four split files
    std::ifstream man(ws.path("prep/run_manifest.txt"));
    std::string text((std::istreambuf_iterator<char>(man)), std::istreambuf_iterator<char>());
    CHECK(text.find("train.tsv") != std::string::npos);
    CHECK(text.find("id_valid.tsv") != std::string::npos);
    CHECK(text.find("id_test.tsv") != std::string::npos);
    CHECK(text.find("ood_test.tsv") != std::string::npos);
}

TEST_CASE("prepare with temporal split demands timestamps") {
    Workspace ws;
    std::string input = ws.path("no_ts.tsv");
    {
        std::ofstream out(input);
        out << "a\tx\nb\ty\na\ty\nb\tx\n";
    }
    RunResult res = run("prepare --input " + input + " --k-core 1 --split temporal --out " +
                        ws.path("prep"));
    CHECK(res.exit_code != 0);
    CHECK(res.output.find("timestamp") != std::string::npos);
}

TEST_CASE("exactly uniform ood fixture prints a 0.000 KL line") {
    Workspace ws;
    std::string input = ws.path("uniform.tsv");
    {
        std::ofstream out(input);
        for (int u = 0; u < 10; ++u) {
            for (int i = 0; i < 10; ++i) out << "u" << u << "\ti" << i << "\n";
        }
    }
    RunResult res = run("prepare --input " + input + " --k-core 1 --seed 1 --out " +
                        ws.path("prep"));
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("ood_test   n=20       kl_to_uniform=0.000") != std::string::npos);
}

TEST_CASE("train/eval/analyze round trip on a small synthetic dataset") {
    Workspace ws;
    REQUIRE(run(synth_args(ws, "synth")).exit_code == 0);
    std::string cfg = tiny_config(ws);
    std::string splits = ws.path("synth/splits");

    // popgo mode: target + shortcut checkpoints
    RunResult train = run("train --arch mf --mode popgo --config " + cfg + " --splits " +
                          splits + " --out " + ws.path("run_popgo"));
    CHECK(train.exit_code == 0);
    CHECK(fs::exists(ws.path("run_popgo/target.ckpt")));
    CHECK(fs::exists(ws.path("run_popgo/shortcut.ckpt")));
    CHECK(fs::exists(ws.path("run_popgo/user_pop_vocab.txt")));
    CHECK(fs::exists(ws.path("run_popgo/item_pop_vocab.txt")));
    CHECK(fs::exists(ws.path("run_popgo/training_log.tsv")));
    CHECK(fs::exists(ws.path("run_popgo/model_manifest.txt")));
    CHECK(train.output.find("best_epoch") != std::string::npos);
    // keys absent from the config file fall back to defaults, and say so
    CHECK(train.output.find("'tau' not set, using default") != std::string::npos);

    // popgo_s mode: no shortcut checkpoint
    RunResult train_s = run("train --arch mf --mode popgo_s --config " + cfg + " --splits " +
                            splits + " --out " + ws.path("run_popgo_s"));
    CHECK(train_s.exit_code == 0);
    CHECK(fs::exists(ws.path("run_popgo_s/target.ckpt")));
    CHECK(!fs::exists(ws.path("run_popgo_s/shortcut.ckpt")));

    // eval with default and custom k
    RunResult ev = run("eval --model " + ws.path("run_popgo/target.ckpt") + " --splits " +
                       splits + " --which ood_test --check --out " + ws.path("eval_ood"));
    CHECK(ev.exit_code == 0);
    CHECK(fs::exists(ws.path("eval_ood/report_ood_test.tsv")));
    CHECK(ev.output.find("k=20") != std::string::npos);
    CHECK(ev.output.find("report invariants hold") != std::string::npos);

    RunResult ev10 = run("eval --model " + ws.path("run_popgo/target.ckpt") + " --splits " +
                         splits + " --which id_test --k 10 --out " + ws.path("eval_id"));
    CHECK(ev10.exit_code == 0);
    CHECK(ev10.output.find("k=10") != std::string::npos);

    RunResult pop = run("eval --itempop --splits " + splits + " --which id_test --out " +
                        ws.path("eval_pop"));
    CHECK(pop.exit_code == 0);

    // nonexistent model path is an error
    RunResult missing = run("eval --model " + ws.path("nope.ckpt") + " --splits " + splits +
                            " --which id_test --out " + ws.path("eval_missing"));
    CHECK(missing.exit_code != 0);

    // analyze: ablation + correlation + tau sweep shapes
    RunResult an = run("analyze --arch mf --config " + cfg + " --splits " + splits +
                       " --taus 0.07 0.1 --out " + ws.path("analyze"));
    CHECK(an.exit_code == 0);
    {
        std::ifstream in(ws.path("analyze/ablation.tsv"));
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        CHECK(text.find("popgo\tid") != std::string::npos);
        CHECK(text.find("popgo\tood") != std::string::npos);
        CHECK(text.find("popgo_s\tid") != std::string::npos);
        CHECK(text.find("popgo_s\tood") != std::string::npos);
    }
    {
        std::ifstream in(ws.path("analyze/tau_sweep.tsv"));
        std::string line;
        int rows = 0;
        while (std::getline(in, line)) ++rows;
        CHECK(rows == 3);  // header + one row per tau
    }
    {
        std::ifstream in(ws.path("analyze/correlation.tsv"));
        std::string header, values;
        std::getline(in, header);
        std::getline(in, values);
        CHECK(header == "r_alpha\tr_masked\tn");
        CHECK(!values.empty());
    }
}

TEST_CASE("lightgcn training works and defaults to in-batch negatives") {
    Workspace ws;
    REQUIRE(run(synth_args(ws, "synth")).exit_code == 0);
    std::string cfg = tiny_config(ws);
    RunResult res = run("train --arch lightgcn --layers 2 --mode popgo --config " + cfg +
                        " --splits " + ws.path("synth/splits") + " --out " + ws.path("gcn"));
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("in_batch_negatives defaulted to true") != std::string::npos);
    CHECK(fs::exists(ws.path("gcn/target.ckpt")));
    CHECK(fs::exists(ws.path("gcn/shortcut.ckpt")));

    RunResult ev = run("eval --model " + ws.path("gcn/target.ckpt") + " --splits " +
                       ws.path("synth/splits") + " --which id_test --out " + ws.path("gcn_eval"));
    CHECK(ev.exit_code == 0);
}

TEST_CASE("temporal prepare slices by timestamp and leaves ood empty") {
    Workspace ws;
    std::string input = ws.path("ts.tsv");
    {
        std::ofstream out(input);
        for (int t = 0; t < 200; ++t) {
            out << "u" << (t % 8) << "\ti" << (t % 25) << "\t" << 1000 + t << "\n";
        }
    }
    RunResult res = run("prepare --input " + input + " --k-core 2 --split temporal --out " +
                        ws.path("prep"));
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(ws.path("prep/splits/ood_test.tsv")));
    CHECK(fs::file_size(ws.path("prep/splits/ood_test.tsv")) == 0);
    std::ifstream man(ws.path("prep/splits/split_manifest.txt"));
    std::string text((std::istreambuf_iterator<char>(man)), std::istreambuf_iterator<char>());
    CHECK(text.find("split_kind=temporal") != std::string::npos);
}

TEST_CASE("same-seed reruns are byte-identical in strict mode") {
    Workspace ws;
    REQUIRE(run(synth_args(ws, "synth")).exit_code == 0);
    std::string cfg = tiny_config(ws);
    std::string splits = ws.path("synth/splits");
    REQUIRE(run("train --arch mf --mode popgo --config " + cfg + " --splits " + splits +
                " --strict-determinism --out " + ws.path("a")).exit_code == 0);
    REQUIRE(run("train --arch mf --mode popgo --config " + cfg + " --splits " + splits +
                " --strict-determinism --out " + ws.path("b")).exit_code == 0);
    for (const char* name : {"target.ckpt", "shortcut.ckpt", "training_log.tsv",
                             "user_pop_vocab.txt", "item_pop_vocab.txt", "run_manifest.txt"}) {
        std::ifstream fa(ws.path("a/") + name, std::ios::binary);
        std::ifstream fb(ws.path("b/") + name, std::ios::binary);
        std::string da((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string db((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CAPTURE(name);
        CHECK(da == db);
    }
}

TEST_CASE("POPGO_SEED overrides the configured seed") {
    Workspace ws;
    REQUIRE(run(synth_args(ws, "synth")).exit_code == 0);
    std::string cfg = tiny_config(ws);
    std::string splits = ws.path("synth/splits");
    RunResult res = run("train --arch mf --mode plain --config " + cfg + " --splits " + splits +
                        " --out " + ws.path("seeded"));
    REQUIRE(res.exit_code == 0);
    setenv("POPGO_SEED", "99", 1);
    RunResult overridden = run("train --arch mf --mode plain --config " + cfg + " --splits " +
                               splits + " --out " + ws.path("override"));
    unsetenv("POPGO_SEED");
    REQUIRE(overridden.exit_code == 0);
    CHECK(overridden.output.find("seed=99") != std::string::npos);
    std::ifstream ma(ws.path("seeded/run_manifest.txt"));
    std::ifstream mb(ws.path("override/run_manifest.txt"));
    std::string da((std::istreambuf_iterator<char>(ma)), std::istreambuf_iterator<char>());
    std::string db((std::istreambuf_iterator<char>(mb)), std::istreambuf_iterator<char>());
    CHECK(da.find("seed=7") != std::string::npos);
    CHECK(db.find("seed=99") != std::string::npos);
}
