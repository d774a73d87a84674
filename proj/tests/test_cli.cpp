#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nsotree/runner.hpp"

namespace fs = std::filesystem;
using namespace nsotree;

namespace {

std::string cli_path() {
    const char* p = std::getenv("NSOTREE_CLI");
    REQUIRE_MESSAGE(p != nullptr, "NSOTREE_CLI must point at the built binary");
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE_MESSAGE(f.good(), "missing file: " << p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / ("nsotree_cli_" + name);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string sub(const std::string& s) const { return (path / s).string(); }
};

}  // namespace

TEST_CASE("usage errors exit with status 2") {
    CHECK(run_cli("train") == 2);                      // missing required flags
    CHECK(run_cli("") == 2);                           // missing subcommand
    CHECK(run_cli("bogus-subcommand") == 2);
    CHECK(run_cli("simulate --n 50") == 2);            // no --out and no NSOTREE_OUT
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("simulate --help") == 0);
}

TEST_CASE("NSOTREE_OUT provides the default output directory") {
    TempDir dir("envout");
    const std::string cmd = "NSOTREE_OUT=" + dir.path.string() + " " + cli_path() +
                            " simulate --risk linear --n 60 --seed 1 >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    CHECK(WEXITSTATUS(status) == 0);
    CHECK(fs::exists(dir.path / "simulate" / "train.csv"));
}

TEST_CASE("config file supplies defaults that flags override") {
    TempDir dir("cfgfile");
    {
        std::ofstream f(dir.path / "run.cfg");
        f << "[simulate]\n"
          << "risk = gaussian\n"
          << "n = 80\n"
          << "seed = 7\n";
    }
    const std::string out = dir.sub("sim");
    CHECK(run_cli("--config " + (dir.path / "run.cfg").string() + " simulate --out " + out) == 0);
    const std::string meta = slurp(out + "/sim_meta.json");
    CHECK(meta.find("\"risk\": \"gaussian\"") != std::string::npos);
    CHECK(meta.find("\"n_train\": 80") != std::string::npos);

    // a flag wins over the config file
    const std::string out2 = dir.sub("sim2");
    CHECK(run_cli("--config " + (dir.path / "run.cfg").string() +
                  " simulate --risk linear --out " + out2) == 0);
    CHECK(slurp(out2 + "/sim_meta.json").find("\"risk\": \"linear\"") != std::string::npos);
}

TEST_CASE("runtime failures exit with status 1") {
    TempDir dir("runtime_fail");
    CHECK(run_cli("train --train /nonexistent.csv --valid /nonexistent.csv --out " +
                  dir.sub("t")) == 1);
    CHECK(run_cli("eval --checkpoint /nonexistent.ckpt --test /nonexistent.csv --out " +
                  dir.sub("e")) == 1);
}

TEST_CASE("simulate -> train -> eval -> extract pipeline") {
    TempDir dir("pipeline");
    const std::string sim = dir.sub("sim");
    CHECK(run_cli("simulate --risk linear --n 240 --seed 9 --out " + sim) == 0);
    CHECK(fs::exists(sim + "/train.csv"));
    CHECK(fs::exists(sim + "/valid.csv"));
    CHECK(fs::exists(sim + "/test.csv"));
    CHECK(fs::exists(sim + "/sim_meta.json"));
    CHECK(fs::exists(sim + "/manifest.json"));

    const std::string model = dir.sub("model");
    CHECK(run_cli("train --train " + sim + "/train.csv --valid " + sim +
                  "/valid.csv --model linear --epochs 20 --batch 128 --seed 3 --out " + model) == 0);
    CHECK(fs::exists(model + "/checkpoint.txt"));
    CHECK(fs::exists(model + "/report.csv"));

    const std::string ev = dir.sub("eval");
    CHECK(run_cli("eval --checkpoint " + model + "/checkpoint.txt --test " + sim +
                  "/test.csv --bootstrap 50 --truth " + sim + "/sim_meta.json --out " + ev) == 0);
    const std::string metrics = slurp(ev + "/metrics.csv");
    CHECK(metrics.find("cindex,") != std::string::npos);
    CHECK(metrics.find("ibs,") != std::string::npos);
    CHECK(metrics.find("pearson_r,") != std::string::npos);
    CHECK(fs::exists(ev + "/brier_curve.csv"));

    const std::string ex = dir.sub("tree");
    CHECK(run_cli("extract --checkpoint " + model + "/checkpoint.txt --data " + sim +
                  "/train.csv --format text --out " + ex) == 0);
    CHECK(fs::exists(ex + "/tree.txt"));
    CHECK(fs::exists(ex + "/splits.csv"));
}

TEST_CASE("train with --epochs 0 still writes a checkpoint and exits 0") {
    TempDir dir("zero_epochs");
    const std::string sim = dir.sub("sim");
    REQUIRE(run_cli("simulate --risk linear --n 120 --seed 2 --out " + sim) == 0);
    const std::string model = dir.sub("model");
    CHECK(run_cli("train --train " + sim + "/train.csv --valid " + sim +
                  "/valid.csv --epochs 0 --depth 3 --out " + model) == 0);
    CHECK(fs::exists(model + "/checkpoint.txt"));
}

TEST_CASE("reruns with identical inputs produce byte-identical outputs") {
    TempDir dir("determinism");
    runner::SimulateOptions sim_opt;
    sim_opt.risk = RiskKind::Gaussian;
    sim_opt.n_train = 200;
    sim_opt.seed = 4;

    sim_opt.out_dir = dir.sub("sim_a");
    runner::run_simulate(sim_opt);
    sim_opt.out_dir = dir.sub("sim_b");
    runner::run_simulate(sim_opt);
    for (const char* f : {"train.csv", "valid.csv", "test.csv", "sim_meta.json", "manifest.json"})
        CHECK(slurp(dir.path / "sim_a" / f) == slurp(dir.path / "sim_b" / f));

    runner::TrainOptions tr;
    tr.train_csv = dir.sub("sim_a") + "/train.csv";
    tr.valid_csv = dir.sub("sim_a") + "/valid.csv";
    tr.config.depth = 4;
    tr.config.batch_size = 128;
    tr.config.max_epochs = 10;
    tr.config.patience = 10;
    tr.config.seed = 6;
    tr.out_dir = dir.sub("model_a");
    runner::run_train(tr);
    tr.out_dir = dir.sub("model_b");
    runner::run_train(tr);
    for (const char* f : {"checkpoint.txt", "report.csv", "manifest.json"})
        CHECK(slurp(dir.path / "model_a" / f) == slurp(dir.path / "model_b" / f));
}

TEST_CASE("sweep and crossval commands emit their tables") {
    TempDir dir("sweep_cv");
    const std::string sim = dir.sub("sim");
    REQUIRE(run_cli("simulate --risk linear --n 150 --seed 5 --out " + sim) == 0);

    const std::string sw = dir.sub("sweep");
    CHECK(run_cli("sweep --kind depth --train " + sim + "/train.csv --valid " + sim +
                  "/valid.csv --test " + sim + "/test.csv --range 1:39:2 --epochs 2 --patience 1 "
                  "--batch 64 --out " + sw) == 0);
    std::istringstream rows(slurp(sw + "/sweep.csv"));
    std::string line;
    int count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 21);  // header + depths 1,3,...,39

    const std::string lw = dir.sub("lambda");
    CHECK(run_cli("sweep --kind lambda --train " + sim + "/train.csv --valid " + sim +
                  "/valid.csv --test " + sim + "/test.csv --values 0,1e-2 --epochs 3 --patience 3 "
                  "--depth 3 --batch 64 --out " + lw) == 0);
    const std::string lambda_table = slurp(lw + "/sweep.csv");
    CHECK(lambda_table.find("lambda,sparsity,test_cindex") != std::string::npos);

    const std::string cv = dir.sub("cv");
    CHECK(run_cli("crossval --data " + sim + "/train.csv --k 3 --depth 2 --epochs 3 "
                  "--patience 3 --batch 64 --out " + cv) == 0);
    const std::string table = slurp(cv + "/crossval.csv");
    CHECK(table.find("fold,cindex") != std::string::npos);
    CHECK(table.find("mean,") != std::string::npos);
    CHECK(table.find("std,") != std::string::npos);
}

TEST_CASE("eval fails loudly when the baseline reference is missing") {
    TempDir dir("no_baseline");
    const std::string sim = dir.sub("sim");
    REQUIRE(run_cli("simulate --risk linear --n 120 --seed 8 --out " + sim) == 0);
    const std::string model = dir.sub("model");
    REQUIRE(run_cli("train --train " + sim + "/train.csv --valid " + sim +
                    "/valid.csv --model linear --epochs 5 --batch 64 --out " + model) == 0);
    // break the recorded training-data path
    fs::remove(sim + "/train.csv");
    CHECK(run_cli("eval --checkpoint " + model + "/checkpoint.txt --test " + sim +
                  "/test.csv --out " + dir.sub("eval")) == 1);
}
