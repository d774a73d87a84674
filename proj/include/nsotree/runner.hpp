#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsotree/ingest.hpp"
#include "nsotree/simdata.hpp"
#include "nsotree/trainer.hpp"

namespace nsotree::runner {

/// Version string stamped into every run manifest.
extern const char* kToolVersion;

struct SimulateOptions {
    RiskKind risk = RiskKind::Linear;
    int n_train = 4000;
    int d = 10;
    double censor_frac = 0.5;
    double lambda_max = 5.0;
    double r = 0.5;
    std::uint64_t seed = 0;
    std::string out_dir;
};

struct TrainOptions {
    std::string train_csv;
    std::string valid_csv;
    std::string schema_file;  // empty: derive from header (time/event columns)
    bool standardize = true;
    TrainConfig config;
    std::string out_dir;
};

struct EvalOptions {
    std::string checkpoint;
    std::string test_csv;
    std::string train_csv;  // overrides the path recorded in the checkpoint
    std::string schema_file;
    int bootstrap = 0;
    std::uint64_t bootstrap_seed = 0;
    std::string truth_sidecar;       // sim metadata with true risks
    std::string truth_split = "test";
    std::string out_dir;
};

struct ExtractOptions {
    std::string checkpoint;
    std::string data_csv;  // when set, splits are annotated with log-rank results
    std::string schema_file;
    int layers = -1;       // graph rendering / table filter; -1 = all
    std::string format = "graph";
    bool expand = false;
    std::string out_dir;
};

struct SweepOptions {
    std::string kind = "depth";  // "depth" | "lambda"
    std::string train_csv;
    std::string valid_csv;
    std::string test_csv;
    std::string schema_file;
    bool standardize = true;
    std::vector<double> values;
    TrainConfig config;
    std::string out_dir;
};

struct CrossvalOptions {
    std::string data_csv;
    std::string schema_file;
    int folds = 5;
    TrainConfig config;
    std::string out_dir;
};

// Each run_* writes its artifacts plus a manifest.json into out_dir and
// returns the manifest path. Reruns with identical inputs and seeds write
// byte-identical files.
std::string run_simulate(const SimulateOptions& opt);
std::string run_train(const TrainOptions& opt);
std::string run_eval(const EvalOptions& opt);
std::string run_extract(const ExtractOptions& opt);
std::string run_sweep(const SweepOptions& opt);
std::string run_crossval(const CrossvalOptions& opt);

/// FNV-1a 64-bit hash of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string& path);

}  // namespace nsotree::runner
