#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nsotree/net.hpp"
#include "nsotree/survival.hpp"

namespace nsotree {

enum class ModelKind { NSOTree, LinearCPH };
enum class OptimizerKind { SGD, Adam };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

struct TrainConfig {
    ModelKind model = ModelKind::NSOTree;
    int depth = 30;
    int d_h = 1;
    double learning_rate = 0.1;
    int batch_size = 1024;
    double lambda = 1e-4;  // per-step soft-threshold strength
    int max_epochs = 500;
    int patience = 50;
    std::uint64_t seed = 0;
    Activation train_activation = Activation::Softplus;
    OptimizerKind optimizer = OptimizerKind::SGD;
    bool verbose = false;

    void validate() const;
};

struct EpochStats {
    double train_loss = 0.0;     // full-train-set NLL per event, training activation
    double valid_cindex = 0.0;   // ReLU-mode scores on the validation set
    double sparsity = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = 0;  // 1-based
    double best_valid_cindex = 0.0;
    NSOTreeParams params;  // parameters from the best epoch
    double wall_seconds = 0.0;
};

/// Mini-batch proximal gradient descent on the in-batch Cox loss. Each step
/// runs forward (training activation), the batch loss gradient scaled by
/// the in-batch event count, backward, the optimizer update, then the
/// soft-threshold prox on the layer weights. Keeps the parameters from the
/// epoch with the best validation C-index; stops after `patience` epochs
/// without improvement. Deterministic given the seed.
TrainReport train(const SurvivalDataset& train_data, const SurvivalDataset& valid_data,
                  const TrainConfig& config);

/// Writes/reads the per-epoch report rows (without wall-clock time, so
/// reruns are byte-identical).
std::string serialize_report(const TrainReport& report);
void save_report(const TrainReport& report, const std::string& path);

// --- hyperparameter search and ablations ---

struct SearchSpace {
    std::pair<double, double> learning_rate{0.01, 1.0};  // log-uniform
    std::pair<double, double> lambda{1e-6, 1e-2};        // log-uniform
    std::vector<int> depths{10, 20, 30, 40};
    std::vector<int> d_h_choices{1};
    std::vector<int> batch_sizes{1024};
};

struct Trial {
    TrainConfig config;
    double valid_cindex = 0.0;
};

struct SearchResult {
    TrainConfig best;
    double best_valid_cindex = 0.0;
    std::vector<Trial> trials;
};

SearchResult random_search(const SurvivalDataset& train_data, const SurvivalDataset& valid_data,
                           const SearchSpace& space, int n_trials, std::uint64_t seed,
                           const TrainConfig& base = {});

struct DepthSweepRow {
    int depth = 0;
    double test_cindex = 0.0;
};

std::vector<DepthSweepRow> depth_sweep(const SurvivalDataset& train_data,
                                       const SurvivalDataset& valid_data,
                                       const SurvivalDataset& test_data,
                                       const std::vector<int>& depths, const TrainConfig& config);

struct LambdaSweepRow {
    double lambda = 0.0;
    double sparsity = 0.0;
    double test_cindex = 0.0;
};

std::vector<LambdaSweepRow> lambda_sweep(const SurvivalDataset& train_data,
                                         const SurvivalDataset& valid_data,
                                         const SurvivalDataset& test_data,
                                         const std::vector<double>& lambdas,
                                         const TrainConfig& config);

// --- cross-validation ---

struct CrossValResult {
    std::vector<double> fold_cindex;
    std::vector<std::vector<double>> fold_means;  // training-fold standardization means
    double mean = 0.0;
    double stddev = 0.0;
};

/// Deterministic fold assignment for n records into k folds.
std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed);

/// k-fold cross-validation; standardization is fitted on each training
/// fold only and applied to its held-out fold.
CrossValResult cross_validate(const SurvivalDataset& dataset, int k, const TrainConfig& config);

}  // namespace nsotree
