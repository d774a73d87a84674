#include "nsotree/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nsotree/coxloss.hpp"
#include "nsotree/ingest.hpp"
#include "nsotree/math.hpp"
#include "nsotree/metrics.hpp"

namespace nsotree {

std::string to_string(ModelKind k) {
    return k == ModelKind::NSOTree ? "nsotree" : "linear";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "nsotree") return ModelKind::NSOTree;
    if (s == "linear") return ModelKind::LinearCPH;
    throw std::invalid_argument("unknown model kind: " + s);
}

void TrainConfig::validate() const {
    if (model == ModelKind::NSOTree && depth < 1)
        throw std::invalid_argument("TrainConfig: depth must be >= 1 for the tree model");
    if (d_h < 1) throw std::invalid_argument("TrainConfig: d_h must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
    if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
    if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
    if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
}

namespace {

struct AdamState {
    ParamGrads m, v;
    long step = 0;
};

// One optimizer update over every parameter tensor. f(param, grad) style
// iteration keeps SGD/Adam in one place.
void apply_update(NSOTreeParams& p, const ParamGrads& g, const TrainConfig& cfg, AdamState* adam) {
    auto update_array = [&](double* w, const double* gw, double* m, double* v, std::size_t n) {
        if (cfg.optimizer == OptimizerKind::SGD) {
            for (std::size_t i = 0; i < n; ++i) w[i] -= cfg.learning_rate * gw[i];
            return;
        }
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double t = static_cast<double>(adam->step);
        const double corr1 = 1.0 - std::pow(b1, t);
        const double corr2 = 1.0 - std::pow(b2, t);
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * gw[i];
            v[i] = b2 * v[i] + (1.0 - b2) * gw[i] * gw[i];
            w[i] -= cfg.learning_rate * (m[i] / corr1) / (std::sqrt(v[i] / corr2) + eps);
        }
    };
    if (adam) ++adam->step;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        update_array(p.layers[l].w.data(), g.layer_w[l].data(),
                     adam ? adam->m.layer_w[l].data() : nullptr,
                     adam ? adam->v.layer_w[l].data() : nullptr, p.layers[l].w.size());
        update_array(p.layers[l].b.data(), g.layer_b[l].data(),
                     adam ? adam->m.layer_b[l].data() : nullptr,
                     adam ? adam->v.layer_b[l].data() : nullptr, p.layers[l].b.size());
    }
    update_array(p.head_w.data(), g.head_w.data(), adam ? adam->m.head_w.data() : nullptr,
                 adam ? adam->v.head_w.data() : nullptr, p.head_w.size());
    double hb = p.head_b, ghb = g.head_b;
    double mh = adam ? adam->m.head_b : 0.0, vh = adam ? adam->v.head_b : 0.0;
    update_array(&hb, &ghb, adam ? &mh : nullptr, adam ? &vh : nullptr, 1);
    p.head_b = hb;
    if (adam) { adam->m.head_b = mh; adam->v.head_b = vh; }
}

double full_train_loss(const NSOTreeParams& p, const SurvivalDataset& ds, Activation mode) {
    const auto scores = score_dataset(p, ds, mode);
    const CoxLoss l = cox_nll_full(scores, ds.time, ds.event);
    return l.loss / static_cast<double>(l.events);
}

}  // namespace

TrainReport train(const SurvivalDataset& train_data, const SurvivalDataset& valid_data,
                  const TrainConfig& config) {
    config.validate();
    train_data.validate();
    valid_data.validate();
    if (train_data.num_events() == 0)
        throw std::invalid_argument("train: training set has no events");
    if (valid_data.size() == 0) throw std::invalid_argument("train: empty validation set");
    if (train_data.d != valid_data.d)
        throw std::invalid_argument("train: train/valid dimension mismatch");

    const auto t_start = std::chrono::steady_clock::now();
    const int depth = config.model == ModelKind::LinearCPH ? 0 : config.depth;
    NSOTreeParams params = init_params(train_data.d, depth, config.d_h, config.seed);

    AdamState adam;
    if (config.optimizer == OptimizerKind::Adam) {
        adam.m = ParamGrads::zeros_like(params);
        adam.v = ParamGrads::zeros_like(params);
    }

    std::mt19937_64 shuffle_rng(derive_seed(config.seed, 0x7a11));
    std::vector<int> order(train_data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    report.params = params;
    report.best_valid_cindex = -1.0;
    report.best_epoch = 0;

    const std::size_t n = train_data.size();
    std::vector<const double*> batch_x;
    std::vector<ActivationTrace> traces;
    CoxBatch batch;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_deterministic(order, shuffle_rng);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
            const std::size_t bn = stop - start;
            batch_x.resize(bn);
            traces.resize(bn);
            batch.scores.resize(bn);
            batch.times.resize(bn);
            batch.events.resize(bn);
            std::size_t bevents = 0;
            for (std::size_t i = 0; i < bn; ++i) {
                const std::size_t src = static_cast<std::size_t>(order[start + i]);
                batch_x[i] = train_data.row(src);
                traces[i] = forward(params, batch_x[i], config.train_activation);
                batch.scores[i] = traces[i].score;
                batch.times[i] = train_data.time[src];
                batch.events[i] = train_data.event[src];
                bevents += batch.events[i] ? 1 : 0;
            }
            if (bevents == 0) {
                if (config.verbose)
                    std::cerr << "train: epoch " << epoch << ": skipping batch at " << start
                              << " with no events\n";
                continue;
            }
            CoxLoss loss = cox_nll_batch(batch);
            if (!std::isfinite(loss.loss))
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                         ", batch offset " + std::to_string(start));
            // Normalize by in-batch events for step-size stability.
            const double scale = 1.0 / static_cast<double>(loss.events);
            for (auto& g : loss.grad_scores) g *= scale;

            ParamGrads grads = ParamGrads::zeros_like(params);
            backward(params, batch_x, traces, loss.grad_scores, config.train_activation, grads);
            apply_update(params, grads, config, config.optimizer == OptimizerKind::Adam ? &adam : nullptr);
            if (config.lambda > 0.0) params = prox_step(params, config.lambda);
        }

        EpochStats stats;
        stats.train_loss = full_train_loss(params, train_data, config.train_activation);
        const auto valid_scores = score_dataset(params, valid_data, Activation::ReLU);
        stats.valid_cindex = concordance_index(valid_scores, valid_data.time, valid_data.event);
        stats.sparsity = sparsity(params);
        report.epochs.push_back(stats);
        if (!std::isfinite(stats.train_loss))
            throw std::runtime_error("train: non-finite training loss after epoch " +
                                     std::to_string(epoch));
        if (config.verbose)
            std::cerr << "epoch " << epoch << "  loss " << stats.train_loss << "  valid C "
                      << stats.valid_cindex << "  sparsity " << stats.sparsity << "\n";

        if (stats.valid_cindex > report.best_valid_cindex) {
            report.best_valid_cindex = stats.valid_cindex;
            report.best_epoch = epoch;
            report.params = params;
        } else if (epoch - report.best_epoch >= config.patience) {
            break;
        }
    }

    if (config.max_epochs == 0) {
        report.params = params;
        report.best_epoch = 0;
        report.best_valid_cindex = 0.0;
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

std::string serialize_report(const TrainReport& report) {
    std::ostringstream os;
    os << "# nsotree-report v1\n";
    os << "# best_epoch = " << report.best_epoch << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", report.best_valid_cindex);
    os << "# best_valid_cindex = " << buf << "\n";
    os << "epoch,train_loss,valid_cindex,sparsity\n";
    char row[128];
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        const auto& e = report.epochs[i];
        std::snprintf(row, sizeof row, "%zu,%.17g,%.17g,%.17g", i + 1, e.train_loss,
                      e.valid_cindex, e.sparsity);
        os << row << "\n";
    }
    return os.str();
}

void save_report(const TrainReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << serialize_report(report);
    if (!f) throw std::runtime_error("write failed: " + path);
}

SearchResult random_search(const SurvivalDataset& train_data, const SurvivalDataset& valid_data,
                           const SearchSpace& space, int n_trials, std::uint64_t seed,
                           const TrainConfig& base) {
    if (n_trials < 1) throw std::invalid_argument("random_search: n_trials must be >= 1");
    if (space.depths.empty() || space.d_h_choices.empty() || space.batch_sizes.empty())
        throw std::invalid_argument("random_search: empty search space");
    if (!(space.learning_rate.first > 0.0) || space.learning_rate.second < space.learning_rate.first)
        throw std::invalid_argument("random_search: bad learning_rate range");
    if (space.lambda.first < 0.0 || space.lambda.second < space.lambda.first)
        throw std::invalid_argument("random_search: bad lambda range");

    std::mt19937_64 rng(derive_seed(seed, 0x5ea7c4));
    auto log_uniform = [&](std::pair<double, double> range) {
        if (range.first == range.second) return range.first;
        return std::exp(uniform_in(rng, std::log(range.first), std::log(range.second)));
    };

    SearchResult result;
    result.best_valid_cindex = -1.0;
    for (int t = 0; t < n_trials; ++t) {
        Trial trial;
        trial.config = base;
        trial.config.learning_rate = log_uniform(space.learning_rate);
        trial.config.lambda = space.lambda.first == 0.0 && space.lambda.second == 0.0
                                  ? 0.0
                                  : log_uniform(space.lambda);
        trial.config.depth = space.depths[uniform_index(rng, space.depths.size())];
        trial.config.d_h = space.d_h_choices[uniform_index(rng, space.d_h_choices.size())];
        trial.config.batch_size = space.batch_sizes[uniform_index(rng, space.batch_sizes.size())];
        const TrainReport rep = train(train_data, valid_data, trial.config);
        trial.valid_cindex = rep.best_valid_cindex;
        if (trial.valid_cindex > result.best_valid_cindex) {
            result.best_valid_cindex = trial.valid_cindex;
            result.best = trial.config;
        }
        result.trials.push_back(std::move(trial));
    }
    return result;
}

namespace {

double test_cindex_of(const TrainReport& rep, const SurvivalDataset& test_data) {
    const auto scores = score_dataset(rep.params, test_data, Activation::ReLU);
    return concordance_index(scores, test_data.time, test_data.event);
}

}  // namespace

std::vector<DepthSweepRow> depth_sweep(const SurvivalDataset& train_data,
                                       const SurvivalDataset& valid_data,
                                       const SurvivalDataset& test_data,
                                       const std::vector<int>& depths, const TrainConfig& config) {
    if (depths.empty()) throw std::invalid_argument("depth_sweep: no depths given");
    std::vector<DepthSweepRow> rows;
    for (int depth : depths) {
        TrainConfig c = config;
        c.depth = depth;
        const TrainReport rep = train(train_data, valid_data, c);
        rows.push_back({depth, test_cindex_of(rep, test_data)});
    }
    return rows;
}

std::vector<LambdaSweepRow> lambda_sweep(const SurvivalDataset& train_data,
                                         const SurvivalDataset& valid_data,
                                         const SurvivalDataset& test_data,
                                         const std::vector<double>& lambdas,
                                         const TrainConfig& config) {
    if (lambdas.empty()) throw std::invalid_argument("lambda_sweep: no lambdas given");
    std::vector<LambdaSweepRow> rows;
    for (double lambda : lambdas) {
        TrainConfig c = config;
        c.lambda = lambda;
        const TrainReport rep = train(train_data, valid_data, c);
        rows.push_back({lambda, sparsity(rep.params), test_cindex_of(rep, test_data)});
    }
    return rows;
}

std::vector<int> fold_assignment(std::size_t n, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold_assignment: k must be >= 2");
    if (n < static_cast<std::size_t>(k))
        throw std::invalid_argument("fold_assignment: fewer records than folds");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0xf01d));
    shuffle_deterministic(perm, rng);
    std::vector<int> fold(n);
    for (std::size_t i = 0; i < n; ++i)
        fold[static_cast<std::size_t>(perm[i])] = static_cast<int>(i % static_cast<std::size_t>(k));
    return fold;
}

CrossValResult cross_validate(const SurvivalDataset& dataset, int k, const TrainConfig& config) {
    dataset.validate();
    const auto fold = fold_assignment(dataset.size(), k, config.seed);

    CrossValResult result;
    for (int f = 0; f < k; ++f) {
        std::vector<int> train_idx, valid_idx;
        for (std::size_t i = 0; i < dataset.size(); ++i)
            (fold[i] == f ? valid_idx : train_idx).push_back(static_cast<int>(i));
        SurvivalDataset train_part = dataset.subset(train_idx);
        SurvivalDataset valid_part = dataset.subset(valid_idx);
        if (train_part.num_events() == 0 || valid_part.num_events() == 0)
            throw std::invalid_argument("cross_validate: fold " + std::to_string(f) +
                                        " has no events");
        const Standardization stats = standardize(train_part, {&valid_part});
        const TrainReport rep = train(train_part, valid_part, config);
        result.fold_cindex.push_back(rep.best_valid_cindex);
        result.fold_means.push_back(stats.mean);
    }

    const double n = static_cast<double>(result.fold_cindex.size());
    result.mean = std::accumulate(result.fold_cindex.begin(), result.fold_cindex.end(), 0.0) / n;
    double ss = 0.0;
    for (double c : result.fold_cindex) ss += (c - result.mean) * (c - result.mean);
    result.stddev = std::sqrt(ss / n);
    return result;
}

}  // namespace nsotree
