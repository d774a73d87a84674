#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "nsotree/ingest.hpp"
#include "nsotree/math.hpp"
#include "nsotree/metrics.hpp"
#include "nsotree/simdata.hpp"
#include "nsotree/trainer.hpp"

using namespace nsotree;

namespace {

SimResult small_gaussian(std::uint64_t seed, int n_train = 800) {
    SimConfig cfg;
    cfg.risk = RiskKind::Gaussian;
    cfg.lambda_max = 10.0;
    cfg.n_train = n_train;
    cfg.n_valid = std::max(50, n_train / 4);
    cfg.n_test = std::max(50, n_train / 4);
    cfg.seed = seed;
    return simulate(cfg);
}

SimResult small_linear(std::uint64_t seed, int n_train = 800) {
    SimConfig cfg;
    cfg.risk = RiskKind::Linear;
    cfg.n_train = n_train;
    cfg.n_valid = std::max(50, n_train / 4);
    cfg.n_test = std::max(50, n_train / 4);
    cfg.seed = seed;
    return simulate(cfg);
}

TrainConfig quick_config(int depth = 5) {
    TrainConfig c;
    c.depth = depth;
    c.batch_size = 256;
    c.max_epochs = 40;
    c.patience = 40;
    c.seed = 1;
    return c;
}

}  // namespace

TEST_CASE("training is deterministic given the seed") {
    const auto sim = small_gaussian(3, 400);
    const auto cfg = quick_config(4);
    const auto a = train(sim.train.data, sim.valid.data, cfg);
    const auto b = train(sim.train.data, sim.valid.data, cfg);
    CHECK(a.params == b.params);  // bit-identical parameters
    CHECK(a.best_epoch == b.best_epoch);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t i = 0; i < a.epochs.size(); ++i) {
        CHECK(a.epochs[i].train_loss == b.epochs[i].train_loss);
        CHECK(a.epochs[i].valid_cindex == b.epochs[i].valid_cindex);
    }
}

TEST_CASE("huge lambda zeroes every split weight after one epoch") {
    const auto sim = small_gaussian(5, 400);
    auto cfg = quick_config(5);
    cfg.lambda = 10.0;
    cfg.max_epochs = 1;
    cfg.patience = 1;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    CHECK(sparsity(rep.params) == 1.0);

    // a risk model with dead splits is a plain linear head: near-random on
    // radial data
    cfg.max_epochs = 30;
    cfg.patience = 30;
    const auto rep2 = train(sim.train.data, sim.valid.data, cfg);
    CHECK(sparsity(rep2.params) == 1.0);
    CHECK(rep2.best_valid_cindex == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("full-batch loss decreases over the first epochs at lr 0.01") {
    const auto sim = small_linear(7, 600);
    TrainConfig cfg;
    cfg.depth = 4;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 1024;  // full batch for n = 600
    cfg.max_epochs = 5;
    cfg.patience = 5;
    cfg.seed = 2;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    REQUIRE(rep.epochs.size() == 5);
    for (std::size_t i = 1; i < rep.epochs.size(); ++i)
        CHECK(rep.epochs[i].train_loss < rep.epochs[i - 1].train_loss);
}

TEST_CASE("early stopping keeps the best-epoch parameters") {
    const auto sim = small_gaussian(11, 500);
    auto cfg = quick_config(4);
    cfg.max_epochs = 60;
    cfg.patience = 8;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    double best = -1.0;
    int best_epoch = 0;
    for (std::size_t i = 0; i < rep.epochs.size(); ++i)
        if (rep.epochs[i].valid_cindex > best) {
            best = rep.epochs[i].valid_cindex;
            best_epoch = static_cast<int>(i) + 1;
        }
    CHECK(rep.best_valid_cindex == best);
    CHECK(rep.best_epoch == best_epoch);
    // stopping fired no later than patience epochs past the best
    CHECK(static_cast<int>(rep.epochs.size()) <= best_epoch + cfg.patience);

    // returned parameters really are the best-epoch ones
    const auto scores = score_dataset(rep.params, sim.valid.data, Activation::ReLU);
    CHECK(concordance_index(scores, sim.valid.data.time, sim.valid.data.event) ==
          doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("linear model recovers the 1:2 coefficient structure") {
    const auto sim = small_linear(13, 2000);
    TrainConfig cfg;
    cfg.model = ModelKind::LinearCPH;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    cfg.batch_size = 1024;
    cfg.seed = 3;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    REQUIRE(rep.params.depth == 0);
    const double b0 = rep.params.head_w[0];
    const double b1 = rep.params.head_w[1];
    CHECK(b1 / b0 == doctest::Approx(2.0).epsilon(0.075));  // ratio within 2 +- 0.15
    // irrelevant covariates stay small
    for (int j = 2; j < 10; ++j)
        CHECK(std::fabs(rep.params.head_w[static_cast<std::size_t>(j)]) < 0.2 * std::fabs(b1));
}

TEST_CASE("config validation") {
    TrainConfig c;
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.lambda = -1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.depth = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.model = ModelKind::LinearCPH;  // depth is ignored for the linear model
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("zero training epochs returns the initialized checkpoint") {
    const auto sim = small_linear(17, 200);
    auto cfg = quick_config(3);
    cfg.max_epochs = 0;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    CHECK(rep.epochs.empty());
    CHECK(rep.best_epoch == 0);
    CHECK(rep.params == init_params(sim.train.data.d, cfg.depth, cfg.d_h, cfg.seed));
}

TEST_CASE("random_search degenerate and point spaces") {
    const auto sim = small_linear(19, 300);
    TrainConfig base;
    base.max_epochs = 5;
    base.patience = 5;
    base.batch_size = 256;
    base.seed = 1;

    SearchSpace space;
    space.learning_rate = {0.05, 0.05};
    space.lambda = {1e-4, 1e-4};
    space.depths = {3};
    space.batch_sizes = {256};

    const auto one = random_search(sim.train.data, sim.valid.data, space, 1, 7, base);
    CHECK(one.trials.size() == 1);
    CHECK(one.best.learning_rate == 0.05);
    CHECK(one.best.lambda == 1e-4);
    CHECK(one.best.depth == 3);
    CHECK(one.best_valid_cindex == one.trials[0].valid_cindex);

    SearchSpace empty;
    empty.depths = {};
    CHECK_THROWS_AS(random_search(sim.train.data, sim.valid.data, empty, 1, 7, base),
                    std::invalid_argument);
}

TEST_CASE("random_search best is at least the median trial") {
    const auto sim = small_linear(23, 400);
    TrainConfig base;
    base.max_epochs = 8;
    base.patience = 8;
    base.batch_size = 256;
    base.seed = 1;
    SearchSpace space;
    space.learning_rate = {0.001, 0.5};
    space.lambda = {1e-6, 1e-2};
    space.depths = {2, 4, 8};
    const auto r = random_search(sim.train.data, sim.valid.data, space, 10, 11, base);
    CHECK(r.trials.size() == 10);
    std::vector<double> cs;
    for (const auto& t : r.trials) cs.push_back(t.valid_cindex);
    std::sort(cs.begin(), cs.end());
    CHECK(r.best_valid_cindex >= cs[cs.size() / 2]);
    CHECK(r.best_valid_cindex == cs.back());
    // log-uniform sampling stays inside the declared ranges
    for (const auto& t : r.trials) {
        CHECK(t.config.learning_rate >= 0.001);
        CHECK(t.config.learning_rate <= 0.5);
        CHECK(t.config.lambda >= 1e-6);
        CHECK(t.config.lambda <= 1e-2);
    }
}

TEST_CASE("sweeps emit one row per value") {
    const auto sim = small_gaussian(29, 300);
    auto cfg = quick_config(3);
    cfg.max_epochs = 5;
    cfg.patience = 5;
    const auto rows = depth_sweep(sim.train.data, sim.valid.data, sim.test.data, {4}, cfg);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].depth == 4);

    const auto lrows =
        lambda_sweep(sim.train.data, sim.valid.data, sim.test.data, {0.0, 1e-2}, cfg);
    REQUIRE(lrows.size() == 2);
    CHECK(lrows[0].sparsity == 0.0);          // lambda = 0 never zeroes a weight
    CHECK(lrows[1].sparsity > lrows[0].sparsity);
    CHECK_THROWS_AS(depth_sweep(sim.train.data, sim.valid.data, sim.test.data, {}, cfg),
                    std::invalid_argument);
}

TEST_CASE("fold assignment is balanced and deterministic") {
    const auto fold = fold_assignment(103, 5, 77);
    CHECK(fold == fold_assignment(103, 5, 77));
    std::vector<int> counts(5, 0);
    for (int f : fold) {
        REQUIRE(f >= 0);
        REQUIRE(f < 5);
        ++counts[static_cast<std::size_t>(f)];
    }
    for (int c : counts) CHECK(std::abs(c - 103 / 5) <= 1);
    CHECK_THROWS_AS(fold_assignment(10, 1, 0), std::invalid_argument);
}

TEST_CASE("cross-validation on mirrored folds reports equal C-indexes") {
    // Build a dataset whose two folds are identical record multisets, using
    // the known deterministic assignment.
    const std::size_t n = 60;
    TrainConfig cfg = quick_config(3);
    cfg.max_epochs = 10;
    cfg.patience = 10;
    cfg.seed = 123;
    const auto fold = fold_assignment(n, 2, cfg.seed);

    const auto proto = small_linear(31, 100).train.data;  // record pool
    SurvivalDataset ds;
    ds.d = proto.d;
    ds.x.resize(n * static_cast<std::size_t>(proto.d));
    ds.time.resize(n);
    ds.event.resize(n);
    std::size_t next[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        const int f = fold[i];
        const std::size_t k = next[f]++;  // k-th record of fold f gets pool record k
        std::copy(proto.row(k), proto.row(k) + proto.d, ds.row(i));
        ds.time[i] = proto.time[k];
        ds.event[i] = proto.event[k];
    }
    const auto cv = cross_validate(ds, 2, cfg);
    REQUIRE(cv.fold_cindex.size() == 2);
    CHECK(cv.fold_cindex[0] == doctest::Approx(cv.fold_cindex[1]).epsilon(1e-12));
    CHECK(cv.stddev == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(cv.stddev >= 0.0);
}

TEST_CASE("cross-validation standardizes per training fold") {
    // Asymmetric data: feature drifts with index, so fold means differ.
    SurvivalDataset ds;
    ds.d = 2;
    std::mt19937_64 rng(9);
    for (int i = 0; i < 90; ++i) {
        ds.x.push_back(static_cast<double>(i) * 0.1 + uniform01(rng));
        ds.x.push_back(uniform_in(rng, -1.0, 1.0));
        ds.time.push_back(0.1 + uniform01(rng) * 3.0);
        ds.event.push_back(uniform01(rng) < 0.8 ? 1 : 0);
    }
    TrainConfig cfg = quick_config(2);
    cfg.max_epochs = 3;
    cfg.patience = 3;
    const auto cv = cross_validate(ds, 3, cfg);
    REQUIRE(cv.fold_means.size() == 3);
    // training-fold means must differ across folds (no global statistics)
    CHECK(cv.fold_means[0][0] != cv.fold_means[1][0]);
    CHECK(cv.fold_means[1][0] != cv.fold_means[2][0]);
    CHECK(cv.mean >= 0.0);
    CHECK(cv.stddev >= 0.0);
}

TEST_CASE("cross-validation agrees with a single split on gaussian data") {
    SimConfig scfg;
    scfg.risk = RiskKind::Gaussian;
    scfg.lambda_max = 10.0;
    scfg.n_train = 4000;
    scfg.n_valid = 1000;
    scfg.n_test = 1000;
    scfg.seed = 37;
    const auto sim = simulate(scfg);

    // Shallow nets sit flat for a long stretch before the split units
    // orient on the radial risk, so the stopping window must outlast it.
    TrainConfig cfg;
    cfg.depth = 10;
    cfg.seed = 2;
    cfg.max_epochs = 500;
    cfg.patience = 100;

    // single split: train on train, early-stop on valid, measure on test
    SurvivalDataset tr = sim.train.data, va = sim.valid.data, te = sim.test.data;
    standardize(tr, {&va, &te});
    const auto rep = train(tr, va, cfg);
    const auto scores = score_dataset(rep.params, te, Activation::ReLU);
    const double single = concordance_index(scores, te.time, te.event);

    const auto cv = cross_validate(sim.train.data, 5, cfg);
    CHECK(std::fabs(cv.mean - single) < 0.03);
    for (double c : cv.fold_cindex) CHECK(c > 0.5);
}

TEST_CASE("report serialization carries per-epoch rows and no wall time") {
    const auto sim = small_linear(41, 200);
    auto cfg = quick_config(2);
    cfg.max_epochs = 3;
    const auto rep = train(sim.train.data, sim.valid.data, cfg);
    const std::string text = serialize_report(rep);
    CHECK(text.find("epoch,train_loss,valid_cindex,sparsity") != std::string::npos);
    CHECK(text.find("best_epoch") != std::string::npos);
    CHECK(text.find("wall") == std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3 + 1 + 3);  // header block + rows
}
