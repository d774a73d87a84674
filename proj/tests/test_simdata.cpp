#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "nsotree/ingest.hpp"
#include "nsotree/simdata.hpp"

using namespace nsotree;

TEST_CASE("true_risk closed forms") {
    SimConfig cfg;
    double x[10] = {1.0, 1.0};
    CHECK(true_risk(x, 10, cfg) == doctest::Approx(3.0).epsilon(1e-15));

    cfg.risk = RiskKind::Gaussian;
    double origin[10] = {0.0, 0.0};
    CHECK(true_risk(origin, 10, cfg) == doctest::Approx(std::log(5.0)).epsilon(1e-14));

    double half[10] = {0.5, 0.0};
    CHECK(true_risk(half, 10, cfg) ==
          doctest::Approx(std::log(5.0) * std::exp(-0.5)).epsilon(1e-14));

    // only the first two covariates matter
    double noisy[10] = {0.5, 0.0, 9.0, -9.0, 3.0};
    CHECK(true_risk(noisy, 10, cfg) == true_risk(half, 10, cfg));
}

TEST_CASE("simulate is deterministic in the seed") {
    SimConfig cfg;
    cfg.n_train = 200;
    cfg.n_valid = 50;
    cfg.n_test = 50;
    cfg.seed = 17;
    const auto a = simulate(cfg);
    const auto b = simulate(cfg);
    CHECK(a.train.data.x == b.train.data.x);
    CHECK(a.train.data.time == b.train.data.time);
    CHECK(a.train.data.event == b.train.data.event);
    CHECK(a.test.true_risks == b.test.true_risks);
    CHECK(a.censoring_rate == b.censoring_rate);

    cfg.seed = 18;
    const auto c = simulate(cfg);
    CHECK(a.train.data.time != c.train.data.time);
}

TEST_CASE("zero censoring fraction gives all events") {
    SimConfig cfg;
    cfg.n_train = 300;
    cfg.n_valid = 10;
    cfg.n_test = 10;
    cfg.censor_frac = 0.0;
    const auto sim = simulate(cfg);
    CHECK(sim.empirical_censoring == 0.0);
    for (auto e : sim.train.data.event) CHECK(e == 1);
}

TEST_CASE("empirical censoring tracks the target") {
    for (RiskKind kind : {RiskKind::Linear, RiskKind::Gaussian}) {
        SimConfig cfg;
        cfg.risk = kind;
        cfg.seed = 5;
        const auto sim = simulate(cfg);  // default 4000/1000/1000
        CHECK(std::fabs(sim.empirical_censoring - cfg.censor_frac) < 0.03);
    }
}

TEST_CASE("covariates look uniform on [-1,1)") {
    SimConfig cfg;
    cfg.seed = 23;
    const auto sim = simulate(cfg);
    const auto& ds = sim.train.data;
    for (int j = 0; j < ds.d; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < ds.size(); ++i) mean += ds.row(i)[j];
        mean /= static_cast<double>(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            const double dv = ds.row(i)[j] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(ds.size());
        CHECK(std::fabs(mean) < 0.05);
        CHECK(std::fabs(var - 1.0 / 3.0) < 0.05);
        for (std::size_t i = 0; i < ds.size(); ++i) {
            CHECK(ds.row(i)[j] >= -1.0);
            CHECK(ds.row(i)[j] < 1.0);
        }
    }
}

TEST_CASE("higher true risk means earlier death") {
    SimConfig cfg;
    cfg.risk = RiskKind::Linear;
    cfg.censor_frac = 0.0;
    cfg.n_train = 600;
    cfg.n_valid = 10;
    cfg.n_test = 10;
    cfg.seed = 31;
    const auto sim = simulate(cfg);
    const auto& ds = sim.train.data;
    // Kendall tau between true risk and negated death time.
    double concordant = 0.0, discordant = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = i + 1; j < ds.size(); ++j) {
            const double dr = sim.train.true_risks[i] - sim.train.true_risks[j];
            const double dt = -ds.time[i] + ds.time[j];
            if (dr * dt > 0) concordant += 1.0;
            else if (dr * dt < 0) discordant += 1.0;
        }
    const double tau = (concordant - discordant) / (concordant + discordant);
    CHECK(tau > 0.2);
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.d = 1;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = SimConfig{};
    cfg.censor_frac = 1.0;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = SimConfig{};
    cfg.lambda_max = 1.0;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
    cfg = SimConfig{};
    cfg.r = 0.0;
    CHECK_THROWS_AS(simulate(cfg), std::invalid_argument);
}

TEST_CASE("generated data round-trips through the CSV schema") {
    SimConfig cfg;
    cfg.n_train = 60;
    cfg.n_valid = 10;
    cfg.n_test = 10;
    cfg.seed = 3;
    const auto sim = simulate(cfg);

    const auto path =
        (std::filesystem::temp_directory_path() / "nsotree_simdata_roundtrip.csv").string();
    save_csv(sim.train.data, path);
    auto header = sim.train.data.feature_names;
    header.push_back("time");
    header.push_back("event");
    const auto loaded = load_csv(path, default_schema(header));
    CHECK(loaded.data.x == sim.train.data.x);
    CHECK(loaded.data.time == sim.train.data.time);
    CHECK(loaded.data.event == sim.train.data.event);
    CHECK(loaded.data.feature_names == sim.train.data.feature_names);
    std::filesystem::remove(path);
}
