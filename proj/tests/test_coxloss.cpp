#include <doctest.h>

#include <cmath>
#include <random>

#include "nsotree/coxloss.hpp"
#include "nsotree/math.hpp"

using namespace nsotree;

namespace {

CoxBatch random_batch(std::mt19937_64& rng, std::size_t n, bool allow_ties = true) {
    CoxBatch b;
    for (std::size_t i = 0; i < n; ++i) {
        b.scores.push_back(uniform_in(rng, -2.0, 2.0));
        b.times.push_back(allow_ties ? static_cast<double>(1 + uniform_index(rng, n))
                                     : uniform01(rng) * 10.0);
        b.events.push_back(uniform01(rng) < 0.6 ? 1 : 0);
    }
    b.events[0] = 1;
    return b;
}

}  // namespace

TEST_CASE("single event sample has zero loss") {
    const auto r = cox_nll_full({1.7}, {2.0}, {1});
    CHECK(r.loss == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r.grad_scores[0] == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("two-sample hand expansion gives log 2") {
    std::vector<double> scores{0.0, 0.0}, times{1.0, 2.0};
    std::vector<std::uint8_t> events{1, 1};
    const auto full = cox_nll_full(scores, times, events);
    CHECK(full.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CoxBatch b{scores, times, events};
    const auto batch = cox_nll_batch(b);
    CHECK(batch.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(batch.events == 2);
}

TEST_CASE("zero events is an error, not NaN") {
    std::vector<double> s{0.0, 1.0}, t{1.0, 2.0};
    std::vector<std::uint8_t> e{0, 0};
    CHECK_THROWS_AS(cox_nll_full(s, t, e), std::invalid_argument);
    CHECK_THROWS_AS(cox_nll_batch(CoxBatch{s, t, e}), std::invalid_argument);
}

TEST_CASE("shift invariance of loss and gradient") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto b = random_batch(rng, 12);
        const auto base = cox_nll_batch(b);
        const auto base_full = cox_nll_full(b.scores, b.times, b.events);
        CoxBatch shifted = b;
        const double c = uniform_in(rng, -5.0, 5.0);
        for (auto& s : shifted.scores) s += c;
        const auto after = cox_nll_batch(shifted);
        const auto after_full = cox_nll_full(shifted.scores, shifted.times, shifted.events);
        CHECK(after.loss == doctest::Approx(base.loss).epsilon(1e-10));
        CHECK(after_full.loss == doctest::Approx(base_full.loss).epsilon(1e-10));
        for (std::size_t i = 0; i < b.size(); ++i) {
            CHECK(after.grad_scores[i] == doctest::Approx(base.grad_scores[i]).epsilon(1e-9));
            CHECK(after_full.grad_scores[i] ==
                  doctest::Approx(base_full.grad_scores[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("batch form equals full form on the same records") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        auto b = random_batch(rng, 3 + uniform_index(rng, 30));
        const auto batch = cox_nll_batch(b);
        const auto full = cox_nll_full(b.scores, b.times, b.events);
        CHECK(batch.loss == doctest::Approx(full.loss).epsilon(1e-10));
        for (std::size_t i = 0; i < b.size(); ++i)
            CHECK(batch.grad_scores[i] == doctest::Approx(full.grad_scores[i]).epsilon(1e-10));
    }
}

TEST_CASE("gradients match central finite differences") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        auto b = random_batch(rng, 2 + uniform_index(rng, 7));
        const auto analytic = cox_nll_batch(b);
        const auto analytic_full = cox_nll_full(b.scores, b.times, b.events);
        // The difference quotient carries roundoff of order eps*|loss|/h, so
        // tiny gradients are judged against a floor instead of |fd| itself.
        const double h = 1e-5;
        for (std::size_t i = 0; i < b.size(); ++i) {
            CoxBatch up = b, down = b;
            up.scores[i] += h;
            down.scores[i] -= h;
            const double fd = (cox_nll_batch(up).loss - cox_nll_batch(down).loss) / (2.0 * h);
            const double rel =
                std::fabs(analytic.grad_scores[i] - fd) / std::max(1e-3, std::fabs(fd));
            CHECK(rel < 1e-6);
            const double rel_full =
                std::fabs(analytic_full.grad_scores[i] - fd) / std::max(1e-3, std::fabs(fd));
            CHECK(rel_full < 1e-6);
        }
    }
}

TEST_CASE("gradient entries sum to zero") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        auto b = random_batch(rng, 4 + uniform_index(rng, 40));
        const auto r = cox_nll_batch(b);
        double sum = 0.0;
        for (double g : r.grad_scores) sum += g;
        CHECK(std::fabs(sum) < 1e-10);
    }
}

TEST_CASE("loss is convex in the scores") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 3 + uniform_index(rng, 12);
        auto a = random_batch(rng, n);
        CoxBatch bmid = a, b2 = a;
        for (std::size_t i = 0; i < n; ++i) {
            b2.scores[i] = uniform_in(rng, -2.0, 2.0);
            bmid.scores[i] = 0.5 * (a.scores[i] + b2.scores[i]);
        }
        const double la = cox_nll_batch(a).loss;
        const double lb = cox_nll_batch(b2).loss;
        const double lm = cox_nll_batch(bmid).loss;
        CHECK(lm <= 0.5 * (la + lb) + 1e-10);
    }
}

TEST_CASE("tied anchors share the full risk set") {
    // Two events at the same time: both anchors see both samples at risk.
    std::vector<double> scores{0.3, -0.7}, times{2.0, 2.0};
    std::vector<std::uint8_t> events{1, 1};
    const double lse = std::log(std::exp(0.3) + std::exp(-0.7));
    const double expect = (lse - 0.3) + (lse - (-0.7));
    CHECK(cox_nll_full(scores, times, events).loss == doctest::Approx(expect).epsilon(1e-12));
    CHECK(cox_nll_batch({scores, times, events}).loss == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("batch validation") {
    CoxBatch b;
    b.scores = {0.0, 1.0};
    b.times = {1.0};
    b.events = {1, 0};
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
    b.times = {1.0, std::numeric_limits<double>::quiet_NaN()};
    b.scores = {0.0, std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(b.validate(), std::invalid_argument);
}
