#include "nsotree/survival.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nsotree/math.hpp"

namespace nsotree {

std::size_t SurvivalDataset::num_events() const {
    std::size_t n = 0;
    for (auto e : event) n += e ? 1 : 0;
    return n;
}

SurvivalDataset SurvivalDataset::subset(const std::vector<int>& indices) const {
    SurvivalDataset out;
    out.d = d;
    out.feature_names = feature_names;
    out.standardization = standardization;
    out.x.reserve(indices.size() * static_cast<std::size_t>(d));
    out.time.reserve(indices.size());
    out.event.reserve(indices.size());
    for (int i : indices) {
        if (i < 0 || static_cast<std::size_t>(i) >= size())
            throw std::out_of_range("SurvivalDataset::subset: index out of range");
        const double* r = row(static_cast<std::size_t>(i));
        out.x.insert(out.x.end(), r, r + d);
        out.time.push_back(time[static_cast<std::size_t>(i)]);
        out.event.push_back(event[static_cast<std::size_t>(i)]);
    }
    return out;
}

void SurvivalDataset::validate() const {
    if (d < 1) throw std::invalid_argument("SurvivalDataset: covariate dimension must be >= 1");
    if (time.size() != event.size() || x.size() != time.size() * static_cast<std::size_t>(d))
        throw std::invalid_argument("SurvivalDataset: field sizes disagree");
    for (double t : time)
        if (!(t >= 0.0)) throw std::invalid_argument("SurvivalDataset: negative or NaN time");
    if (standardization) {
        const auto& s = *standardization;
        if (s.mean.size() != static_cast<std::size_t>(d) || s.stddev.size() != static_cast<std::size_t>(d))
            throw std::invalid_argument("SurvivalDataset: standardization length mismatch");
        for (double v : s.stddev)
            if (!(v > 0.0)) throw std::invalid_argument("SurvivalDataset: nonpositive std");
    }
}

double StepFunction::operator()(double t) const {
    if (knots.empty() || t < knots.front()) return value_before;
    // last knot <= t
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
    if (knots.empty() || t <= knots.front()) return value_before;
    const auto it = std::lower_bound(knots.begin(), knots.end(), t);
    return values[static_cast<std::size_t>(it - knots.begin()) - 1];
}

std::vector<int> risk_set(const SurvivalDataset& ds, double t) {
    if (t < 0.0) throw std::invalid_argument("risk_set: t must be nonnegative");
    std::vector<int> out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.time[i] >= t) out.push_back(static_cast<int>(i));
    return out;
}

namespace {

struct TimeGroup {
    double t;
    int events;    // d_i
    int total;     // events + censorings at t
};

// Unique times in increasing order with per-time counts. `flag` marks which
// records count as events.
std::vector<TimeGroup> group_times(const std::vector<double>& time,
                                   const std::vector<std::uint8_t>& flag) {
    std::vector<std::size_t> order(time.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return time[a] < time[b]; });
    std::vector<TimeGroup> groups;
    for (std::size_t k = 0; k < order.size();) {
        const double t = time[order[k]];
        TimeGroup g{t, 0, 0};
        while (k < order.size() && time[order[k]] == t) {
            ++g.total;
            if (flag[order[k]]) ++g.events;
            ++k;
        }
        groups.push_back(g);
    }
    return groups;
}

}  // namespace

StepFunction kaplan_meier(const SurvivalDataset& ds, KmTarget target) {
    if (ds.size() == 0) throw std::invalid_argument("kaplan_meier: empty dataset");
    std::vector<std::uint8_t> flag(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        flag[i] = target == KmTarget::Events ? (ds.event[i] ? 1 : 0) : (ds.event[i] ? 0 : 1);

    const auto groups = group_times(ds.time, flag);
    StepFunction f;
    f.value_before = 1.0;
    double s = 1.0;
    long at_risk = static_cast<long>(ds.size());
    for (const auto& g : groups) {
        if (g.events > 0) {
            s *= 1.0 - static_cast<double>(g.events) / static_cast<double>(at_risk);
            f.knots.push_back(g.t);
            f.values.push_back(s);
        }
        at_risk -= g.total;
    }
    return f;
}

StepFunction breslow_baseline(const SurvivalDataset& ds, const std::vector<double>& scores) {
    if (scores.size() != ds.size())
        throw std::invalid_argument("breslow_baseline: scores not aligned with dataset");
    if (ds.num_events() == 0)
        throw std::invalid_argument("breslow_baseline: dataset has no events");

    // Shift scores by their max so the exp sums cannot overflow.
    const double shift = *std::max_element(scores.begin(), scores.end());

    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ds.time[a] > ds.time[b]; });

    // Walk times from largest to smallest, growing the risk-set sum, then
    // reverse the collected steps.
    std::vector<double> knots_rev, values_rev;
    double denom = 0.0;  // sum exp(score - shift) over records with time >= current
    for (std::size_t k = 0; k < order.size();) {
        const double t = ds.time[order[k]];
        int d_events = 0;
        while (k < order.size() && ds.time[order[k]] == t) {
            denom += std::exp(scores[order[k]] - shift);
            if (ds.event[order[k]]) ++d_events;
            ++k;
        }
        if (d_events > 0) {
            knots_rev.push_back(t);
            values_rev.push_back(static_cast<double>(d_events) * std::exp(-shift) / denom);
        }
    }

    StepFunction f;
    f.value_before = 0.0;
    f.knots.assign(knots_rev.rbegin(), knots_rev.rend());
    double cum = 0.0;
    for (auto it = values_rev.rbegin(); it != values_rev.rend(); ++it) {
        cum += *it;
        f.values.push_back(cum);
    }
    return f;
}

StepFunction survival_curve(const StepFunction& baseline, double score) {
    const double rel = std::exp(score);
    StepFunction f;
    f.knots = baseline.knots;
    f.value_before = std::exp(-baseline.value_before * rel);
    f.values.reserve(baseline.values.size());
    for (double h : baseline.values) f.values.push_back(std::exp(-h * rel));
    return f;
}

LogRankResult log_rank_test(const std::vector<double>& times_a,
                            const std::vector<std::uint8_t>& events_a,
                            const std::vector<double>& times_b,
                            const std::vector<std::uint8_t>& events_b) {
    if (times_a.size() != events_a.size() || times_b.size() != events_b.size())
        throw std::invalid_argument("log_rank_test: times/events length mismatch");
    if (times_a.empty() || times_b.empty())
        throw std::invalid_argument("log_rank_test: both groups must be nonempty");

    const auto ga = group_times(times_a, events_a);
    const auto gb = group_times(times_b, events_b);
    std::size_t pooled_events = 0;
    for (const auto& g : ga) pooled_events += static_cast<std::size_t>(g.events);
    for (const auto& g : gb) pooled_events += static_cast<std::size_t>(g.events);
    if (pooled_events == 0)
        throw std::invalid_argument("log_rank_test: no events in the pooled sample");

    // Merge the two grouped timelines; accumulate observed-minus-expected
    // for group A and the hypergeometric variance.
    double observed_a = 0.0, expected_a = 0.0, variance = 0.0;
    long risk_a = static_cast<long>(times_a.size());
    long risk_b = static_cast<long>(times_b.size());
    std::size_t ia = 0, ib = 0;
    while (ia < ga.size() || ib < gb.size()) {
        double t;
        if (ia < ga.size() && ib < gb.size()) t = std::min(ga[ia].t, gb[ib].t);
        else if (ia < ga.size()) t = ga[ia].t;
        else t = gb[ib].t;

        long da = 0, ta = 0, db = 0, tb = 0;
        if (ia < ga.size() && ga[ia].t == t) { da = ga[ia].events; ta = ga[ia].total; ++ia; }
        if (ib < gb.size() && gb[ib].t == t) { db = gb[ib].events; tb = gb[ib].total; ++ib; }

        const long n = risk_a + risk_b;
        const long dtot = da + db;
        if (dtot > 0 && n > 0) {
            const double na = static_cast<double>(risk_a);
            const double nn = static_cast<double>(n);
            observed_a += static_cast<double>(da);
            expected_a += static_cast<double>(dtot) * na / nn;
            if (n > 1) {
                variance += static_cast<double>(dtot) * (na / nn) * (1.0 - na / nn) *
                            (nn - static_cast<double>(dtot)) / (nn - 1.0);
            }
        }
        risk_a -= ta;
        risk_b -= tb;
    }

    LogRankResult r;
    if (variance <= 0.0) {
        r.statistic = 0.0;
        r.p_value = 1.0;
        return r;
    }
    const double diff = observed_a - expected_a;
    r.statistic = diff * diff / variance;
    r.p_value = chisq1_sf(r.statistic);
    return r;
}

}  // namespace nsotree
