#include "nsotree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "nsotree/math.hpp"

namespace nsotree {

double concordance_index(const std::vector<double>& scores, const std::vector<double>& times,
                         const std::vector<std::uint8_t>& events) {
    if (scores.size() != times.size() || scores.size() != events.size())
        throw std::invalid_argument("concordance_index: input sizes disagree");
    const std::size_t n = scores.size();
    double concordant = 0.0;
    std::size_t comparable = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!events[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (times[i] >= times[j]) continue;
            ++comparable;
            if (scores[i] > scores[j]) concordant += 1.0;
            else if (scores[i] == scores[j]) concordant += 0.5;
        }
    }
    if (comparable == 0)
        throw std::invalid_argument("concordance_index: no comparable pairs");
    return concordant / static_cast<double>(comparable);
}

double brier_score(const std::vector<StepFunction>& curves, const SurvivalDataset& ds,
                   double t, const StepFunction& censoring_km, int* dropped) {
    if (curves.size() != ds.size())
        throw std::invalid_argument("brier_score: curves not aligned with dataset");
    if (t < 0.0) throw std::invalid_argument("brier_score: t must be nonnegative");
    double sum = 0.0;
    std::size_t used = 0;
    int drop_count = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double ti = ds.time[i];
        const double s_hat = curves[i](t);
        if (ti <= t && ds.event[i]) {
            const double g = censoring_km.left_limit(ti);
            if (g <= 0.0) { ++drop_count; continue; }
            sum += s_hat * s_hat / g;
            ++used;
        } else if (ti > t) {
            const double g = censoring_km(t);
            if (g <= 0.0) { ++drop_count; continue; }
            sum += (1.0 - s_hat) * (1.0 - s_hat) / g;
            ++used;
        } else {
            // censored at or before t: contributes 0 but stays in the denominator
            ++used;
        }
    }
    if (dropped) *dropped = drop_count;
    if (used == 0) throw std::invalid_argument("brier_score: no usable subjects");
    return sum / static_cast<double>(used);
}

double brier_score(const std::vector<StepFunction>& curves, const SurvivalDataset& ds, double t) {
    const StepFunction g = kaplan_meier(ds, KmTarget::Censorings);
    return brier_score(curves, ds, t, g, nullptr);
}

double integrated_brier(const std::vector<StepFunction>& curves, const SurvivalDataset& ds,
                        const std::vector<double>& grid) {
    if (grid.size() < 2) throw std::invalid_argument("integrated_brier: grid needs >= 2 points");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("integrated_brier: grid must be strictly increasing");
    const StepFunction g = kaplan_meier(ds, KmTarget::Censorings);
    std::vector<double> bs(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        bs[i] = brier_score(curves, ds, grid[i], g, nullptr);
    double integral = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        integral += 0.5 * (bs[i] + bs[i - 1]) * (grid[i] - grid[i - 1]);
    return integral / (grid.back() - grid.front());
}

std::vector<double> default_ibs_grid(const SurvivalDataset& ds, int points) {
    if (points < 2) throw std::invalid_argument("default_ibs_grid: need >= 2 points");
    std::vector<double> times(ds.time);
    const double lo = percentile(times, 0.05);
    const double hi = percentile(times, 0.95);
    if (!(hi > lo)) throw std::invalid_argument("default_ibs_grid: degenerate time range");
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        grid[static_cast<std::size_t>(i)] =
            lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson_correlation: size mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("pearson_correlation: need >= 2 samples");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw std::invalid_argument("pearson_correlation: zero variance input");
    return sab / std::sqrt(saa * sbb);
}

MetricResult bootstrap_ci(const std::function<double(const std::vector<int>&)>& metric,
                          std::size_t n, int resamples, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("bootstrap_ci: empty dataset");
    if (resamples < 2) throw std::invalid_argument("bootstrap_ci: need >= 2 resamples");

    std::vector<int> identity(n);
    std::iota(identity.begin(), identity.end(), 0);

    MetricResult out;
    out.point = metric(identity);
    out.bootstrap_values.reserve(static_cast<std::size_t>(resamples));

    std::mt19937_64 rng(derive_seed(seed, 0xb00f));
    const long max_attempts = 100L * resamples;
    long attempts = 0;
    std::vector<int> idx(n);
    while (out.bootstrap_values.size() < static_cast<std::size_t>(resamples)) {
        if (++attempts > max_attempts)
            throw std::runtime_error("bootstrap_ci: too many failed resamples");
        for (auto& v : idx) v = static_cast<int>(uniform_index(rng, n));
        try {
            out.bootstrap_values.push_back(metric(idx));
        } catch (const std::exception&) {
            ++out.resamples_redrawn;
        }
    }
    out.interval = std::make_pair(percentile(out.bootstrap_values, 0.025),
                                  percentile(out.bootstrap_values, 0.975));
    return out;
}

}  // namespace nsotree
