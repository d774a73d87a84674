#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "nsotree/survival.hpp"

namespace nsotree {

struct MetricResult {
    double point = 0.0;
    std::optional<std::pair<double, double>> interval;  // (2.5%, 97.5%)
    std::vector<double> bootstrap_values;
    int resamples_redrawn = 0;
};

/// Harrell's concordance index. A pair (i, j) is comparable iff
/// time_i < time_j and event_i; concordant when score_i > score_j, tied
/// scores count 0.5.
double concordance_index(const std::vector<double>& scores, const std::vector<double>& times,
                         const std::vector<std::uint8_t>& events);

/// IPCW Brier score at time t. Subjects dead by t contribute
/// S_hat(t)^2 / G(T-), subjects alive past t contribute
/// (1 - S_hat(t))^2 / G(t), censored-before-t subjects contribute 0.
/// G is the censoring Kaplan-Meier of the evaluation set; subjects whose
/// weight denominator is 0 are dropped (count reported via the pointer).
double brier_score(const std::vector<StepFunction>& curves, const SurvivalDataset& ds,
                   double t, const StepFunction& censoring_km, int* dropped = nullptr);
double brier_score(const std::vector<StepFunction>& curves, const SurvivalDataset& ds, double t);

/// Trapezoidal average of the Brier score over an increasing grid.
double integrated_brier(const std::vector<StepFunction>& curves, const SurvivalDataset& ds,
                        const std::vector<double>& grid);

/// Default IBS grid: equally spaced points between the 5th and 95th
/// percentile of observed times.
std::vector<double> default_ibs_grid(const SurvivalDataset& ds, int points = 100);

double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Nonparametric bootstrap over record indices: B resamples with
/// replacement, metric per resample, empirical 2.5/97.5 percentiles.
/// A resample where the metric throws is redrawn (count reported).
MetricResult bootstrap_ci(const std::function<double(const std::vector<int>&)>& metric,
                          std::size_t n, int resamples, std::uint64_t seed);

}  // namespace nsotree
