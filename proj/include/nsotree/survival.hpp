#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nsotree {

/// Per-feature mean/std used to transform covariates, kept with a dataset
/// that has already been transformed.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> stddev;  // all entries > 0
};

/// Right-censored survival data: n records of (covariate row, recorded
/// time, event indicator). Covariates are stored row-major.
struct SurvivalDataset {
    int d = 0;
    std::vector<double> x;       // n * d
    std::vector<double> time;    // all >= 0
    std::vector<std::uint8_t> event;
    std::vector<std::string> feature_names;  // optional, size d when present
    std::optional<Standardization> standardization;

    std::size_t size() const { return time.size(); }
    const double* row(std::size_t i) const { return x.data() + i * static_cast<std::size_t>(d); }
    double* row(std::size_t i) { return x.data() + i * static_cast<std::size_t>(d); }
    std::size_t num_events() const;
    SurvivalDataset subset(const std::vector<int>& indices) const;

    /// Throws if sizes disagree, d < 1, a time is negative, or
    /// standardization metadata is malformed.
    void validate() const;
};

/// Right-continuous piecewise-constant function of time. Value is
/// value_before on (-inf, knots[0]), values[i] on [knots[i], knots[i+1]),
/// and values.back() from the last knot on.
struct StepFunction {
    std::vector<double> knots;   // strictly increasing
    std::vector<double> values;  // same length as knots
    double value_before = 1.0;

    double operator()(double t) const;
    /// Left limit f(t-): the value just before t.
    double left_limit(double t) const;
};

/// Indices of all records with time >= t.
std::vector<int> risk_set(const SurvivalDataset& ds, double t);

enum class KmTarget {
    Events,       // survival distribution of the event times
    Censorings,   // distribution of the censoring times (IPCW weights)
};

/// Product-limit estimator S(t) = prod_{t_i <= t} (1 - d_i / n_i).
/// With KmTarget::Censorings the roles of event and censoring swap.
StepFunction kaplan_meier(const SurvivalDataset& ds, KmTarget target = KmTarget::Events);

/// Breslow estimate of the cumulative baseline hazard
/// H_0(t) = sum_{event times t_i <= t} d_i / sum_{k in R(t_i)} exp(score_k).
/// Tied events share one risk set.
StepFunction breslow_baseline(const SurvivalDataset& ds, const std::vector<double>& scores);

/// S(t | score) = exp(-H_0(t) * exp(score)).
StepFunction survival_curve(const StepFunction& baseline, double score);

struct LogRankResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample log-rank test, chi-square with 1 degree of freedom.
LogRankResult log_rank_test(const std::vector<double>& times_a,
                            const std::vector<std::uint8_t>& events_a,
                            const std::vector<double>& times_b,
                            const std::vector<std::uint8_t>& events_b);

}  // namespace nsotree
