#pragma once

#include <cstdint>
#include <string>

#include "nsotree/survival.hpp"

namespace nsotree {

enum class RiskKind { Linear, Gaussian };

std::string to_string(RiskKind k);
RiskKind risk_kind_from_string(const std::string& s);

/// Configuration for the exponential-Cox simulation benchmarks. Covariates
/// are U[-1,1)^d; the event time is exponential with rate
/// baseline_rate * exp(true_risk(x)); censoring times are exponential with
/// a rate calibrated so the expected censoring fraction hits censor_frac.
struct SimConfig {
    int n_train = 4000;
    int n_valid = 1000;
    int n_test = 1000;
    int d = 10;
    RiskKind risk = RiskKind::Linear;
    double lambda_max = 5.0;  // gaussian risk peak rate
    double r = 0.5;           // gaussian risk length scale
    double baseline_rate = 1.0;
    double censor_frac = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Linear: x_0 + 2*x_1. Gaussian: log(lambda_max) * exp(-(x_0^2+x_1^2)/(2 r^2)).
/// Only the first two covariates matter.
double true_risk(const double* x, int d, const SimConfig& cfg);

struct SimSplit {
    SurvivalDataset data;
    std::vector<double> true_risks;
};

struct SimResult {
    SimSplit train, valid, test;
    double censoring_rate = 0.0;       // calibrated exponential rate (0 when censor_frac = 0)
    double empirical_censoring = 0.0;  // fraction of censored records overall
};

SimResult simulate(const SimConfig& cfg);

}  // namespace nsotree
