#pragma once

#include <cstdint>
#include <vector>

namespace nsotree {

/// Aligned scores/times/events for one mini-batch.
struct CoxBatch {
    std::vector<double> scores;
    std::vector<double> times;
    std::vector<std::uint8_t> events;

    std::size_t size() const { return scores.size(); }
    std::size_t num_events() const;
    void validate() const;
};

struct CoxLoss {
    double loss = 0.0;                 // unnormalized sum over event anchors
    std::vector<double> grad_scores;   // exact d(loss)/d(score_i)
    std::size_t events = 0;            // anchors contributing to the sum
};

/// Negative log partial likelihood
///   -sum_{n: E_n=1} ( g_n - log sum_{k: T_k >= T_n} exp(g_k) )
/// with tied event times sharing one risk set. Stabilized with a running
/// log-sum-exp over the risk sets.
CoxLoss cox_nll_full(const std::vector<double>& scores, const std::vector<double>& times,
                     const std::vector<std::uint8_t>& events);

/// In-batch form sum_{n: E_n=1} log sum_{k: T_k >= T_n} exp(g_k - g_n),
/// where the risk set is taken within the batch. Algebraically equal to
/// cox_nll_full restricted to the batch; computed by a different route
/// (global max-shift plus suffix sums).
CoxLoss cox_nll_batch(const CoxBatch& batch);

}  // namespace nsotree
