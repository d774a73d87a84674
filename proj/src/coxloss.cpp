#include "nsotree/coxloss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nsotree {

std::size_t CoxBatch::num_events() const {
    std::size_t n = 0;
    for (auto e : events) n += e ? 1 : 0;
    return n;
}

void CoxBatch::validate() const {
    if (scores.size() != times.size() || scores.size() != events.size())
        throw std::invalid_argument("CoxBatch: field sizes disagree");
    for (double s : scores)
        if (!std::isfinite(s)) throw std::invalid_argument("CoxBatch: non-finite score");
}

namespace {

std::vector<std::size_t> order_by_time_desc(const std::vector<double>& times) {
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return times[a] > times[b]; });
    return order;
}

}  // namespace

CoxLoss cox_nll_full(const std::vector<double>& scores, const std::vector<double>& times,
                     const std::vector<std::uint8_t>& events) {
    if (scores.size() != times.size() || scores.size() != events.size())
        throw std::invalid_argument("cox_nll_full: input sizes disagree");
    const std::size_t n = scores.size();
    std::size_t n_events = 0;
    for (auto e : events) n_events += e ? 1 : 0;
    if (n_events == 0) throw std::invalid_argument("cox_nll_full: no events");

    const auto order = order_by_time_desc(times);

    // Streaming log-sum-exp state over the growing risk set, processed from
    // the largest time down. lse = lse_max + log(lse_sum).
    double lse_max = -std::numeric_limits<double>::infinity();
    double lse_sum = 0.0;
    auto lse_add = [&](double g) {
        if (g <= lse_max) {
            lse_sum += std::exp(g - lse_max);
        } else {
            lse_sum = lse_sum * std::exp(lse_max - g) + 1.0;
            lse_max = g;
        }
    };

    // Per unique event time u (descending): lse_u and the event count d_u.
    std::vector<double> group_lse, group_time;
    std::vector<int> group_events;
    double loss = 0.0;
    for (std::size_t k = 0; k < n;) {
        const double t = times[order[k]];
        int d_u = 0;
        while (k < n && times[order[k]] == t) {
            lse_add(scores[order[k]]);
            if (events[order[k]]) {
                ++d_u;
                loss -= scores[order[k]];
            }
            ++k;
        }
        if (d_u > 0) {
            const double lse = lse_max + std::log(lse_sum);
            loss += static_cast<double>(d_u) * lse;
            group_lse.push_back(lse);
            group_time.push_back(t);
            group_events.push_back(d_u);
        }
    }

    // grad_i = -E_i + exp(g_i) * sum_{event times u <= T_i} d_u * exp(-lse_u).
    // Walk records from the smallest time up, folding each event-time group
    // into the inner sum kept in offset form cum = exp(off) * cum_scaled.
    // Since g_i <= lse_u whenever i is at risk at u, exp(g_i + off) never
    // overflows once off tracks the largest -lse_u seen.
    CoxLoss out;
    out.loss = loss;
    out.events = n_events;
    out.grad_scores.assign(n, 0.0);

    double off = 0.0, cum_scaled = 0.0;
    std::size_t gi = group_lse.size();  // groups are stored descending; walk backwards
    for (std::size_t a = n; a-- > 0;) {
        const std::size_t i = order[a];  // ascending times
        const double t = times[i];
        while (gi > 0 && group_time[gi - 1] == t) {
            --gi;
            const double term_log = -group_lse[gi];
            const double d_u = static_cast<double>(group_events[gi]);
            if (cum_scaled == 0.0) {
                off = term_log;
                cum_scaled = d_u;
            } else if (term_log > off) {
                cum_scaled = cum_scaled * std::exp(off - term_log) + d_u;
                off = term_log;
            } else {
                cum_scaled += d_u * std::exp(term_log - off);
            }
        }
        double g = events[i] ? -1.0 : 0.0;
        if (cum_scaled > 0.0) g += std::exp(scores[i] + off) * cum_scaled;
        out.grad_scores[i] = g;
    }
    return out;
}

CoxLoss cox_nll_batch(const CoxBatch& batch) {
    batch.validate();
    const std::size_t n = batch.size();
    const std::size_t n_events = batch.num_events();
    if (n_events == 0) throw std::invalid_argument("cox_nll_batch: no events in batch");

    // Shift every score by the batch max; the loss and gradient are shift
    // invariant and all exponentials then live in (0, 1].
    const double shift = *std::max_element(batch.scores.begin(), batch.scores.end());

    const auto order = order_by_time_desc(batch.times);

    // Descending sweep: suffix sums S(t) = sum_{T_k >= t} exp(g_k - shift),
    // recorded per unique time that carries events.
    std::vector<double> group_time, group_S;
    std::vector<int> group_events;
    double suffix = 0.0;
    double loss = 0.0;
    for (std::size_t k = 0; k < n;) {
        const double t = batch.times[order[k]];
        int d_u = 0;
        double anchor_scores = 0.0;
        while (k < n && batch.times[order[k]] == t) {
            suffix += std::exp(batch.scores[order[k]] - shift);
            if (batch.events[order[k]]) {
                ++d_u;
                anchor_scores += batch.scores[order[k]] - shift;
            }
            ++k;
        }
        if (d_u > 0) {
            loss += static_cast<double>(d_u) * std::log(suffix) - anchor_scores;
            group_time.push_back(t);
            group_S.push_back(suffix);
            group_events.push_back(d_u);
        }
    }

    // Ascending sweep for the gradient: C(t) = sum_{anchors u <= t} d_u / S(u),
    // grad_i = -E_i + exp(g_i - shift) * C(T_i).
    CoxLoss out;
    out.loss = loss;
    out.events = n_events;
    out.grad_scores.assign(n, 0.0);

    double cum = 0.0;
    std::size_t gi = group_time.size();
    for (std::size_t a = n; a-- > 0;) {
        // order is descending, so walk it backwards for ascending times
        const std::size_t i = order[a];
        const double t = batch.times[i];
        while (gi > 0 && group_time[gi - 1] == t) {
            --gi;
            cum += static_cast<double>(group_events[gi]) / group_S[gi];
        }
        out.grad_scores[i] = (batch.events[i] ? -1.0 : 0.0) +
                             std::exp(batch.scores[i] - shift) * cum;
    }
    return out;
}

}  // namespace nsotree
