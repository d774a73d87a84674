#include "nsotree/math.hpp"

#include <limits>

namespace nsotree {

namespace {

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double term = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = std::numeric_limits<double>::min() / 1e-30;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gamma_p: a must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_p: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gamma_q: a must be positive");
    if (x < 0.0) throw std::invalid_argument("gamma_q: x must be nonnegative");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile: empty sample");
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("percentile: p outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace nsotree
