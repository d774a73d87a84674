#include "nsotree/simdata.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "nsotree/math.hpp"

namespace nsotree {

std::string to_string(RiskKind k) {
    return k == RiskKind::Linear ? "linear" : "gaussian";
}

RiskKind risk_kind_from_string(const std::string& s) {
    if (s == "linear") return RiskKind::Linear;
    if (s == "gaussian") return RiskKind::Gaussian;
    throw std::invalid_argument("unknown risk kind: " + s);
}

void SimConfig::validate() const {
    if (n_train < 1 || n_valid < 0 || n_test < 0)
        throw std::invalid_argument("SimConfig: split sizes invalid");
    if (d < 2) throw std::invalid_argument("SimConfig: d must be >= 2");
    if (!(lambda_max > 1.0)) throw std::invalid_argument("SimConfig: lambda_max must be > 1");
    if (!(r > 0.0)) throw std::invalid_argument("SimConfig: r must be > 0");
    if (!(baseline_rate > 0.0)) throw std::invalid_argument("SimConfig: baseline_rate must be > 0");
    if (!(censor_frac >= 0.0 && censor_frac < 1.0))
        throw std::invalid_argument("SimConfig: censor_frac must be in [0,1)");
}

double true_risk(const double* x, int d, const SimConfig& cfg) {
    if (d < 2) throw std::invalid_argument("true_risk: need at least two covariates");
    if (cfg.risk == RiskKind::Linear) return x[0] + 2.0 * x[1];
    const double q = (x[0] * x[0] + x[1] * x[1]) / (2.0 * cfg.r * cfg.r);
    return std::log(cfg.lambda_max) * std::exp(-q);
}

namespace {

// Calibrate the exponential censoring rate c so that the expected censored
// fraction E[c / (c + rate_i)] over the generated sample equals the target.
double calibrate_censoring_rate(const std::vector<double>& rates, double target) {
    auto frac = [&](double c) {
        double s = 0.0;
        for (double r : rates) s += c / (c + r);
        return s / static_cast<double>(rates.size());
    };
    double lo = 1e-12, hi = 1e12;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);  // bisect in log space
        if (frac(mid) < target) lo = mid;
        else hi = mid;
        if (hi / lo < 1.0 + 1e-13) break;
    }
    return std::sqrt(lo * hi);
}

}  // namespace

SimResult simulate(const SimConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x51));

    const int sizes[3] = {cfg.n_train, cfg.n_valid, cfg.n_test};
    const std::size_t total = static_cast<std::size_t>(cfg.n_train + cfg.n_valid + cfg.n_test);

    // Draw every covariate first so the rate calibration sees the whole sample.
    std::vector<double> xs(total * static_cast<std::size_t>(cfg.d));
    for (auto& v : xs) v = uniform_in(rng, -1.0, 1.0);

    std::vector<double> risks(total), rates(total);
    for (std::size_t i = 0; i < total; ++i) {
        risks[i] = true_risk(xs.data() + i * static_cast<std::size_t>(cfg.d), cfg.d, cfg);
        rates[i] = cfg.baseline_rate * std::exp(risks[i]);
    }

    SimResult out;
    if (cfg.censor_frac > 0.0)
        out.censoring_rate = calibrate_censoring_rate(rates, cfg.censor_frac);

    std::vector<double> times(total);
    std::vector<std::uint8_t> events(total);
    std::size_t censored = 0;
    for (std::size_t i = 0; i < total; ++i) {
        const double u = uniform01(rng);
        const double death = -std::log1p(-u) / rates[i];
        if (cfg.censor_frac > 0.0) {
            const double v = uniform01(rng);
            const double censor = -std::log1p(-v) / out.censoring_rate;
            times[i] = std::min(death, censor);
            events[i] = death <= censor ? 1 : 0;
        } else {
            times[i] = death;
            events[i] = 1;
        }
        if (!events[i]) ++censored;
    }
    out.empirical_censoring = static_cast<double>(censored) / static_cast<double>(total);

    SimSplit* splits[3] = {&out.train, &out.valid, &out.test};
    std::size_t offset = 0;
    for (int s = 0; s < 3; ++s) {
        SimSplit& split = *splits[s];
        const std::size_t n = static_cast<std::size_t>(sizes[s]);
        split.data.d = cfg.d;
        split.data.feature_names.resize(static_cast<std::size_t>(cfg.d));
        for (int j = 0; j < cfg.d; ++j)
            split.data.feature_names[static_cast<std::size_t>(j)] = "x" + std::to_string(j);
        split.data.x.assign(xs.begin() + static_cast<std::ptrdiff_t>(offset * static_cast<std::size_t>(cfg.d)),
                            xs.begin() + static_cast<std::ptrdiff_t>((offset + n) * static_cast<std::size_t>(cfg.d)));
        split.data.time.assign(times.begin() + static_cast<std::ptrdiff_t>(offset),
                               times.begin() + static_cast<std::ptrdiff_t>(offset + n));
        split.data.event.assign(events.begin() + static_cast<std::ptrdiff_t>(offset),
                                events.begin() + static_cast<std::ptrdiff_t>(offset + n));
        split.true_risks.assign(risks.begin() + static_cast<std::ptrdiff_t>(offset),
                                risks.begin() + static_cast<std::ptrdiff_t>(offset + n));
        offset += n;
    }
    return out;
}

}  // namespace nsotree
