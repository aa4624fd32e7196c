#ifndef SLBP_FIT_HPP
#define SLBP_FIT_HPP

// Log-log rate fitting with replica-resampling bootstrap confidence, plus
// higher-moment sample statistics.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ensemble.hpp"
#include "rng.hpp"

namespace slbp {

struct RateFit {
    std::vector<double> log_eps;
    std::vector<double> log_err;
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;        // RMS of OLS residuals
    double confidence_half = 0.0; // bootstrap half-width (~2 sd of slope)
};

inline void ols(const std::vector<double>& x, const std::vector<double>& y,
                double& slope, double& intercept) {
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    slope = sxy / sxx;
    intercept = my - slope * mx;
}

// points: (epsilon, |error|, stderr of the error estimate).
inline RateFit fit_rate(const std::vector<double>& eps,
                        const std::vector<double>& err,
                        const std::vector<double>& err_stderr = {},
                        int n_boot = 400, std::uint64_t seed = 12345) {
    if (eps.size() < 3) throw std::invalid_argument("fit_rate: need >= 3 points");
    if (eps.size() != err.size()) throw std::invalid_argument("fit_rate: size mismatch");
    RateFit f;
    for (size_t i = 0; i < eps.size(); ++i) {
        if (err[i] <= 0.0) throw std::invalid_argument("fit_rate: non-positive error value");
        f.log_eps.push_back(std::log(eps[i]));
        f.log_err.push_back(std::log(err[i]));
    }
    ols(f.log_eps, f.log_err, f.slope, f.intercept);
    double ss = 0.0;
    for (size_t i = 0; i < eps.size(); ++i) {
        double r = f.log_err[i] - (f.intercept + f.slope * f.log_eps[i]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / double(eps.size()));

    if (!err_stderr.empty()) {
        if (err_stderr.size() != err.size())
            throw std::invalid_argument("fit_rate: stderr size mismatch");
        // parametric bootstrap: jitter each point by its Monte Carlo noise
        SplitMix64 rng(seed);
        std::vector<double> slopes;
        slopes.reserve(size_t(n_boot));
        for (int b = 0; b < n_boot; ++b) {
            std::vector<double> ly(err.size());
            bool ok = true;
            for (size_t i = 0; i < err.size(); ++i) {
                double e = err[i] + err_stderr[i] * rng.normal();
                if (e <= 0.0) { ok = false; break; }
                ly[i] = std::log(e);
            }
            if (!ok) continue;
            double s, c;
            ols(f.log_eps, ly, s, c);
            slopes.push_back(s);
        }
        if (slopes.size() >= 10) {
            double m = pairwise_sum(slopes) / double(slopes.size());
            double v = 0.0;
            for (double s : slopes) v += (s - m) * (s - m);
            v /= double(slopes.size() - 1);
            f.confidence_half = 2.0 * std::sqrt(v);
        }
    }
    return f;
}

struct MomentStats {
    double mean = 0.0;
    double variance = 0.0;
    double stderr_of_variance = 0.0;
    double skewness = 0.0;
    double skewness_stderr = 0.0;
    double excess_kurtosis = 0.0;
    double kurtosis_stderr = 0.0;
    int n = 0;
};

inline MomentStats moment_stats(const std::vector<double>& v) {
    const size_t n = v.size();
    if (n < 8) throw std::invalid_argument("moment_stats: too few samples");
    MomentStats m;
    m.n = int(n);
    m.mean = pairwise_sum(v) / double(n);
    std::vector<double> c2(n), c3(n), c4(n);
    for (size_t i = 0; i < n; ++i) {
        double d = v[i] - m.mean;
        c2[i] = d * d;
        c3[i] = d * d * d;
        c4[i] = d * d * d * d;
    }
    double m2 = pairwise_sum(c2) / double(n);
    double m3 = pairwise_sum(c3) / double(n);
    double m4 = pairwise_sum(c4) / double(n);
    m.variance = m2 * double(n) / double(n - 1);
    m.stderr_of_variance = std::sqrt((m4 - m2 * m2) / double(n));
    double sd = std::sqrt(m2);
    m.skewness = m3 / (sd * sd * sd);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    // Gaussian-null standard errors; used for compatibility-with-zero checks.
    m.skewness_stderr = std::sqrt(6.0 / double(n));
    m.kurtosis_stderr = std::sqrt(24.0 / double(n));
    return m;
}

} // namespace slbp

#endif // SLBP_FIT_HPP
