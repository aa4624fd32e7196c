#ifndef SLBP_PARAMS_HPP
#define SLBP_PARAMS_HPP

// Model parameters for the rescaled branching-coalescing walk on the
// discrete circle: lattice scale epsilon, competition exponent kappa,
// fluctuation exponent gamma, offspring law (with scale-dependent
// truncation and renormalization) and its truncated moments.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace slbp {

struct ModelParams {
    double epsilon = 0.0;        // lattice scale, in (0,1)
    double kappa = 0.0;          // competition exponent, >= 0
    double gamma = 0.0;          // fluctuation exponent, default (kappa-1)/2
    int K = 0;                   // number of sites = floor(1/epsilon)
    int L = 0;                   // offspring truncation level
    std::vector<double> base_pmf;      // p_l, l = 1..size (index 0 <-> l = 1)
    std::vector<double> truncated_pmf; // p^eps_l = c_eps * p_l for l <= L
    double c_eps = 1.0;          // truncation normalizer
    double mu = 0.0;             // mean of the base law
    double mu_eps = 0.0;         // mean of the truncated law
    double sigma2 = 0.0;         // variance of the base law
    double sigma2_eps = 0.0;     // variance of the truncated law
    double T = 1.0;              // time horizon

    // Diagnostic switches for oracle tests: scale factors on the jump and
    // coalescence channels (1 = physical dynamics).  Setting one to 0 turns
    // the channel off (pure-branching / single-site birth-death reductions).
    double jump_scale = 1.0;
    double coalesce_scale = 1.0;

    double eps_kappa() const { return std::pow(epsilon, kappa); }
    double jump_rate_per_particle() const { return 1.0 / (epsilon * epsilon); }
};

enum class TruncationRule {
    Default,  // L = max(1, ceil(eps^{-kappa/2})) for kappa > 0, ceil(log2(1/eps)) for kappa = 0
    Explicit, // caller-provided L
};

inline ModelParams derive_params(double epsilon, double kappa,
                                 const std::vector<double>& base_pmf,
                                 double T,
                                 TruncationRule rule = TruncationRule::Default,
                                 int explicit_L = 0,
                                 bool has_gamma = false, double gamma = 0.0) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("derive_params: epsilon must be in (0,1)");
    if (kappa < 0.0)
        throw std::invalid_argument("derive_params: kappa must be >= 0");
    if (base_pmf.empty())
        throw std::invalid_argument("derive_params: empty offspring pmf");

    double sum = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < base_pmf.size(); ++i) {
        if (base_pmf[i] < 0.0)
            throw std::invalid_argument("derive_params: negative pmf entry");
        sum += base_pmf[i];
        mean += double(i + 1) * base_pmf[i];
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("derive_params: offspring pmf must sum to 1");

    ModelParams p;
    p.epsilon = epsilon;
    p.kappa = kappa;
    p.gamma = has_gamma ? gamma : (kappa - 1.0) / 2.0;
    p.K = int(std::floor(1.0 / epsilon));
    if (p.K < 2) throw std::invalid_argument("derive_params: need floor(1/epsilon) >= 2");
    p.base_pmf = base_pmf;
    p.mu = mean;
    p.sigma2 = 0.0;
    for (std::size_t i = 0; i < base_pmf.size(); ++i) {
        double d = double(i + 1) - mean;
        p.sigma2 += d * d * base_pmf[i];
    }
    p.T = T;

    int L;
    if (rule == TruncationRule::Explicit) {
        L = explicit_L;
    } else if (kappa > 0.0) {
        L = int(std::ceil(std::pow(epsilon, -kappa / 2.0)));
    } else {
        L = int(std::ceil(std::log2(1.0 / epsilon)));
    }
    if (L < 1) throw std::invalid_argument("derive_params: truncation level must be >= 1");
    L = std::min<int>(L, int(base_pmf.size()));
    p.L = L;

    double head = 0.0;
    for (int l = 1; l <= L; ++l) head += base_pmf[l - 1];
    if (head <= 0.0)
        throw std::invalid_argument("derive_params: truncated pmf has zero mass");
    p.c_eps = 1.0 / head;
    p.truncated_pmf.assign(L, 0.0);
    for (int l = 1; l <= L; ++l) p.truncated_pmf[l - 1] = p.c_eps * base_pmf[l - 1];

    p.mu_eps = 0.0;
    for (int l = 1; l <= L; ++l) p.mu_eps += double(l) * p.truncated_pmf[l - 1];
    p.sigma2_eps = 0.0;
    for (int l = 1; l <= L; ++l) {
        double d = double(l) - p.mu_eps;
        p.sigma2_eps += d * d * p.truncated_pmf[l - 1];
    }
    return p;
}

// Convenience offspring laws.
inline std::vector<double> binary_law() { return {1.0}; }

inline std::vector<double> geometric_law(int n_terms = 60) {
    // p_l = 2^{-l}, truncated at n_terms and renormalized to sum to 1.
    std::vector<double> p(n_terms);
    double s = 0.0;
    for (int l = 1; l <= n_terms; ++l) { p[l - 1] = std::pow(2.0, -l); s += p[l - 1]; }
    for (auto& v : p) v /= s;
    return p;
}

} // namespace slbp

#endif // SLBP_PARAMS_HPP
