#ifndef SLBP_VFUNC_HPP
#define SLBP_VFUNC_HPP

// Centered moment (V-)functions, their Monte Carlo expectations
// (v-functions), the closed-form coefficients of the v-function hierarchy,
// the single-site product-expansion coefficients, and generator /
// hierarchy consistency checks.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ensemble.hpp"
#include "field.hpp"
#include "fkpp.hpp"
#include "lattice.hpp"
#include "params.hpp"
#include "poly.hpp"
#include "sim.hpp"

namespace slbp {

// Single-site centered basis function
//   Vt_k(q, u) = sum_{l=0}^{k} C(k,l) eps^{kappa l} Q_l(q) (-u)^{k-l}.
// Vt_1(q,u) = X - u and Vt_2(q,u) = (X-u)^2 - eps^kappa X with X = eps^kappa q.
inline double vtilde(int k, std::int64_t q, double u, const ModelParams& p) {
    const double ek = p.eps_kappa();
    double sum = 0.0;
    double sign_pow = (k % 2 == 0) ? 1.0 : -1.0; // (-1)^{k-l} at l = 0
    for (int l = 0; l <= k; ++l) {
        double term = double(binomial(k, l)) * std::pow(ek, l) *
                      falling_factorial_d(l, q) * sign_pow *
                      std::pow(u, k - l);
        sum += term;
        sign_pow = -sign_pow;
    }
    return sum;
}

// V^eps(x, x'; rho) via the per-site factorization.
inline double v_exact(const TestConfig& x, const SiteConfig& xp,
                      const DensityField& rho, const ModelParams& p) {
    if (x.order() > 6) throw std::invalid_argument("v_exact: order > 6 unsupported");
    double prod = 1.0;
    for (auto& [z, k] : x.entries)
        prod *= vtilde(k, xp.counts[size_t(z)], rho.values[size_t(z)], p);
    return prod;
}

// Direct definition: sum over sub-configurations x0 <= x (choices of
// surviving particles) of Q^eps(x0, x') (-1)^{n_x - n_x0} rho^{removed}.
// Quadratic-cost oracle used to validate the factorized evaluation.
inline double v_direct(const TestConfig& x, const SiteConfig& xp,
                       const DensityField& rho, const ModelParams& p) {
    std::vector<std::pair<int, int>> sites(x.entries.begin(), x.entries.end());
    double total = 0.0;
    // recursive enumeration of (j_z) with j_z <= k_z
    std::vector<int> j(sites.size(), 0);
    auto rec = [&](auto&& self, size_t i) -> void {
        if (i == sites.size()) {
            TestConfig x0;
            double weight = 1.0;
            int removed = 0;
            for (size_t s = 0; s < sites.size(); ++s) {
                auto [z, k] = sites[s];
                if (j[s] > 0) x0.entries[z] = j[s];
                weight *= double(binomial(k, j[s])) *
                          std::pow(rho.values[size_t(z)], k - j[s]);
                removed += k - j[s];
            }
            double sign = (removed % 2 == 0) ? 1.0 : -1.0;
            total += sign * weight * q_eps(x0, xp, p);
            return;
        }
        for (j[i] = 0; j[i] <= sites[i].second; ++j[i]) self(self, i + 1);
    };
    rec(rec, 0);
    return total;
}

// ---------------------------------------------------------------------------
// Hierarchy coefficients.
//
// The branching/coalescence generator acts on the single-site moment
// Q^eps_k(q) = eps^{kappa k} Q_k(q) as
//   (G Q^eps_k)(q) = q sum_l p^eps_l [Q^eps_k(q+l) - Q^eps_k(q)]
//                  + eps^kappa q(q-1)/2 [Q^eps_k(q-1) - Q^eps_k(q)],
// and the time derivative of the centering field contributes
// -m u (mu_eps - u/2) Vt_{m-1} to the evolution of Vt_m.  Expanding the
// resulting polynomial in the degree-triangular basis {Vt_r(., u)} yields the
// coefficients c_h(m, u) coupling order m to order m + h, h in [-m, 1].
// ---------------------------------------------------------------------------

inline Poly poly_vtilde(int k, double u, const ModelParams& p) {
    const double ek = p.eps_kappa();
    Poly out{0.0};
    for (int l = 0; l <= k; ++l) {
        double coef = double(binomial(k, l)) * std::pow(ek, l) *
                      ((k - l) % 2 == 0 ? 1.0 : -1.0) * std::pow(u, k - l);
        poly_axpy(out, coef, poly_falling(l));
    }
    return out;
}

// (G Q^eps_k)(q) as a polynomial in q.
inline Poly poly_generator_on_Qeps(int k, const ModelParams& p) {
    const double ek = p.eps_kappa();
    const double ekk = std::pow(ek, k);
    Poly q_lin{0.0, 1.0};               // q
    Poly q_pair{0.0, -0.5, 0.5};        // q(q-1)/2
    Poly Qk = poly_falling(k);

    Poly branch{0.0};
    for (int l = 1; l <= p.L; ++l) {
        Poly diff = poly_falling_shifted(k, double(l));
        poly_axpy(diff, -1.0, Qk);
        poly_axpy(branch, p.truncated_pmf[size_t(l - 1)], diff);
    }
    Poly out = poly_mul(q_lin, branch);

    Poly coal_diff = poly_falling_shifted(k, -1.0);
    poly_axpy(coal_diff, -1.0, Qk);
    Poly coal = poly_mul(q_pair, coal_diff);
    poly_axpy(out, ek, coal);

    for (auto& c : out) c *= ekk;
    return out;
}

// All coefficients c_h(m, u), returned as c[r] for target order r = m + h,
// r in [0, m+1].
inline std::vector<double> hierarchy_coeffs_all(int m, double u, const ModelParams& p) {
    if (m < 1 || m > 6) throw std::out_of_range("hierarchy_coeffs_all: need 1 <= m <= 6");
    // generator action on Vt_m(., u)
    Poly P{0.0};
    for (int k = 0; k <= m; ++k) {
        double coef = double(binomial(m, k)) *
                      ((m - k) % 2 == 0 ? 1.0 : -1.0) * std::pow(u, m - k);
        poly_axpy(P, coef, poly_generator_on_Qeps(k, p));
    }
    // centering-field drift: d/dt of the u-slots, reaction part
    poly_axpy(P, -double(m) * u * (p.mu_eps - 0.5 * u), poly_vtilde(m - 1, u, p));

    // back-substitution in the triangular basis {Vt_r}: leading coefficient
    // of Vt_r is eps^{kappa r}
    const double ek = p.eps_kappa();
    std::vector<double> c(size_t(m) + 2, 0.0);
    P.resize(size_t(m) + 2, 0.0);
    for (int r = m + 1; r >= 0; --r) {
        double lead = std::pow(ek, r);
        double cr = P[size_t(r)] / lead;
        c[size_t(r)] = cr;
        if (cr != 0.0) poly_axpy(P, -cr, poly_vtilde(r, u, p));
        P[size_t(r)] = 0.0; // kill rounding residue at the cleared degree
    }
    return c;
}

inline double hierarchy_coeff(int h, int m, double u, const ModelParams& p) {
    if (h < -m || h > 1) throw std::out_of_range("hierarchy_coeff: need -m <= h <= 1");
    return hierarchy_coeffs_all(m, u, p)[size_t(m + h)];
}

// ---------------------------------------------------------------------------
// Product expansion Vt_k(q,u) Vt_m(q,u) = sum_r c_r(k,m;u) Vt_r(q,u),
// from the pairing identity
//   Q_{j1} Q_{j2} = sum_l C(j1,l) C(j2,l) l! Q_{j1+j2-l}
// and the inverse basis change Q^eps_s(q) = sum_r C(s,r) u^{s-r} Vt_r(q,u).
// ---------------------------------------------------------------------------
inline std::vector<double> product_coeffs(int k, int m, double u, const ModelParams& p) {
    if (k < 0 || m < 0 || k + m > 8)
        throw std::out_of_range("product_coeffs: need k + m <= 8");
    const double ek = p.eps_kappa();
    std::vector<double> c(size_t(k + m) + 1, 0.0);
    for (int j1 = 0; j1 <= k; ++j1)
        for (int j2 = 0; j2 <= m; ++j2) {
            double outer = double(binomial(k, j1)) * double(binomial(m, j2)) *
                           ((k + m - j1 - j2) % 2 == 0 ? 1.0 : -1.0);
            for (int l = 0; l <= std::min(j1, j2); ++l) {
                double pair = double(binomial(j1, l)) * double(binomial(j2, l)) *
                              double(falling_factorial(l, l)) * std::pow(ek, l);
                int s = j1 + j2 - l;
                for (int r = 0; r <= s; ++r)
                    c[size_t(r)] += outer * pair * double(binomial(s, r)) *
                                    std::pow(u, k + m - l - r);
            }
        }
    return c;
}

// ---------------------------------------------------------------------------
// Generator moment right-hand side: the branching/coalescence generator
// applied to Q^eps(x, .) and evaluated at x'.
// ---------------------------------------------------------------------------
inline double generator_moment_rhs(const TestConfig& x, const SiteConfig& xp,
                                   const ModelParams& p) {
    if (x.order() > 4) throw std::invalid_argument("generator_moment_rhs: order > 4");
    const double ek = p.eps_kappa();
    double total = 0.0;
    for (auto& [z, k] : x.entries) {
        std::int64_t q = xp.counts[size_t(z)];
        double ekk = std::pow(ek, k);
        double site = 0.0;
        // branching: rate q, offspring l with prob p^eps_l
        double br = 0.0;
        for (int l = 1; l <= p.L; ++l)
            br += p.truncated_pmf[size_t(l - 1)] *
                  (falling_factorial_d(k, q + l) - falling_factorial_d(k, q));
        site += double(q) * br * ekk;
        // coalescence: rate eps^kappa q(q-1)/2, removes one particle
        site += ek * double(q) * double(q - 1) * 0.5 *
                (falling_factorial_d(k, q - 1) - falling_factorial_d(k, q)) * ekk;
        // product over the other marked sites
        double rest = 1.0;
        for (auto& [z2, k2] : x.entries) {
            if (z2 == z) continue;
            rest *= std::pow(ek, k2) * falling_factorial_d(k2, xp.counts[size_t(z2)]);
        }
        total += site * rest;
    }
    return total;
}

// Discrete Laplacian of the v-observable in the test-configuration argument:
// (1/2) sum over marked particles of eps^{-2} [V(moved left) + V(moved right)
// - 2 V].  Used by the hierarchy residual.
inline double half_laplacian_v(const TestConfig& x, const SiteConfig& xp,
                               const DensityField& rho, const ModelParams& p) {
    const double half_inv_e2 = 0.5 * p.jump_rate_per_particle();
    double acc = 0.0;
    double v0 = v_exact(x, xp, rho, p);
    for (auto& [z, k] : x.entries) {
        int zl = wrap(z - 1, p.K), zr = wrap(z + 1, p.K);
        acc += double(k) * half_inv_e2 *
               (v_exact(x.moved(z, zl), xp, rho, p) +
                v_exact(x.moved(z, zr), xp, rho, p) - 2.0 * v0);
    }
    return acc;
}

// Monte Carlo v-function estimate over an ensemble of configurations.
inline EnsembleStats v_estimate(const TestConfig& x,
                                const std::vector<SiteConfig>& ensemble,
                                const DensityField& rho, const ModelParams& p,
                                std::uint64_t master_seed = 0) {
    if (ensemble.empty()) throw std::invalid_argument("v_estimate: empty ensemble");
    std::vector<double> vals(ensemble.size());
    for (size_t i = 0; i < ensemble.size(); ++i)
        vals[i] = v_exact(x, ensemble[i], rho, p);
    return reduce_stats(vals, "v", master_seed);
}

// ---------------------------------------------------------------------------
// Hierarchy residual: Monte Carlo check that
//   d/dt v_t(x) = (1/2) Lap v_t(x)
//               + sum_{z in supp(x)} sum_{h=-k_z}^{1} c_h(k_z, rho_t(z)) v_t(x^{(z,h)}).
// Each replica contributes
//   [V(x, X_{t+dt}; rho_{t+dt}) - V(x, X_t; rho_t)]/dt - RHS(X_t)
// so common random numbers absorb most of the variance of the difference
// quotient.  The expectation of the residual is O(dt) + Monte Carlo noise.
// ---------------------------------------------------------------------------
struct ResidualResult {
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    int replicas = 0;
};

inline ResidualResult hierarchy_residual(const TestConfig& x,
                                         const DensityField& rho0,
                                         const ModelParams& p, double t, double dt,
                                         int R, std::uint64_t master_seed,
                                         int jobs = 1) {
    if (x.order() > 3) throw std::invalid_argument("hierarchy_residual: order > 3");
    DensityPath rho_path = fkpp_solve(rho0, p, t + dt);
    DensityField rho_t = rho_path.at(t);
    DensityField rho_tdt = rho_path.at(t + dt);

    // precompute hierarchy coefficients per marked site
    struct SiteCoef { int z; int k; std::vector<double> c; };
    std::vector<SiteCoef> coefs;
    for (auto& [z, k] : x.entries)
        coefs.push_back({z, k, hierarchy_coeffs_all(k, rho_t.values[size_t(z)], p)});

    std::vector<double> obs_times{t, t + dt};
    auto body = [&](int, SplitMix64& rng) -> double {
        SiteConfig x0 = sample_initial(rho0, p, rng);
        Trajectory tr = simulate(x0, p, obs_times, {}, rng);
        const SiteConfig& Xt = tr.snapshots[0];
        const SiteConfig& Xtdt = tr.snapshots[1];

        double dq = (v_exact(x, Xtdt, rho_tdt, p) - v_exact(x, Xt, rho_t, p)) / dt;
        double rhs = half_laplacian_v(x, Xt, rho_t, p);
        for (auto& sc : coefs)
            for (int h = -sc.k; h <= 1; ++h) {
                double ch = sc.c[size_t(sc.k + h)];
                if (ch != 0.0) rhs += ch * v_exact(x.with(sc.z, h), Xt, rho_t, p);
            }
        return dq - rhs;
    };
    auto rows = run_replica_rows(R, 1, master_seed, jobs,
                                 [&](int r, SplitMix64& rng, double* out) { out[0] = body(r, rng); });
    EnsembleStats st = reduce_stats(column(rows, 0), "hierarchy_residual", master_seed);
    return {st.mean, st.stderr_of_mean, R};
}

} // namespace slbp

#endif // SLBP_VFUNC_HPP
