#ifndef SLBP_FKPP_HPP
#define SLBP_FKPP_HPP

// Deterministic solvers for the semi-discrete Fisher-KPP system
//   d/dt rho = (1/2) Lap^eps rho + rho (mu_eps - rho/2)
// and its continuum analogue at fine resolution, plus a branching
// random-walk Monte Carlo representation used as an independent oracle.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ensemble.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace slbp {

namespace detail {

// RK4 method-of-lines for d/dt u = lap_coeff/2 * (u_{+1}+u_{-1}-2u) + u(mu - u/2)
// on a periodic grid.  Stores every `stride`-th step (plus the endpoint).
inline DensityPath reaction_diffusion_rk4(const std::vector<double>& u0,
                                          double lap_coeff, double mu,
                                          double t0, double t_end, double dt_target,
                                          int stride = 1) {
    const int K = int(u0.size());
    if (t_end < t0) throw std::invalid_argument("reaction_diffusion_rk4: t_end < t0");
    // Explicit RK4 stability for the pure diffusion part needs
    // dt * lap_coeff * 2 < ~2.78; the default policies stay far inside.
    if (dt_target * lap_coeff * 2.0 > 2.5)
        throw std::invalid_argument("reaction_diffusion_rk4: dt exceeds stability bound");

    const long n_steps = t_end > t0 ? long(std::ceil((t_end - t0) / dt_target)) : 0;
    const double dt = n_steps > 0 ? (t_end - t0) / double(n_steps) : 0.0;

    auto rhs = [&](const std::vector<double>& u, std::vector<double>& out) {
        for (int z = 0; z < K; ++z) {
            int zl = z == 0 ? K - 1 : z - 1;
            int zr = z == K - 1 ? 0 : z + 1;
            double lap = u[size_t(zl)] + u[size_t(zr)] - 2.0 * u[size_t(z)];
            out[size_t(z)] = 0.5 * lap_coeff * lap +
                             u[size_t(z)] * (mu - 0.5 * u[size_t(z)]);
        }
    };

    DensityPath path;
    std::vector<double> u = u0, k1(u0.size()), k2(u0.size()), k3(u0.size()),
                        k4(u0.size()), tmp(u0.size());
    path.times.push_back(t0);
    path.values.push_back(u);

    for (long s = 0; s < n_steps; ++s) {
        rhs(u, k1);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + 0.5 * dt * k1[size_t(z)];
        rhs(tmp, k2);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + 0.5 * dt * k2[size_t(z)];
        rhs(tmp, k3);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + dt * k3[size_t(z)];
        rhs(tmp, k4);
        for (int z = 0; z < K; ++z)
            u[size_t(z)] += dt / 6.0 * (k1[size_t(z)] + 2.0 * k2[size_t(z)] +
                                        2.0 * k3[size_t(z)] + k4[size_t(z)]);
        for (double v : u)
            if (!std::isfinite(v)) throw std::runtime_error("reaction_diffusion_rk4: NaN/Inf");
        if ((s + 1) % stride == 0 || s + 1 == n_steps) {
            path.times.push_back(t0 + double(s + 1) * dt);
            path.values.push_back(u);
        }
    }
    return path;
}

} // namespace detail

// Semi-discrete solve on the K-site lattice with the truncated reaction mean.
// dt defaults to eps^2/4.
inline DensityPath fkpp_solve(const DensityField& rho0, const ModelParams& p,
                              double t_end, double dt = 0.0, int stride = 1) {
    if (rho0.K() != p.K) throw std::invalid_argument("fkpp_solve: lattice size mismatch");
    for (double v : rho0.values)
        if (v < 0.0) throw std::invalid_argument("fkpp_solve: negative initial data");
    if (dt <= 0.0) dt = 0.25 * p.epsilon * p.epsilon;
    return detail::reaction_diffusion_rk4(rho0.values, p.jump_rate_per_particle(),
                                          p.mu_eps, rho0.time, t_end, dt, stride);
}

// Continuum reference at resolution M (grid spacing 1/M, untruncated mean mu).
inline DensityPath continuum_reference(const std::vector<double>& rho0, double mu,
                                       double t_end, double dt = 0.0, int stride = 0) {
    const int M = int(rho0.size());
    if (M < 4) throw std::invalid_argument("continuum_reference: resolution too small");
    double lap_coeff = double(M) * double(M);
    if (dt <= 0.0) dt = 0.25 / lap_coeff;
    if (stride <= 0) {
        long n_steps = long(std::ceil(t_end / dt));
        stride = int(std::max<long>(1, n_steps / 2000));
    }
    return detail::reaction_diffusion_rk4(rho0, lap_coeff, mu, 0.0, t_end, dt, stride);
}

// Spatially constant closed form: rho' = rho (mu - rho/2).
inline double logistic_solution(double rho0, double mu, double t) {
    if (rho0 == 0.0) return 0.0;
    double e = std::exp(mu * t);
    return 2.0 * mu * rho0 * e / (2.0 * mu + rho0 * (e - 1.0));
}

// Net displacement of a rate-r continuous-time simple random walk over
// duration tau: Poisson number of steps, each +-1 with probability 1/2.
inline long srw_displacement(double rate, double tau, SplitMix64& rng) {
    long steps = rng.poisson(rate * tau);
    if (steps == 0) return 0;
    std::binomial_distribution<long> bin(steps, 0.5);
    long right = bin(rng);
    return 2 * right - steps;
}

// Branching random-walk representation of the semi-discrete FKPP solution:
//   rho_t(z) = 2 mu_eps (1 - E[ prod_{walkers u at time t} g(z + Z_u(t)) ]),
// with g = 1 - rho_0/(2 mu_eps), dyadic branching at rate mu_eps and jumps at
// rate eps^{-2}.  Returns the Monte Carlo (mean, stderr) at site z.
inline std::pair<double, double> mckean_estimate(const std::vector<double>& g0,
                                                 double t, int z,
                                                 const ModelParams& p, int R,
                                                 std::uint64_t master_seed,
                                                 int jobs = 1) {
    const int K = int(g0.size());
    if (K != p.K) throw std::invalid_argument("mckean_estimate: lattice size mismatch");
    for (double v : g0)
        if (v < 0.0 || v > 1.0)
            throw std::invalid_argument("mckean_estimate: g values must lie in [0,1]");

    const double jump_rate = p.jump_rate_per_particle();
    const double mu = p.mu_eps;
    auto body = [&](int, SplitMix64& rng) -> double {
        // walker positions, evolved split-by-split
        std::vector<int> pos{z};
        double s = 0.0;
        while (true) {
            double wait = rng.exponential(mu * double(pos.size()));
            double step_end = std::min(s + wait, t);
            double tau = step_end - s;
            for (auto& q : pos) q = wrap(q + int(srw_displacement(jump_rate, tau, rng) % K), K);
            s = step_end;
            if (s >= t) break;
            // dyadic split of a uniformly chosen walker
            size_t i = size_t(rng.below(pos.size()));
            pos.push_back(pos[i]);
            if (pos.size() > 1000000)
                throw std::runtime_error("mckean_estimate: walker population cap exceeded");
        }
        double prod = 1.0;
        for (int q : pos) prod *= g0[size_t(q)];
        return 2.0 * mu * (1.0 - prod);
    };
    EnsembleStats st = run_ensemble(R, master_seed, jobs, "mckean", body);
    return {st.mean, st.stderr_of_mean};
}

} // namespace slbp

#endif // SLBP_FKPP_HPP
