#ifndef SLBP_SIM_HPP
#define SLBP_SIM_HPP

// Exact continuous-time simulation of the rescaled branching-coalescing
// random walk on the circle: nearest-neighbour jumps at rate eps^{-2} per
// particle, multiple-fission branching by the truncated offspring law at
// rate 1 per particle, and pairwise same-site coalescence at rate eps^kappa
// per pair.  Next-event (Gillespie) sampling with a Fenwick-tree site index.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "alias.hpp"
#include "fenwick.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace slbp {

struct SiteRates {
    double jump = 0.0;     // n * eps^{-2}, split 50/50 left/right on event
    double branch = 0.0;   // n (offspring law is normalized)
    double coalesce = 0.0; // eps^kappa * n(n-1)/2, removes one particle
    double total() const { return jump + branch + coalesce; }
};

inline SiteRates site_rates(std::int64_t n, const ModelParams& p) {
    SiteRates r;
    if (n <= 0) return r;
    double dn = double(n);
    r.jump = p.jump_scale * dn * p.jump_rate_per_particle();
    r.branch = dn;
    r.coalesce = p.coalesce_scale * p.eps_kappa() * dn * (dn - 1.0) * 0.5;
    return r;
}

// Independent Poisson counts with intensity eps^{-kappa} * rho0(z), so the
// scaled field has per-site mean rho0(z).
inline SiteConfig sample_initial(const DensityField& rho0, const ModelParams& p,
                                 SplitMix64& rng) {
    if (rho0.K() != p.K) throw std::invalid_argument("sample_initial: lattice size mismatch");
    SiteConfig x(p.K);
    const double inv_ek = 1.0 / p.eps_kappa();
    for (int z = 0; z < p.K; ++z) {
        double lam = rho0.values[size_t(z)] * inv_ek;
        if (lam < 0.0) throw std::invalid_argument("sample_initial: negative intensity");
        x.counts[size_t(z)] = lam > 0.0 ? rng.poisson(lam) : 0;
    }
    return x;
}

// A functional of the (piecewise-constant) trajectory, integrated exactly in
// the particle state over [t_begin, t_end]; explicit time dependence (through
// smooth deterministic fields) is handled with per-segment Simpson quadrature.
struct WindowFunctional {
    double t_begin = 0.0;
    double t_end = 0.0;
    std::function<double(const SiteConfig&, double)> eval;
};

struct Trajectory {
    std::vector<double> snapshot_times;
    std::vector<SiteConfig> snapshots;
    std::vector<double> integrals;   // one per registered functional
    std::uint64_t event_count = 0;
    std::uint64_t jumps_left = 0;    // per-type event bookkeeping
    std::uint64_t jumps_right = 0;
    std::uint64_t branches = 0;
    std::uint64_t coalescences = 0;
    std::int64_t offspring_total = 0;
    SiteConfig final_state;
    double final_time = 0.0;
};

namespace detail {
inline double simpson_segment(const WindowFunctional& f, const SiteConfig& x,
                              double t0, double t1) {
    double a = t0 > f.t_begin ? t0 : f.t_begin;
    double b = t1 < f.t_end ? t1 : f.t_end;
    if (b <= a) return 0.0;
    double h = b - a;
    return h / 6.0 * (f.eval(x, a) + 4.0 * f.eval(x, 0.5 * (a + b)) + f.eval(x, b));
}
} // namespace detail

class Simulator {
public:
    Simulator(const ModelParams& p)
        : p_(p), offspring_(p.truncated_pmf), fw_(p.K) {}

    // Simulate from x0 up to max(observe_times, functional windows).
    // observe_times must be sorted and non-negative.
    Trajectory run(const SiteConfig& x0, const std::vector<double>& observe_times,
                   const std::vector<WindowFunctional>& functionals,
                   SplitMix64& rng) {
        if (x0.K() != p_.K) throw std::invalid_argument("simulate: lattice size mismatch");
        for (size_t i = 1; i < observe_times.size(); ++i)
            if (observe_times[i] < observe_times[i - 1])
                throw std::invalid_argument("simulate: observe times must be sorted");

        double t_end = 0.0;
        for (double t : observe_times) t_end = t > t_end ? t : t_end;
        for (auto& f : functionals) t_end = f.t_end > t_end ? f.t_end : t_end;

        x_ = x0;
        const double inv_e2 = p_.jump_scale * p_.jump_rate_per_particle();
        const double ek = p_.coalesce_scale * p_.eps_kappa();
        for (int z = 0; z < p_.K; ++z) fw_.set(z, site_total_rate(x_.counts[size_t(z)], inv_e2, ek));

        Trajectory out;
        out.integrals.assign(functionals.size(), 0.0);

        double t = 0.0;
        size_t obs_i = 0;
        std::uint64_t since_audit = 0;
        const bool has_fn = !functionals.empty();

        while (true) {
            double R = fw_.total();
            double t_next = (R > 0.0) ? t + rng.exponential(R) : t_end + 1.0;
            double seg_end = t_next < t_end ? t_next : t_end;

            // state is constant on [t, seg_end): record observations, integrate.
            while (obs_i < observe_times.size() && observe_times[obs_i] <= seg_end) {
                out.snapshot_times.push_back(observe_times[obs_i]);
                out.snapshots.push_back(x_);
                ++obs_i;
            }
            if (has_fn && seg_end > t)
                for (size_t i = 0; i < functionals.size(); ++i)
                    out.integrals[i] += detail::simpson_segment(functionals[i], x_, t, seg_end);

            if (t_next >= t_end) { t = t_end; break; }
            t = t_next;

            apply_event(rng, inv_e2, ek, out);
            ++out.event_count;

            if (++since_audit == 100000) {
                since_audit = 0;
                double exact = fw_.exact_total();
                double tot = fw_.total();
                double scale = exact > 1.0 ? exact : 1.0;
                if (std::abs(tot - exact) > 1e-9 * scale) fw_.rebuild();
            }
            if (x_.counts[size_t(last_site_)] > max_count_)
                throw std::runtime_error("simulate: site count exceeded safety threshold at site " +
                                         std::to_string(last_site_));
        }

        out.final_state = x_;
        out.final_time = t;
        return out;
    }

private:
    static double site_total_rate(std::int64_t n, double inv_e2, double ek) {
        if (n <= 0) return 0.0;
        double dn = double(n);
        return dn * (inv_e2 + 1.0) + ek * dn * (dn - 1.0) * 0.5;
    }

    void apply_event(SplitMix64& rng, double inv_e2, double ek, Trajectory& out) {
        int z = fw_.sample(rng.uniform());
        std::int64_t n = x_.counts[size_t(z)];
        double dn = double(n);
        double jump = dn * inv_e2;
        double branch = dn;
        double coal = ek * dn * (dn - 1.0) * 0.5;
        double u = rng.uniform() * (jump + branch + coal);
        if (u < jump) {
            int dir = (rng.uniform() < 0.5) ? 1 : -1;
            if (dir > 0) ++out.jumps_right; else ++out.jumps_left;
            int z2 = z + dir;
            if (z2 < 0) z2 += p_.K; else if (z2 >= p_.K) z2 -= p_.K;
            x_.counts[size_t(z)] = n - 1;
            x_.counts[size_t(z2)] += 1;
            fw_.set(z, site_total_rate(n - 1, inv_e2, ek));
            fw_.set(z2, site_total_rate(x_.counts[size_t(z2)], inv_e2, ek));
            last_site_ = z2;
        } else if (u < jump + branch) {
            int ell = offspring_.draw(rng) + 1;
            ++out.branches;
            out.offspring_total += ell;
            x_.counts[size_t(z)] = n + ell;
            fw_.set(z, site_total_rate(n + ell, inv_e2, ek));
            last_site_ = z;
        } else {
            ++out.coalescences;
            x_.counts[size_t(z)] = n - 1;
            fw_.set(z, site_total_rate(n - 1, inv_e2, ek));
            last_site_ = z;
        }
    }

    ModelParams p_;
    AliasTable offspring_;
    FenwickSampler fw_;
    SiteConfig x_;
    int last_site_ = 0;
    static constexpr std::int64_t max_count_ = std::int64_t(1) << 40;
};

inline Trajectory simulate(const SiteConfig& x0, const ModelParams& p,
                           const std::vector<double>& observe_times,
                           const std::vector<WindowFunctional>& functionals,
                           SplitMix64& rng) {
    Simulator s(p);
    return s.run(x0, observe_times, functionals, rng);
}

} // namespace slbp

#endif // SLBP_SIM_HPP
