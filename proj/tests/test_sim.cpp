#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "slbp/ensemble.hpp"
#include "slbp/fkpp.hpp"
#include "slbp/sim.hpp"
#include "slbp/vfunc.hpp"

using namespace slbp;

TEST_CASE("site rates: empty, singleton, arithmetic") {
    auto p = derive_params(0.5, 1.0, binary_law(), 1.0);
    auto r0 = site_rates(0, p);
    CHECK(r0.total() == 0.0);
    auto r1 = site_rates(1, p);
    CHECK(r1.coalesce == 0.0);
    CHECK(r1.jump == doctest::Approx(4.0));
    CHECK(r1.branch == doctest::Approx(1.0));
    auto r4 = site_rates(4, p);
    CHECK(r4.coalesce == doctest::Approx(3.0)); // 0.5 * 4*3/2
}

TEST_CASE("initial sampler: zero field and Poisson means") {
    auto p = derive_params(1.0 / 16, 1.0, binary_law(), 1.0);
    SplitMix64 rng = make_stream(11, 0);
    SiteConfig empty = sample_initial(DensityField(p.K, 0.0), p, rng);
    CHECK(empty.total() == 0);

    // rho0 = 2 mu_eps = 2, eps = 1/16, kappa = 1: per-site mean count is 32
    const int draws = 10000;
    double sum_counts = 0.0, sum_scaled = 0.0, sumsq = 0.0;
    for (int i = 0; i < draws; ++i) {
        SiteConfig x = sample_initial(DensityField(p.K, 2.0), p, rng);
        double c = double(x.counts[0]);
        sum_counts += c;
        sumsq += c * c;
        sum_scaled += x.scaled(3, p);
    }
    double mean = sum_counts / draws;
    double sd = std::sqrt((sumsq / draws - mean * mean));
    CHECK(std::abs(mean - 32.0) < 3.0 * sd / std::sqrt(double(draws)));
    double mean_scaled = sum_scaled / draws;
    double se_scaled = sd / 16.0 / std::sqrt(double(draws));
    CHECK(std::abs(mean_scaled - 2.0) < 3.0 * se_scaled);

    CHECK_THROWS(sample_initial(DensityField(p.K, -1.0), p, rng));
}

TEST_CASE("empty initial configuration is absorbing") {
    auto p = derive_params(1.0 / 8, 0.5, binary_law(), 1.0);
    SplitMix64 rng = make_stream(3, 0);
    Trajectory tr = simulate(SiteConfig(p.K), p, {0.0, 0.5, 1.0}, {}, rng);
    CHECK(tr.event_count == 0);
    for (auto& s : tr.snapshots) CHECK(s.total() == 0);
}

TEST_CASE("event bookkeeping: branching adds l in [1,L], coalescence removes 1, jumps conserve") {
    auto p = derive_params(1.0 / 8, 0.25, geometric_law(), 1.0,
                           TruncationRule::Explicit, 4);
    SplitMix64 rng = make_stream(21, 0);
    SiteConfig x0(p.K);
    for (auto& c : x0.counts) c = 3;
    Trajectory tr = simulate(x0, p, {0.3}, {}, rng);
    CHECK(tr.event_count > 100);
    // total count balances event-by-event contributions exactly
    CHECK(tr.final_state.total() ==
          x0.total() + tr.offspring_total - std::int64_t(tr.coalescences));
    CHECK(tr.offspring_total >= std::int64_t(tr.branches));
    CHECK(tr.offspring_total <= std::int64_t(tr.branches) * p.L);
}

TEST_CASE("jump destinations split 50/50") {
    auto p = derive_params(1.0 / 32, 0.0, binary_law(), 2.0);
    SplitMix64 rng = make_stream(8, 0);
    SiteConfig x0(p.K);
    for (auto& c : x0.counts) c = 2;
    Trajectory tr = simulate(x0, p, {2.0}, {}, rng);
    double n_jump = double(tr.jumps_left + tr.jumps_right);
    REQUIRE(n_jump > 1e5);
    double frac = double(tr.jumps_right) / n_jump;
    double se = std::sqrt(0.25 / n_jump);
    CHECK(std::abs(frac - 0.5) < 5 * se);
}

TEST_CASE("pure branching: exponential mean growth") {
    // coalescence off: total count is a branching process, E[n_T] = n_0 e^{mu T}
    auto p = derive_params(1.0 / 8, 1.0, binary_law(), 1.0);
    p.coalesce_scale = 0.0;
    const std::int64_t n0_per_site = 2;
    const double T = 1.0;
    const int R = 10000;
    auto body = [&](int, SplitMix64& rng) {
        SiteConfig x0(p.K);
        for (auto& c : x0.counts) c = n0_per_site;
        Trajectory tr = simulate(x0, p, {T}, {}, rng);
        CHECK(tr.final_state.total() >= x0.total()); // non-decreasing without deaths
        return double(tr.final_state.total());
    };
    EnsembleStats st = run_ensemble(R, 99, 1, "n_T", body);
    double expect = double(n0_per_site * p.K) * std::exp(p.mu_eps * T);
    CHECK(std::abs(st.mean - expect) < 3.0 * st.stderr_of_mean);
}

// Master-equation oracle for the single-site birth-death chain (jumps off):
// birth rate n (binary offspring), death rate eps^kappa n(n-1)/2.
static double ctmc_mean_scaled(std::int64_t n0, double T, const ModelParams& p,
                               int n_max = 400) {
    std::vector<double> prob(size_t(n_max) + 1, 0.0);
    prob[size_t(n0)] = 1.0;
    double t = 0.0;
    const double ek = p.eps_kappa();
    double max_rate = double(n_max) + ek * double(n_max) * double(n_max - 1) / 2;
    double dt = 0.1 / max_rate;
    std::vector<double> next(prob.size());
    auto step = [&](double h) {
        // forward Euler on the master equation (small h, diagonally dominant)
        for (size_t n = 0; n <= size_t(n_max); ++n) {
            double dn = double(n);
            double birth = dn;
            double death = ek * dn * (dn - 1.0) / 2.0;
            double inflow = 0.0;
            if (n >= 1) inflow += double(n - 1) * prob[n - 1];
            if (n + 1 <= size_t(n_max)) {
                double dnp = double(n + 1);
                inflow += ek * dnp * (dnp - 1.0) / 2.0 * prob[n + 1];
            }
            next[n] = prob[n] + h * (inflow - (birth + death) * prob[n]);
        }
        prob.swap(next);
    };
    while (t < T) {
        double h = std::min(dt, T - t);
        step(h);
        t += h;
    }
    double m = 0.0;
    for (size_t n = 0; n <= size_t(n_max); ++n) m += double(n) * prob[n];
    return ek * m;
}

TEST_CASE("no-jump single site follows the logistic birth-death chain") {
    auto p = derive_params(1.0 / 64, 1.0, binary_law(), 1.0);
    p.jump_scale = 0.0;
    const std::int64_t n0 = 64; // X_0 = 1
    const double T = 0.5;
    const int R = 20000;
    auto body = [&](int, SplitMix64& rng) {
        SiteConfig x0(p.K);
        x0.counts[0] = n0;
        Trajectory tr = simulate(x0, p, {T}, {}, rng);
        return tr.final_state.scaled(0, p);
    };
    EnsembleStats st = run_ensemble(R, 4242, 1, "X_T", body);
    double exact = ctmc_mean_scaled(n0, T, p);
    CHECK(std::abs(st.mean - exact) < 3.0 * st.stderr_of_mean);
    // mean-field logistic curve is close (O(eps^kappa) fluctuation correction)
    double logistic = logistic_solution(1.0, p.mu_eps, T);
    CHECK(std::abs(st.mean - logistic) < 0.02);
    CHECK(std::abs(exact - logistic) < 0.02);
}

TEST_CASE("ensemble mean at equilibrium start tracks the deterministic density") {
    auto p = derive_params(1.0 / 16, 0.0, binary_law(), 1.0);
    DensityField rho0(p.K, 2.0 * p.mu_eps);
    const double t = 0.25;
    DensityPath path = fkpp_solve(rho0, p, t);
    double rho_t = path.at(t).values[0];
    auto body = [&](int, SplitMix64& rng) {
        SiteConfig x0 = sample_initial(rho0, p, rng);
        Trajectory tr = simulate(x0, p, {t}, {}, rng);
        // spatial average (translation invariance)
        return p.eps_kappa() * double(tr.final_state.total()) / double(p.K);
    };
    EnsembleStats st = run_ensemble(10000, 31337, 1, "Xbar", body);
    CHECK(std::abs(st.mean - rho_t) < 3.0 * st.stderr_of_mean + 2e-2);
}

TEST_CASE("factorial moments stay bounded along the trajectory") {
    auto p = derive_params(1.0 / 16, 0.5, binary_law(), 1.0);
    DensityField rho0(p.K, 2.0 * p.mu_eps);
    std::vector<double> times{0.1, 0.25, 0.5, 1.0};
    std::vector<TestConfig> xs{TestConfig{{2, 1}}, TestConfig{{2, 2}},
                               TestConfig{{2, 3}}, TestConfig{{2, 1}, {9, 2}}};
    const int R = 2000;
    std::vector<double> acc(times.size() * xs.size(), 0.0);
    auto rows = run_replica_rows(R, int(times.size() * xs.size()), 555, 1,
        [&](int, SplitMix64& rng, double* out) {
            SiteConfig x0 = sample_initial(rho0, p, rng);
            Trajectory tr = simulate(x0, p, times, {}, rng);
            for (size_t ti = 0; ti < times.size(); ++ti)
                for (size_t xi = 0; xi < xs.size(); ++xi)
                    out[ti * xs.size() + xi] = q_eps(xs[xi], tr.snapshots[ti], p);
        });
    for (size_t j = 0; j < times.size() * xs.size(); ++j) {
        double mean = pairwise_sum(column(rows, int(j))) / double(R);
        CHECK(mean < 100.0); // uniform moment bound at the tested scale
        CHECK(mean >= 0.0);
    }
}

TEST_CASE("registered functionals integrate the piecewise-constant state exactly") {
    auto p = derive_params(1.0 / 8, 0.0, binary_law(), 1.0);
    // f(X) = total count; no time dependence -> Simpson is exact per segment.
    WindowFunctional fn{0.2, 0.7, [](const SiteConfig& x, double) {
        return double(x.total());
    }};
    SiteConfig x0(p.K);
    for (auto& c : x0.counts) c = 1;

    // against a fine Riemann evaluation from dense snapshots
    std::vector<double> grid;
    for (int i = 0; i <= 20000; ++i) grid.push_back(0.2 + 0.5 * i / 20000.0);
    SplitMix64 rng1 = make_stream(6, 0), rng2 = make_stream(6, 0);
    Trajectory a = simulate(x0, p, {}, {fn}, rng1);
    Trajectory b = simulate(x0, p, grid, {}, rng2);
    double riemann = 0.0;
    for (size_t i = 0; i + 1 < grid.size(); ++i)
        riemann += double(b.snapshots[i].total()) * (grid[i + 1] - grid[i]);
    CHECK(a.integrals[0] == doctest::Approx(riemann).epsilon(5e-3));
}
