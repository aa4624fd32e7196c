#ifndef SLBP_FLUCT_HPP
#define SLBP_FLUCT_HPP

// Fluctuation machinery: the centered scaled field Y paired with test
// functions, the nonlinear (squared-field) functional, backward
// time-dependent test functions, the limiting Gaussian variance, a spectral
// grid Euler-Maruyama reference simulator for the limiting
// Ornstein-Uhlenbeck equation, and the Boltzmann-Gibbs time-average
// statistic.

#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensemble.hpp"
#include "field.hpp"
#include "fkpp.hpp"
#include "lattice.hpp"
#include "params.hpp"
#include "sim.hpp"
#include "vfunc.hpp"

namespace slbp {

// Smooth periodic test functions on the unit circle, with exact derivative.
struct TestFunction {
    std::string id;
    std::function<double(double)> f;  // z in [0,1)
    std::function<double(double)> df;

    std::vector<double> sample(int K) const {
        std::vector<double> out(static_cast<std::size_t>(K));
        for (int z = 0; z < K; ++z) out[size_t(z)] = f(double(z) / K);
        return out;
    }
    std::vector<double> sample_derivative(int K) const {
        std::vector<double> out(static_cast<std::size_t>(K));
        for (int z = 0; z < K; ++z) out[size_t(z)] = df(double(z) / K);
        return out;
    }
};

inline TestFunction tf_constant(double c = 1.0) {
    return {"const", [c](double) { return c; }, [](double) { return 0.0; }};
}
inline TestFunction tf_cos(int j) {
    double w = 2.0 * std::numbers::pi * j;
    return {"cos" + std::to_string(j),
            [w](double z) { return std::cos(w * z); },
            [w](double z) { return -w * std::sin(w * z); }};
}
inline TestFunction tf_sin(int j) {
    double w = 2.0 * std::numbers::pi * j;
    return {"sin" + std::to_string(j),
            [w](double z) { return std::sin(w * z); },
            [w](double z) { return w * std::cos(w * z); }};
}
// Periodized Gaussian bump centered at c with width sigma.
inline TestFunction tf_bump(double c = 0.5, double sigma = 0.1) {
    auto val = [c, sigma](double z) {
        double s = 0.0;
        for (int k = -3; k <= 3; ++k) {
            double d = z - c + double(k);
            s += std::exp(-0.5 * d * d / (sigma * sigma));
        }
        return s;
    };
    auto der = [c, sigma](double z) {
        double s = 0.0;
        for (int k = -3; k <= 3; ++k) {
            double d = z - c + double(k);
            s += -d / (sigma * sigma) * std::exp(-0.5 * d * d / (sigma * sigma));
        }
        return s;
    };
    return {"bump", val, der};
}

inline double fluct_prefactor(const ModelParams& p) {
    return std::pow(p.epsilon, 1.0 + p.gamma - p.kappa);
}

// Y_t(phi) = eps^{1+gamma-kappa} sum_z (X(z) - rho_t(z)) phi(z/K).
inline double fluct_field(const SiteConfig& xp, const DensityField& rho_t,
                          const std::vector<double>& phi, const ModelParams& p) {
    if (xp.K() != p.K || rho_t.K() != p.K || int(phi.size()) != p.K)
        throw std::invalid_argument("fluct_field: lattice size mismatch");
    const double ek = p.eps_kappa();
    double s = 0.0;
    for (int z = 0; z < p.K; ++z)
        s += (ek * double(xp.counts[size_t(z)]) - rho_t.values[size_t(z)]) * phi[size_t(z)];
    return fluct_prefactor(p) * s;
}

// F_t(phi) = (eps^{1+gamma-kappa}/2) sum_z [X(z)(X(z)-eps^kappa) - mean_z] phi(z/K),
// with the per-site centering surrogate supplied by the caller (pilot
// ensemble or rho-based substitute).
inline double nonlinear_field(const SiteConfig& xp, const std::vector<double>& phi,
                              const ModelParams& p, const std::vector<double>& means) {
    if (xp.K() != p.K || int(phi.size()) != p.K || int(means.size()) != p.K)
        throw std::invalid_argument("nonlinear_field: lattice size mismatch");
    const double ek = p.eps_kappa();
    double s = 0.0;
    for (int z = 0; z < p.K; ++z) {
        double X = ek * double(xp.counts[size_t(z)]);
        s += (X * (X - ek) - means[size_t(z)]) * phi[size_t(z)];
    }
    return 0.5 * fluct_prefactor(p) * s;
}

// ---------------------------------------------------------------------------
// Backward test functions: solve
//   d/ds phi_{s,t} + (1/2) Lap phi_{s,t} + (mu - rho_s) phi_{s,t} = 0,
//   phi_{t,t} = phi,
// by forward RK4 in tau = t - s.  `lap_coeff` selects the semi-discrete
// (eps^{-2}, K sites) or continuum-proxy (M^2, M sites) variant; `mu` is the
// matching reaction mean.  The result is stored along ascending s.
// ---------------------------------------------------------------------------
struct BackwardTestFamily {
    double t = 0.0;
    DensityPath values; // times are s in [0, t]
};

inline BackwardTestFamily backward_solve(const std::vector<double>& phi,
                                         const DensityPath& rho_path, double t,
                                         double lap_coeff, double mu,
                                         double dt, int stride = 1) {
    const int K = int(phi.size());
    if (rho_path.K() != K) throw std::invalid_argument("backward_solve: grid mismatch");
    if (dt * lap_coeff * 2.0 > 2.5)
        throw std::invalid_argument("backward_solve: dt exceeds stability bound");

    const long n_steps = t > 0.0 ? long(std::ceil(t / dt)) : 0;
    const double h = n_steps > 0 ? t / double(n_steps) : 0.0;

    std::vector<double> rho_buf;
    auto rhs = [&](const std::vector<double>& u, double tau, std::vector<double>& out) {
        rho_path.eval_into(t - tau, rho_buf);
        for (int z = 0; z < K; ++z) {
            int zl = z == 0 ? K - 1 : z - 1;
            int zr = z == K - 1 ? 0 : z + 1;
            double lap = u[size_t(zl)] + u[size_t(zr)] - 2.0 * u[size_t(z)];
            out[size_t(z)] = 0.5 * lap_coeff * lap + (mu - rho_buf[size_t(z)]) * u[size_t(z)];
        }
    };

    std::vector<std::vector<double>> stored;
    std::vector<double> taus;
    std::vector<double> u = phi, k1(phi.size()), k2(phi.size()), k3(phi.size()),
                        k4(phi.size()), tmp(phi.size());
    stored.push_back(u);
    taus.push_back(0.0);
    for (long s = 0; s < n_steps; ++s) {
        double tau = double(s) * h;
        rhs(u, tau, k1);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + 0.5 * h * k1[size_t(z)];
        rhs(tmp, tau + 0.5 * h, k2);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + 0.5 * h * k2[size_t(z)];
        rhs(tmp, tau + 0.5 * h, k3);
        for (int z = 0; z < K; ++z) tmp[size_t(z)] = u[size_t(z)] + h * k3[size_t(z)];
        rhs(tmp, tau + h, k4);
        for (int z = 0; z < K; ++z)
            u[size_t(z)] += h / 6.0 * (k1[size_t(z)] + 2.0 * k2[size_t(z)] +
                                       2.0 * k3[size_t(z)] + k4[size_t(z)]);
        for (double v : u)
            if (!std::isfinite(v)) throw std::runtime_error("backward_solve: NaN/Inf");
        if ((s + 1) % stride == 0 || s + 1 == n_steps) {
            stored.push_back(u);
            taus.push_back(double(s + 1) * h);
        }
    }

    BackwardTestFamily fam;
    fam.t = t;
    // reverse tau -> s = t - tau so the path is ascending in s
    for (size_t i = stored.size(); i-- > 0;) {
        fam.values.times.push_back(t - taus[i]);
        fam.values.values.push_back(std::move(stored[i]));
    }
    return fam;
}

inline BackwardTestFamily backward_solve_discrete(const TestFunction& phi,
                                                  const DensityPath& rho_path,
                                                  double t, const ModelParams& p,
                                                  int stride = 1) {
    double dt = 0.25 * p.epsilon * p.epsilon;
    return backward_solve(phi.sample(p.K), rho_path, t,
                          p.jump_rate_per_particle(), p.mu_eps, dt, stride);
}

inline BackwardTestFamily backward_solve_continuum(const std::vector<double>& phi,
                                                   const DensityPath& rho_path,
                                                   double t, double mu,
                                                   int stride = 0) {
    const int M = int(phi.size());
    double lap_coeff = double(M) * double(M);
    double dt = 0.25 / lap_coeff;
    if (stride <= 0) {
        long n = long(std::ceil(t / dt));
        stride = int(std::max<long>(1, n / 4000));
    }
    return backward_solve(phi, rho_path, t, lap_coeff, mu, dt, stride);
}

// ---------------------------------------------------------------------------
// Limiting Gaussian variance of Y_t(phi):
//   int phi_{0,t}^2 rho_0
// + int_0^t [ <(d/dz phi_{r,t})^2, rho_r> + <phi_{r,t}^2, (sigma^2+mu^2) rho_r
//             + rho_r^2/2> ] dr,
// evaluated on the continuum-proxy grid with trapezoidal time quadrature.
// ---------------------------------------------------------------------------
inline double limit_variance(const std::vector<double>& phi,
                             const DensityPath& rho_path,
                             const std::vector<double>& rho0, double t,
                             double mu, double sigma2) {
    const int M = int(phi.size());
    if (int(rho0.size()) != M || rho_path.K() != M)
        throw std::invalid_argument("limit_variance: grid mismatch");
    BackwardTestFamily fam = backward_solve_continuum(phi, rho_path, t, mu);

    auto integrand = [&](size_t i) {
        const std::vector<double>& ph = fam.values.values[i];
        double r = fam.values.times[i];
        DensityField rho = rho_path.at(r);
        double s = 0.0;
        for (int z = 0; z < M; ++z) {
            int zl = z == 0 ? M - 1 : z - 1;
            int zr = z == M - 1 ? 0 : z + 1;
            double dph = 0.5 * double(M) * (ph[size_t(zr)] - ph[size_t(zl)]);
            double rv = rho.values[size_t(z)];
            s += dph * dph * rv +
                 ph[size_t(z)] * ph[size_t(z)] * ((sigma2 + mu * mu) * rv + 0.5 * rv * rv);
        }
        return s / double(M);
    };

    // initial term with phi_{0,t}
    double term0 = 0.0;
    {
        const std::vector<double>& ph0 = fam.values.values.front();
        for (int z = 0; z < M; ++z)
            term0 += ph0[size_t(z)] * ph0[size_t(z)] * rho0[size_t(z)];
        term0 /= double(M);
    }

    double q = 0.0;
    for (size_t i = 0; i + 1 < fam.values.times.size(); ++i) {
        double dr = fam.values.times[i + 1] - fam.values.times[i];
        q += 0.5 * dr * (integrand(i) + integrand(i + 1));
    }
    return term0 + q;
}

// ---------------------------------------------------------------------------
// Euler-Maruyama reference simulator for the limiting OU equation
//   dY = [ (1/2) d^2/dz^2 + (mu - rho_t) ] Y dt
//      + d/dz( sqrt(rho_t) dW1 ) + sqrt( (sigma^2+mu^2) rho_t + rho_t^2/2 ) dW2
// on an M-point grid (the conservative noise is applied in divergence form so
// that its tested variance is <(d/dz phi)^2, rho>).  Y_0 is Gaussian with
// Var Y_0(phi) = <phi^2, rho_0>.  Returns R samples of Y_t(phi).
// ---------------------------------------------------------------------------
inline std::vector<double> ou_spde_simulate(const DensityPath& rho_path,
                                            const std::vector<double>& phi,
                                            double t, double dt, int R,
                                            double mu, double sigma2,
                                            std::uint64_t master_seed,
                                            int jobs = 1) {
    const int M = int(phi.size());
    if (rho_path.K() != M) throw std::invalid_argument("ou_spde_simulate: grid mismatch");
    if (M % 2 != 0) throw std::invalid_argument("ou_spde_simulate: M must be even");
    const double lap_coeff = double(M) * double(M);
    if (dt <= 0.0) dt = 0.25 / lap_coeff;
    if (dt * lap_coeff * 2.0 > 1.0)
        throw std::invalid_argument("ou_spde_simulate: dt unstable");
    const long n_steps = std::max<long>(1, long(std::ceil(t / dt)));
    const double h = t / double(n_steps);
    const double root_Mh = std::sqrt(double(M) * h);

    auto body = [&](int, SplitMix64& rng, double* out) {
        const std::size_t Ms = static_cast<std::size_t>(M);
        std::vector<double> Y(Ms), a(Ms), Ynew(Ms), rho(Ms);
        rho_path.eval_into(0.0, rho);
        for (int z = 0; z < M; ++z)
            Y[size_t(z)] = rng.normal() * std::sqrt(rho[size_t(z)] * double(M));
        for (long s = 0; s < n_steps; ++s) {
            double r = double(s) * h;
            rho_path.eval_into(r, rho);
            // conservative noise a = sqrt(rho) xi, applied as central gradient
            for (int z = 0; z < M; ++z)
                a[size_t(z)] = std::sqrt(rho[size_t(z)]) * rng.normal() * root_Mh;
            for (int z = 0; z < M; ++z) {
                int zl = z == 0 ? M - 1 : z - 1;
                int zr = z == M - 1 ? 0 : z + 1;
                double lap = Y[size_t(zl)] + Y[size_t(zr)] - 2.0 * Y[size_t(z)];
                double drift = 0.5 * lap_coeff * lap + (mu - rho[size_t(z)]) * Y[size_t(z)];
                double grad_noise = 0.5 * double(M) * (a[size_t(zr)] - a[size_t(zl)]);
                double amp2 = std::sqrt((sigma2 + mu * mu) * rho[size_t(z)] +
                                        0.5 * rho[size_t(z)] * rho[size_t(z)]);
                Ynew[size_t(z)] = Y[size_t(z)] + drift * h + grad_noise +
                                  amp2 * rng.normal() * root_Mh;
            }
            Y.swap(Ynew);
        }
        double pair = 0.0;
        for (int z = 0; z < M; ++z) pair += Y[size_t(z)] * phi[size_t(z)];
        out[0] = pair / double(M);
    };
    auto rows = run_replica_rows(R, 1, master_seed, jobs, body);
    return column(rows, 0);
}

// ---------------------------------------------------------------------------
// Boltzmann-Gibbs statistic.
// ---------------------------------------------------------------------------

// Single-slice decomposition: with per-site centering surrogate means m_z for
// X(X - eps^kappa), algebraically
//   F(phi) - Y(rho phi) = (pref/2) sum_z [ V2(z) - (m_z - rho_z^2) ] phi_z,
// where V2(z) is the order-2 same-site V-function.  Both sides are exposed
// for the exactness check and the right-hand side drives the statistic.
inline double f_minus_y_fields(const SiteConfig& xp, const DensityField& rho,
                               const std::vector<double>& phi, const ModelParams& p,
                               const std::vector<double>& means) {
    std::vector<double> rho_phi(size_t(p.K));
    for (int z = 0; z < p.K; ++z)
        rho_phi[size_t(z)] = rho.values[size_t(z)] * phi[size_t(z)];
    return nonlinear_field(xp, phi, p, means) - fluct_field(xp, rho, rho_phi, p);
}

inline double f_minus_y_vform(const SiteConfig& xp, const DensityField& rho,
                              const std::vector<double>& phi, const ModelParams& p,
                              const std::vector<double>& means) {
    const double ek = p.eps_kappa();
    double s = 0.0;
    for (int z = 0; z < p.K; ++z) {
        double X = ek * double(xp.counts[size_t(z)]);
        double d = X - rho.values[size_t(z)];
        double v2 = d * d - ek * X;
        double center = means[size_t(z)] - rho.values[size_t(z)] * rho.values[size_t(z)];
        s += (v2 - center) * phi[size_t(z)];
    }
    return 0.5 * fluct_prefactor(p) * s;
}

struct BgpResult {
    double mean_square = 0.0;
    double stderr_of_mean = 0.0;
    int replicas = 0;
    double window = 0.0;
};

// E[ ( (1/(eps^2 S)) int_s^{s+eps^2 S} [F_r(phi) - Y_r(rho_r phi)] dr )^2 ],
// with F centered by a disjoint pilot ensemble (R/10 replicas).  The two
// field integrals are accumulated exactly in the particle state with
// per-segment Simpson quadrature in the smooth density argument.
inline BgpResult bgp_statistic(const DensityField& rho0, const TestFunction& phi,
                               double s, double S, const ModelParams& p, int R,
                               std::uint64_t master_seed, int jobs = 1) {
    const double window = p.epsilon * p.epsilon * S;
    const double b = s + window;
    DensityPath rho_path = fkpp_solve(rho0, p, b);
    std::vector<double> phi_s = phi.sample(p.K);
    const double ek = p.eps_kappa();
    const double pref = fluct_prefactor(p);

    // integrand of F_r(phi) without centering, and of Y_r(rho_r phi)
    auto f_raw = [&](const SiteConfig& x, double) {
        double acc = 0.0;
        for (int z = 0; z < p.K; ++z) {
            double X = ek * double(x.counts[size_t(z)]);
            acc += X * (X - ek) * phi_s[size_t(z)];
        }
        return 0.5 * pref * acc;
    };
    auto y_field = [&, rho_buf = std::vector<double>()](const SiteConfig& x, double r) mutable {
        rho_path.eval_into(r, rho_buf);
        double acc = 0.0;
        for (int z = 0; z < p.K; ++z) {
            double X = ek * double(x.counts[size_t(z)]);
            acc += (X - rho_buf[size_t(z)]) * rho_buf[size_t(z)] * phi_s[size_t(z)];
        }
        return pref * acc;
    };

    auto run_one = [&](SplitMix64& rng, double& IF, double& IY) {
        std::vector<WindowFunctional> fns{{s, b, f_raw}, {s, b, y_field}};
        SiteConfig x0 = sample_initial(rho0, p, rng);
        Trajectory tr = simulate(x0, p, {}, fns, rng);
        IF = tr.integrals[0];
        IY = tr.integrals[1];
    };

    // one pass collecting both integrals, then center F by its ensemble mean
    auto rows = run_replica_rows(R, 2, master_seed, jobs,
        [&](int, SplitMix64& rng, double* out) {
            run_one(rng, out[0], out[1]);
        });
    std::vector<double> ifs = column(rows, 0);
    double f_center = pairwise_sum(ifs) / double(R);
    std::vector<double> sq(ifs.size());
    for (std::size_t i = 0; i < ifs.size(); ++i) {
        double avg = ((ifs[i] - f_center) - rows[i][1]) / window;
        sq[i] = avg * avg;
    }
    EnsembleStats st = reduce_stats(sq, "bgp", master_seed);
    return {st.mean, st.stderr_of_mean, R, window};
}

} // namespace slbp

#endif // SLBP_FLUCT_HPP
