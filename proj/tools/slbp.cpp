// slbp: experiment harness for the weak-competition branching-coalescing
// lattice model.
//
//   slbp <subcommand> --config PATH [--seed N] [--jobs N] [--out DIR] [--strict]
//
// Subcommands: simulate | fkpp | green-check | vfunc-scan | clt-check |
//              bgp-check | coeff-check.
//
// Configs are flat `key = value` text ('#' comments).  Common keys:
//   epsilon / eps_list   lattice scale (single value or comma list)
//   kappa                competition exponent
//   offspring            binary | geometric
//   trunc_L              optional explicit offspring truncation level
//   gamma                optional fluctuation exponent override
//   seed                 master seed (required unless --seed is given)
//   out_dir              output directory (overridden by --out)
//   replicas             Monte Carlo replica count
//   rho0                 equilibrium | constant | bump   (rho0_value,
//                        rho0_base, rho0_amp refine constant/bump)
//   phi                  const | cos<j> | sin<j> | bump
// Per-subcommand keys are noted next to each runner below.
//
// Exit codes: 0 success, 2 configuration error, 3 acceptance-threshold
// failure under --strict, 1 other runtime failure.  All artifacts for a run
// are computed before anything is written, so failed runs leave no partial
// results.  Reruns with identical config+seed reproduce every CSV
// byte-for-byte for any worker count.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "slbp/ensemble.hpp"
#include "slbp/fit.hpp"
#include "slbp/fkpp.hpp"
#include "slbp/fluct.hpp"
#include "slbp/green.hpp"
#include "slbp/io.hpp"
#include "slbp/sim.hpp"
#include "slbp/vfunc.hpp"

using namespace slbp;
namespace fs = std::filesystem;

namespace {

struct StrictFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunContext {
    KeyValueConfig cfg;
    std::uint64_t seed = 0;
    int jobs = 1;
    bool strict = false;
    fs::path out_dir;
    std::string experiment;
    std::string theorem;
    std::vector<std::string> strict_failures;
};

// In-memory CSV buffer so nothing touches disk until the run has succeeded.
struct CsvBuffer {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct Artifacts {
    std::vector<CsvBuffer> csvs;
    std::vector<std::pair<std::string, std::string>> scripts; // name -> body
};

ModelParams params_from(const KeyValueConfig& cfg, double epsilon) {
    double kappa = cfg.get_double("kappa");
    std::string law_id = cfg.get_string("offspring", "binary");
    std::vector<double> law;
    if (law_id == "binary") law = binary_law();
    else if (law_id == "geometric") law = geometric_law();
    else throw ConfigError("offspring must be binary or geometric, got: " + law_id);
    double T = cfg.get_double("T", 1.0);
    TruncationRule rule = TruncationRule::Default;
    int L = 0;
    if (cfg.has("trunc_L")) {
        rule = TruncationRule::Explicit;
        L = int(cfg.get_long("trunc_L"));
    }
    bool has_gamma = cfg.has("gamma");
    double gamma = has_gamma ? cfg.get_double("gamma") : 0.0;
    try {
        return derive_params(epsilon, kappa, law, T, rule, L, has_gamma, gamma);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

// rho0 catalog as a function of the continuum coordinate u in [0,1);
// `level` is the carrying capacity of the law in use.
std::function<double(double)> rho0_profile(const KeyValueConfig& cfg, double level) {
    std::string id = cfg.get_string("rho0", "equilibrium");
    if (id == "equilibrium") return [level](double) { return level; };
    if (id == "constant") {
        double v = cfg.get_double("rho0_value", 2.0);
        if (v < 0.0) throw ConfigError("rho0_value must be >= 0");
        return [v](double) { return v; };
    }
    if (id == "bump") {
        double base = cfg.get_double("rho0_base", 2.0);
        double amp = cfg.get_double("rho0_amp", 0.5);
        if (base - std::abs(amp) < 0.0) throw ConfigError("bump rho0 dips below 0");
        return [base, amp](double u) {
            return base + amp * std::cos(2.0 * std::numbers::pi * u);
        };
    }
    throw ConfigError("rho0 must be equilibrium, constant, or bump, got: " + id);
}

bool rho0_is_flat(const KeyValueConfig& cfg) {
    std::string id = cfg.get_string("rho0", "equilibrium");
    return id == "equilibrium" || id == "constant";
}

DensityField sample_profile(const std::function<double(double)>& f, int K) {
    DensityField out(K, 0.0);
    for (int z = 0; z < K; ++z) out.values[size_t(z)] = f(double(z) / K);
    return out;
}

TestFunction phi_from(const KeyValueConfig& cfg) {
    std::string id = cfg.get_string("phi", "const");
    if (id == "const") return tf_constant();
    if (id == "zero") return tf_constant(0.0);
    if (id == "bump") return tf_bump();
    if (id.rfind("cos", 0) == 0) return tf_cos(std::stoi(id.substr(3)));
    if (id.rfind("sin", 0) == 0) return tf_sin(std::stoi(id.substr(3)));
    throw ConfigError("unknown phi id: " + id);
}

void require_strict(RunContext& ctx, bool ok, const std::string& what) {
    if (!ok) ctx.strict_failures.push_back(what);
}

void write_artifacts(const RunContext& ctx, const Artifacts& art, double wall_seconds) {
    fs::create_directories(ctx.out_dir);
    for (const auto& buf : art.csvs) {
        CsvWriter w((ctx.out_dir / buf.name).string(), buf.columns);
        for (const auto& r : buf.rows) w.row(r);
    }
    for (const auto& [name, body] : art.scripts) {
        std::ofstream out(ctx.out_dir / name, std::ios::binary);
        out << body;
    }
    std::ofstream m(ctx.out_dir / "manifest.txt", std::ios::binary);
    m << "experiment = " << ctx.experiment << "\n";
    m << "theorem = " << ctx.theorem << "\n";
    m << "seed = " << ctx.seed << "\n";
    m << "jobs = " << ctx.jobs << "\n";
    m << "strict = " << (ctx.strict ? 1 : 0) << "\n";
    m << "wall_seconds = " << fmt_double(wall_seconds) << "\n";
    if (ctx.cfg.has("kappa")) {
        double kappa = ctx.cfg.get_double("kappa");
        m << "kappa_scope = "
          << (kappa < 0.375 ? "within_proven_range" : "outside_proven_range_kappa_ge_3_8")
          << "\n";
    }
    m << "version = 1.0.0\n";
    for (const auto& [k, v] : ctx.cfg.entries()) m << "config." << k << " = " << v << "\n";
    for (const auto& f : ctx.strict_failures) m << "strict_failure = " << f << "\n";
}

std::string loglog_script(const std::string& csv, const std::string& xcol,
                          const std::string& ycol, const std::string& title) {
    return "set datafile separator ','\nset logscale xy\nset key top left\n"
           "set xlabel '" + xcol + "'\nset ylabel '" + ycol + "'\n"
           "plot '" + csv + "' using '" + xcol + "':'" + ycol +
           "' with linespoints title '" + title + "'\n";
}

// ---------------------------------------------------------------------------
// simulate: raw trajectory snapshots.
// Keys: epsilon, kappa, offspring, t_list (snapshot times), replicas, rho0.
// Output: trajectory.csv (replica,time,site,count).
// ---------------------------------------------------------------------------
void run_simulate(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "LLN";
    auto p = params_from(ctx.cfg, ctx.cfg.get_double("epsilon"));
    std::vector<double> times = ctx.cfg.has("t_list")
                                    ? ctx.cfg.get_double_list("t_list")
                                    : std::vector<double>{0.25, 0.5, 1.0};
    for (size_t i = 1; i < times.size(); ++i)
        if (times[i] < times[i - 1]) throw ConfigError("t_list must be sorted");
    int R = int(ctx.cfg.get_long("replicas", 4));
    DensityField rho0 = sample_profile(rho0_profile(ctx.cfg, 2.0 * p.mu_eps), p.K);

    CsvBuffer csv{"trajectory.csv", {"replica", "time", "site", "count"}, {}};
    for (int r = 0; r < R; ++r) {
        SplitMix64 rng = make_stream(ctx.seed, std::uint64_t(r));
        SiteConfig x0 = sample_initial(rho0, p, rng);
        Trajectory tr = simulate(x0, p, times, {}, rng);
        for (size_t ti = 0; ti < tr.snapshot_times.size(); ++ti)
            for (int z = 0; z < p.K; ++z)
                csv.rows.push_back({cell(r), cell(tr.snapshot_times[ti]), cell(z),
                                    cell(long(tr.snapshots[ti].counts[size_t(z)]))});
    }
    art.csvs.push_back(std::move(csv));
    art.scripts.emplace_back("trajectory.gp",
        "set datafile separator ','\nset xlabel 'site'\nset ylabel 'count'\n"
        "plot 'trajectory.csv' using 'site':'count' with points title 'snapshots'\n");
}

// ---------------------------------------------------------------------------
// fkpp: deterministic density evolution.
// Keys: epsilon, kappa, offspring, t_end, rho0.
// Output: field.csv (time,site,value).
// ---------------------------------------------------------------------------
void run_fkpp(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "LLN";
    auto p = params_from(ctx.cfg, ctx.cfg.get_double("epsilon"));
    double t_end = ctx.cfg.get_double("t_end", p.T);
    DensityField rho0 = sample_profile(rho0_profile(ctx.cfg, 2.0 * p.mu_eps), p.K);
    double dt = 0.25 * p.epsilon * p.epsilon;
    long n_steps = long(std::ceil(t_end / dt));
    int stride = int(std::max<long>(1, n_steps / 100));
    DensityPath path = fkpp_solve(rho0, p, t_end, dt, stride);

    CsvBuffer csv{"field.csv", {"time", "site", "value"}, {}};
    for (size_t i = 0; i < path.times.size(); ++i)
        for (int z = 0; z < p.K; ++z)
            csv.rows.push_back({cell(path.times[i]), cell(z),
                                cell(path.values[i][size_t(z)])});
    art.csvs.push_back(std::move(csv));
    art.scripts.emplace_back("field.gp",
        "set datafile separator ','\nset xlabel 'site'\nset ylabel 'value'\n"
        "plot 'field.csv' using 'site':'value' with points title 'density'\n");
}

// ---------------------------------------------------------------------------
// green-check: deterministic kernel property report.
// Keys: epsilon.  Output: green_report.csv (check,max_residual,threshold,pass).
// ---------------------------------------------------------------------------
void run_green_check(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "LLN";
    double eps = ctx.cfg.get_double("epsilon");
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("epsilon must be in (0,1)");
    const int K = int(std::floor(1.0 / eps));
    if (K < 2) throw ConfigError("epsilon too large: need floor(1/epsilon) >= 2");
    GreenKernel g(K, eps);

    CsvBuffer csv{"green_report.csv", {"check", "max_residual", "threshold", "pass"}, {}};
    auto record = [&](const std::string& name, double res, double thr) {
        bool ok = res <= thr;
        csv.rows.push_back({name, cell(res), cell(thr), cell(int(ok))});
        require_strict(ctx, ok, "green:" + name);
    };

    double r_id = 0.0;
    for (int z1 = 0; z1 < K; ++z1)
        for (int z2 = 0; z2 < K; ++z2)
            r_id = std::max(r_id, std::abs(g(0.0, z1, z2) - (z1 == z2 ? 1.0 : 0.0)));
    record("identity_t0", r_id, 1e-12);

    double r_row = 0.0, r_sym = 0.0;
    for (double t : {0.01, 0.1, 0.5})
        for (int z1 = 0; z1 < K; ++z1) {
            double row = 0.0;
            for (int z2 = 0; z2 < K; ++z2) {
                row += g(t, z1, z2);
                r_sym = std::max(r_sym, std::abs(g(t, z1, z2) - g(t, z2, z1)));
            }
            r_row = std::max(r_row, std::abs(row - 1.0));
        }
    record("row_sums", r_row, 1e-12);
    record("symmetry", r_sym, 1e-12);

    double r_semi = 0.0;
    for (auto [s, t] : std::vector<std::pair<double, double>>{{0.02, 0.03}, {0.05, 0.2}})
        for (int z = 0; z < K; ++z) {
            double conv = 0.0;
            for (int y = 0; y < K; ++y) conv += g(s, 0, y) * g(t, y, z);
            r_semi = std::max(r_semi, std::abs(conv - g(s + t, 0, z)));
        }
    record("semigroup", r_semi, 1e-10);

    double r_per = 0.0;
    for (double t : {0.02, 0.1})
        for (int z = 0; z < K; ++z) {
            double per = 0.0;
            for (int k = -40; k <= 40; ++k) per += green_line(t, long(z) + long(k) * K, eps);
            r_per = std::max(r_per, std::abs(per - g(t, 0, z)));
        }
    record("periodization", r_per, 1e-8);

    // on-diagonal decay: one fitted constant over a 10x10 (t, z) grid
    double fitted_c = 0.0;
    for (int it = 1; it <= 10; ++it) {
        double t = eps * eps + (1.0 - eps * eps) * double(it - 1) / 9.0;
        for (int iz = 0; iz < 10; ++iz) {
            int z = iz % K;
            fitted_c = std::max(fitted_c, g(t, 0, z) / std::min(1.0, eps / std::sqrt(t)));
        }
    }
    record("decay_estimate_fitted_C", fitted_c, 3.0);
    art.csvs.push_back(std::move(csv));
}

// ---------------------------------------------------------------------------
// vfunc-scan: Monte Carlo v-function magnitudes across an epsilon sweep, with
// a log-log rate fit per catalog configuration.
// Keys: eps_list, kappa, offspring, t, replicas (or replicas_list), rho0.
// Output: vscan.csv (epsilon,kappa,t,config_id,order,v_mean,v_stderr,replicas),
//         vscan_rates.csv, vscan.gp.
// ---------------------------------------------------------------------------
void run_vfunc_scan(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "QLLN-n1,QLLN-n2,QLLN-n3";
    auto eps_list = ctx.cfg.get_double_list("eps_list");
    double t = ctx.cfg.get_double("t", 0.5);
    std::vector<long> reps;
    if (ctx.cfg.has("replicas_list")) {
        for (double v : ctx.cfg.get_double_list("replicas_list")) reps.push_back(long(v));
        if (reps.size() != eps_list.size())
            throw ConfigError("replicas_list must match eps_list in length");
    } else {
        reps.assign(eps_list.size(), ctx.cfg.get_long("replicas", 2000));
    }
    const bool flat = rho0_is_flat(ctx.cfg);

    struct Catalog {
        std::string id;
        int order;
    };
    std::vector<Catalog> cat{{"order1_site", 1},
                             {"order2_pair_same", 2},
                             {"order2_pair_distinct", 2},
                             {"order3_triple_same", 3}};

    CsvBuffer csv{"vscan.csv",
                  {"epsilon", "kappa", "t", "config_id", "order", "v_mean",
                   "v_stderr", "replicas"}, {}};
    std::vector<std::vector<double>> means(cat.size()), errs(cat.size());

    for (size_t ie = 0; ie < eps_list.size(); ++ie) {
        auto p = params_from(ctx.cfg, eps_list[ie]);
        DensityField rho0 = sample_profile(rho0_profile(ctx.cfg, 2.0 * p.mu_eps), p.K);
        DensityPath rho_path = fkpp_solve(rho0, p, t);
        DensityField rho_t = rho_path.at(t);
        const int d = p.K / 2;
        const int R = int(reps[ie]);

        auto rows = run_replica_rows(R, int(cat.size()), ctx.seed, ctx.jobs,
            [&](int, SplitMix64& rng, double* out) {
                SiteConfig x0 = sample_initial(rho0, p, rng);
                Trajectory tr = simulate(x0, p, {t}, {}, rng);
                const SiteConfig& X = tr.snapshots[0];
                if (flat) {
                    // translation-invariant start: pool over all sites
                    double s1 = 0.0, s2 = 0.0, s2d = 0.0, s3 = 0.0;
                    for (int z = 0; z < p.K; ++z) {
                        double u = rho_t.values[size_t(z)];
                        double u2 = rho_t.values[size_t(wrap(z + d, p.K))];
                        s1 += vtilde(1, X.counts[size_t(z)], u, p);
                        s2 += vtilde(2, X.counts[size_t(z)], u, p);
                        s3 += vtilde(3, X.counts[size_t(z)], u, p);
                        s2d += vtilde(1, X.counts[size_t(z)], u, p) *
                               vtilde(1, X.counts[size_t(wrap(z + d, p.K))], u2, p);
                    }
                    out[0] = s1 / p.K;
                    out[1] = s2 / p.K;
                    out[2] = s2d / p.K;
                    out[3] = s3 / p.K;
                } else {
                    out[0] = v_exact(TestConfig{{0, 1}}, X, rho_t, p);
                    out[1] = v_exact(TestConfig{{0, 2}}, X, rho_t, p);
                    out[2] = v_exact(TestConfig{{0, 1}, {d, 1}}, X, rho_t, p);
                    out[3] = v_exact(TestConfig{{0, 3}}, X, rho_t, p);
                }
            });
        for (size_t ic = 0; ic < cat.size(); ++ic) {
            EnsembleStats st = reduce_stats(column(rows, int(ic)), cat[ic].id, ctx.seed);
            means[ic].push_back(st.mean);
            errs[ic].push_back(st.stderr_of_mean);
            csv.rows.push_back({cell(eps_list[ie]), cell(p.kappa), cell(t), cat[ic].id,
                                cell(cat[ic].order), cell(st.mean),
                                cell(st.stderr_of_mean), cell(long(R))});
        }
    }
    art.csvs.push_back(std::move(csv));

    CsvBuffer rates{"vscan_rates.csv",
                    {"config_id", "order", "slope", "intercept", "confidence_half",
                     "residual", "points"}, {}};
    double kappa = ctx.cfg.get_double("kappa");
    for (size_t ic = 0; ic < cat.size(); ++ic) {
        // only fit points whose magnitude beats the Monte Carlo noise
        std::vector<double> fe, fv, fs;
        for (size_t ie = 0; ie < eps_list.size(); ++ie)
            if (std::abs(means[ic][ie]) > errs[ic][ie]) {
                fe.push_back(eps_list[ie]);
                fv.push_back(std::abs(means[ic][ie]));
                fs.push_back(errs[ic][ie]);
            }
        if (fe.size() >= 3) {
            RateFit f = fit_rate(fe, fv, fs, 400, ctx.seed ^ 0x9e3779b97f4a7c15ull);
            rates.rows.push_back({cat[ic].id, cell(cat[ic].order), cell(f.slope),
                                  cell(f.intercept), cell(f.confidence_half),
                                  cell(f.residual), cell(long(fe.size()))});
            if (cat[ic].order <= 2)
                require_strict(ctx, f.slope >= 1.0 + kappa - 0.3,
                               "vfunc-scan slope " + cat[ic].id);
        } else {
            rates.rows.push_back({cat[ic].id, cell(cat[ic].order), "nan", "nan",
                                  "nan", "nan", cell(long(fe.size()))});
        }
    }
    art.csvs.push_back(std::move(rates));
    art.scripts.emplace_back("vscan.gp",
                             loglog_script("vscan.csv", "epsilon", "v_mean", "v-scan"));
}

// ---------------------------------------------------------------------------
// clt-check: fluctuation-field variance against the deterministic limit.
// Keys: epsilon, kappa, offspring, t_list, phi, rho0, replicas, grid_M,
//       ou_check (0/1).
// Output: clt.csv (epsilon,t,phi_id,mc_variance,mc_stderr,limit_variance,
//                  z_score,skewness,excess_kurtosis), optional clt_ou.csv.
// ---------------------------------------------------------------------------
void run_clt_check(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "CLT";
    auto p = params_from(ctx.cfg, ctx.cfg.get_double("epsilon"));
    std::vector<double> t_list = ctx.cfg.has("t_list")
                                     ? ctx.cfg.get_double_list("t_list")
                                     : std::vector<double>{0.25, 0.5, 1.0};
    for (size_t i = 1; i < t_list.size(); ++i)
        if (t_list[i] < t_list[i - 1]) throw ConfigError("t_list must be sorted");
    int R = int(ctx.cfg.get_long("replicas", 10000));
    int M = int(ctx.cfg.get_long("grid_M", 256));
    if (M < 8 || M % 2 != 0) throw ConfigError("grid_M must be even and >= 8");
    TestFunction phi = phi_from(ctx.cfg);
    auto profile = rho0_profile(ctx.cfg, 2.0 * p.mu_eps);

    DensityField rho0 = sample_profile(profile, p.K);
    double t_max = t_list.back();
    DensityPath rho_path = fkpp_solve(rho0, p, t_max);
    auto phi_K = phi.sample(p.K);

    auto rows = run_replica_rows(R, int(t_list.size()), ctx.seed, ctx.jobs,
        [&](int, SplitMix64& rng, double* out) {
            SiteConfig x0 = sample_initial(rho0, p, rng);
            Trajectory tr = simulate(x0, p, t_list, {}, rng);
            for (size_t ti = 0; ti < t_list.size(); ++ti)
                out[ti] = fluct_field(tr.snapshots[ti], rho_path.at(t_list[ti]),
                                      phi_K, p);
        });

    // continuum references
    std::vector<double> rho0_M(static_cast<std::size_t>(M));
    for (int j = 0; j < M; ++j) rho0_M[size_t(j)] = profile(double(j) / M);
    DensityPath cont = continuum_reference(rho0_M, p.mu_eps, t_max > 0 ? t_max : 1e-9);
    auto phi_M = phi.sample(M);

    CsvBuffer csv{"clt.csv",
                  {"epsilon", "t", "phi_id", "mc_variance", "mc_stderr",
                   "limit_variance", "z_score", "skewness", "excess_kurtosis"}, {}};
    std::vector<double> ou_refs;
    for (size_t ti = 0; ti < t_list.size(); ++ti) {
        MomentStats ms = moment_stats(column(rows, int(ti)));
        double ref = limit_variance(phi_M, cont, rho0_M, t_list[ti], p.mu_eps,
                                    p.sigma2_eps);
        ou_refs.push_back(ref);
        double z = (ms.variance - ref) / ms.stderr_of_variance;
        csv.rows.push_back({cell(p.epsilon), cell(t_list[ti]), phi.id,
                            cell(ms.variance), cell(ms.stderr_of_variance), cell(ref),
                            cell(z), cell(ms.skewness), cell(ms.excess_kurtosis)});
        require_strict(ctx, std::abs(z) <= 3.0,
                       "clt z_score at t=" + fmt_double(t_list[ti]));
        require_strict(ctx, std::abs(ms.skewness) <= 3.0 * ms.skewness_stderr,
                       "clt skewness at t=" + fmt_double(t_list[ti]));
        require_strict(ctx, std::abs(ms.excess_kurtosis) <= 3.0 * ms.kurtosis_stderr,
                       "clt kurtosis at t=" + fmt_double(t_list[ti]));
    }
    art.csvs.push_back(std::move(csv));

    if (ctx.cfg.get_long("ou_check", 0) != 0) {
        int R_ou = int(ctx.cfg.get_long("ou_replicas", 4000));
        int M_ou = int(ctx.cfg.get_long("ou_grid_M", 32));
        std::vector<double> rho0_ou(static_cast<std::size_t>(M_ou));
        for (int j = 0; j < M_ou; ++j) rho0_ou[size_t(j)] = profile(double(j) / M_ou);
        DensityPath cont_ou = continuum_reference(rho0_ou, p.mu_eps,
                                                  t_max > 0 ? t_max : 1e-9);
        auto phi_ou = phi.sample(M_ou);
        CsvBuffer ou{"clt_ou.csv",
                     {"t", "phi_id", "ou_variance", "ou_stderr", "limit_variance",
                      "z_score"}, {}};
        for (size_t ti = 0; ti < t_list.size(); ++ti) {
            auto samples = ou_spde_simulate(cont_ou, phi_ou, t_list[ti], 0.0, R_ou,
                                            p.mu_eps, p.sigma2_eps,
                                            ctx.seed ^ 0xabcdefull, ctx.jobs);
            MomentStats ms = moment_stats(samples);
            double ref = limit_variance(phi_ou, cont_ou, rho0_ou, t_list[ti],
                                        p.mu_eps, p.sigma2_eps);
            double z = (ms.variance - ref) / ms.stderr_of_variance;
            ou.rows.push_back({cell(t_list[ti]), phi.id, cell(ms.variance),
                               cell(ms.stderr_of_variance), cell(ref), cell(z)});
            require_strict(ctx, std::abs(z) <= 3.0,
                           "ou z_score at t=" + fmt_double(t_list[ti]));
        }
        art.csvs.push_back(std::move(ou));
    }
}

// ---------------------------------------------------------------------------
// bgp-check: time-averaged nonlinear-fluctuation statistic across epsilon.
// Keys: eps_list, kappa, offspring, s, S, phi, rho0, replicas.
// Output: bgp.csv (epsilon,kappa,S,window,mean_square,stderr,replicas).
// ---------------------------------------------------------------------------
void run_bgp_check(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "BGP";
    auto eps_list = ctx.cfg.get_double_list("eps_list");
    double s = ctx.cfg.get_double("s", 0.2);
    double S = ctx.cfg.get_double("S", 10.0);
    int R = int(ctx.cfg.get_long("replicas", 400));
    TestFunction phi = phi_from(ctx.cfg);

    CsvBuffer csv{"bgp.csv",
                  {"epsilon", "kappa", "S", "window", "mean_square", "stderr",
                   "replicas"}, {}};
    std::vector<double> ms_list, se_list;
    for (double eps : eps_list) {
        auto p = params_from(ctx.cfg, eps);
        DensityField rho0 = sample_profile(rho0_profile(ctx.cfg, 2.0 * p.mu_eps), p.K);
        BgpResult r = bgp_statistic(rho0, phi, s, S, p, R, ctx.seed, ctx.jobs);
        csv.rows.push_back({cell(eps), cell(p.kappa), cell(S), cell(r.window),
                            cell(r.mean_square), cell(r.stderr_of_mean),
                            cell(long(R))});
        ms_list.push_back(r.mean_square);
        se_list.push_back(r.stderr_of_mean);
    }
    for (size_t i = 0; i + 1 < ms_list.size(); ++i) {
        double slack = 2.0 * std::sqrt(se_list[i] * se_list[i] +
                                       se_list[i + 1] * se_list[i + 1]);
        require_strict(ctx, ms_list[i + 1] < ms_list[i] + slack,
                       "bgp decrease step " + std::to_string(i));
    }
    art.csvs.push_back(std::move(csv));
    art.scripts.emplace_back("bgp.gp",
                             loglog_script("bgp.csv", "epsilon", "mean_square", "bgp"));
}

// ---------------------------------------------------------------------------
// coeff-check: deterministic verification of the hierarchy and product
// coefficients against their defining polynomial identities.
// Keys: epsilon, kappa, offspring, u_list.
// Output: coeff_report.csv (check,order,u,residual,pass).
// ---------------------------------------------------------------------------
void run_coeff_check(RunContext& ctx, Artifacts& art) {
    ctx.theorem = "QLLN-n2";
    auto p = params_from(ctx.cfg, ctx.cfg.get_double("epsilon"));
    std::vector<double> u_list = ctx.cfg.has("u_list")
                                     ? ctx.cfg.get_double_list("u_list")
                                     : std::vector<double>{-1.5, 0.0, 0.8, 2.0};

    CsvBuffer csv{"coeff_report.csv", {"check", "order", "u", "residual", "pass"}, {}};
    auto record = [&](const std::string& name, int order, double u, double res,
                      double thr) {
        bool ok = res <= thr;
        csv.rows.push_back({name, cell(order), cell(u), cell(res), cell(int(ok))});
        require_strict(ctx, ok, "coeff:" + name + " u=" + fmt_double(u));
    };

    for (double u : u_list) {
        // order-1 closed form and vanishing removals
        auto c1 = hierarchy_coeffs_all(1, u, p);
        record("order1_add_half", 1, u, std::abs(c1[2] + 0.5), 1e-12);
        record("order1_keep_mu_minus_u", 1, u, std::abs(c1[1] - (p.mu_eps - u)), 1e-12);
        record("order1_no_removal", 1, u, std::abs(c1[0]), 1e-12);

        // defining generator identity on a q-grid, orders 1..5
        for (int m = 1; m <= 5; ++m) {
            auto c = hierarchy_coeffs_all(m, u, p);
            double worst = 0.0;
            for (std::int64_t q = 0; q <= 15; ++q) {
                double dq = double(q);
                double branch = 0.0;
                for (int l = 1; l <= p.L; ++l)
                    branch += p.truncated_pmf[size_t(l - 1)] *
                              (vtilde(m, q + l, u, p) - vtilde(m, q, u, p));
                double coal = p.eps_kappa() * dq * (dq - 1.0) * 0.5 *
                              (vtilde(m, q - 1, u, p) - vtilde(m, q, u, p));
                double drift = -double(m) * u * (p.mu_eps - 0.5 * u) *
                               vtilde(m - 1, q, u, p);
                double lhs = dq * branch + coal + drift;
                double rhs = 0.0;
                for (size_t r = 0; r < c.size(); ++r)
                    rhs += c[r] * vtilde(int(r), q, u, p);
                worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
            }
            record("hierarchy_identity", m, u, worst, 1e-8);
        }

        // product expansion identity
        for (int k = 1; k <= 3; ++k)
            for (int m = k; m <= 3; ++m) {
                auto c = product_coeffs(k, m, u, p);
                double worst = 0.0;
                for (std::int64_t q = 0; q <= 12; ++q) {
                    double lhs = vtilde(k, q, u, p) * vtilde(m, q, u, p);
                    double rhs = 0.0;
                    for (size_t r = 0; r < c.size(); ++r)
                        rhs += c[r] * vtilde(int(r), q, u, p);
                    worst = std::max(worst,
                                     std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
                }
                record("product_identity_k" + std::to_string(k), m, u, worst, 1e-9);
            }
    }
    art.csvs.push_back(std::move(csv));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"experiment harness for the branching-coalescing lattice model"};
    app.require_subcommand(1);

    std::string config_path;
    std::int64_t seed_flag = -1;
    int jobs = 1;
    std::string out_flag;
    bool strict = false;

    std::vector<std::pair<std::string, void (*)(RunContext&, Artifacts&)>> subs{
        {"simulate", run_simulate},     {"fkpp", run_fkpp},
        {"green-check", run_green_check}, {"vfunc-scan", run_vfunc_scan},
        {"clt-check", run_clt_check},   {"bgp-check", run_bgp_check},
        {"coeff-check", run_coeff_check}};

    for (auto& [name, fn] : subs) {
        auto* sc = app.add_subcommand(name);
        sc->add_option("--config", config_path, "key = value config file")->required();
        sc->add_option("--seed", seed_flag, "master seed (overrides config)");
        sc->add_option("--jobs", jobs, "worker threads");
        sc->add_option("--out", out_flag, "output directory (overrides config)");
        sc->add_flag("--strict", strict, "exit 3 when an acceptance threshold fails");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        RunContext ctx;
        ctx.cfg = KeyValueConfig::parse_file(config_path);
        ctx.jobs = jobs > 0 ? jobs : 1;
        ctx.strict = strict;
        if (seed_flag >= 0) ctx.seed = std::uint64_t(seed_flag);
        else if (ctx.cfg.has("seed")) ctx.seed = std::uint64_t(ctx.cfg.get_long("seed"));
        else throw ConfigError("no seed: provide --seed or a 'seed' config key");
        ctx.out_dir = !out_flag.empty() ? fs::path(out_flag)
                                        : fs::path(ctx.cfg.get_string("out_dir", "out"));
        ctx.experiment = app.get_subcommands().front()->get_name();

        Artifacts art;
        auto t0 = std::chrono::steady_clock::now();
        for (auto& [name, fn] : subs)
            if (name == ctx.experiment) fn(ctx, art);
        double wall = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();

        write_artifacts(ctx, art, wall);
        if (ctx.strict && !ctx.strict_failures.empty()) {
            for (const auto& f : ctx.strict_failures)
                std::fprintf(stderr, "threshold failed: %s\n", f.c_str());
            return 3;
        }
        return 0;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
