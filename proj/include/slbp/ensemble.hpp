#ifndef SLBP_ENSEMBLE_HPP
#define SLBP_ENSEMBLE_HPP

// Replica ensembles with deterministic per-replica seeding and an
// order-independent (pairwise) reduction, so results are bit-identical for
// any worker count.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rng.hpp"

namespace slbp {

struct EnsembleStats {
    std::string observable;
    int replicas = 0;
    double mean = 0.0;
    double stderr_of_mean = 0.0;
    std::uint64_t master_seed = 0;
};

// Pairwise (cascade) summation: fixed association tree, independent of how
// the values were produced.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n == 0) return 0.0;
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

inline EnsembleStats reduce_stats(const std::vector<double>& per_replica,
                                  const std::string& name, std::uint64_t master_seed) {
    const std::size_t R = per_replica.size();
    if (R < 2) throw std::invalid_argument("reduce_stats: need at least 2 replicas");
    EnsembleStats s;
    s.observable = name;
    s.replicas = int(R);
    s.master_seed = master_seed;
    s.mean = pairwise_sum(per_replica) / double(R);
    std::vector<double> sq(R);
    for (std::size_t i = 0; i < R; ++i) {
        double d = per_replica[i] - s.mean;
        sq[i] = d * d;
    }
    double var = pairwise_sum(sq) / double(R - 1);
    s.stderr_of_mean = std::sqrt(var / double(R));
    return s;
}

// Run R replicas of `body(replica_index, rng, out_row)` filling a row of
// `n_obs` doubles each.  Rows are written into a preallocated matrix slot
// keyed by replica index, so the result is independent of scheduling.
template <class Body>
std::vector<std::vector<double>> run_replica_rows(int R, int n_obs,
                                                  std::uint64_t master_seed,
                                                  int jobs, Body&& body,
                                                  std::uint64_t replica_offset = 0) {
    if (R < 1) throw std::invalid_argument("run_replica_rows: need R >= 1");
    if (jobs < 1) jobs = 1;
    std::vector<std::vector<double>> rows(size_t(R), std::vector<double>(size_t(n_obs), 0.0));

    std::atomic<bool> failed{false};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<int> error_replica(static_cast<std::size_t>(jobs), -1);

    auto work = [&](int worker) {
        for (int r = worker; r < R; r += jobs) {
            if (failed.load(std::memory_order_relaxed)) return;
            try {
                SplitMix64 rng = make_stream(master_seed, replica_offset + std::uint64_t(r));
                body(r, rng, rows[size_t(r)].data());
            } catch (...) {
                errors[size_t(worker)] = std::current_exception();
                error_replica[size_t(worker)] = r;
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    if (jobs == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(size_t(jobs));
        for (int w = 0; w < jobs; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (int w = 0; w < jobs; ++w) {
        if (errors[size_t(w)]) {
            try {
                std::rethrow_exception(errors[size_t(w)]);
            } catch (const std::exception& e) {
                throw std::runtime_error("replica " + std::to_string(error_replica[size_t(w)]) +
                                         " failed: " + e.what());
            }
        }
    }
    return rows;
}

// Column extraction helper for multi-observable ensembles.
inline std::vector<double> column(const std::vector<std::vector<double>>& rows, int j) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][size_t(j)];
    return out;
}

// Single-observable convenience wrapper.
template <class Body>
EnsembleStats run_ensemble(int R, std::uint64_t master_seed, int jobs,
                           const std::string& name, Body&& body) {
    auto rows = run_replica_rows(R, 1, master_seed, jobs,
                                 [&](int r, SplitMix64& rng, double* out) { out[0] = body(r, rng); });
    return reduce_stats(column(rows, 0), name, master_seed);
}

} // namespace slbp

#endif // SLBP_ENSEMBLE_HPP
