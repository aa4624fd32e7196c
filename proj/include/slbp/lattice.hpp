#ifndef SLBP_LATTICE_HPP
#define SLBP_LATTICE_HPP

// Particle configurations on the discrete circle Z_K and the sparse test
// configurations indexing the moment (V-)functions, plus the scaled
// falling-factorial moment Q^eps.

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "combinatorics.hpp"
#include "params.hpp"

namespace slbp {

// Dense per-site particle counts.  The scaled field is X(z) = eps^kappa n(z).
struct SiteConfig {
    std::vector<std::int64_t> counts;

    SiteConfig() = default;
    explicit SiteConfig(int K) : counts(K, 0) {}

    int K() const { return int(counts.size()); }
    std::int64_t total() const {
        return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    }
    double scaled(int z, const ModelParams& p) const {
        return p.eps_kappa() * double(counts[z]);
    }
};

// Sparse multiset of (site, multiplicity) pairs; the argument x of the
// V- and v-functions.  Orders stay small (<= ~6).
struct TestConfig {
    std::map<int, int> entries; // site -> multiplicity k_z >= 1

    TestConfig() = default;
    TestConfig(std::initializer_list<std::pair<const int, int>> init) : entries(init) {
        for (auto& [z, k] : entries)
            if (k < 1) throw std::invalid_argument("TestConfig: multiplicity must be >= 1");
    }

    int order() const {
        int n = 0;
        for (auto& [z, k] : entries) n += k;
        return n;
    }
    bool empty() const { return entries.empty(); }

    // Add h particles at z (h >= 0) or remove -h (h < 0).
    TestConfig with(int z, int h) const {
        TestConfig out = *this;
        int k = 0;
        auto it = out.entries.find(z);
        if (it != out.entries.end()) k = it->second;
        k += h;
        if (k < 0) throw std::invalid_argument("TestConfig::with: negative multiplicity");
        if (k == 0) { if (it != out.entries.end()) out.entries.erase(it); }
        else out.entries[z] = k;
        return out;
    }

    // Move one particle from site z to site z2 (circle indices already reduced).
    TestConfig moved(int z, int z2) const { return with(z, -1).with(z2, +1); }

    // Componentwise partial order against a dense configuration.
    bool leq(const SiteConfig& x) const {
        for (auto& [z, k] : entries)
            if (k > x.counts[z]) return false;
        return true;
    }
    bool leq(const TestConfig& o) const {
        for (auto& [z, k] : entries) {
            auto it = o.entries.find(z);
            if (it == o.entries.end() || k > it->second) return false;
        }
        return true;
    }
};

inline int wrap(int z, int K) { return ((z % K) + K) % K; }

// Q^eps(x, x') = prod_{z in supp(x)} eps^{kappa k_z} Q_{k_z}(n_{x'}(z));
// equals 1 for empty x and is nonzero iff x <= x' componentwise.
inline double q_eps(const TestConfig& x, const SiteConfig& xp, const ModelParams& p) {
    if (!x.empty() && xp.K() != p.K)
        throw std::invalid_argument("q_eps: lattice size mismatch");
    double r = 1.0;
    const double ek = p.eps_kappa();
    for (auto& [z, k] : x.entries) {
        if (z < 0 || z >= xp.K())
            throw std::invalid_argument("q_eps: site out of range");
        r *= std::pow(ek, k) * falling_factorial_d(k, xp.counts[z]);
        if (r == 0.0) return 0.0;
    }
    return r;
}

} // namespace slbp

#endif // SLBP_LATTICE_HPP
