#ifndef SLBP_RNG_HPP
#define SLBP_RNG_HPP

// Counter-based random number streams.
//
// Each replica owns an independent stream keyed by (master_seed, replica
// index).  The generator is SplitMix64: the state is an incrementing counter
// and every output is a finalizing hash of it, so a stream is fully
// determined by its key and the number of draws made -- independent of
// thread scheduling.

#include <cstdint>
#include <cmath>
#include <limits>
#include <random>

namespace slbp {

class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double uniform() { return double((*this)() >> 11) * 0x1.0p-53; }

    // Uniform double in (0, 1] -- safe for log().
    double uniform_pos() { return double(((*this)() >> 11) + 1) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log(uniform_pos()) / rate; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire rejection-free-in-practice multiply-shift.
        while (true) {
            std::uint64_t x = (*this)();
            __uint128_t m = (__uint128_t)x * n;
            std::uint64_t lo = (std::uint64_t)m;
            if (lo >= n || lo >= (std::uint64_t)(-(std::int64_t)n) % n)
                return (std::uint64_t)(m >> 64);
        }
    }

    long poisson(double mean) {
        std::poisson_distribution<long> d(mean);
        return d(*this);
    }

    double normal() {
        std::normal_distribution<double> d(0.0, 1.0);
        return d(*this);
    }

private:
    std::uint64_t state_;
};

// Derive the stream key for one replica from the master seed.  Both inputs
// pass through the SplitMix64 finalizer so nearby replica indices give
// unrelated streams.
inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t replica) {
    SplitMix64 h(master_seed ^ (0x632be59bd9b4e019ull * (replica + 1)));
    return h();
}

inline SplitMix64 make_stream(std::uint64_t master_seed, std::uint64_t replica) {
    return SplitMix64(stream_seed(master_seed, replica));
}

} // namespace slbp

#endif // SLBP_RNG_HPP
