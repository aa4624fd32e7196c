#ifndef SLBP_COMBINATORICS_HPP
#define SLBP_COMBINATORICS_HPP

// Exact integer combinatorics: falling factorials, binomial coefficients,
// Stirling numbers of both kinds.  Everything is 64-bit; the orders used by
// the moment machinery are small (<= 8), so overflow is asserted away rather
// than handled with big integers.

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace slbp {

// Falling factorial n(n-1)...(n-k+1); 1 for k = 0; 0 for k > n.
inline std::int64_t falling_factorial(std::int64_t k, std::int64_t n) {
    assert(k >= 0 && n >= 0);
    if (k == 0) return 1;
    if (k > n) return 0;
    std::int64_t r = 1;
    for (std::int64_t i = 0; i < k; ++i) {
        std::int64_t f = n - i;
        assert(r <= INT64_MAX / (f > 0 ? f : 1) && "falling_factorial overflow");
        r *= f;
    }
    return r;
}

inline double falling_factorial_d(int k, std::int64_t n) {
    if (k == 0) return 1.0;
    if (n < k) return 0.0;
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= double(n - i);
    return r;
}

inline std::int64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        // r * (n-k+i) is divisible by i at every step.
        assert(r <= INT64_MAX / (n - k + i) && "binomial overflow");
        r = r * (n - k + i) / i;
    }
    return r;
}

// Signed Stirling numbers of the first kind: Q_k(n) = sum_i s(k,i) n^i.
// Recurrence s(k+1,i) = s(k,i-1) - k*s(k,i).
inline std::int64_t stirling_first(int k, int i) {
    if (k < 0 || i < 0 || i > k) throw std::out_of_range("stirling_first: need 0 <= i <= k");
    std::vector<std::int64_t> row(k + 1, 0), next(k + 1, 0);
    row[0] = 1; // s(0,0) = 1
    for (int kk = 0; kk < k; ++kk) {
        for (int ii = 0; ii <= kk + 1; ++ii)
            next[ii] = (ii > 0 ? row[ii - 1] : 0) - kk * (ii <= kk ? row[ii] : 0);
        std::swap(row, next);
    }
    return row[i];
}

// Stirling numbers of the second kind: n^j = sum_l S(j,l) Q_l(n).
// Recurrence S(j+1,l) = l*S(j,l) + S(j,l-1).
inline std::int64_t stirling_second(int j, int l) {
    if (j < 0 || l < 0 || l > j) throw std::out_of_range("stirling_second: need 0 <= l <= j");
    std::vector<std::int64_t> row(j + 1, 0), next(j + 1, 0);
    row[0] = 1;
    for (int jj = 0; jj < j; ++jj) {
        for (int ll = 0; ll <= jj + 1; ++ll)
            next[ll] = (ll <= jj ? ll * row[ll] : 0) + (ll > 0 ? row[ll - 1] : 0);
        std::swap(row, next);
    }
    return row[l];
}

} // namespace slbp

#endif // SLBP_COMBINATORICS_HPP
