#ifndef SLBP_POLY_HPP
#define SLBP_POLY_HPP

// Dense univariate polynomials with double coefficients (index = power).
// Used for the exact algebra behind the moment-hierarchy coefficients.

#include <cstddef>
#include <vector>

#include "combinatorics.hpp"

namespace slbp {

using Poly = std::vector<double>; // p[i] = coefficient of q^i

inline int poly_degree(const Poly& p) {
    for (int i = int(p.size()) - 1; i >= 0; --i)
        if (p[size_t(i)] != 0.0) return i;
    return -1;
}

inline void poly_axpy(Poly& acc, double a, const Poly& p) {
    if (acc.size() < p.size()) acc.resize(p.size(), 0.0);
    for (size_t i = 0; i < p.size(); ++i) acc[i] += a * p[i];
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, 0.0);
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return out;
}

inline double poly_eval(const Poly& p, double q) {
    double r = 0.0;
    for (int i = int(p.size()) - 1; i >= 0; --i) r = r * q + p[size_t(i)];
    return r;
}

// Q_k(q + a) = prod_{i=0}^{k-1} (q + a - i) as a polynomial in q.
inline Poly poly_falling_shifted(int k, double a) {
    Poly out{1.0};
    for (int i = 0; i < k; ++i) out = poly_mul(out, Poly{a - double(i), 1.0});
    return out;
}

// Q_k(q) via signed Stirling numbers of the first kind (exact integers).
inline Poly poly_falling(int k) {
    Poly out(size_t(k) + 1, 0.0);
    for (int i = 0; i <= k; ++i) out[size_t(i)] = double(stirling_first(k, i));
    return out;
}

} // namespace slbp

#endif // SLBP_POLY_HPP
