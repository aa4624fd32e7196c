#ifndef SLBP_GREEN_HPP
#define SLBP_GREEN_HPP

// Semi-discrete heat kernel on the circle: exact spectral solution of
// d/dt G = (1/2) Lap^eps G with G_0 = identity, the whole-line walk kernel
// (for periodization tests), and symmetrized multi-particle transition
// weights for small test configurations.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "lattice.hpp"
#include "params.hpp"

namespace slbp {

class GreenKernel {
public:
    GreenKernel(int K, double epsilon) : K_(K), epsilon_(epsilon), lambda_(size_t(K)) {
        const double inv_e2 = 1.0 / (epsilon * epsilon);
        for (int j = 0; j < K; ++j)
            lambda_[size_t(j)] = inv_e2 * (1.0 - std::cos(2.0 * std::numbers::pi * j / K));
    }

    int K() const { return K_; }
    double epsilon() const { return epsilon_; }
    double eigenvalue(int j) const { return lambda_[size_t(j)]; }

    // G_t(z1, z2) = (1/K) sum_j e^{-t lambda_j} cos(2 pi j (z2-z1)/K).
    double operator()(double t, int z1, int z2) const {
        if (t < 0.0) throw std::invalid_argument("green: t must be >= 0");
        int d = wrap(z2 - z1, K_);
        double s = 0.0;
        for (int j = 0; j < K_; ++j)
            s += std::exp(-t * lambda_[size_t(j)]) *
                 std::cos(2.0 * std::numbers::pi * j * d / K_);
        double v = s / K_;
        return v;
    }

private:
    int K_;
    double epsilon_;
    std::vector<double> lambda_;
};

// Whole-line continuous-time simple random walk kernel at jump rate eps^{-2}:
// (1/2pi) int_{-pi}^{pi} e^{-i z theta} e^{-eps^{-2} t (1 - cos theta)} dtheta,
// by composite Simpson quadrature on the even real integrand.
inline double green_line(double t, long z, double epsilon) {
    if (t < 0.0) throw std::invalid_argument("green_line: t must be >= 0");
    const double rate_t = t / (epsilon * epsilon);
    if (z < 0) z = -z;
    // integrand: cos(z theta) e^{-rate_t (1 - cos theta)} / pi on [0, pi]
    auto f = [&](double th) {
        return std::cos(double(z) * th) * std::exp(-rate_t * (1.0 - std::cos(th)));
    };
    auto simpson = [&](int panels) {
        const double h = std::numbers::pi / panels;
        double s = f(0.0) + f(std::numbers::pi);
        for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
        return s * h / 3.0 / std::numbers::pi;
    };
    // Refine until two successive grids agree; flag non-convergence.
    double prev = simpson(1024);
    for (int panels = 2048; panels <= 131072; panels *= 2) {
        double cur = simpson(panels);
        if (std::abs(cur - prev) < 1e-13) return cur;
        prev = cur;
    }
    throw std::runtime_error("green_line: quadrature did not converge");
}

// Symmetrized multi-particle kernel: (1/n!) sum over bijections of the
// product of single-particle kernels.  Orders are capped at 4.
inline double multi_green(const GreenKernel& g, double t,
                          const TestConfig& x, const TestConfig& xp) {
    int n = x.order();
    if (n != xp.order()) throw std::invalid_argument("multi_green: order mismatch");
    if (n > 4) throw std::invalid_argument("multi_green: order > 4 unsupported");
    if (n == 0) return 0.0; // empty configuration maps to zero by convention

    std::vector<int> a, b; // particle site lists with multiplicity
    for (auto& [z, k] : x.entries) a.insert(a.end(), size_t(k), z);
    for (auto& [z, k] : xp.entries) b.insert(b.end(), size_t(k), z);

    // Cache the n x n single-particle matrix, then sum over permutations.
    std::vector<double> m(size_t(n) * size_t(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m[size_t(i * n + j)] = g(t, a[size_t(i)], b[size_t(j)]);

    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
    double sum = 0.0;
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    do {
        double prod = 1.0;
        for (int i = 0; i < n; ++i) prod *= m[size_t(i * n + perm[size_t(i)])];
        sum += prod;
    } while (std::next_permutation(perm.begin(), perm.end()));
    return sum / fact;
}

} // namespace slbp

#endif // SLBP_GREEN_HPP
