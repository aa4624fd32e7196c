#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "slbp/alias.hpp"
#include "slbp/combinatorics.hpp"
#include "slbp/ensemble.hpp"
#include "slbp/fenwick.hpp"
#include "slbp/lattice.hpp"
#include "slbp/params.hpp"
#include "slbp/rng.hpp"

using namespace slbp;

TEST_CASE("falling factorial base cases") {
    CHECK(falling_factorial(3, 5) == 60);
    CHECK(falling_factorial(0, 7) == 1);
    CHECK(falling_factorial(4, 3) == 0);
    CHECK(falling_factorial(0, 0) == 1);
    CHECK(falling_factorial(1, 0) == 0);
    CHECK(falling_factorial(5, 5) == 120);
}

TEST_CASE("falling factorial product identity") {
    // Q_k(n) Q_m(n) = sum_j C(k,j) C(m,j) j! Q_{k+m-j}(n), exact integers
    for (int k = 0; k <= 5; ++k)
        for (int m = 0; m <= 5; ++m)
            for (std::int64_t n = 0; n <= 20; ++n) {
                std::int64_t lhs = falling_factorial(k, n) * falling_factorial(m, n);
                std::int64_t rhs = 0;
                for (int j = 0; j <= std::min(k, m); ++j)
                    rhs += binomial(k, j) * binomial(m, j) * falling_factorial(j, j) *
                           falling_factorial(k + m - j, n);
                CHECK(lhs == rhs);
            }
}

TEST_CASE("stirling numbers: hand values and basis identities") {
    // expand Q_3(n) = n^3 - 3n^2 + 2n by hand
    CHECK(stirling_first(3, 1) == 2);
    CHECK(stirling_first(3, 2) == -3);
    CHECK(stirling_first(3, 3) == 1);
    CHECK(stirling_second(3, 2) == 3);
    for (int k = 1; k <= 12; ++k) CHECK(stirling_first(k, k) == 1);

    // Q_k(n) = sum_i s(k,i) n^i and n^j = sum_l S(j,l) Q_l(n), exact
    for (int k = 0; k <= 10; ++k)
        for (std::int64_t n = 0; n <= 20; ++n) {
            std::int64_t lhs = falling_factorial(k, n);
            std::int64_t rhs = 0;
            std::int64_t npow = 1;
            for (int i = 0; i <= k; ++i) {
                rhs += stirling_first(k, i) * npow;
                npow *= n;
            }
            CHECK(lhs == rhs);
        }
    for (int j = 0; j <= 10; ++j)
        for (std::int64_t n = 0; n <= 20; ++n) {
            std::int64_t lhs = 1;
            for (int i = 0; i < j; ++i) lhs *= n;
            std::int64_t rhs = 0;
            for (int l = 0; l <= j; ++l)
                rhs += stirling_second(j, l) * falling_factorial(l, n);
            CHECK(lhs == rhs);
        }
    CHECK_THROWS(stirling_first(3, 4));
    CHECK_THROWS(stirling_second(2, 3));
}

TEST_CASE("derive_params: binary and truncated geometric laws") {
    auto p = derive_params(1.0 / 64, 1.0, binary_law(), 1.0);
    CHECK(p.K == 64);
    CHECK(p.c_eps == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.mu_eps == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.sigma2_eps == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(p.gamma == doctest::Approx(0.0));

    auto g = derive_params(1.0 / 16, 0.5, geometric_law(), 1.0,
                           TruncationRule::Explicit, 3);
    CHECK(g.L == 3);
    CHECK(g.c_eps == doctest::Approx(8.0 / 7.0).epsilon(1e-12));
    CHECK(g.mu_eps == doctest::Approx(11.0 / 7.0).epsilon(1e-12));
    double sum = 0.0;
    for (double v : g.truncated_pmf) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // moments recomputed by direct summation
    double mean = 0.0, var = 0.0;
    for (int l = 1; l <= g.L; ++l) mean += l * g.truncated_pmf[l - 1];
    for (int l = 1; l <= g.L; ++l) var += (l - mean) * (l - mean) * g.truncated_pmf[l - 1];
    CHECK(g.mu_eps == doctest::Approx(mean).epsilon(1e-14));
    CHECK(g.sigma2_eps == doctest::Approx(var).epsilon(1e-14));

    CHECK_THROWS(derive_params(1.5, 1.0, binary_law(), 1.0));
    CHECK_THROWS(derive_params(0.1, -1.0, binary_law(), 1.0));
    CHECK_THROWS(derive_params(0.1, 1.0, {0.5, 0.2}, 1.0)); // pmf not normalized
}

TEST_CASE("default truncation rule satisfies the scale constraints") {
    for (double eps : {1.0 / 16, 1.0 / 32, 1.0 / 64}) {
        auto p0 = derive_params(eps, 0.0, geometric_law(), 1.0);
        CHECK(p0.L == int(std::ceil(std::log2(1.0 / eps))));
        auto p1 = derive_params(eps, 1.0, geometric_law(), 1.0);
        CHECK(p1.L == int(std::ceil(std::pow(eps, -0.5))));
        CHECK(double(p1.L) < std::pow(eps, -1.0)); // L = o(eps^{-kappa})
    }
}

TEST_CASE("q_eps values and support") {
    auto p = derive_params(0.5, 1.0, binary_law(), 1.0);
    REQUIRE(p.K == 2);
    SiteConfig xp(2);
    xp.counts = {5, 0};
    TestConfig x{{0, 2}};
    CHECK(q_eps(x, xp, p) == doctest::Approx(5.0).epsilon(1e-14)); // 0.25 * 20
    CHECK(q_eps(TestConfig{}, xp, p) == 1.0);
    TestConfig x3{{0, 3}};
    xp.counts = {2, 0};
    CHECK(q_eps(x3, xp, p) == 0.0);
}

TEST_CASE("q_eps positivity iff componentwise domination") {
    auto p = derive_params(1.0 / 8, 0.5, binary_law(), 1.0);
    SplitMix64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        SiteConfig xp(p.K);
        for (int z = 0; z < p.K; ++z) xp.counts[size_t(z)] = long(rng.below(4));
        TestConfig x;
        for (int pick = 0; pick < 3; ++pick) {
            int z = int(rng.below(std::uint64_t(p.K)));
            int k = 1 + int(rng.below(2));
            x = x.with(z, k);
        }
        bool dominated = x.leq(xp);
        double q = q_eps(x, xp, p);
        CHECK((q > 0.0) == dominated);
    }
}

TEST_CASE("fenwick sampler: totals and frequencies") {
    FenwickSampler fw(10);
    std::vector<double> w{0.0, 1.0, 2.0, 0.0, 0.5, 3.0, 0.0, 0.0, 1.5, 2.0};
    for (int i = 0; i < 10; ++i) fw.set(i, w[size_t(i)]);
    CHECK(fw.total() == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(fw.exact_total() == doctest::Approx(10.0).epsilon(1e-14));

    SplitMix64 rng(42);
    std::map<int, long> hits;
    const int N = 200000;
    for (int i = 0; i < N; ++i) hits[fw.sample(rng.uniform())]++;
    CHECK(hits.count(0) == 0);
    CHECK(hits.count(3) == 0);
    CHECK(hits.count(6) == 0);
    for (auto& [i, c] : hits) {
        double expect = w[size_t(i)] / 10.0;
        double se = std::sqrt(expect * (1 - expect) / N);
        CHECK(std::abs(double(c) / N - expect) < 5 * se + 1e-9);
    }

    fw.set(5, 0.0);
    CHECK(fw.total() == doctest::Approx(7.0).epsilon(1e-12));
    for (int i = 0; i < 1000; ++i) CHECK(fw.sample(rng.uniform()) != 5);
}

TEST_CASE("alias table matches its pmf") {
    std::vector<double> pmf{0.1, 0.0, 0.5, 0.15, 0.25};
    AliasTable at(pmf);
    SplitMix64 rng(9);
    std::vector<long> hits(pmf.size(), 0);
    const int N = 400000;
    for (int i = 0; i < N; ++i) hits[size_t(at.draw(rng))]++;
    for (size_t i = 0; i < pmf.size(); ++i) {
        double se = std::sqrt(pmf[i] * (1 - pmf[i]) / N);
        CHECK(std::abs(double(hits[i]) / N - pmf[i]) < 5 * se + 1e-9);
    }
}

TEST_CASE("rng streams are reproducible and replica-independent") {
    auto a = make_stream(123, 0);
    auto b = make_stream(123, 0);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
    auto c = make_stream(123, 1);
    bool differs = false;
    auto a2 = make_stream(123, 0);
    for (int i = 0; i < 10; ++i) differs |= (a2() != c());
    CHECK(differs);
}

TEST_CASE("pairwise reduction is order-independent across worker counts") {
    auto body = [](int r, SplitMix64& rng, double* out) {
        (void)r;
        out[0] = rng.uniform();
    };
    auto r1 = run_replica_rows(1001, 1, 77, 1, body);
    auto r8 = run_replica_rows(1001, 1, 77, 8, body);
    auto s1 = reduce_stats(column(r1, 0), "u", 77);
    auto s8 = reduce_stats(column(r8, 0), "u", 77);
    CHECK(s1.mean == s8.mean); // bit-identical
    CHECK(s1.stderr_of_mean == s8.stderr_of_mean);
}

TEST_CASE("constant observable has zero spread") {
    auto st = run_ensemble(100, 5, 2, "const", [](int, SplitMix64&) { return 3.25; });
    CHECK(st.mean == 3.25);
    CHECK(st.stderr_of_mean == 0.0);
}
