#ifndef SLBP_FENWICK_HPP
#define SLBP_FENWICK_HPP

// Binary-indexed tree over per-site event rates: O(log K) point update and
// O(log K) weighted sampling by prefix descent.  This is the hot path of the
// event kernel.

#include <cassert>
#include <cstddef>
#include <vector>

namespace slbp {

class FenwickSampler {
public:
    explicit FenwickSampler(int n = 0) { reset(n); }

    void reset(int n) {
        n_ = n;
        size_ = 1;
        while (size_ < n) size_ <<= 1;
        tree_.assign(size_t(size_) + 1, 0.0);
        leaf_.assign(size_t(n) , 0.0);
        total_ = 0.0;
    }

    int size() const { return n_; }
    double total() const { return total_; }
    double value(int i) const { return leaf_[size_t(i)]; }

    void set(int i, double v) {
        double d = v - leaf_[size_t(i)];
        if (d == 0.0) return;
        leaf_[size_t(i)] = v;
        total_ += d;
        for (int j = i + 1; j <= size_; j += j & (-j)) tree_[size_t(j)] += d;
    }

    // Smallest index i whose cumulative weight exceeds u * total, u in [0,1).
    int sample(double u) const {
        double target = u * total_;
        int pos = 0;
        for (int step = size_; step > 0; step >>= 1) {
            int next = pos + step;
            if (next <= size_ && tree_[size_t(next)] <= target) {
                target -= tree_[size_t(next)];
                pos = next;
            }
        }
        // pos = number of leaves with cumulative weight <= target.
        if (pos >= n_) pos = n_ - 1; // rounding guard at the right edge
        return pos;
    }

    // Exact recomputation of the running total from the leaves; used by the
    // periodic consistency audit (summation order is index order).
    double exact_total() const {
        double s = 0.0;
        for (double v : leaf_) s += v;
        return s;
    }

    // Resynchronize accumulated tree sums with the leaves.
    void rebuild() {
        std::vector<double> old = leaf_;
        reset(n_);
        for (int i = 0; i < n_; ++i) set(i, old[size_t(i)]);
    }

private:
    int n_ = 0;
    int size_ = 1;
    double total_ = 0.0;
    std::vector<double> tree_; // 1-based Fenwick array over padded leaves
    std::vector<double> leaf_;
};

} // namespace slbp

#endif // SLBP_FENWICK_HPP
