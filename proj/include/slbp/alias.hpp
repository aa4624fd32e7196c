#ifndef SLBP_ALIAS_HPP
#define SLBP_ALIAS_HPP

// Walker alias table for O(1) draws from a fixed discrete law (the truncated
// offspring distribution).  Built once per parameter set.

#include <stdexcept>
#include <vector>

#include "rng.hpp"

namespace slbp {

class AliasTable {
public:
    AliasTable() = default;

    explicit AliasTable(const std::vector<double>& pmf) {
        const int n = int(pmf.size());
        if (n == 0) throw std::invalid_argument("AliasTable: empty pmf");
        prob_.assign(size_t(n), 0.0);
        alias_.assign(size_t(n), 0);
        double sum = 0.0;
        for (double p : pmf) {
            if (p < 0.0) throw std::invalid_argument("AliasTable: negative weight");
            sum += p;
        }
        if (sum <= 0.0) throw std::invalid_argument("AliasTable: zero total weight");

        std::vector<double> scaled(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) scaled[size_t(i)] = pmf[size_t(i)] * n / sum;
        std::vector<int> small, large;
        for (int i = 0; i < n; ++i)
            (scaled[size_t(i)] < 1.0 ? small : large).push_back(i);
        while (!small.empty() && !large.empty()) {
            int s = small.back(); small.pop_back();
            int l = large.back(); large.pop_back();
            prob_[size_t(s)] = scaled[size_t(s)];
            alias_[size_t(s)] = l;
            scaled[size_t(l)] -= 1.0 - scaled[size_t(s)];
            (scaled[size_t(l)] < 1.0 ? small : large).push_back(l);
        }
        for (int i : large) prob_[size_t(i)] = 1.0;
        for (int i : small) prob_[size_t(i)] = 1.0;
        n_ = n;
    }

    // 0-based bucket index.
    int draw(SplitMix64& rng) const {
        int i = int(rng.below(std::uint64_t(n_)));
        return rng.uniform() < prob_[size_t(i)] ? i : alias_[size_t(i)];
    }

    int size() const { return n_; }

private:
    int n_ = 0;
    std::vector<double> prob_;
    std::vector<int> alias_;
};

} // namespace slbp

#endif // SLBP_ALIAS_HPP
