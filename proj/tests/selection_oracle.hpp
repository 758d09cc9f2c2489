#pragma once

// Brute-force reference for the two-step rank-sum selection.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "cpitk/selection.hpp"

namespace oracle {

using cpitk::selection::CellKey;
using cpitk::selection::CellScores;
using cpitk::selection::OrderSpec;

// Rank by counting the pool members that come strictly before `i`.
inline int count_rank(const std::vector<double>& v, const std::vector<CellKey>& k, std::size_t i) {
    auto before = [&](std::size_t a, std::size_t b) {
        const bool fa = std::isfinite(v[a]);
        const bool fb = std::isfinite(v[b]);
        if (fa != fb) return fa;
        if (fa && v[a] != v[b]) return v[a] < v[b];
        return k[a] < k[b];
    };
    int r = 1;
    for (std::size_t j = 0; j < v.size(); ++j) r += (j != i && before(j, i)) ? 1 : 0;
    return r;
}

struct Expected {
    CellKey best;
    int rank_sum;
};

// Brute-force two-step enumeration.
inline std::vector<Expected> enumerate(const std::vector<CellScores>& cells) {
    std::set<OrderSpec> orders;
    for (const auto& c : cells) orders.insert(c.key.order);
    std::vector<CellScores> stars;
    for (const auto& o : orders) {
        std::vector<double> f, b, c;
        std::vector<CellKey> k;
        std::vector<const CellScores*> pool;
        for (const auto& x : cells) {
            if (x.key.order != o) continue;
            f.push_back(x.c_fit);
            b.push_back(x.bic);
            c.push_back(x.c_fc);
            k.push_back(x.key);
            pool.push_back(&x);
        }
        int best_sum = 1 << 30;
        const CellScores* best = nullptr;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const int s = count_rank(f, k, i) + count_rank(b, k, i) + count_rank(c, k, i);
            if (s < best_sum || (s == best_sum && k[i] < best->key)) {
                best_sum = s;
                best = pool[i];
            }
        }
        stars.push_back(*best);
    }
    std::vector<double> f, b, c;
    std::vector<CellKey> k;
    for (const auto& x : stars) {
        f.push_back(x.c_fit);
        b.push_back(x.bic);
        c.push_back(x.c_fc);
        k.push_back(x.key);
    }
    std::vector<Expected> out;
    for (std::size_t i = 0; i < stars.size(); ++i) {
        out.push_back({k[i], count_rank(f, k, i) + count_rank(b, k, i) + count_rank(c, k, i)});
    }
    std::sort(out.begin(), out.end(), [](const Expected& a, const Expected& b) {
        return a.rank_sum != b.rank_sum ? a.rank_sum < b.rank_sum : a.best < b.best;
    });
    return out;
}

}  // namespace oracle
