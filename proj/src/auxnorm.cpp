#include "bdforge/auxnorm.hpp"

#include <algorithm>
#include <vector>

#include "bdforge/error.hpp"

namespace bdforge {
namespace {

struct Dp {
    std::vector<Rational> vals;  // support values in position order
    std::vector<Rational> inv_m;  // 1/m_k, k = 1..K
    std::vector<std::size_t> arity;  // min(n_k, support size)
    std::map<std::pair<std::size_t, std::size_t>, Rational> memo;

    // Exact norm of the restriction to support indices [a, b].
    Rational best(std::size_t a, std::size_t b) {
        const auto key = std::make_pair(a, b);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        Rational out = 0;
        for (std::size_t i = a; i <= b; ++i)
            out = std::max(out, rat_abs(vals[i]));
        const std::size_t len = b - a + 1;
        if (len >= 2) {
            // S[p][e] = best sum over p consecutive blocks covering [a, e].
            // Only p >= 2 matters (one block is dominated by the plain norm),
            // and each block is a strict sub-interval, so recursion shrinks.
            const std::size_t pmax =
                std::min(len, *std::max_element(arity.begin(), arity.end()));
            std::vector<std::vector<Rational>> S(
                pmax + 1, std::vector<Rational>(len, Rational(-1)));
            for (std::size_t e = 0; e + 1 < len; ++e) S[1][e] = best(a, a + e);
            if (pmax >= 1) S[1][len - 1] = -1;  // forbid the single full block
            for (std::size_t p = 2; p <= pmax; ++p)
                for (std::size_t e = p - 1; e < len; ++e)
                    for (std::size_t s = p - 1; s <= e; ++s) {
                        if (S[p - 1][s - 1] < 0) continue;
                        const Rational cand =
                            S[p - 1][s - 1] + best(a + s, a + e);
                        if (cand > S[p][e]) S[p][e] = cand;
                    }
            for (std::size_t k = 0; k < inv_m.size(); ++k)
                for (std::size_t p = 2; p <= std::min(arity[k], pmax); ++p)
                    if (S[p][len - 1] >= 0)
                        out = std::max(out, Rational(inv_m[k] * S[p][len - 1]));
        }
        memo[key] = out;
        return out;
    }
};

Rational brute(const std::vector<Rational>& vals, std::size_t a, std::size_t b,
               const std::vector<Rational>& inv_m,
               const std::vector<std::size_t>& arity, std::size_t depth) {
    Rational out = 0;
    for (std::size_t i = a; i <= b; ++i) out = std::max(out, rat_abs(vals[i]));
    if (depth == 0 || b == a) return out;
    const std::size_t len = b - a + 1;
    // Enumerate every split of [a, b] into >= 2 consecutive nonempty blocks.
    std::vector<std::size_t> cuts;  // block end offsets, strictly increasing
    const auto recurse = [&](const auto& self, std::size_t from) -> void {
        for (std::size_t e = from; e < len; ++e) {
            cuts.push_back(e);
            if (e == len - 1) {
                if (cuts.size() >= 2) {
                    Rational sum = 0;
                    std::size_t lo = 0;
                    for (std::size_t c : cuts) {
                        sum += brute(vals, a + lo, a + c, inv_m, arity,
                                     depth - 1);
                        lo = c + 1;
                    }
                    for (std::size_t k = 0; k < inv_m.size(); ++k)
                        if (cuts.size() <= arity[k])
                            out = std::max(out, Rational(inv_m[k] * sum));
                }
            } else {
                self(self, e + 1);
            }
            cuts.pop_back();
        }
    };
    recurse(recurse, 0);
    return out;
}

std::pair<std::vector<Rational>, std::pair<std::vector<Rational>,
                                           std::vector<std::size_t>>>
prepare(const FinVec& v, const ParamSchedule& ps, std::uint64_t K) {
    std::vector<Rational> vals;
    for (const auto& [pos, c] : v)
        if (c != 0) vals.push_back(c);
    std::vector<Rational> inv_m;
    std::vector<std::size_t> arity;
    const std::size_t s = std::max<std::size_t>(vals.size(), 1);
    for (std::uint64_t k = 1; k <= K; ++k) {
        if (!ps.defined(k))
            fail("schedule-incomplete", "auxiliary norm needs k=" + std::to_string(k));
        inv_m.emplace_back(Rational(1, ps.m(k)));
        // n_k beyond the support size behaves like the support size.
        std::size_t cap = s;
        if (!ps.closed() && ps.n(k) < Int(s))
            cap = static_cast<std::size_t>(ps.n(k));
        arity.push_back(cap);
    }
    return {std::move(vals), {std::move(inv_m), std::move(arity)}};
}

}  // namespace

Rational mt_norm(const FinVec& v, const ParamSchedule& ps, std::uint64_t K,
                 std::size_t budget) {
    if (K == 0) fail("schedule-incomplete", "mt_norm needs K >= 1");
    auto [vals, rest] = prepare(v, ps, K);
    if (vals.empty()) return 0;
    if (vals.size() > budget)
        fail("budget-exceeded", "support of " + std::to_string(vals.size()) +
                                    " exceeds the norm budget");
    Dp dp{std::move(vals), std::move(rest.first), std::move(rest.second), {}};
    return dp.best(0, dp.vals.size() - 1);
}

Rational mt_norm_bruteforce(const FinVec& v, const ParamSchedule& ps,
                            std::uint64_t K, std::size_t depth) {
    if (K == 0) fail("schedule-incomplete", "mt_norm needs K >= 1");
    auto [vals, rest] = prepare(v, ps, K);
    if (vals.empty()) return 0;
    return brute(vals, 0, vals.size() - 1, rest.first, rest.second, depth);
}

}  // namespace bdforge
