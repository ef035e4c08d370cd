#pragma once

#include <cstdint>
#include <map>

#include "bdforge/rational.hpp"

namespace bdforge {

using NodeId = std::uint64_t;

// Inclusive ordinal interval in the global enumeration (gamma_n)_n.
struct Interval {
    std::uint64_t lo = 0, hi = 0;

    bool contains(std::uint64_t p) const { return lo <= p && p <= hi; }
    std::uint64_t length() const { return hi >= lo ? hi - lo + 1 : 0; }
    bool operator==(const Interval& o) const { return lo == o.lo && hi == o.hi; }
    bool operator<(const Interval& o) const {
        return lo != o.lo ? lo < o.lo : hi < o.hi;
    }
};

inline Interval intersect(const Interval& a, const Interval& b) {
    const std::uint64_t lo = a.lo > b.lo ? a.lo : b.lo;
    const std::uint64_t hi = a.hi < b.hi ? a.hi : b.hi;
    return lo <= hi ? Interval{lo, hi} : Interval{1, 0};  // {1,0} = empty
}

// Exact coefficient map (d*- or d-basis); zero coefficients are never stored.
using SparseMap = std::map<NodeId, Rational>;

inline void add_scaled(SparseMap& dst, const SparseMap& src, const Rational& c) {
    if (c == 0) return;
    for (const auto& [id, v] : src) {
        auto it = dst.find(id);
        if (it == dst.end()) {
            dst.emplace(id, v * c);
        } else {
            it->second += v * c;
            if (it->second == 0) dst.erase(it);
        }
    }
}

inline SparseMap proj_map(const SparseMap& f, const Interval& I) {
    SparseMap out;
    if (I.lo > I.hi) return out;
    for (auto it = f.lower_bound(I.lo); it != f.end() && it->first <= I.hi; ++it)
        out.insert(*it);
    return out;
}

}  // namespace bdforge
