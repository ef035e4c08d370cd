#pragma once

#include <cstdint>
#include <map>

#include "bdforge/params.hpp"

namespace bdforge {

// Finitely supported vector over abstract positions (the auxiliary mixed
// Tsirelson space is independent of the node registry).
using FinVec = std::map<std::uint64_t, Rational>;

// Exact norm in the mixed Tsirelson space with weights m_k^{-1} and arities
// n_k for k = 1..K, via dynamic programming over support intervals.
// Support size is limited by a budget (default 40 positions).
Rational mt_norm(const FinVec& v, const ParamSchedule& ps, std::uint64_t K,
                 std::size_t budget = 40);

// Independent oracle: enumerates every norming functional up to the given
// recursion depth.  Intended for tiny supports (<= 8) and depth <= 3.
Rational mt_norm_bruteforce(const FinVec& v, const ParamSchedule& ps,
                            std::uint64_t K, std::size_t depth);

}  // namespace bdforge
