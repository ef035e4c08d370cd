#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdforge/rational.hpp"

namespace bdforge {

// Parameter schedule (m_k, n_k, l_k).  Two modes:
//  - explicit list: finitely many exact integer triples,
//  - closed form:   m_k = 2^(2^k), n_k = 2^(2^(k^2)), l_k = 2^k, defined for all k.
// Closed-form values are materialized only when their bit size fits a budget;
// comparisons needed for validation run on the exact log2 exponents instead.
class ParamSchedule {
  public:
    enum class Mode { ExplicitList, ClosedForm };

    static ParamSchedule explicit_list(std::vector<Int> m, std::vector<Int> n,
                                       std::vector<Int> l);
    static ParamSchedule closed_form();
    // Non-conforming desk-scale rule m_k = 2^(k+1), n_k = 2^(k+2), l_k = k+1,
    // materialized as an explicit list on 1..K.  Keeps sigma-driven weight
    // indices representable with values of a few hundred bits.
    static ParamSchedule toy_rule(std::uint64_t K);

    Mode mode() const { return mode_; }
    bool closed() const { return mode_ == Mode::ClosedForm; }
    bool defined(std::uint64_t k) const;
    // Largest defined index for explicit lists; 0 means unbounded (closed form).
    std::uint64_t max_index() const;

    Int m(std::uint64_t k) const;
    Int n(std::uint64_t k) const;
    Int l(std::uint64_t k) const;

    // Exact log2 of m_k / n_k (closed-form mode only).
    Int log2_m(std::uint64_t k) const;
    Int log2_n(std::uint64_t k) const;

    std::string to_json(std::uint64_t conforming_checked_K = 0) const;
    static ParamSchedule from_json(const std::string& text);

  private:
    ParamSchedule() = default;

    Mode mode_ = Mode::ExplicitList;
    std::vector<Int> m_, n_, l_;  // explicit mode, index k-1
};

struct ValidityReport {
    struct Entry {
        std::uint64_t k = 0;
        bool first_ok = false;   // m_k m_{k-1} <= m_1^{l_k}
        bool second_ok = false;  // (n_{k-1}/m_{k-1})^{l_k} <= n_k/(m_{k-1} m_k)
    };
    std::vector<Entry> entries;       // k = 2..K
    bool increasing = false;          // m, n, l strictly increasing on 1..K
    bool base_standard = false;       // m_1 = 4, n_1 = 4, l_1 = 2
    bool conforming = false;          // all of the above
};

// Checks the growth inequalities for k = 2..K plus the strict-increase and
// base-value rules.
ValidityReport validate_schedule(const ParamSchedule& ps, std::uint64_t K);

// Smallest conforming explicit schedule on 1..K: minimizes (l_k, m_k, n_k)
// lexicographically subject to those inequalities, strict increase, and the rule
// m_k >= m_{k-1}^2 (see the decisions ledger for why the growth rule is needed).
ParamSchedule minimal_schedule(std::uint64_t K);

struct Net {
    std::uint64_t level = 0;          // q
    std::vector<Rational> points;     // sorted ascending, duplicate-free
    Rational mesh;
    bool toy = false;                 // capped
    bool grid_subset = true;          // every point lies on the 1/(4 n_q^2) grid
};

// Uniform grid {k/(4 n_q^2) : |k| <= 4 n_q^2}; with cap: {i/h : |i| <= h},
// h = (cap-1)/2, flagged toy.  cap < 3 is an error (must contain {-1,0,1}).
Net build_net(const ParamSchedule& ps, std::uint64_t q,
              std::optional<std::uint64_t> cap = std::nullopt);

// Membership in the (possibly capped) net of level q without materializing it.
bool net_contains(const ParamSchedule& ps, std::uint64_t q,
                  std::optional<std::uint64_t> cap, const Rational& lambda);

}  // namespace bdforge
