#include "bdforge/params.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {
namespace {

// Bit-size budget for materializing closed-form values (2^(2^k) needs 2^k bits).
constexpr std::uint64_t kValueBitBudget = 1u << 22;

Int pow2(const Int& e) {
    if (e < 0) fail("internal-error", "pow2 negative exponent");
    if (e > kValueBitBudget)
        fail("value-too-large", "closed-form value needs " + e.str() + " bits");
    Int one = 1;
    return one << static_cast<std::uint64_t>(e);
}

Int ipow(Int base, Int exp) {
    Int acc = 1;
    while (exp > 0) {
        if ((exp & 1) != 0) acc *= base;
        base *= base;
        exp >>= 1;
    }
    return acc;
}

}  // namespace

ParamSchedule ParamSchedule::explicit_list(std::vector<Int> m, std::vector<Int> n,
                                           std::vector<Int> l) {
    if (m.size() != n.size() || m.size() != l.size() || m.empty())
        fail("schedule-incomplete", "explicit schedule needs equal nonempty m/n/l lists");
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i] <= 0 || n[i] <= 0 || l[i] <= 0)
            fail("schedule-incomplete", "schedule entries must be positive");
    ParamSchedule ps;
    ps.mode_ = Mode::ExplicitList;
    ps.m_ = std::move(m);
    ps.n_ = std::move(n);
    ps.l_ = std::move(l);
    return ps;
}

ParamSchedule ParamSchedule::closed_form() {
    ParamSchedule ps;
    ps.mode_ = Mode::ClosedForm;
    return ps;
}

ParamSchedule ParamSchedule::toy_rule(std::uint64_t K) {
    if (K == 0) fail("schedule-incomplete", "toy_rule needs K >= 1");
    std::vector<Int> m, n, l;
    m.reserve(K);
    for (std::uint64_t k = 1; k <= K; ++k) {
        m.push_back(Int(1) << (k + 1));
        n.push_back(Int(1) << (k + 2));
        l.push_back(Int(k + 1));
    }
    return explicit_list(std::move(m), std::move(n), std::move(l));
}

bool ParamSchedule::defined(std::uint64_t k) const {
    if (k == 0) return false;
    return closed() || k <= m_.size();
}

std::uint64_t ParamSchedule::max_index() const {
    return closed() ? 0 : static_cast<std::uint64_t>(m_.size());
}

Int ParamSchedule::m(std::uint64_t k) const {
    if (!defined(k)) fail("schedule-incomplete", "m undefined at k=" + std::to_string(k));
    if (closed()) return pow2(log2_m(k));
    return m_[k - 1];
}

Int ParamSchedule::n(std::uint64_t k) const {
    if (!defined(k)) fail("schedule-incomplete", "n undefined at k=" + std::to_string(k));
    if (closed()) return pow2(log2_n(k));
    return n_[k - 1];
}

Int ParamSchedule::l(std::uint64_t k) const {
    if (!defined(k)) fail("schedule-incomplete", "l undefined at k=" + std::to_string(k));
    if (closed()) return pow2(Int(k));  // l_k = 2^k
    return l_[k - 1];
}

Int ParamSchedule::log2_m(std::uint64_t k) const {
    if (!closed()) fail("internal-error", "log2_m only in closed-form mode");
    return ipow(2, Int(k));  // 2^k
}

Int ParamSchedule::log2_n(std::uint64_t k) const {
    if (!closed()) fail("internal-error", "log2_n only in closed-form mode");
    return ipow(2, Int(k) * Int(k));  // 2^(k^2)
}

std::string ParamSchedule::to_json(std::uint64_t conforming_checked_K) const {
    nlohmann::json j;
    j["mode"] = closed() ? "closed-form" : "explicit";
    nlohmann::json ma = nlohmann::json::array(), na = nlohmann::json::array(),
                   la = nlohmann::json::array();
    if (!closed()) {
        for (const auto& v : m_) ma.push_back(v.str());
        for (const auto& v : n_) na.push_back(v.str());
        for (const auto& v : l_) la.push_back(v.str());
    }
    j["m"] = ma;
    j["n"] = na;
    j["l"] = la;
    if (conforming_checked_K > 0)
        j["conforming"] = validate_schedule(*this, conforming_checked_K).conforming;
    return j.dump();
}

ParamSchedule ParamSchedule::from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("mode").get<std::string>() == "closed-form") return closed_form();
    std::vector<Int> m, n, l;
    for (const auto& v : j.at("m")) m.emplace_back(v.get<std::string>());
    for (const auto& v : j.at("n")) n.emplace_back(v.get<std::string>());
    for (const auto& v : j.at("l")) l.emplace_back(v.get<std::string>());
    return explicit_list(std::move(m), std::move(n), std::move(l));
}

ValidityReport validate_schedule(const ParamSchedule& ps, std::uint64_t K) {
    if (K == 0 || !ps.defined(K))
        fail("schedule-incomplete", "schedule not defined up to K=" + std::to_string(K));
    ValidityReport r;
    if (ps.closed()) {
        // All quantities are powers of two; compare exact log2 exponents.
        r.base_standard = true;  // m_1 = 2^2 = 4, n_1 = 2^2 = 4, l_1 = 2^1 = 2
        r.increasing = true;     // exponents strictly increase
        for (std::uint64_t k = 2; k <= K; ++k) {
            ValidityReport::Entry e;
            e.k = k;
            const Int Lm = ps.log2_m(k), Lm1 = ps.log2_m(k - 1);
            const Int Ln = ps.log2_n(k), Ln1 = ps.log2_n(k - 1);
            const Int lk = ps.l(k);
            e.first_ok = Lm + Lm1 <= 2 * lk;                      // log2 m_1 = 2
            e.second_ok = (Ln1 - Lm1) * lk <= Ln - Lm1 - Lm;
            r.entries.push_back(e);
        }
    } else {
        r.base_standard = ps.m(1) == 4 && ps.n(1) == 4 && ps.l(1) == 2;
        r.increasing = true;
        for (std::uint64_t k = 2; k <= K; ++k)
            if (ps.m(k) <= ps.m(k - 1) || ps.n(k) <= ps.n(k - 1) || ps.l(k) <= ps.l(k - 1))
                r.increasing = false;
        for (std::uint64_t k = 2; k <= K; ++k) {
            ValidityReport::Entry e;
            e.k = k;
            e.first_ok = ps.m(k) * ps.m(k - 1) <= ipow(ps.m(1), ps.l(k));
            const Rational lhs = rat_pow(Rational(ps.n(k - 1), ps.m(k - 1)), ps.l(k));
            const Rational rhs(ps.n(k), ps.m(k - 1) * ps.m(k));
            e.second_ok = lhs <= rhs;
            r.entries.push_back(e);
        }
    }
    r.conforming = r.base_standard && r.increasing;
    for (const auto& e : r.entries)
        if (!e.first_ok || !e.second_ok) r.conforming = false;
    return r;
}

ParamSchedule minimal_schedule(std::uint64_t K) {
    if (K == 0) fail("schedule-incomplete", "minimal_schedule needs K >= 1");
    std::vector<Int> m{4}, n{4}, l{2};
    for (std::uint64_t k = 2; k <= K; ++k) {
        const Int mp = m.back(), np = n.back(), lp = l.back();
        const Int m_floor = std::max(Int(mp + 1), Int(mp * mp));
        // Smallest l_k > l_{k-1} admitting m_k = m_floor under m_k m_{k-1} <= 4^{l_k}.
        Int lk = lp + 1;
        while (ipow(4, lk) < m_floor * mp) ++lk;
        const Int mk = m_floor;
        // Smallest n_k > n_{k-1} with (n_{k-1}/m_{k-1})^{l_k} <= n_k/(m_{k-1} m_k).
        const Rational bound = rat_pow(Rational(np, mp), lk) * Rational(mp * mk);
        Int nk = boost::multiprecision::numerator(bound) /
                 boost::multiprecision::denominator(bound);
        if (Rational(nk) < bound) ++nk;  // ceil
        nk = std::max(nk, Int(np + 1));
        m.push_back(mk);
        n.push_back(nk);
        l.push_back(lk);
    }
    return ParamSchedule::explicit_list(std::move(m), std::move(n), std::move(l));
}

Net build_net(const ParamSchedule& ps, std::uint64_t q, std::optional<std::uint64_t> cap) {
    if (!ps.defined(q)) fail("schedule-incomplete", "net level beyond schedule");
    Net net;
    net.level = q;
    const Int denom_full = 4 * ps.n(q) * ps.n(q);
    net.mesh = Rational(1, denom_full);
    if (!cap) {
        if (denom_full > 1'000'000)
            fail("budget-exceeded", "uncapped net at level " + std::to_string(q) +
                                        " has " + Int(2 * denom_full + 1).str() + " points");
        const std::int64_t h = static_cast<std::int64_t>(denom_full);
        net.points.reserve(static_cast<std::size_t>(2 * h + 1));
        for (std::int64_t i = -h; i <= h; ++i) net.points.emplace_back(Int(i), denom_full);
        net.toy = false;
        net.grid_subset = true;
        return net;
    }
    if (*cap < 3) fail("invalid-cap", "net cap must be >= 3 to contain {-1,0,1}");
    const Int h = Int((*cap - 1) / 2);
    for (Int i = -h; i <= h; ++i) net.points.emplace_back(i, h);
    net.toy = true;
    net.grid_subset = denom_full % h == 0;
    return net;
}

bool net_contains(const ParamSchedule& ps, std::uint64_t q,
                  std::optional<std::uint64_t> cap, const Rational& lambda) {
    if (rat_abs(lambda) > 1) return false;
    Int denom;
    if (cap) {
        if (*cap < 3) fail("invalid-cap", "net cap must be >= 3");
        denom = Int((*cap - 1) / 2);
    } else {
        denom = 4 * ps.n(q) * ps.n(q);
    }
    return boost::multiprecision::denominator(Rational(lambda * denom)) == 1;
}

}  // namespace bdforge
