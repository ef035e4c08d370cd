#include "bdforge/sequences.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {
namespace {

// count == n_w without materializing astronomically large closed-form n_w.
bool full_count(const ParamSchedule& ps, std::uint64_t w, std::uint64_t count) {
    if (ps.closed()) {
        const Int L = ps.log2_n(w);
        if (L >= 64) return false;
        return Int(count) == (Int(1) << static_cast<std::uint64_t>(L));
    }
    return Int(count) == ps.n(w);
}

// Round to the nearest point of the grid {i / denom}.
Rational snap_to_grid(const Rational& x, const Int& denom) {
    using boost::multiprecision::numerator;
    using boost::multiprecision::denominator;
    const Rational scaled = x * denom;
    const Int num = numerator(scaled), den = denominator(scaled);
    // floor(scaled + 1/2) with exact integers.
    Int i = (2 * num + den) / (2 * den);
    if (2 * num + den < 0 && (2 * num + den) % (2 * den) != 0) i -= 1;
    return Rational(i, denom);
}

}  // namespace

RisCertificate ris_check(const Registry& reg, const std::vector<VectorX>& xs,
                         const Rational& C, std::uint64_t cutoff_rank) {
    RisCertificate cert;
    cert.C = C;
    cert.verified_up_to_rank = cutoff_rank;
    if (xs.empty()) {
        cert.failure = "empty block sequence";
        return cert;
    }
    for (std::size_t k = 0; k < xs.size(); ++k)
        if (xs[k].zero()) {
            cert.failure = "vector " + std::to_string(k + 1) + " is zero";
            return cert;
        }
    // Skipped-block requirement: a full rank gap between consecutive ranges.
    for (std::size_t k = 1; k < xs.size(); ++k) {
        const Interval a = rng_fdd(reg, xs[k - 1]);
        const Interval b = rng_fdd(reg, xs[k]);
        if (b.lo < a.hi + 2) {
            cert.failure = "not skipped: rng_FDD of vectors " +
                           std::to_string(k) + " and " + std::to_string(k + 1) +
                           " leave no rank gap (" + std::to_string(a.hi) +
                           " vs " + std::to_string(b.lo) + ")";
            return cert;
        }
    }
    // Canonical minimal (j_k): j_1 = 1, j_{k+1} = max(j_k+1, max rng_FDD + 1).
    cert.j_seq.clear();
    std::uint64_t jk = 1;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        cert.j_seq.push_back(jk);
        jk = std::max(jk + 1, rng_fdd(reg, xs[k]).hi + 1);
    }
    // Condition (1): certified norm bound.
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const std::uint64_t q = rng_fdd(reg, xs[k]).hi;
        const auto nb = norm_bounds(reg, xs[k], std::max(cutoff_rank, q));
        if (nb.hi > C) {
            cert.failure = "condition (1): certified norm " +
                           rat_to_string(nb.hi) + " of vector " +
                           std::to_string(k + 1) + " exceeds C";
            return cert;
        }
    }
    // Condition (3): coordinate decay at every materialized low-weight node.
    const ParamSchedule& ps = reg.schedule();
    for (std::size_t k = 0; k < xs.size(); ++k) {
        for (NodeId id : reg.ids()) {
            const Node& n = reg.node(id);
            if (n.rank > cutoff_rank) continue;
            const std::uint64_t i = n.weight_index;
            if (i == 0 || i >= cert.j_seq[k]) continue;
            const Rational v =
                rat_abs(coordinate(reg, xs[k], id)) * Rational(ps.m(i));
            auto it = cert.condition3_max_observed.find(i);
            if (it == cert.condition3_max_observed.end())
                cert.condition3_max_observed[i] = v;
            else if (v > it->second)
                it->second = v;
            if (v > C && cert.failure.empty())
                cert.failure = "condition (3): |x_" + std::to_string(k + 1) +
                               "(gamma)| at node " + std::to_string(id) +
                               " (weight index " + std::to_string(i) +
                               ") exceeds C/m_i";
        }
    }
    cert.ok = cert.failure.empty();
    return cert;
}

VectorX basis_average(const Registry& reg, std::uint64_t j,
                      const std::vector<NodeId>& xis, bool weighted) {
    const ParamSchedule& ps = reg.schedule();
    if (xis.empty()) fail("empty-input", "basis average needs a nonempty G");
    if (!ps.defined(j))
        fail("schedule-incomplete", "basis average at j=" + std::to_string(j));
    if (Int(xis.size()) > ps.n(j))
        fail("block-overflow", "|G| = " + std::to_string(xis.size()) +
                                   " exceeds n_j");
    for (std::size_t a = 0; a < xis.size(); ++a)
        for (std::size_t b = a + 1; b < xis.size(); ++b)
            if (xis[a] == xis[b] || reg.neighbours(xis[a], xis[b]))
                fail("neighbour-pair", "nodes " + std::to_string(xis[a]) +
                                           " and " + std::to_string(xis[b]));
    const Rational scale = weighted ? Rational(ps.m(j), ps.n(j))
                                    : Rational(1, ps.n(j));
    VectorX out;
    for (NodeId xi : xis) out = add_vec(out, d_basis(xi), scale);
    return out;
}

WitnessNode witness_node_61a(Registry& reg, const std::vector<VectorX>& xs,
                             std::uint64_t j) {
    const ParamSchedule& ps = reg.schedule();
    if (xs.empty()) fail("empty-input", "witness needs at least one block");
    const std::uint64_t w = 2 * j;
    if (j == 0 || !ps.defined(w))
        fail("schedule-incomplete", "weight index " + std::to_string(w));
    if (!ps.closed() && Int(xs.size()) > ps.n(w))
        fail("block-overflow", "more blocks than n_{2j}");
    if (!is_skipped(reg, xs)) fail("not-skipped", "blocks must skip a rank");
    WitnessNode wn;
    wn.toy_count = !full_count(ps, w, xs.size());
    NodeId pred = 0;
    Rational attained = 0;
    VectorX total;
    for (const VectorX& x : xs) {
        if (x.zero()) fail("zero-vector", "empty block vector");
        const Interval rf = rng_fdd(reg, x);
        // Tight ordinal span of the block's FDD range: the exact identity
        // needs every other block to miss this interval.
        const Interval I{reg.max_gamma(rf.lo - 1) + 1, reg.max_gamma(rf.hi)};
        const std::uint64_t lo_rank = pred == 0 ? 1 : reg.node(pred).rank;
        Rational best = 0;
        NodeId best_eta = 0;
        for (NodeId id : reg.ids()) {
            const Node& n = reg.node(id);
            if (n.rank < lo_rank || n.rank > rf.hi) continue;
            const Rational v = eval(proj_star(e_star(reg, id), I), x);
            if (rat_abs(v) > rat_abs(best)) {
                best = v;
                best_eta = id;
            }
        }
        if (best_eta == 0)
            fail("construction-failed", "no eta acts on the block");
        const int sign = best > 0 ? 1 : -1;
        pred = reg.make_node(rf.hi + 1, pred, w, I, sign, 1, best_eta);
        attained += rat_abs(best);
        total = add_vec(total, x);
    }
    wn.gamma = pred;
    wn.value = eval(e_star(reg, pred), total);
    wn.lower_bound = attained / Rational(ps.m(w));
    return wn;
}

WitnessNode witness_node_61b(Registry& reg, const std::vector<NodeId>& xis,
                             std::uint64_t j) {
    const ParamSchedule& ps = reg.schedule();
    if (xis.empty()) fail("empty-input", "witness needs at least one node");
    const std::uint64_t w = 2 * j;
    if (j == 0 || !ps.defined(w))
        fail("schedule-incomplete", "weight index " + std::to_string(w));
    for (std::size_t i = 1; i < xis.size(); ++i)
        if (reg.node(xis[i - 1]).rank + 1 >= reg.node(xis[i]).rank)
            fail("rank-spacing", "rank(xi_" + std::to_string(i) +
                                     ")+1 must stay below rank(xi_" +
                                     std::to_string(i + 1) + ")");
    WitnessNode wn;
    wn.toy_count = !full_count(ps, w, xis.size());
    NodeId pred = 0;
    VectorX total;
    for (NodeId xi : xis) {
        const std::uint64_t r = reg.node(xi).rank;
        pred = reg.make_node(r + 1, pred, w, reg.delta_interval(r), 1, 1, xi);
        total = add_vec(total, d_basis(xi));
    }
    wn.gamma = pred;
    wn.value = eval(e_star(reg, pred), total);
    wn.lower_bound = wn.value;
    return wn;
}

DependentSequence dependent_sequence(KusLayer& kus, std::uint64_t j,
                                     std::uint64_t length,
                                     const MaterialSource& odd_source,
                                     const MaterialSource& even_source) {
    Registry& reg = kus.registry_mutable();
    const ParamSchedule& ps = reg.schedule();
    if (j == 0 || length == 0) fail("empty-input", "need j >= 1, length >= 1");
    const std::uint64_t wj = 2 * j - 1;
    if (!ps.defined(wj))
        fail("schedule-incomplete", "weight index 2j-1 = " + std::to_string(wj));
    if (!ps.closed() && Int(length) > ps.n(wj))
        fail("block-overflow", "length exceeds n_{2j-1}");

    DependentSequence ds;
    ds.j = j;
    ds.special.j = j;
    NodeId prev_gamma = 0;
    for (std::uint64_t k = 1; k <= length; ++k) {
        const MaterialSource& src = (k % 2 == 1) ? odd_source : even_source;
        if (src.blocks == 0) fail("empty-input", "source yields no blocks");
        if (src.block_weight_index == 0 || src.block_weight_index % 2 != 0)
            fail("invalid-weight", "block weight index must be even (regular)");
        // Step weight: first the smallest admissible m_{4l-2}, then 4*sigma.
        std::uint64_t w = 0;
        if (k == 1) {
            for (std::uint64_t c = 2;; c += 4) {
                if (!ps.defined(c))
                    fail("needs-closed-form-schedule",
                         "no m_{4l-2} > n_{2j-1}^2 in the explicit schedule");
                const bool big = ps.closed()
                                     ? ps.log2_m(c) > 2 * ps.log2_n(wj)
                                     : ps.m(c) > ps.n(wj) * ps.n(wj);
                if (big) {
                    w = c;
                    break;
                }
            }
        } else {
            const std::uint64_t sig = kus.coding().assign(ds.special.pairs);
            if (sig > (std::uint64_t(1) << 60))
                fail("value-too-large", "sigma-driven weight overflows");
            w = 4 * sig;
            if (!ps.defined(w))
                fail("needs-closed-form-schedule",
                     "sigma-driven weight 4*sigma = " + std::to_string(w) +
                         " outside the explicit schedule");
        }
        if (!full_count(ps, w, src.blocks))
            ds.conformance.push_back(
                "step " + std::to_string(k) + ": " +
                std::to_string(src.blocks) +
                " blocks instead of n_{" + std::to_string(w) + "} (truncated)");
        // Fresh regular blocks at spaced ranks high enough for the chain
        // weight (chain nodes sit at rank(block)+1 and carry weight w).
        std::uint64_t start = std::max<std::uint64_t>(
            {reg.max_rank_touched() + 2, w, src.block_weight_index + 1});
        std::vector<NodeId> blocks;
        for (std::uint64_t b = 0; b < src.blocks; ++b) {
            const NodeId beta = reg.make_node(start + 2 * b, 0,
                                              src.block_weight_index,
                                              Interval{1, 1}, 1, 1, 1);
            if (!kus.accept_regular(beta))
                fail("internal-error", "block rejected from Gamma");
            blocks.push_back(beta);
        }
        const WitnessNode wn = witness_node_61b(reg, blocks, w / 2);
        // Admit the eta chain bottom-up.
        std::vector<NodeId> chain;
        for (NodeId cur = wn.gamma; cur != 0; cur = reg.node(cur).pred)
            chain.push_back(cur);
        for (auto it = chain.rbegin(); it != chain.rend(); ++it)
            if (!kus.accept_regular(*it))
                fail("internal-error", "eta chain rejected from Gamma");
        const NodeId eta = wn.gamma;
        const std::uint64_t qk = reg.node(eta).rank;

        VectorX x;
        for (NodeId beta : blocks)
            x = add_vec(x, d_basis(beta), Rational(ps.m(w), Int(src.blocks)));
        Rational lambda = 1;
        if (k % 2 == 1) {
            // Normalize so the certified norm interval is exactly [1/2, 1].
            const auto nb = norm_bounds(reg, x, rng_fdd(reg, x).hi);
            const Rational c = Rational(1) / Rational(2 * nb.lo);
            x = scale_vec(x, c);
            ds.c_k.push_back(c);
            if (c < Rational(1, 40) || c > 1)
                ds.conformance.push_back(
                    "step " + std::to_string(k) +
                    ": c_k = " + rat_to_string(c) +
                    " outside the reference window [1/(20C), 1] with C = 2");
        } else {
            ds.c_k.push_back(1);
            const Rational lam_ref =
                lambda_gamma_x(reg, prev_gamma, ds.special.pairs.back().xbar);
            const Int denom = 4 * ps.n(qk) * ps.n(qk);
            lambda = snap_to_grid(lam_ref, denom);
        }
        const std::uint64_t prev_rank =
            prev_gamma == 0 ? 0 : reg.node(prev_gamma).rank;
        const Interval Ik = rng_vec(x);
        if (Ik.lo <= reg.max_gamma(prev_rank))
            fail("internal-error", "step window overlaps the previous pair");
        const NodeId gamma =
            reg.make_node(qk + 1, prev_gamma, wj, Ik, 1, lambda, eta);
        ds.pairs.emplace_back(gamma, x);
        ds.special.pairs.push_back({gamma, x});
        std::string why;
        if (!kus.accept_special(gamma, ds.special, &why))
            fail("internal-error", "builder self-replay failed: " + why);
        if (k == 1) {
            // Dependent-sequence side conditions on q_1, recorded not enforced.
            if (qk < w)
                ds.conformance.push_back("q_1 below 4l-2");
            Int grid = 4 * ps.n(wj) * ps.n(wj);
            std::uint64_t bits = 0;
            while (grid > 1) {
                grid >>= 1;
                ++bits;
            }
            if (qk < bits)
                ds.conformance.push_back("2^{-q_1} > 1/(4 n_{2j-1}^2)");
        }
        prev_gamma = gamma;
    }
    ds.conformance.push_back(
        "odd-step ingredients are fresh d-basis blocks, not a certified "
        "C-RIS; analytic clauses are observed-only");
    return ds;
}

AlternatingReport alternating_audit(const KusLayer& kus,
                                    const DependentSequence& ds) {
    const Registry& reg = kus.registry();
    const ParamSchedule& ps = reg.schedule();
    AlternatingReport rep;
    if (ds.pairs.empty()) fail("empty-input", "empty dependent sequence");
    const std::uint64_t wj = 2 * ds.j - 1;
    const Int m = ps.m(wj);
    const std::uint64_t d = ds.pairs.size();
    if (!full_count(ps, wj, d))
        rep.notes.push_back("truncated length " + std::to_string(d) +
                            " used as the averaging divisor");
    VectorX alt, plus;
    int sgn = 1;
    for (const auto& [g, x] : ds.pairs) {
        alt = add_vec(alt, x, Rational(sgn));
        plus = add_vec(plus, x);
        sgn = -sgn;
    }
    alt = scale_vec(alt, Rational(1, Int(d)));
    const auto nba = norm_bounds(reg, alt, rng_fdd(reg, alt).hi);
    rep.alt_lo = nba.lo;
    rep.alt_hi = nba.hi;
    rep.alt_bound = Rational(250, Int(m * m));
    rep.alt_bound_observed = rep.alt_hi <= rep.alt_bound;
    const VectorX wavg = scale_vec(plus, Rational(m, Int(d)));
    const NodeId top = ds.pairs.back().first;
    rep.plus_witness = eval(e_star(reg, top), wavg);
    const auto nbp =
        norm_bounds(reg, wavg, std::max(rng_fdd(reg, wavg).hi, reg.node(top).rank),
                    {top});
    rep.plus_lo = nbp.lo;
    rep.toy = reg.toy() || !ds.conformance.empty();
    for (const auto& n : ds.conformance) rep.notes.push_back(n);
    return rep;
}

std::string dependent_sequence_to_json(const DependentSequence& ds) {
    nlohmann::json out;
    out["j"] = ds.j;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [g, x] : ds.pairs) {
        nlohmann::json p;
        p["gamma"] = g;
        nlohmann::json coeffs = nlohmann::json::object();
        for (const auto& [id, c] : x.coeffs)
            coeffs[std::to_string(id)] = rat_to_string(c);
        p["x"] = coeffs;
        pairs.push_back(p);
    }
    out["pairs"] = pairs;
    nlohmann::json cks = nlohmann::json::array();
    for (const auto& c : ds.c_k) cks.push_back(rat_to_string(c));
    out["c_k"] = cks;
    out["conformance"] = ds.conformance;
    return out.dump(2);
}

}  // namespace bdforge
