#include "bdforge/uncond.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"
#include "bdforge/special.hpp"

namespace bdforge {
namespace {

// Ordinal hull of a functional's support; empty support -> nullopt.
std::optional<Interval> supp_hull(const SparseMap& f) {
    if (f.empty()) return std::nullopt;
    return Interval{f.begin()->first, f.rbegin()->first};
}

bool hulls_meet(const Interval& a, const Interval& b) {
    return intersect(a, b).length() > 0;
}

// Chain positions (1-based) of the entries of eta_t that survive projection
// onto I_t; the i-th survivor corresponds to the i-th tree-analysis child.
std::vector<std::size_t> surviving_positions(const Registry& reg, NodeId eta,
                                             Interval It) {
    const EvaluationAnalysis an = evaluation_analysis(reg, eta);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < an.entries.size(); ++i) {
        const Interval cut = intersect(an.entries[i].ival, It);
        if (!proj_map(registry_estar(reg, an.entries[i].eta), cut).empty())
            out.push_back(i + 1);
    }
    return out;
}

SparseMap projected_estar(const Registry& reg, NodeId eta, Interval I) {
    return proj_map(registry_estar(reg, eta), I);
}

}  // namespace

CoupleIndex dependent_couples(const Registry& reg, NodeId gamma,
                              const std::vector<VectorX>& xs) {
    const TreeAnalysis ta = tree_analysis(reg, gamma);
    CoupleIndex ci;
    ci.gamma = gamma;
    for (std::size_t ti = 0; ti < ta.nodes.size(); ++ti) {
        const TreeAnalysisNode& t = ta.nodes[ti];
        if (t.terminal) continue;
        const EvaluationAnalysis an = evaluation_analysis(reg, t.eta);
        if (an.weight_index % 2 == 0) continue;  // couples need odd weight
        const auto pos = surviving_positions(reg, t.eta, t.ival);
        for (std::size_t c = 1; c < t.children.size(); ++c) {
            // Consecutive chain positions (i-1, i) with i even.
            if (pos[c] % 2 != 0 || pos[c - 1] + 1 != pos[c]) continue;
            const TreeAnalysisNode& s = ta.nodes[t.children[c]];
            const TreeAnalysisNode& sp = ta.nodes[t.children[c - 1]];
            CoupleEntry ent;
            ent.path_pred = sp.path;
            ent.path = s.path;
            ent.node_pred = t.children[c - 1];
            ent.node = t.children[c];
            ent.ival_pred = sp.ival;
            ent.ival = s.ival;
            ent.chain_pos = pos[c];
            const auto hs = supp_hull(projected_estar(reg, s.eta, s.ival));
            const auto hp = supp_hull(projected_estar(reg, sp.eta, sp.ival));
            if (hs && hp) {
                for (std::size_t k = 1; k <= xs.size(); ++k) {
                    if (xs[k - 1].zero()) continue;
                    const Interval rk = rng_vec(xs[k - 1]);
                    const std::uint64_t next_lo =
                        k < xs.size() ? rng_vec(xs[k]).lo
                                      : std::numeric_limits<std::uint64_t>::max();
                    const bool first = next_lo > hs->hi && hs->hi >= rk.lo;
                    // With no earlier block, the predecessor part must reach
                    // strictly left of the first block.
                    const bool second =
                        k == 1 ? hp->lo < rk.lo
                               : rng_vec(xs[k - 2]).hi >= hp->lo;
                    if (first && second) {
                        ent.k = k;
                        break;
                    }
                }
            }
            ci.e_set.push_back(ent);
            if (ci.e_set.back().k) ci.f_set.push_back(ci.e_set.size() - 1);
        }
    }
    return ci;
}

VectorX q_projection(const CoupleIndex& ci, const VectorX& x) {
    std::vector<Interval> ivals;
    for (std::size_t fi : ci.f_set) ivals.push_back(ci.e_set[fi].ival);
    std::sort(ivals.begin(), ivals.end());
    for (std::size_t i = 1; i < ivals.size(); ++i)
        if (ivals[i - 1].hi >= ivals[i].lo)
            fail("internal-error",
                 "overlapping F-intervals violate incomparability");
    VectorX out;
    for (const Interval& I : ivals) out = add_vec(out, project(x, I));
    return out;
}

FlipResult flip_node(Registry& reg, NodeId gamma, const std::vector<VectorX>& xs,
                     const std::vector<int>& signs) {
    if (xs.empty()) fail("empty-input", "flip needs at least one block");
    if (signs.size() != xs.size())
        fail("invalid-sign", "one sign per block required");
    for (int s : signs)
        if (s != 1 && s != -1) fail("invalid-sign", "signs must be +-1");
    if (!is_skipped(reg, xs))
        fail("not-skipped", "flip blocks must form a skipped sequence");

    const TreeAnalysis ta = tree_analysis(reg, gamma);
    const CoupleIndex ci = dependent_couples(reg, gamma, xs);
    std::set<std::size_t> e_nodes;
    std::map<std::size_t, std::size_t> e_entry_of;  // tree index -> e_set index
    for (std::size_t i = 0; i < ci.e_set.size(); ++i) {
        e_nodes.insert(ci.e_set[i].node);
        e_entry_of[ci.e_set[i].node] = i;
    }

    // Blocks whose ordinal hull meets the hull of e*_{eta_t} P_{I_t}.
    std::vector<std::vector<std::uint64_t>> hits(ta.nodes.size());
    for (std::size_t ti = 0; ti < ta.nodes.size(); ++ti) {
        const auto h =
            supp_hull(projected_estar(reg, ta.nodes[ti].eta, ta.nodes[ti].ival));
        if (!h) continue;
        for (std::size_t k = 1; k <= xs.size(); ++k)
            if (!xs[k - 1].zero() && hulls_meet(*h, rng_vec(xs[k - 1])))
                hits[ti].push_back(k);
    }
    auto in_d = [&](std::size_t ti) {
        if (hits[ti].size() > 1) return false;
        return ti == 0 || hits[ta.nodes[ti].parent].size() >= 2;
    };

    FlipResult fr;
    if (in_d(0)) {
        // The whole functional meets at most one block: keep gamma.
        fr.gamma_tilde = gamma;
        FlipRecord rec;
        rec.case_label = "root";
        rec.terminal = true;
        if (hits[0].size() == 1) {
            rec.k = hits[0].front();
            fr.epsilon = signs[hits[0].front() - 1];
        } else {
            rec.fallback = true;
            fr.epsilon = 1;
        }
        rec.t1 = compatible_tree_analyses(reg, gamma, gamma).ok;
        rec.t3 = true;
        fr.t_records.push_back(rec);
        fr.t2 = true;
        fr.t4_all = true;
        return fr;
    }

    std::vector<VectorX> xprime;
    for (const VectorX& x : xs) xprime.push_back(add_vec(x, q_projection(ci, x), -1));

    // T' = nodes meeting at least two blocks, closed off by the terminal set D.
    std::vector<std::size_t> tprime;
    for (std::size_t ti = 0; ti < ta.nodes.size(); ++ti)
        if (hits[ti].size() >= 2 || in_d(ti)) tprime.push_back(ti);

    std::map<std::size_t, int> new_sign;
    std::map<std::size_t, Rational> new_lambda;
    std::map<std::size_t, NodeId> new_eta;
    std::map<std::size_t, FlipRecord> recs;

    // Sign governing a terminal node: the unique met block, else the first
    // block lying entirely to its right, else the last block (flagged).
    auto governing_block = [&](std::size_t ti, bool& fallback) -> std::uint64_t {
        if (hits[ti].size() == 1) return hits[ti].front();
        const auto h =
            supp_hull(projected_estar(reg, ta.nodes[ti].eta, ta.nodes[ti].ival));
        if (h)
            for (std::size_t k = 1; k <= xs.size(); ++k)
                if (!xs[k - 1].zero() && h->hi < rng_vec(xs[k - 1]).lo) return k;
        fallback = true;
        return xs.size();
    };

    // Children precede parents in reverse preorder.
    for (auto it = tprime.rbegin(); it != tprime.rend(); ++it) {
        const std::size_t ti = *it;
        const TreeAnalysisNode& t = ta.nodes[ti];
        FlipRecord rec;
        rec.path = t.path;
        if (in_d(ti)) {
            rec.terminal = true;
            const bool in_e = e_nodes.count(ti) > 0;
            const bool child_of_e = ti != 0 && e_nodes.count(t.parent) > 0;
            new_eta[ti] = t.eta;
            if (!in_e && !child_of_e) {
                rec.case_label = "1a";
                bool fb = false;
                const std::uint64_t k = governing_block(ti, fb);
                rec.k = k;
                rec.fallback = fb;
                new_sign[ti] = signs[k - 1] * t.sign;
                new_lambda[ti] = t.lambda;
            } else {
                rec.case_label = "1b";
                new_sign[ti] = t.sign;
                if (in_e) {
                    bool fb = false;
                    const std::uint64_t k = governing_block(ti, fb);
                    rec.k = k;
                    rec.fallback = fb;
                    new_lambda[ti] = Rational(signs[k - 1]) * t.lambda;
                } else {
                    new_lambda[ti] = t.lambda;
                }
            }
        } else {
            new_sign[ti] = t.sign;  // (T4)
            if (e_nodes.count(ti) > 0) {
                rec.case_label = "2a";
                new_eta[ti] = t.eta;
                new_lambda[ti] = t.lambda;
            } else {
                const EvaluationAnalysis an = evaluation_analysis(reg, t.eta);
                rec.case_label = an.weight_index % 2 == 0 ? "2b" : "2c";
                const auto pos = surviving_positions(reg, t.eta, t.ival);
                if (pos.size() != t.children.size())
                    fail("internal-error", "child alignment lost in rebuild");
                std::map<std::size_t, std::size_t> child_of;  // chain pos -> tree
                for (std::size_t c = 0; c < pos.size(); ++c)
                    child_of[pos[c]] = t.children[c];
                NodeId np = 0;
                for (std::size_t i = 0; i < an.entries.size(); ++i) {
                    const EvaluationEntry& e = an.entries[i];
                    int s = e.sign;
                    Rational l = e.lambda;
                    NodeId et = e.eta;
                    const auto ch = child_of.find(i + 1);
                    if (ch != child_of.end()) {
                        s = new_sign.at(ch->second);
                        l = new_lambda.at(ch->second);
                        et = new_eta.at(ch->second);
                    }
                    np = reg.make_node(reg.node(e.xi).rank, np, an.weight_index,
                                       e.ival, s, l, et);
                }
                new_eta[ti] = np;
                new_lambda[ti] = t.lambda;
            }
        }
        recs[ti] = rec;
    }

    fr.gamma_tilde = new_eta.at(0);
    fr.epsilon = 1;

    // Certificates.
    fr.t4_all = true;
    for (const std::size_t ti : tprime) {
        FlipRecord& rec = recs.at(ti);
        const TreeAnalysisNode& t = ta.nodes[ti];
        rec.t1 = compatible_tree_analyses(reg, t.eta, new_eta.at(ti)).ok;
        if (rec.terminal) {
            const bool in_e = e_nodes.count(ti) > 0;
            const Rational old_c =
                in_e ? t.lambda : Rational(t.sign);
            const Rational new_c =
                in_e ? new_lambda.at(ti) : Rational(new_sign.at(ti));
            rec.t3 = true;
            for (std::size_t k = 1; k <= xs.size(); ++k) {
                const Rational lhs =
                    new_c * Rational(signs[k - 1]) *
                    eval(SparseFunctional{
                             projected_estar(reg, new_eta.at(ti), t.ival),
                             "projected"},
                         xprime[k - 1]);
                const Rational rhs =
                    old_c * eval(SparseFunctional{
                                     projected_estar(reg, t.eta, t.ival),
                                     "projected"},
                                 xprime[k - 1]);
                if (lhs != rhs) rec.t3 = false;
            }
        } else if (new_sign.at(ti) != t.sign) {
            fr.t4_all = false;
        }
        fr.t_records.push_back(rec);
    }

    const CoupleIndex ci2 = dependent_couples(reg, fr.gamma_tilde, xs);
    fr.t2 = ci.f_set.size() == ci2.f_set.size() &&
            ci.e_set.size() == ci2.e_set.size();
    if (fr.t2)
        for (std::size_t i = 0; i < ci.e_set.size(); ++i) {
            const CoupleEntry& a = ci.e_set[i];
            const CoupleEntry& b = ci2.e_set[i];
            if (!(a.path == b.path && a.ival == b.ival &&
                  a.chain_pos == b.chain_pos && a.k == b.k))
                fr.t2 = false;
        }
    return fr;
}

std::string flip_result_to_json(const FlipResult& fr) {
    nlohmann::json out;
    out["gamma_tilde"] = fr.gamma_tilde;
    out["epsilon"] = fr.epsilon;
    out["t2"] = fr.t2;
    out["t4_all"] = fr.t4_all;
    nlohmann::json recs = nlohmann::json::array();
    for (const FlipRecord& r : fr.t_records) {
        nlohmann::json j;
        j["path"] = r.path;
        j["case"] = r.case_label;
        j["terminal"] = r.terminal;
        if (r.k) j["k"] = *r.k;
        j["fallback"] = r.fallback;
        j["t1"] = r.t1;
        j["t3"] = r.t3;
        recs.push_back(j);
    }
    out["records"] = recs;
    return out.dump(2);
}

ProbeReport unconditionality_probe(const Registry& reg,
                                   const std::vector<VectorX>& xs,
                                   const std::vector<Rational>& coeffs,
                                   const std::vector<int>& signs,
                                   std::uint64_t cutoff_rank) {
    if (xs.empty()) fail("empty-input", "probe needs at least one block");
    if (coeffs.size() != xs.size() || signs.size() != xs.size())
        fail("invalid-sign", "one coefficient and one sign per block required");
    for (int s : signs)
        if (s != 1 && s != -1) fail("invalid-sign", "signs must be +-1");
    VectorX u, v;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        u = add_vec(u, xs[k], coeffs[k]);
        v = add_vec(v, xs[k], Rational(signs[k]) * coeffs[k]);
    }
    if (u.zero() || v.zero())
        fail("zero-vector", "probe combinations must be nonzero");
    const std::uint64_t cutoff = std::max(
        {cutoff_rank, rng_fdd(reg, u).hi, rng_fdd(reg, v).hi});
    const auto nu = norm_bounds(reg, u, cutoff);
    const auto nv = norm_bounds(reg, v, cutoff);
    ProbeReport rep;
    rep.base_lo = nu.lo;
    rep.base_hi = nu.hi;
    rep.flipped_lo = nv.lo;
    rep.flipped_hi = nv.hi;
    rep.ratio_lo = nv.lo / nu.hi;
    rep.ratio_hi = nv.hi / nu.lo;
    rep.toy = reg.toy();
    return rep;
}

}  // namespace bdforge
