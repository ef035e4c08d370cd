#include "bdforge/special.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {
namespace {

std::set<std::uint64_t> bdp_ranks(const Registry& reg, NodeId id) {
    std::set<std::uint64_t> out;
    if (reg.node(id).klass == NodeClass::Base) {
        out.insert(1);
        return out;
    }
    for (NodeId cur = id; cur != 0; cur = reg.node(cur).pred)
        out.insert(reg.node(cur).rank);
    return out;
}

std::set<NodeId> mts(const Registry& reg, NodeId id) {
    if (reg.node(id).klass == NodeClass::Base) return {id};
    return mt_supp(reg, id);
}

}  // namespace

std::string CodingRegistry::canonical_key(const std::vector<SpecialPair>& prefix) {
    std::string key;
    for (const auto& p : prefix) {
        key += "z" + std::to_string(p.zeta) + "|";
        for (const auto& [id, c] : p.xbar.coeffs)
            key += std::to_string(id) + ":" + rat_to_string(c) + ",";
        key += ";";
    }
    return key;
}

void CodingRegistry::check_in_q(const std::vector<SpecialPair>& prefix) const {
    if (prefix.empty()) fail("not-in-Q", "empty pair sequence");
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        const auto& p = prefix[i];
        const Node& z = reg_->node(p.zeta);
        if (z.klass == NodeClass::Base)
            fail("not-in-Q", "zeta must carry a weight");
        if (p.xbar.zero()) fail("not-in-Q", "pair vector is zero");
        if (z.rank < rng_fdd(*reg_, p.xbar).lo)
            fail("not-in-Q", "rank(zeta) below min rng_FDD of the pair vector");
        if (i > 0 && rng_fdd(*reg_, prefix[i - 1].xbar).hi >=
                         rng_fdd(*reg_, p.xbar).lo)
            fail("not-in-Q", "pair vectors are not successive w.r.t. the FDD");
    }
}

std::uint64_t CodingRegistry::assign(const std::vector<SpecialPair>& prefix) {
    check_in_q(prefix);
    const std::string key = canonical_key(prefix);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
    const auto& last = prefix.back();
    const Int growth = reg_->schedule().m(reg_->node(last.zeta).weight_index) *
                       Int(rng_fdd(*reg_, last.xbar).hi);
    if (growth > Int(1) << 62)
        fail("value-too-large", "sigma growth bound exceeds 2^62");
    const std::uint64_t value =
        std::max<std::uint64_t>(counter_, static_cast<std::uint64_t>(growth)) + 1;
    entries_[key] = value;
    counter_ = value;
    return value;
}

std::optional<std::uint64_t> CodingRegistry::lookup(
    const std::vector<SpecialPair>& prefix) const {
    auto it = entries_.find(canonical_key(prefix));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string CodingRegistry::to_jsonl() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        nlohmann::json j;
        j["key"] = k;
        j["value"] = v;
        out += j.dump();
        out += '\n';
    }
    return out;
}

void CodingRegistry::load_jsonl(const std::string& text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const std::uint64_t v = j.at("value").get<std::uint64_t>();
        entries_[j.at("key").get<std::string>()] = v;
        counter_ = std::max(counter_, v);
    }
}

Rational lambda_gamma_x(const Registry& reg, NodeId gamma, const VectorX& x) {
    const Node& g = reg.node(gamma);
    if (g.klass == NodeClass::Base)
        fail("no-analysis", "the base node carries no b*");
    const Rational c = eval(e_star(reg, g.target), x);
    if (c != 0) return Rational(g.sign) * c;
    const Int nk = reg.schedule().n(g.weight_index);
    return Rational(g.sign) / Rational(nk * nk);
}

CompatibilityCert compatible_tree_analyses(const Registry& reg, NodeId a,
                                           NodeId b) {
    CompatibilityCert cert;
    const bool abase = reg.node(a).klass == NodeClass::Base;
    const bool bbase = reg.node(b).klass == NodeClass::Base;
    if (abase || bbase) {
        // Delta_1 = {base}: equal iff both are the base node.
        cert.ok = abase && bbase;
        if (!cert.ok) cert.first_violation = "CT1";
        return cert;
    }
    const TreeAnalysis ta = tree_analysis(reg, a);
    const TreeAnalysis tb = tree_analysis(reg, b);
    if (ta.nodes.size() != tb.nodes.size()) {
        cert.first_violation = "CT1";
        return cert;
    }
    for (std::size_t i = 0; i < ta.nodes.size(); ++i)
        if (ta.nodes[i].path != tb.nodes[i].path ||
            !(ta.nodes[i].ival == tb.nodes[i].ival)) {
            cert.first_violation = "CT1";
            return cert;
        }
    for (std::size_t i = 0; i < ta.nodes.size(); ++i) {
        const NodeId ea = ta.nodes[i].eta, eb = tb.nodes[i].eta;
        if (reg.node(ea).weight_index != reg.node(eb).weight_index) {
            cert.first_violation = "CT2";
            return cert;
        }
        if (mts(reg, ea) != mts(reg, eb)) {
            cert.first_violation = "CT3";
            return cert;
        }
        if (reg.node(ea).rank != reg.node(eb).rank) {
            cert.first_violation = "CT4";
            return cert;
        }
        if (bdp_ranks(reg, ea) != bdp_ranks(reg, eb)) {
            cert.first_violation = "CT5";
            return cert;
        }
    }
    cert.ok = true;
    return cert;
}

bool KusLayer::in_gamma(NodeId id) const {
    if (reg_->node(id).klass == NodeClass::Base) return true;
    return members_.count(id) != 0;
}

bool KusLayer::accept_regular(NodeId gamma) {
    if (in_gamma(gamma)) return true;
    const Node& g = reg_->node(gamma);
    if (g.weight_index % 2 != 0) return false;
    const std::uint64_t j = g.weight_index / 2;
    if (j > g.rank / 2) return false;
    if (!in_gamma(g.target)) return false;
    if (g.pred != 0 && !in_gamma(g.pred)) return false;
    members_[gamma] = "regular";
    reg_->set_class(gamma, NodeClass::Regular);
    return true;
}

SpecialSequenceReport KusLayer::is_special_sequence(
    const SpecialSequence& seq) const {
    SpecialSequenceReport rep;
    const Registry& reg = *reg_;
    const ParamSchedule& ps = reg.schedule();
    auto viol = [&rep](const std::string& s) { rep.violations.push_back(s); };
    if (seq.j == 0 || seq.pairs.empty()) {
        viol("shape: empty sequence or j = 0");
        return rep;
    }
    const std::uint64_t wj = 2 * seq.j - 1;
    if (!ps.defined(wj)) {
        viol("shape: weight index 2j-1 beyond the schedule");
        return rep;
    }
    if (!ps.closed() && Int(seq.pairs.size()) > ps.n(wj))
        viol("shape: length exceeds n_{2j-1}");
    for (std::size_t i = 0; i < seq.pairs.size(); ++i) {
        const std::string at = "pair " + std::to_string(i + 1);
        const Node& z = reg.node(seq.pairs[i].zeta);
        if (z.klass == NodeClass::Base) {
            viol(at + ": zeta is the base node");
            return rep;
        }
        if (z.weight_index != wj) viol(at + ": (i) weight is not m_{2j-1}");
        const NodeId want_pred = i == 0 ? 0 : seq.pairs[i - 1].zeta;
        if (z.pred != want_pred) viol(at + ": (i) chain shape broken");
        const Node& eta = reg.node(z.target);
        if (!in_gamma(z.target)) viol(at + ": eta outside Gamma");
        if (i == 0) {
            if (eta.weight_index == 0 || eta.weight_index % 4 != 2) {
                viol(at + ": (ii) first weight is not of the form m_{4l-2}");
            } else if (!ps.closed() &&
                       ps.m(eta.weight_index) <= ps.n(wj) * ps.n(wj)) {
                viol(at + ": (ii) m_{4l-2} <= n_{2j-1}^2");
            }
        } else {
            std::vector<SpecialPair> prefix(seq.pairs.begin(),
                                            seq.pairs.begin() + i);
            const auto sig = coding_->lookup(prefix);
            if (!sig) {
                viol(at + ": (ii) sigma unassigned for the prefix");
                continue;
            }
            if (eta.weight_index != 4 * *sig)
                viol(at + ": (ii) weight of eta is not m_{4 sigma}");
        }
        if ((i + 1) % 2 == 1) {  // odd position
            if (z.lambda != 1) viol(at + ": (iii) lambda != 1");
            const auto nb =
                norm_bounds(reg, seq.pairs[i].xbar, rng_fdd(reg, seq.pairs[i].xbar).hi);
            if (nb.hi > 1) viol(at + ": (iii) norm not certified <= 1");
        } else {  // even position
            if (z.sign != 1) viol(at + ": (iv) epsilon != 1");
            const auto sig = coding_->lookup(std::vector<SpecialPair>(
                seq.pairs.begin(), seq.pairs.begin() + i));
            if (!sig) continue;  // already reported above
            if (eta.klass == NodeClass::Base) {
                viol(at + ": (iv) eta is the base node");
                continue;
            }
            if (!ps.defined(4 * *sig)) {
                viol(at + ": (iv) weight m_{4 sigma} beyond the schedule");
                continue;
            }
            const Int m = ps.m(4 * *sig);
            const Int n = ps.n(4 * *sig);
            const SparseMap mt = mt_part(reg, z.target).coeffs;
            bool coeffs_ok = true;
            for (const auto& [beta, c] : mt)
                if (c != Rational(1, m)) coeffs_ok = false;
            if (!coeffs_ok) viol(at + ": (iv) mt-part is not m^{-1} sum d*");
            const std::uint64_t cnt = mt.size();
            if (Int(cnt) != n) {
                rep.toy_truncated = true;
                if (Int(cnt) > n) viol(at + ": (iv) more than n_{4 sigma} blocks");
            }
            std::vector<NodeId> betas;
            for (const auto& [beta, c] : mt) betas.push_back(beta);
            for (std::size_t r = 0; r < betas.size(); ++r)
                for (std::size_t s = r + 1; s < betas.size(); ++s)
                    if (reg.neighbours(betas[r], betas[s])) {
                        viol(at + ": (iv) beta blocks are neighbours");
                        r = betas.size();
                        break;
                    }
            SparseMap want;
            const Rational full_scale = Rational(m, n);
            const Rational trunc_scale =
                cnt == 0 ? Rational(0) : Rational(m, Int(cnt));
            for (NodeId beta : betas) want[beta] = full_scale;
            if (seq.pairs[i].xbar.coeffs != want) {
                bool ok_trunc = false;
                if (rep.toy_truncated && cnt > 0) {
                    for (auto& [beta, c] : want) c = trunc_scale;
                    ok_trunc = seq.pairs[i].xbar.coeffs == want;
                }
                if (!ok_trunc)
                    viol(at + ": (iv) pair vector is not the prescribed average");
            }
            // lambda_i approximates lambda_{zeta_{i-1}, xbar_{i-1}}.
            const Rational lam_ref =
                lambda_gamma_x(reg, seq.pairs[i - 1].zeta, seq.pairs[i - 1].xbar);
            const std::uint64_t q_prev = reg.node(seq.pairs[i - 1].zeta).rank - 1;
            const Int nq = ps.n(q_prev);
            if (rat_abs(z.lambda - lam_ref) >= Rational(1, 4 * nq * nq))
                viol(at + ": (iv) lambda too far from lambda_{zeta,x}");
        }
    }
    rep.ok = rep.violations.empty();
    return rep;
}

bool KusLayer::node_compatible_with(NodeId gamma, const SpecialSequence& seq,
                                    std::string* why) const {
    const Registry& reg = *reg_;
    const ParamSchedule& ps = reg.schedule();
    auto nope = [&why](const std::string& s) {
        if (why) *why = s;
        return false;
    };
    const Node& g = reg.node(gamma);
    if (g.klass == NodeClass::Base) return nope("base node");
    if (reg.age_of(gamma) != seq.pairs.size())
        return nope("age differs from sequence length");
    // Chain elements in age order.
    std::vector<NodeId> chain;
    for (NodeId cur = gamma; cur != 0; cur = reg.node(cur).pred)
        chain.push_back(cur);
    std::reverse(chain.begin(), chain.end());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        const std::string at = "age " + std::to_string(i + 1);
        const Node& xi = reg.node(chain[i]);
        const Node& zi = reg.node(seq.pairs[i].zeta);
        if (xi.rank != zi.rank) return nope(at + ": rank mismatch");
        if (!(xi.ival == zi.ival)) return nope(at + ": interval mismatch");
        if (xi.weight_index != 2 * seq.j - 1)
            return nope(at + ": weight is not m_{2j-1}");
        if (!in_gamma(xi.target)) return nope(at + ": eta outside Gamma");
        if (i > 0 && !in_gamma(chain[i - 1]))
            return nope(at + ": predecessor outside Gamma");
        if ((i + 1) % 2 == 1) {  // odd age
            if (xi.lambda != 1) return nope(at + ": lambda != 1 at odd age");
            const auto cert = compatible_tree_analyses(reg, xi.target, zi.target);
            if (!cert.ok)
                return nope(at + ": tree analyses differ (" +
                            cert.first_violation + ")");
        } else {  // even age
            if (xi.sign != 1) return nope(at + ": epsilon != 1 at even age");
            if (xi.target != zi.target)
                return nope(at + ": eta differs at even age");
            const Rational lam_ref = lambda_gamma_x(reg, chain[i - 1],
                                                    seq.pairs[i - 1].xbar);
            const std::uint64_t rk = reg.node(chain[i - 1]).rank;
            const Int nr = ps.n(rk);
            if (rat_abs(xi.lambda - lam_ref) >= Rational(1, 4 * nr * nr))
                return nope(at + ": lambda too far from lambda_{xi,x}");
        }
    }
    return true;
}

bool KusLayer::accept_special(NodeId gamma, const SpecialSequence& seq,
                              std::string* why) {
    if (in_gamma(gamma)) return true;
    const Node& g = reg_->node(gamma);
    if (g.weight_index % 2 != 1) {
        if (why) *why = "weight index is even";
        return false;
    }
    const std::uint64_t j = (g.weight_index + 1) / 2;
    if (j != seq.j) {
        if (why) *why = "sequence j differs from the node weight";
        return false;
    }
    if (j > g.rank / 2) {
        if (why) *why = "j exceeds floor(rank/2)";
        return false;
    }
    const auto rep = is_special_sequence(seq);
    if (!rep.ok) {
        if (why) *why = "sequence invalid: " + rep.violations.front();
        return false;
    }
    if (!node_compatible_with(gamma, seq, why)) return false;
    members_[gamma] = "special";
    reg_->set_class(gamma, NodeClass::Special);
    return true;
}

VectorX KusLayer::restrict_R(const VectorX& x) const {
    SparseMap out;
    for (const auto& [id, c] : x.coeffs)
        if (in_gamma(id)) out[id] = c;
    return VectorX{std::move(out)};
}

SparseFunctional KusLayer::restrict_R(const SparseFunctional& f) const {
    SparseMap out;
    for (const auto& [id, c] : f.coeffs)
        if (in_gamma(id)) out[id] = c;
    return SparseFunctional{std::move(out), "projected"};
}

bool KusLayer::self_determined_check(NodeId gamma) const {
    const Node& g = reg_->node(gamma);
    if (g.klass == NodeClass::Base) return true;
    if (!in_gamma(gamma)) return false;
    if (g.pred != 0 && !in_gamma(g.pred)) return false;
    return in_gamma(g.target);
}

}  // namespace bdforge
