#include "bdforge/functional.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {

SparseFunctional c_star(const Registry& reg, NodeId gamma) {
    return SparseFunctional{reg.node(gamma).cstar, "c-star"};
}

SparseFunctional d_star(NodeId gamma) {
    return SparseFunctional{SparseMap{{gamma, Rational(1)}}, "d-star"};
}

SparseFunctional e_star(const Registry& reg, NodeId gamma) {
    return SparseFunctional{registry_estar(reg, gamma), "e-star"};
}

SparseFunctional proj_star(const SparseFunctional& f, Interval I) {
    return SparseFunctional{proj_map(f.coeffs, I), "projected"};
}

SparseFunctional proj_star_prefix(const SparseFunctional& f, std::uint64_t m) {
    return proj_star(f, Interval{1, m});
}

std::string functional_to_json(const SparseFunctional& f) {
    nlohmann::json j;
    j["basis"] = "d-star";
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [id, v] : f.coeffs) c[std::to_string(id)] = rat_to_string(v);
    j["coeffs"] = c;
    return j.dump();
}

SparseFunctional functional_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("basis").get<std::string>() != "d-star")
        fail("persistence-error", "functional JSON must use the d-star basis");
    SparseFunctional f;
    f.provenance = "combination";
    for (const auto& [k, v] : j.at("coeffs").items()) {
        const Rational r = rat_from_string(v.get<std::string>());
        if (r != 0) f.coeffs[std::stoull(k)] = r;
    }
    return f;
}

EvaluationAnalysis evaluation_analysis(const Registry& reg, NodeId gamma) {
    const Node& g = reg.node(gamma);
    if (g.klass == NodeClass::Base)
        fail("no-analysis", "the base node has no evaluation analysis");
    EvaluationAnalysis an;
    an.weight_index = g.weight_index;
    for (NodeId cur = gamma; cur != 0; cur = reg.node(cur).pred) {
        const Node& n = reg.node(cur);
        an.entries.push_back(
            EvaluationEntry{n.ival, n.sign, n.lambda, n.target, n.id});
    }
    std::reverse(an.entries.begin(), an.entries.end());
    return an;
}

SparseFunctional bd_part(const Registry& reg, NodeId gamma) {
    const EvaluationAnalysis an = evaluation_analysis(reg, gamma);
    SparseFunctional f{{}, "combination"};
    for (const auto& e : an.entries) f.coeffs[e.xi] = 1;
    return f;
}

SparseFunctional mt_part(const Registry& reg, NodeId gamma) {
    const EvaluationAnalysis an = evaluation_analysis(reg, gamma);
    const Rational w(1, reg.schedule().m(an.weight_index));
    SparseFunctional f{{}, "combination"};
    for (const auto& e : an.entries)
        add_scaled(f.coeffs, proj_map(registry_estar(reg, e.eta), e.ival),
                   w * e.sign * e.lambda);
    return f;
}

SparseFunctional evaluation_reconstruct(const Registry& reg,
                                        const EvaluationAnalysis& an) {
    const Rational w(1, reg.schedule().m(an.weight_index));
    SparseFunctional f{{}, "combination"};
    for (const auto& e : an.entries) {
        add_scaled(f.coeffs, SparseMap{{e.xi, Rational(1)}}, 1);
        add_scaled(f.coeffs, proj_map(registry_estar(reg, e.eta), e.ival),
                   w * e.sign * e.lambda);
    }
    return f;
}

IAnalysis i_analysis(const Registry& reg, NodeId gamma, Interval I) {
    const SparseMap pf = proj_map(registry_estar(reg, gamma), I);
    if (pf.empty()) fail("empty-projection", "P*_I e*_gamma = 0");
    IAnalysis out;
    if (reg.node(gamma).klass == NodeClass::Base) {
        // e*_base = d*_base; a surviving projection is the unit itself.
        out.decomposable = false;
        out.xi = gamma;
        return out;
    }
    const EvaluationAnalysis an = evaluation_analysis(reg, gamma);
    for (const auto& e : an.entries) {
        const Interval cut = intersect(e.ival, I);
        if (proj_map(registry_estar(reg, e.eta), cut).empty()) continue;
        EvaluationEntry cut_entry = e;
        cut_entry.ival = cut;
        out.entries.push_back(cut_entry);
    }
    out.decomposable = !out.entries.empty();
    if (!out.decomposable) {
        // P*_I e*_gamma = d*_{xi_{i0}} for exactly one chain element.
        if (pf.size() != 1 || pf.begin()->second != 1)
            fail("internal-error", "indecomposable projection is not a d* unit");
        out.xi = pf.begin()->first;
    }
    return out;
}

TreeAnalysis tree_analysis(const Registry& reg, NodeId gamma) {
    const Node& g = reg.node(gamma);
    if (g.klass == NodeClass::Base)
        fail("no-analysis", "the base node has no tree analysis");
    TreeAnalysis ta;
    ta.gamma = gamma;
    TreeAnalysisNode root;
    root.ival = Interval{1, reg.delta_interval(g.rank).hi};
    root.sign = 1;
    root.lambda = 1;
    root.eta = gamma;
    root.parent = 0;
    ta.nodes.push_back(root);
    // Depth-first expansion keeps preorder layout.
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const std::size_t ti = stack.back();
        stack.pop_back();
        const NodeId eta = ta.nodes[ti].eta;
        const Interval It = ta.nodes[ti].ival;
        const IAnalysis ia = i_analysis(reg, eta, It);
        if (!ia.decomposable) {
            ta.nodes[ti].terminal = true;
            ta.nodes[ti].xi = ia.xi;
            continue;
        }
        std::vector<std::size_t> kids;
        for (std::size_t i = 0; i < ia.entries.size(); ++i) {
            const auto& e = ia.entries[i];
            TreeAnalysisNode child;
            child.path = ta.nodes[ti].path;
            child.path.push_back(i + 1);
            child.ival = e.ival;  // already cut with I_t
            child.sign = e.sign;
            child.lambda = e.lambda;
            child.eta = e.eta;
            child.parent = ti;
            ta.nodes.push_back(child);
            kids.push_back(ta.nodes.size() - 1);
        }
        ta.nodes[ti].children = kids;
        for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return ta;
}

namespace {

SparseMap tree_rec(const Registry& reg, const TreeAnalysis& ta, std::size_t ti) {
    const TreeAnalysisNode& t = ta.nodes[ti];
    if (t.terminal) return SparseMap{{t.xi, Rational(1)}};
    const EvaluationAnalysis an = evaluation_analysis(reg, t.eta);
    const Rational w(1, reg.schedule().m(an.weight_index));
    SparseMap out;
    for (const auto& e : an.entries)
        if (t.ival.contains(e.xi)) out[e.xi] = 1;
    for (std::size_t ci : t.children) {
        const TreeAnalysisNode& c = ta.nodes[ci];
        add_scaled(out, tree_rec(reg, ta, ci), w * c.sign * c.lambda);
    }
    return out;
}

}  // namespace

SparseFunctional tree_reconstruct(const Registry& reg, const TreeAnalysis& ta) {
    return SparseFunctional{tree_rec(reg, ta, 0), "combination"};
}

std::set<NodeId> mt_supp(const Registry& reg, NodeId gamma) {
    const TreeAnalysis ta = tree_analysis(reg, gamma);
    std::set<NodeId> out;
    for (const auto& t : ta.nodes)
        if (t.terminal) out.insert(t.xi);
    return out;
}

std::set<NodeId> bd_supp(const Registry& reg, NodeId gamma) {
    const std::set<NodeId> mt = mt_supp(reg, gamma);
    std::set<NodeId> out;
    for (const auto& [id, v] : registry_estar(reg, gamma))
        if (mt.count(id) == 0) out.insert(id);
    return out;
}

Rational l1_norm_e_coords(const Registry& reg, const SparseFunctional& f) {
    // f = sum_g a_g d*_g = sum_g b_g e*_g; e*_g = d*_g + c*_g with c*_g
    // supported strictly below g, so solve top-down.
    SparseMap rem = f.coeffs;
    Rational total = 0;
    while (!rem.empty()) {
        const auto top = std::prev(rem.end());
        const NodeId g = top->first;
        const Rational b = top->second;
        rem.erase(top);
        total += rat_abs(b);
        add_scaled(rem, reg.node(g).cstar, -b);
    }
    return total;
}

}  // namespace bdforge
