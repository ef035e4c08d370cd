#include "bdforge/space.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {

VectorX make_vector(SparseMap coeffs) {
    for (auto it = coeffs.begin(); it != coeffs.end();)
        it = it->second == 0 ? coeffs.erase(it) : std::next(it);
    return VectorX{std::move(coeffs)};
}

VectorX d_basis(NodeId gamma) { return VectorX{SparseMap{{gamma, Rational(1)}}}; }

VectorX add_vec(const VectorX& a, const VectorX& b, const Rational& cb) {
    SparseMap out = a.coeffs;
    add_scaled(out, b.coeffs, cb);
    return VectorX{std::move(out)};
}

VectorX scale_vec(const VectorX& a, const Rational& c) {
    SparseMap out;
    add_scaled(out, a.coeffs, c);
    return VectorX{std::move(out)};
}

std::set<NodeId> supp_vec(const VectorX& x) {
    std::set<NodeId> out;
    for (const auto& [id, v] : x.coeffs) out.insert(id);
    return out;
}

Interval rng_vec(const VectorX& x) {
    if (x.zero()) fail("zero-vector", "range of the zero vector");
    return Interval{x.coeffs.begin()->first, x.coeffs.rbegin()->first};
}

Interval rng_fdd(const Registry& reg, const VectorX& x) {
    const Interval r = rng_vec(x);
    return Interval{reg.rank_of_position(r.lo), reg.rank_of_position(r.hi)};
}

std::string vector_to_json(const VectorX& x) {
    nlohmann::json j;
    j["basis"] = "d";
    nlohmann::json c = nlohmann::json::object();
    for (const auto& [id, v] : x.coeffs) c[std::to_string(id)] = rat_to_string(v);
    j["coeffs"] = c;
    return j.dump();
}

VectorX vector_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.at("basis").get<std::string>() != "d")
        fail("persistence-error", "vector JSON must use the d basis");
    SparseMap coeffs;
    for (const auto& [k, v] : j.at("coeffs").items())
        coeffs[std::stoull(k)] = rat_from_string(v.get<std::string>());
    return make_vector(std::move(coeffs));
}

Rational eval(const SparseFunctional& f, const VectorX& x) {
    Rational out = 0;
    const auto& a = f.coeffs.size() <= x.coeffs.size() ? f.coeffs : x.coeffs;
    const auto& b = f.coeffs.size() <= x.coeffs.size() ? x.coeffs : f.coeffs;
    for (const auto& [id, v] : a) {
        auto it = b.find(id);
        if (it != b.end()) out += v * it->second;
    }
    return out;
}

Rational coordinate(const Registry& reg, const VectorX& x, NodeId eta) {
    return eval(e_star(reg, eta), x);
}

VectorX project(const VectorX& x, Interval I) {
    return VectorX{proj_map(x.coeffs, I)};
}

bool is_skipped(const Registry& reg, const std::vector<VectorX>& xs) {
    if (xs.empty()) fail("zero-vector", "is_skipped needs a nonempty list");
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
        if (rng_fdd(reg, xs[i]).hi + 1 >= rng_fdd(reg, xs[i + 1]).lo) return false;
    return true;
}

std::set<NodeId> local_support(const Registry& reg, const VectorX& x) {
    if (x.zero()) fail("zero-vector", "local support of the zero vector");
    const std::uint64_t q = rng_fdd(reg, x).hi;
    std::set<NodeId> out;
    for (NodeId id : reg.ids()) {
        if (reg.node(id).rank > q) break;
        if (coordinate(reg, x, id) != 0) out.insert(id);
    }
    return out;
}

NormInterval norm_bounds(const Registry& reg, const VectorX& x,
                         std::uint64_t cutoff_rank,
                         const std::vector<NodeId>& extra_witnesses) {
    if (x.zero()) fail("zero-vector", "norm bounds of the zero vector");
    const std::uint64_t q = rng_fdd(reg, x).hi;
    if (cutoff_rank < q)
        fail("cutoff-too-low", "cutoff rank below max rng_FDD of the vector");
    NormInterval out;
    out.cutoff_rank = cutoff_rank;
    out.hi_rule = "2*sup|x(gamma)| over Gamma_q (embedding norm <= 2)";
    Rational hi_base = 0;
    for (NodeId id : reg.ids()) {
        const std::uint64_t r = reg.node(id).rank;
        if (r > cutoff_rank) break;
        const Rational c = rat_abs(coordinate(reg, x, id));
        if (r <= q && c > hi_base) hi_base = c;
        if (c > out.lo) {
            out.lo = c;
            out.lo_witness = id;
        }
    }
    for (NodeId id : extra_witnesses) {
        const Rational c = rat_abs(coordinate(reg, x, id));
        if (c > out.lo) {
            out.lo = c;
            out.lo_witness = id;
        }
    }
    out.hi = 2 * hi_base;
    return out;
}

}  // namespace bdforge
