#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bdforge/functional.hpp"
#include "bdforge/registry.hpp"

namespace bdforge {

// Vector in the d-basis.  Supports and ranges are derived on demand: rng is
// taken w.r.t. the basis ordinals, rng_FDD w.r.t. the rank blocks.
struct VectorX {
    SparseMap coeffs;

    bool zero() const { return coeffs.empty(); }
};

VectorX make_vector(SparseMap coeffs);   // drops stored zeros
VectorX d_basis(NodeId gamma);
VectorX add_vec(const VectorX& a, const VectorX& b, const Rational& cb = 1);
VectorX scale_vec(const VectorX& a, const Rational& c);

std::set<NodeId> supp_vec(const VectorX& x);
Interval rng_vec(const VectorX& x);                          // ordinal range
Interval rng_fdd(const Registry& reg, const VectorX& x);     // rank range

std::string vector_to_json(const VectorX& x);
VectorX vector_from_json(const std::string& text);

Rational eval(const SparseFunctional& f, const VectorX& x);
Rational coordinate(const Registry& reg, const VectorX& x, NodeId eta);
VectorX project(const VectorX& x, Interval I);

// Strict FDD gap between consecutive vectors; singleton lists qualify.
bool is_skipped(const Registry& reg, const std::vector<VectorX>& xs);

// {gamma in materialized Gamma_q : x(gamma) != 0}, q = max rng_FDD x.
std::set<NodeId> local_support(const Registry& reg, const VectorX& x);

struct NormInterval {
    Rational lo, hi;
    NodeId lo_witness = 0;
    std::string hi_rule;
    std::uint64_t cutoff_rank = 0;
};

// lo = best coordinate witness among materialized nodes of rank <= cutoff_rank
// (plus extra witnesses); hi = 2 * max coordinate over materialized Gamma_q,
// q = max rng_FDD x.  cutoff below max rng_FDD is an error.
NormInterval norm_bounds(const Registry& reg, const VectorX& x,
                         std::uint64_t cutoff_rank,
                         const std::vector<NodeId>& extra_witnesses = {});

}  // namespace bdforge
