#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "bdforge/special.hpp"

namespace bdforge {

struct RisCertificate {
    bool ok = false;
    std::string failure;  // empty iff ok
    Rational C;
    std::vector<std::uint64_t> j_seq;  // constructed minimal increasing (j_k)
    std::uint64_t verified_up_to_rank = 0;
    // weight index i -> max observed m_i * |x_k(gamma)| over applicable (k, gamma)
    std::map<std::uint64_t, Rational> condition3_max_observed;
};

// RIS conditions (1)-(3) with the canonical minimal (j_k).
RisCertificate ris_check(const Registry& reg, const std::vector<VectorX>& xs,
                         const Rational& C, std::uint64_t cutoff_rank);

// n_j^{-1} sum d_xi (m_j n_j^{-1} when weighted); xis pairwise non-neighbours.
VectorX basis_average(const Registry& reg, std::uint64_t j,
                      const std::vector<NodeId>& xis, bool weighted);

struct WitnessNode {
    NodeId gamma = 0;
    Rational value;       // exact evaluation of the witnessed functional
    Rational lower_bound; // claimed lower bound (61a); equals value for 61b
    bool toy_count = false;  // fewer than n_{2j} inputs
};

// Chain gamma_k = (p_k+1, gamma_{k-1}, m_{2j}, I_k, eps_k, e*_{eta_k}) with
// eta_k maximizing |e*_eta P_{I_k}(x_k)| (smallest ordinal on ties).
WitnessNode witness_node_61a(Registry& reg, const std::vector<VectorX>& xs,
                             std::uint64_t j);

// Chain zeta_i = (rank(xi_i)+1, zeta_{i-1}, m_{2j}, Delta_{rank xi_i}, 1,
// e*_{xi_i}); evaluates sum d_xi to exactly count / m_{2j}.
WitnessNode witness_node_61b(Registry& reg, const std::vector<NodeId>& xis,
                             std::uint64_t j);

// How each builder step manufactures its material: fresh regular block nodes
// of the given weight, `blocks` of them per step.
struct MaterialSource {
    std::uint64_t blocks = 2;
    std::uint64_t block_weight_index = 2;
};

struct DependentSequence {
    std::uint64_t j = 0;
    std::vector<std::pair<NodeId, VectorX>> pairs;  // (gamma_k, x_k)
    SpecialSequence special;                        // (zeta_k, xbar_k)
    std::vector<Rational> c_k;
    std::vector<std::string> conformance;  // truncation / analytic-gap notes
};

// Dependent-sequence builder at desk scale; throws needs-closed-form-schedule when a
// sigma-driven weight leaves the explicit schedule.
DependentSequence dependent_sequence(KusLayer& kus, std::uint64_t j,
                                     std::uint64_t length,
                                     const MaterialSource& odd_source,
                                     const MaterialSource& even_source);

struct AlternatingReport {
    Rational alt_lo, alt_hi;   // norm interval of the alternating average
    Rational alt_bound;        // 250 / m_{2j-1}^2
    bool alt_bound_observed = false;  // hi <= bound (reported, never asserted on toys)
    Rational plus_lo;          // lower witness for the all-plus weighted average
    Rational plus_witness;     // exact e*_{zeta_d} value on the weighted average
    bool toy = false;
    std::vector<std::string> notes;
};

AlternatingReport alternating_audit(const KusLayer& kus,
                                    const DependentSequence& ds);

std::string dependent_sequence_to_json(const DependentSequence& ds);

}  // namespace bdforge
