#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bdforge/functional.hpp"
#include "bdforge/space.hpp"

namespace bdforge {

// One dependent couple (eta_{s-}, eta_s): s sits at an even mt-position of an
// odd-weight parent; when a block x_k witnesses the two support inequalities
// the entry joins the F-part and carries k.
struct CoupleEntry {
    std::vector<std::uint64_t> path_pred, path;  // tree paths of s- and s
    std::size_t node_pred = 0, node = 0;         // indices into the tree analysis
    Interval ival_pred, ival;                    // I_{s-} and I_s (cut)
    std::uint64_t chain_pos = 0;                 // even position of s in mt(e*_t)
    std::optional<std::uint64_t> k;              // witnessing block, 1-based
};

struct CoupleIndex {
    NodeId gamma = 0;
    std::vector<CoupleEntry> e_set;
    std::vector<std::size_t> f_set;  // indices into e_set with a witnessing k
};

CoupleIndex dependent_couples(const Registry& reg, NodeId gamma,
                              const std::vector<VectorX>& xs);

// Sum of the interval projections over the F-part; intervals must be pairwise
// disjoint (incomparability), otherwise internal-error.
VectorX q_projection(const CoupleIndex& ci, const VectorX& x);

struct FlipRecord {
    std::vector<std::uint64_t> path;
    std::string case_label;  // root | 1a | 1b | 2a | 2b | 2c
    bool terminal = false;   // member of the terminal set D
    std::optional<std::uint64_t> k;  // block governing the sign choice
    bool fallback = false;  // no block intersects and none lies to the right
    bool t1 = false;        // compatible tree analyses with the original
    bool t3 = false;        // exact flipped-evaluation identity (D only)
};

struct FlipResult {
    NodeId gamma_tilde = 0;
    int epsilon = 1;
    std::vector<FlipRecord> t_records;
    bool t2 = false;      // couple index of gamma_tilde matches gamma's
    bool t4_all = false;  // unchanged signs off the terminal set
};

// Sign-killing rebuild of gamma over the block family xs: terminal set D per
// the at-most-one-intersection rule, case analysis 1a/1b/2a/2b/2c, exact
// certificates recorded per tree node.
FlipResult flip_node(Registry& reg, NodeId gamma, const std::vector<VectorX>& xs,
                     const std::vector<int>& signs);

std::string flip_result_to_json(const FlipResult& fr);

struct ProbeReport {
    Rational base_lo, base_hi;        // certified norm interval of sum a_k x_k
    Rational flipped_lo, flipped_hi;  // same for sum delta_k a_k x_k
    Rational ratio_lo, ratio_hi;      // flipped/base outer interval
    bool toy = false;
};

ProbeReport unconditionality_probe(const Registry& reg,
                                   const std::vector<VectorX>& xs,
                                   const std::vector<Rational>& coeffs,
                                   const std::vector<int>& signs,
                                   std::uint64_t cutoff_rank);

}  // namespace bdforge
