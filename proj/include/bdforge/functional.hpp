#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "bdforge/registry.hpp"
#include "bdforge/sparse.hpp"

namespace bdforge {

// All functionals are stored in the d*-basis, where interval projections are
// diagonal; the e*-basis appears only transiently (l1_norm_e_coords).
struct SparseFunctional {
    SparseMap coeffs;
    std::string provenance;  // c-star | d-star | e-star | projected | combination

    bool zero() const { return coeffs.empty(); }
};

SparseFunctional c_star(const Registry& reg, NodeId gamma);
SparseFunctional d_star(NodeId gamma);
SparseFunctional e_star(const Registry& reg, NodeId gamma);
SparseFunctional proj_star(const SparseFunctional& f, Interval I);

std::string functional_to_json(const SparseFunctional& f);
SparseFunctional functional_from_json(const std::string& text);

// One link of the predecessor chain of gamma: xi_i carries (I_i, eps_i,
// lambda_i e*_{eta_i}) and xi_{i-1} as predecessor.
struct EvaluationEntry {
    Interval ival;
    int sign = 1;
    Rational lambda;
    NodeId eta = 0;
    NodeId xi = 0;
};

struct EvaluationAnalysis {
    std::uint64_t weight_index = 0;
    std::vector<EvaluationEntry> entries;  // i = 1..a, entries.back().xi = gamma
};

// Chain decomposition e* = sum d*_{xi_i} + m_j^{-1} sum eps_i lambda_i
// P*_{I_i} e*_{eta_i}; length = age(gamma).  Errors on the base node.
EvaluationAnalysis evaluation_analysis(const Registry& reg, NodeId gamma);

SparseFunctional bd_part(const Registry& reg, NodeId gamma);
SparseFunctional mt_part(const Registry& reg, NodeId gamma);

// Recomposition of the evaluation analysis; equals e_star(gamma) exactly.
SparseFunctional evaluation_reconstruct(const Registry& reg,
                                        const EvaluationAnalysis& an);

struct IAnalysis {
    bool decomposable = false;
    std::vector<EvaluationEntry> entries;  // intervals already cut with I
    NodeId xi = 0;                         // indecomposable witness
};

// Requires P*_I e*_gamma != 0 (otherwise an empty-projection error).
IAnalysis i_analysis(const Registry& reg, NodeId gamma, Interval I);

struct TreeAnalysisNode {
    std::vector<std::uint64_t> path;  // () = root
    Interval ival;
    int sign = 1;
    Rational lambda;       // 1 at the root
    NodeId eta = 0;
    bool terminal = false;
    NodeId xi = 0;                      // terminal only: P*_{I_t} e*_{eta_t} = d*_{xi_t}
    std::size_t parent = 0;             // index into nodes; root points to itself
    std::vector<std::size_t> children;  // indices into nodes
};

struct TreeAnalysis {
    NodeId gamma = 0;
    std::vector<TreeAnalysisNode> nodes;  // nodes[0] = root, preorder
};

TreeAnalysis tree_analysis(const Registry& reg, NodeId gamma);

// Recursive recomposition rec(root); equals e_star(gamma) exactly.
SparseFunctional tree_reconstruct(const Registry& reg, const TreeAnalysis& ta);

std::set<NodeId> mt_supp(const Registry& reg, NodeId gamma);
std::set<NodeId> bd_supp(const Registry& reg, NodeId gamma);

// l1 norm of f taken in e*-coordinates: solve the unitriangular change of
// basis d* -> e* exactly and sum absolute e*-coefficients.
Rational l1_norm_e_coords(const Registry& reg, const SparseFunctional& f);

// P*_m f = projection onto positions 1..m.
SparseFunctional proj_star_prefix(const SparseFunctional& f, std::uint64_t m);

}  // namespace bdforge
