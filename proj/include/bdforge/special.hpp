#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bdforge/space.hpp"

namespace bdforge {

struct SpecialPair {
    NodeId zeta = 0;
    VectorX xbar;
};

struct SpecialSequence {
    std::uint64_t j = 0;  // the sequence carries weight index 2j-1
    std::vector<SpecialPair> pairs;
};

// Injective coding with the growth property: every assigned value strictly
// exceeds m_w(zeta_k) * max supp_FDD(xbar_k) and all previous values.
class CodingRegistry {
  public:
    explicit CodingRegistry(const Registry& reg) : reg_(&reg) {}

    // Deterministic, persistent assignment; validates membership in Q.
    std::uint64_t assign(const std::vector<SpecialPair>& prefix);
    std::optional<std::uint64_t> lookup(const std::vector<SpecialPair>& prefix) const;

    static std::string canonical_key(const std::vector<SpecialPair>& prefix);

    std::string to_jsonl() const;
    void load_jsonl(const std::string& text);

    std::uint64_t counter() const { return counter_; }

  private:
    void check_in_q(const std::vector<SpecialPair>& prefix) const;

    const Registry* reg_;
    std::map<std::string, std::uint64_t> entries_;
    std::uint64_t counter_ = 0;
};

// eps * e*_eta(x) when nonzero, else eps / n_k^2 with k the weight index of
// gamma itself.
Rational lambda_gamma_x(const Registry& reg, NodeId gamma, const VectorX& x);

struct CompatibilityCert {
    bool ok = false;
    std::string first_violation;  // "CT1".."CT5" when !ok
};

CompatibilityCert compatible_tree_analyses(const Registry& reg, NodeId a, NodeId b);

struct SpecialSequenceReport {
    bool ok = false;
    std::vector<std::string> violations;  // empty iff ok
    bool toy_truncated = false;           // even-entry block count below n_{4sigma}
};

// Tracks the self-determined subset Gamma: regular membership by rule,
// special membership by certificate.
class KusLayer {
  public:
    KusLayer(Registry& reg, CodingRegistry& coding) : reg_(&reg), coding_(&coding) {}

    bool in_gamma(NodeId id) const;

    // Delta^reg rule: even weight index 2j with j <= floor(rank/2), eta in
    // Gamma, predecessor (if any) in Gamma.  Returns acceptance.
    bool accept_regular(NodeId gamma);

    // Certificate-based Delta^sp membership.
    bool accept_special(NodeId gamma, const SpecialSequence& seq,
                        std::string* why = nullptr);

    // Full check of a j-special sequence over Gamma.
    SpecialSequenceReport is_special_sequence(const SpecialSequence& seq) const;

    // Recursive compatibility of gamma with the sequence (age-long prefix).
    bool node_compatible_with(NodeId gamma, const SpecialSequence& seq,
                              std::string* why = nullptr) const;

    VectorX restrict_R(const VectorX& x) const;
    SparseFunctional restrict_R(const SparseFunctional& f) const;

    // Every reference in the c* formula of gamma lies in Gamma.
    bool self_determined_check(NodeId gamma) const;

    const Registry& registry() const { return *reg_; }
    Registry& registry_mutable() { return *reg_; }
    CodingRegistry& coding() { return *coding_; }

  private:
    Registry* reg_;
    CodingRegistry* coding_;
    std::map<NodeId, std::string> members_;  // node -> "base"|"regular"|"special"
};

}  // namespace bdforge
