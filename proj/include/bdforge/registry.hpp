#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "bdforge/params.hpp"
#include "bdforge/sparse.hpp"

namespace bdforge {

enum class NodeClass { Base, Candidate, Regular, Special };

std::string node_class_name(NodeClass c);
NodeClass node_class_from_name(const std::string& s);

struct Node {
    NodeId id = 0;
    std::uint64_t rank = 0;          // construction level q+1
    NodeId pred = 0;                 // 0 = no predecessor
    std::uint64_t weight_index = 0;  // j, weight = m_j^{-1}; 0 for the base node
    Interval ival;                   // I
    int sign = 1;                    // epsilon
    Rational lambda;                 // net coefficient of b* = lambda e*_eta
    NodeId target = 0;               // eta; 0 for the base node
    NodeClass klass = NodeClass::Candidate;
    std::uint64_t age = 1;
    SparseMap cstar;                 // c*_gamma in d*-coordinates
};

// Enumeration caps for enumerate_delta; any active cap marks the census capped.
struct EnumCaps {
    std::optional<std::uint64_t> net_cap;
    std::optional<std::uint64_t> max_weight_index;
    std::optional<std::uint64_t> max_interval_len;  // 0 forbids all intervals
    std::optional<std::uint64_t> max_targets;       // per (j, pred) group
    std::uint64_t budget = 200000;

    bool any() const {
        return net_cap || max_weight_index || max_interval_len || max_targets;
    }
};

// Interned node universe for Gamma-bar with the global position enumeration.
// Universe mode materializes whole ranks via enumerate_delta; witness mode
// reserves per-rank ordinal blocks on demand (gaps permitted).
class Registry {
  public:
    enum class Mode { Universe, Witness };

    Registry(ParamSchedule ps, Mode mode,
             std::optional<std::uint64_t> net_cap = std::nullopt,
             std::uint64_t witness_block = 256);

    NodeId base_node();  // must be the first node; errors if called twice

    NodeId make_node(std::uint64_t rank, NodeId pred, std::uint64_t weight_index,
                     Interval ival, int sign, const Rational& lambda, NodeId target);

    std::vector<NodeId> enumerate_delta(std::uint64_t q, const EnumCaps& caps);

    bool neighbours(NodeId a, NodeId b) const;
    std::vector<NodeId> non_neighbour_subset(const std::vector<NodeId>& ids) const;

    bool materialized(NodeId id) const;
    const Node& node(NodeId id) const;
    void set_class(NodeId id, NodeClass c);
    std::uint64_t age_of(NodeId id) const { return node(id).age; }

    const ParamSchedule& schedule() const { return ps_; }
    Mode mode() const { return mode_; }
    std::optional<std::uint64_t> net_cap() const { return net_cap_; }
    // Non-conforming schedule, capped net, or capped enumeration anywhere.
    bool toy() const;

    // Ordinal geometry.  max_gamma(r) = last position reserved for rank <= r.
    std::uint64_t max_gamma(std::uint64_t rank) const;
    Interval delta_interval(std::uint64_t rank) const;  // reserved block of a rank
    std::uint64_t rank_of_position(std::uint64_t pos) const;
    std::uint64_t max_rank_touched() const;
    bool rank_sealed(std::uint64_t rank) const;
    bool census_capped() const { return census_capped_; }

    // All materialized ids, ascending (deterministic iteration order).
    const std::vector<NodeId>& ids() const { return ids_; }

    std::string to_jsonl() const;
    void load_jsonl(const std::string& text);  // into a registry holding only base

  private:
    struct Block {
        std::uint64_t lo = 0, hi = 0;  // reserved span
        std::uint64_t next = 0;        // next free position
        bool sealed = false;
    };

    using InternKey = std::tuple<std::uint64_t, NodeId, std::uint64_t, std::uint64_t,
                                 std::uint64_t, int, Rational, NodeId>;

    const Block& block(std::uint64_t rank) const;
    void reserve_through(std::uint64_t rank, std::uint64_t size_hint);
    // Validates a tuple; returns c* on success, empty optional when vacuous.
    std::optional<SparseMap> validate_tuple(std::uint64_t rank, NodeId pred,
                                            std::uint64_t weight_index, Interval ival,
                                            int sign, const Rational& lambda,
                                            NodeId target) const;
    NodeId intern(std::uint64_t rank, NodeId pred, std::uint64_t weight_index,
                  Interval ival, int sign, const Rational& lambda, NodeId target,
                  SparseMap cstar);
    SparseMap estar_map(NodeId id) const;  // d* unit at id plus c*

    friend SparseMap registry_estar(const Registry&, NodeId);

    ParamSchedule ps_;
    Mode mode_;
    std::optional<std::uint64_t> net_cap_;
    std::uint64_t witness_block_;
    bool schedule_conforming_ = false;
    bool census_capped_ = false;

    std::map<std::uint64_t, Block> blocks_;   // rank -> block
    std::map<NodeId, Node> nodes_;
    std::vector<NodeId> ids_;
    std::map<InternKey, NodeId> interned_;
};

// e*_gamma in d*-coordinates (unit at gamma plus c*_gamma); used by the
// functional module and by make_node's own P*_I b* != 0 validation.
SparseMap registry_estar(const Registry& reg, NodeId id);

}  // namespace bdforge
