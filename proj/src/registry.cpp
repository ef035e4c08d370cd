#include "bdforge/registry.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"

namespace bdforge {
namespace {

// age + 1 <= n_j without materializing astronomically large closed-form n_j.
bool age_within(const ParamSchedule& ps, std::uint64_t j, std::uint64_t new_age) {
    if (ps.closed()) {
        const Int L = ps.log2_n(j);  // n_j = 2^L
        if (L >= 64) return true;
        return Int(new_age) <= (Int(1) << static_cast<std::uint64_t>(L));
    }
    return Int(new_age) <= ps.n(j);
}

}  // namespace

std::string node_class_name(NodeClass c) {
    switch (c) {
        case NodeClass::Base: return "base";
        case NodeClass::Candidate: return "candidate";
        case NodeClass::Regular: return "regular";
        case NodeClass::Special: return "special";
    }
    return "candidate";
}

NodeClass node_class_from_name(const std::string& s) {
    if (s == "base") return NodeClass::Base;
    if (s == "regular") return NodeClass::Regular;
    if (s == "special") return NodeClass::Special;
    return NodeClass::Candidate;
}

Registry::Registry(ParamSchedule ps, Mode mode, std::optional<std::uint64_t> net_cap,
                   std::uint64_t witness_block)
    : ps_(std::move(ps)), mode_(mode), net_cap_(net_cap), witness_block_(witness_block) {
    if (witness_block_ == 0) fail("invalid-cap", "witness block size must be positive");
    const std::uint64_t K = ps_.closed() ? 6 : ps_.max_index();
    schedule_conforming_ = validate_schedule(ps_, K).conforming;
}

bool Registry::toy() const {
    return !schedule_conforming_ || net_cap_.has_value() || census_capped_;
}

NodeId Registry::base_node() {
    if (!blocks_.empty()) fail("already-initialized", "base node already exists");
    Block b;
    b.lo = 1;
    b.hi = 1;
    b.next = 2;
    b.sealed = true;
    blocks_[1] = b;
    Node n;
    n.id = 1;
    n.rank = 1;
    n.klass = NodeClass::Base;
    n.age = 1;
    nodes_[1] = n;
    ids_.push_back(1);
    return 1;
}

const Registry::Block& Registry::block(std::uint64_t rank) const {
    auto it = blocks_.find(rank);
    if (it == blocks_.end())
        fail("rank-unreserved", "no ordinal block for rank " + std::to_string(rank));
    return it->second;
}

void Registry::reserve_through(std::uint64_t rank, std::uint64_t size_hint) {
    if (blocks_.empty()) fail("uninitialized", "create the base node first");
    std::uint64_t next_free = blocks_.rbegin()->second.hi + 1;
    for (std::uint64_t r = blocks_.rbegin()->first + 1; r <= rank; ++r) {
        Block b;
        b.lo = next_free;
        b.hi = next_free + (r == rank ? size_hint : witness_block_) - 1;
        b.next = b.lo;
        blocks_[r] = b;
        next_free = b.hi + 1;
    }
}

std::uint64_t Registry::max_gamma(std::uint64_t rank) const {
    if (rank == 0) return 0;
    auto it = blocks_.upper_bound(rank);
    if (it == blocks_.begin()) return 0;
    return std::prev(it)->second.hi;
}

Interval Registry::delta_interval(std::uint64_t rank) const {
    const Block& b = block(rank);
    return Interval{b.lo, b.hi};
}

std::uint64_t Registry::rank_of_position(std::uint64_t pos) const {
    for (const auto& [r, b] : blocks_)
        if (b.lo <= pos && pos <= b.hi) return r;
    fail("rank-unreserved", "position " + std::to_string(pos) + " outside all blocks");
}

std::uint64_t Registry::max_rank_touched() const {
    return blocks_.empty() ? 0 : blocks_.rbegin()->first;
}

bool Registry::rank_sealed(std::uint64_t rank) const {
    auto it = blocks_.find(rank);
    return it != blocks_.end() && it->second.sealed;
}

bool Registry::materialized(NodeId id) const { return nodes_.count(id) != 0; }

const Node& Registry::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end())
        fail("unknown-node", "node " + std::to_string(id) + " not materialized");
    return it->second;
}

void Registry::set_class(NodeId id, NodeClass c) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) fail("unknown-node", "node " + std::to_string(id));
    if (it->second.klass == NodeClass::Base) return;
    it->second.klass = c;
}

SparseMap Registry::estar_map(NodeId id) const {
    const Node& n = node(id);
    SparseMap f = n.cstar;
    f[id] += 1;
    if (f[id] == 0) f.erase(id);
    return f;
}

SparseMap registry_estar(const Registry& reg, NodeId id) { return reg.estar_map(id); }

std::optional<SparseMap> Registry::validate_tuple(std::uint64_t rank, NodeId pred,
                                                  std::uint64_t weight_index,
                                                  Interval ival, int sign,
                                                  const Rational& lambda,
                                                  NodeId target) const {
    if (rank < 2) fail("invalid-rank", "non-base nodes have rank >= 2");
    if (sign != 1 && sign != -1) fail("invalid-sign", "sign must be +-1");
    if (weight_index == 0 || !ps_.defined(weight_index))
        fail("schedule-incomplete", "weight index " + std::to_string(weight_index));
    if (!ps_.defined(rank - 1))
        fail("schedule-incomplete", "net level " + std::to_string(rank - 1));
    std::uint64_t pred_rank = 1;  // Gamma-bar_0 is empty; p = pred_rank - 1
    if (pred != 0) {
        const Node& xi = node(pred);
        pred_rank = xi.rank;
        if (xi.rank >= rank) fail("invalid-rank", "predecessor rank must be lower");
        if (xi.weight_index != weight_index)
            fail("weight-mismatch", "predecessor weight differs");
        if (!age_within(ps_, weight_index, xi.age + 1))
            fail("age-overflow", "age " + std::to_string(xi.age + 1) + " exceeds n_j");
    }
    if (Int(weight_index) > Int(pred != 0 ? pred_rank - 1 : rank - 1))
        fail("invalid-weight", "weight index exceeds the allowed level");
    const Node& eta = node(target);
    if (eta.rank > rank - 1) fail("target-violation", "target must lie in Gamma_(rank-1)");
    if (pred != 0 && eta.rank < pred_rank)
        fail("target-violation", "target must avoid Gamma_p");
    const std::uint64_t floor_pos = max_gamma(pred_rank - 1);
    const std::uint64_t ceil_pos = max_gamma(rank - 1);
    if (ival.lo < 1 || ival.lo > ival.hi) fail("interval-violation", "malformed interval");
    if (ival.lo <= floor_pos) fail("interval-violation", "interval leaks into Gamma_p");
    if (ival.hi > ceil_pos) fail("interval-violation", "interval exceeds Gamma_(rank-1)");
    if (!net_contains(ps_, rank - 1, net_cap_, lambda))
        fail("invalid-lambda", "lambda " + rat_to_string(lambda) + " outside the net");
    if (lambda == 0) return std::nullopt;  // b* = 0 => vacuous
    const SparseMap pb = proj_map(estar_map(target), ival);
    if (pb.empty()) return std::nullopt;  // P*_I b* = 0 => vacuous
    SparseMap cstar;
    if (pred != 0) cstar = estar_map(pred);
    add_scaled(cstar, pb, Rational(sign) * lambda / Rational(ps_.m(weight_index)));
    return cstar;
}

NodeId Registry::intern(std::uint64_t rank, NodeId pred, std::uint64_t weight_index,
                        Interval ival, int sign, const Rational& lambda, NodeId target,
                        SparseMap cstar) {
    auto bit = blocks_.find(rank);
    if (bit == blocks_.end()) fail("rank-unreserved", "intern before reservation");
    Block& b = bit->second;
    if (b.next > b.hi) fail("block-overflow", "rank " + std::to_string(rank) +
                                                  " ordinal block exhausted");
    if (b.sealed) fail("rank-sealed", "rank " + std::to_string(rank) + " is sealed");
    const NodeId id = b.next++;
    Node n;
    n.id = id;
    n.rank = rank;
    n.pred = pred;
    n.weight_index = weight_index;
    n.ival = ival;
    n.sign = sign;
    n.lambda = lambda;
    n.target = target;
    n.klass = NodeClass::Candidate;
    n.age = pred == 0 ? 1 : node(pred).age + 1;
    n.cstar = std::move(cstar);
    nodes_[id] = std::move(n);
    ids_.insert(std::lower_bound(ids_.begin(), ids_.end(), id), id);
    interned_[InternKey{rank, pred, weight_index, ival.lo, ival.hi, sign, lambda,
                        target}] = id;
    return id;
}

NodeId Registry::make_node(std::uint64_t rank, NodeId pred, std::uint64_t weight_index,
                           Interval ival, int sign, const Rational& lambda,
                           NodeId target) {
    const InternKey key{rank, pred, weight_index, ival.lo, ival.hi, sign, lambda, target};
    if (auto it = interned_.find(key); it != interned_.end()) return it->second;
    if (blocks_.empty()) fail("uninitialized", "create the base node first");
    if (rank >= 2 && blocks_.count(rank) == 0) reserve_through(rank, witness_block_);
    auto cstar = validate_tuple(rank, pred, weight_index, ival, sign, lambda, target);
    if (!cstar) fail("vacuous-node", "P*_I b* = 0");
    return intern(rank, pred, weight_index, ival, sign, lambda, target,
                  std::move(*cstar));
}

std::vector<NodeId> Registry::enumerate_delta(std::uint64_t q, const EnumCaps& caps) {
    if (q < 2) fail("invalid-rank", "enumerate_delta needs q >= 2");
    if (blocks_.empty()) fail("uninitialized", "create the base node first");
    if (blocks_.count(q) != 0) fail("rank-already-materialized", std::to_string(q));
    for (std::uint64_t r = 1; r < q; ++r)
        if (blocks_.count(r) == 0)
            fail("rank-unreserved", "rank " + std::to_string(r) + " not materialized");

    const Net net = build_net(ps_, q - 1, caps.net_cap ? caps.net_cap : net_cap_);
    std::vector<Rational> lambdas;
    for (const auto& p : net.points)
        if (p != 0) lambdas.push_back(p);

    const std::uint64_t jmax =
        std::min<std::uint64_t>(q - 1, caps.max_weight_index.value_or(q - 1));

    // Candidate tuples in the spec's deterministic order.
    struct Cand {
        std::uint64_t j;
        NodeId pred;
        Interval I;
        int sign;
        std::size_t lam;
        NodeId target;
    };
    std::vector<Cand> cands;

    // Deterministic predecessor lists per weight index: ordinal-ascending.
    auto preds_for = [&](std::uint64_t j) {
        std::vector<NodeId> out{0};
        for (NodeId id : ids_) {
            const Node& n = nodes_.at(id);
            if (n.rank >= 2 && n.rank <= q - 1 && n.weight_index == j &&
                age_within(ps_, j, n.age + 1))
                out.push_back(id);
        }
        return out;
    };

    const std::uint64_t top = max_gamma(q - 1);
    Int predicted = 0;
    for (std::uint64_t j = 1; j <= jmax; ++j) {
        for (NodeId pred : preds_for(j)) {
            const std::uint64_t p_rank = pred == 0 ? 1 : nodes_.at(pred).rank;
            const std::uint64_t floor_pos = max_gamma(p_rank - 1);
            std::vector<NodeId> targets;
            for (NodeId id : ids_) {
                const Node& n = nodes_.at(id);
                if (n.rank <= q - 1 && n.rank >= p_rank) targets.push_back(id);
                if (caps.max_targets && targets.size() >= *caps.max_targets) break;
            }
            std::vector<Interval> ivals;
            for (std::uint64_t lo = floor_pos + 1; lo <= top; ++lo)
                for (std::uint64_t hi = lo; hi <= top; ++hi) {
                    if (caps.max_interval_len && hi - lo + 1 > *caps.max_interval_len)
                        continue;
                    ivals.push_back(Interval{lo, hi});
                }
            predicted += Int(ivals.size()) * 2 * Int(lambdas.size()) * Int(targets.size());
            if (predicted > caps.budget)
                fail("budget-exceeded",
                     "predicted census " + predicted.str() + " exceeds budget " +
                         std::to_string(caps.budget));
            for (const Interval& I : ivals)
                for (int sign : {-1, 1})
                    for (std::size_t li = 0; li < lambdas.size(); ++li)
                        for (NodeId t : targets)
                            cands.push_back(Cand{j, pred, I, sign, li, t});
        }
    }

    // Validate, then intern survivors into an exactly-sized sealed block.
    std::vector<std::pair<Cand, SparseMap>> ok;
    for (const Cand& c : cands) {
        auto cs = validate_tuple(q, c.pred, c.j, c.I, c.sign, lambdas[c.lam], c.target);
        if (cs) ok.emplace_back(c, std::move(*cs));
    }
    reserve_through(q, ok.empty() ? 1 : ok.size());
    std::vector<NodeId> out;
    out.reserve(ok.size());
    for (auto& [c, cs] : ok)
        out.push_back(
            intern(q, c.pred, c.j, c.I, c.sign, lambdas[c.lam], c.target, std::move(cs)));
    Block& b = blocks_.at(q);
    b.hi = ok.empty() ? b.lo : b.lo + ok.size() - 1;
    b.next = b.hi + 1;
    b.sealed = true;
    if (caps.any() || net.toy) census_capped_ = true;
    return out;
}

bool Registry::neighbours(NodeId a, NodeId b) const {
    if (a == b) return false;
    for (NodeId c = node(a).pred; c != 0; c = node(c).pred)
        if (c == b) return true;
    for (NodeId c = node(b).pred; c != 0; c = node(c).pred)
        if (c == a) return true;
    return false;
}

std::vector<NodeId> Registry::non_neighbour_subset(const std::vector<NodeId>& ids) const {
    std::vector<NodeId> out;
    for (NodeId id : ids) {
        bool ok = true;
        for (NodeId kept : out)
            if (id == kept || neighbours(id, kept)) {
                ok = false;
                break;
            }
        if (ok) out.push_back(id);
    }
    return out;
}

std::string Registry::to_jsonl() const {
    std::string out;
    {
        nlohmann::json hdr;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [r, b] : blocks_)
            arr.push_back({r, b.lo, b.hi, b.next, b.sealed});
        hdr["_blocks"] = arr;
        hdr["_census_capped"] = census_capped_;
        out += hdr.dump();
        out += '\n';
    }
    for (NodeId id : ids_) {
        const Node& n = nodes_.at(id);
        nlohmann::json j;
        j["id"] = n.id;
        j["rank"] = n.rank;
        if (n.pred == 0)
            j["pred"] = nullptr;
        else
            j["pred"] = n.pred;
        j["j"] = n.weight_index;
        j["I"] = {n.ival.lo, n.ival.hi};
        j["eps"] = n.sign;
        j["lambda"] = rat_to_string(n.lambda);
        j["eta"] = n.target;
        j["class"] = node_class_name(n.klass);
        out += j.dump();
        out += '\n';
    }
    return out;
}

void Registry::load_jsonl(const std::string& text) {
    if (ids_.size() != 1 || ids_[0] != 1)
        fail("already-initialized", "load into a registry holding only the base node");
    std::size_t pos = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (j.contains("_blocks")) {
            for (const auto& e : j["_blocks"]) {
                const std::uint64_t r = e[0].get<std::uint64_t>();
                Block b;
                b.lo = e[1].get<std::uint64_t>();
                b.hi = e[2].get<std::uint64_t>();
                b.next = e[3].get<std::uint64_t>();
                b.sealed = e[4].get<bool>();
                if (r != 1) blocks_[r] = b;
            }
            census_capped_ = j.value("_census_capped", false);
            header_seen = true;
            continue;
        }
        if (!header_seen) fail("persistence-error", "missing block header line");
        const NodeId id = j.at("id").get<NodeId>();
        if (id == 1) continue;  // base
        const std::uint64_t rank = j.at("rank").get<std::uint64_t>();
        const NodeId pred = j.at("pred").is_null() ? 0 : j.at("pred").get<NodeId>();
        const std::uint64_t wj = j.at("j").get<std::uint64_t>();
        Interval I{j.at("I")[0].get<std::uint64_t>(), j.at("I")[1].get<std::uint64_t>()};
        const int eps = j.at("eps").get<int>();
        const Rational lam = rat_from_string(j.at("lambda").get<std::string>());
        const NodeId eta = j.at("eta").get<NodeId>();
        auto cstar = validate_tuple(rank, pred, wj, I, eps, lam, eta);
        if (!cstar) fail("persistence-error", "stored node is vacuous on replay");
        Block& b = blocks_.at(rank);
        if (id < b.lo || id > b.hi) fail("persistence-error", "id outside its block");
        const bool sealed = b.sealed;
        b.sealed = false;
        b.next = id;  // ids arrive in ascending order per rank
        intern(rank, pred, wj, I, eps, lam, eta, std::move(*cstar));
        b.sealed = sealed;
        nodes_.at(id).klass = node_class_from_name(j.at("class").get<std::string>());
    }
    std::sort(ids_.begin(), ids_.end());
    // Restore next pointers past the last occupied position.
    for (auto& [r, b] : blocks_) {
        std::uint64_t last = b.lo - 1;
        for (NodeId id : ids_)
            if (id >= b.lo && id <= b.hi && id > last) last = id;
        b.next = std::max(b.next, last + 1);
    }
}

}  // namespace bdforge
