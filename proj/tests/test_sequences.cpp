#include "doctest.h"

#include <nlohmann/json.hpp>

#include "bdforge/error.hpp"
#include "bdforge/functional.hpp"
#include "bdforge/sequences.hpp"

using namespace bdforge;

namespace {

Registry fresh_witness(std::uint64_t K) {
    Registry reg(minimal_schedule(K), Registry::Mode::Witness);
    reg.base_node();
    return reg;
}

Registry fresh_toy(std::uint64_t K) {
    Registry reg(ParamSchedule::toy_rule(K), Registry::Mode::Witness);
    reg.base_node();
    return reg;
}

}  // namespace

TEST_CASE("ris_check: canonical certificates") {
    SUBCASE("singleton unit vector passes with C = 2") {
        auto reg = fresh_witness(2);
        const auto cert = ris_check(reg, {d_basis(1)}, Rational(2), 1);
        CHECK(cert.ok);
        CHECK(cert.failure.empty());
        CHECK(cert.j_seq == std::vector<std::uint64_t>{1});
        CHECK(cert.verified_up_to_rank == 1);
    }
    SUBCASE("empty list and zero vectors are rejected") {
        auto reg = fresh_witness(2);
        CHECK_FALSE(ris_check(reg, {}, Rational(2), 1).ok);
        const auto cert = ris_check(reg, {VectorX{}}, Rational(2), 1);
        CHECK_FALSE(cert.ok);
        CHECK(cert.failure.find("zero") != std::string::npos);
    }
    SUBCASE("adjacent FDD ranges violate the skipped-block rule") {
        auto reg = fresh_witness(3);
        const NodeId a = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, 1);
        const NodeId b = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, 1);
        const auto cert =
            ris_check(reg, {d_basis(a), d_basis(b)}, Rational(2), 3);
        CHECK_FALSE(cert.ok);
        CHECK(cert.failure.find("not skipped") != std::string::npos);
    }
    SUBCASE("skipped pair passes when no low-weight node interferes") {
        auto reg = fresh_witness(3);
        const NodeId u = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, 1);
        const auto cert =
            ris_check(reg, {d_basis(1), d_basis(u)}, Rational(2), 3);
        CHECK(cert.ok);
        CHECK(cert.j_seq == std::vector<std::uint64_t>{1, 2});
        CHECK(cert.condition3_max_observed.empty());
    }
    SUBCASE("condition (3) records and rejects low-weight coordinates") {
        auto reg = fresh_witness(3);
        const NodeId u = reg.make_node(3, 0, 1, Interval{1, 1}, 1, 1, 1);
        const auto cert =
            ris_check(reg, {d_basis(1), d_basis(u)}, Rational(2), 3);
        CHECK_FALSE(cert.ok);
        CHECK(cert.failure.find("condition (3)") != std::string::npos);
        REQUIRE(cert.condition3_max_observed.count(1) == 1);
        // m_1 * |x_2(u)| = 4 * 1.
        CHECK(cert.condition3_max_observed.at(1) == Rational(4));
    }
    SUBCASE("condition (1) rejects an undersized C") {
        auto reg = fresh_witness(2);
        const auto cert = ris_check(reg, {d_basis(1)}, Rational(1, 2), 1);
        CHECK_FALSE(cert.ok);
        CHECK(cert.failure.find("condition (1)") != std::string::npos);
    }
}

TEST_CASE("basis_average: scales and guards") {
    auto reg = fresh_witness(4);
    const NodeId a = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, 1);
    const NodeId b = reg.make_node(4, 0, 2, Interval{1, 1}, 1, 1, 1);
    SUBCASE("weighted and unweighted scales at j = 1") {
        // m_1 = 4, n_1 = 4: weighted scale 1, unweighted 1/4.
        const VectorX w = basis_average(reg, 1, {a, b}, true);
        const VectorX u = basis_average(reg, 1, {a, b}, false);
        CHECK(w.coeffs.size() == 2);
        CHECK(w.coeffs.at(a) == Rational(1));
        CHECK(u.coeffs.at(b) == Rational(1, 4));
        const VectorX single = basis_average(reg, 1, {1}, false);
        CHECK(single.coeffs.at(1) == Rational(1, 4));
    }
    SUBCASE("pred-chain pairs are neighbours and rejected") {
        const NodeId chi2 = reg.make_node(5, a, 2, Interval{b, b}, 1, 1, b);
        CHECK_THROWS_WITH_AS(basis_average(reg, 1, {a, chi2}, false),
                             doctest::Contains("neighbour-pair"), Error);
        CHECK_THROWS_WITH_AS(basis_average(reg, 1, {chi2, chi2}, false),
                             doctest::Contains("neighbour-pair"), Error);
    }
    SUBCASE("size and schedule guards") {
        CHECK_THROWS_WITH_AS(basis_average(reg, 1, {}, false),
                             doctest::Contains("empty-input"), Error);
        CHECK_THROWS_WITH_AS(
            basis_average(reg, 1, std::vector<NodeId>(5, 1), false),
            doctest::Contains("block-overflow"), Error);
        CHECK_THROWS_WITH_AS(basis_average(reg, 7, {1}, false),
                             doctest::Contains("schedule-incomplete"), Error);
    }
}

TEST_CASE("basis_average meets its chain witness at full count") {
    // Desk-scale rule: m_2 = 8, n_2 = 16; sixteen pairwise non-neighbour
    // blocks give the exact evaluation (m_2/n_2) * (16/m_2) = 1.
    auto reg = fresh_toy(40);
    std::vector<NodeId> blocks;
    for (std::uint64_t r = 2; r <= 32; r += 2)
        blocks.push_back(reg.make_node(r, 0, 1, Interval{1, 1}, 1, 1, 1));
    REQUIRE(blocks.size() == 16);
    const WitnessNode wn = witness_node_61b(reg, blocks, 1);
    CHECK_FALSE(wn.toy_count);
    CHECK(wn.value == Rational(2));  // 16 / m_2
    CHECK(wn.lower_bound == wn.value);
    CHECK(reg.age_of(wn.gamma) == 16);
    const VectorX avg = basis_average(reg, 2, blocks, true);
    CHECK(eval(e_star(reg, wn.gamma), avg) == Rational(1));
}

TEST_CASE("witness chains over unit blocks") {
    SUBCASE("spacing and input guards") {
        auto reg = fresh_witness(3);
        CHECK_THROWS_WITH_AS(witness_node_61b(reg, {}, 1),
                             doctest::Contains("empty-input"), Error);
        const NodeId a = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, 1);
        const NodeId b = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, 1);
        CHECK_THROWS_WITH_AS(witness_node_61b(reg, {a, b}, 1),
                             doctest::Contains("rank-spacing"), Error);
    }
    SUBCASE("single node evaluates to 1/m_2 and is flagged toy") {
        auto reg = fresh_witness(3);
        const NodeId a = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, 1);
        const WitnessNode wn = witness_node_61b(reg, {a}, 1);
        CHECK(wn.toy_count);
        CHECK(wn.value == Rational(1, 16));
        CHECK(reg.age_of(wn.gamma) == 1);
    }
}

TEST_CASE("greedy witness attains the exact scaled sum of block maxima") {
    auto reg = fresh_witness(5);
    const NodeId u1 = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, 1);
    const NodeId u2 = reg.make_node(5, 0, 1, Interval{1, 1}, 1, 1, 1);
    SUBCASE("two blocks with mixed signs") {
        const VectorX x1 = d_basis(u1);
        const VectorX x2 = scale_vec(d_basis(u2), Rational(-3));
        const WitnessNode wn = witness_node_61a(reg, {x1, x2}, 1);
        CHECK(wn.toy_count);
        // (|1| + |-3|) / m_2 on both sides of the identity.
        CHECK(wn.value == Rational(1, 4));
        CHECK(wn.lower_bound == wn.value);
        CHECK(reg.age_of(wn.gamma) == 2);
        CHECK(reg.node(wn.gamma).sign == -1);
        CHECK(reg.node(wn.gamma).target == u2);
        // The witness certifies at least half the certified lower norm bound
        // of each block after the m_{2j} discount.
        const auto nb = norm_bounds(reg, x1, 2);
        CHECK(wn.lower_bound >= nb.lo / Rational(2 * 16));
    }
    SUBCASE("single block") {
        const WitnessNode wn = witness_node_61a(reg, {d_basis(u1)}, 1);
        CHECK(wn.value == Rational(1, 16));
        CHECK(reg.age_of(wn.gamma) == 1);
    }
    SUBCASE("adjacent blocks are rejected") {
        const NodeId v = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, 1);
        CHECK_THROWS_WITH_AS(
            witness_node_61a(reg, {d_basis(u1), d_basis(v)}, 1),
            doctest::Contains("not-skipped"), Error);
    }
}

TEST_CASE("dependent sequence builder replays its own certificate") {
    auto reg = fresh_toy(200);
    CodingRegistry coding(reg);
    KusLayer kus(reg, coding);
    const DependentSequence ds = dependent_sequence(kus, 1, 2, {}, {});
    REQUIRE(ds.pairs.size() == 2);
    const NodeId g1 = ds.pairs[0].first;
    const NodeId g2 = ds.pairs[1].first;

    SUBCASE("shape of the two steps") {
        // Step 1 picks the least m_{4l-2} above n_1^2 = 64, i.e. weight
        // index 6; two blocks at ranks 6 and 8, chain top at rank 9.
        CHECK(reg.node(g1).rank == 10);
        CHECK(reg.node(g1).weight_index == 1);
        CHECK(reg.node(reg.node(g1).target).rank == 9);
        // The coded prefix value is 4*8 + 1 = 33, so step 2 uses weight
        // index 132.
        CHECK(reg.node(g2).rank == 136);
        CHECK(reg.node(reg.node(g2).target).rank == 135);
        CHECK(reg.node(reg.node(g2).target).weight_index == 132);
        CHECK(reg.node(g2).pred == g1);
    }
    SUBCASE("membership and certificate") {
        CHECK(reg.node(g1).klass == NodeClass::Special);
        CHECK(reg.node(g2).klass == NodeClass::Special);
        CHECK(kus.in_gamma(reg.node(g2).target));
        const auto rep = kus.is_special_sequence(ds.special);
        CHECK(rep.ok);
        CHECK(rep.toy_truncated);
        CHECK(ds.special.pairs[0].zeta == g1);
        CHECK(ds.special.pairs[1].zeta == g2);
    }
    SUBCASE("odd-step normalization is exact") {
        REQUIRE(ds.c_k.size() == 2);
        CHECK(ds.c_k[0] == Rational(1, 128));
        CHECK(ds.c_k[1] == Rational(1));
        const VectorX& x1 = ds.pairs[0].second;
        const auto nb = norm_bounds(reg, x1, rng_fdd(reg, x1).hi);
        CHECK(nb.lo == Rational(1, 2));
        CHECK(nb.hi == Rational(1));
    }
    SUBCASE("even-step coefficient snaps to the reference exactly") {
        CHECK(reg.node(g1).lambda == Rational(1));
        const Rational ref =
            lambda_gamma_x(reg, g1, ds.special.pairs[0].xbar);
        CHECK(reg.node(g2).lambda == ref);
        CHECK(ref == Rational(1, 128));
    }
    SUBCASE("even-step vector already lives inside Gamma") {
        const VectorX& x2 = ds.pairs[1].second;
        CHECK(kus.restrict_R(x2).coeffs == x2.coeffs);
    }
    SUBCASE("conformance notes record the desk-scale gaps") {
        bool truncated = false;
        for (const auto& n : ds.conformance)
            if (n.find("truncated") != std::string::npos) truncated = true;
        CHECK(truncated);
        CHECK_FALSE(ds.conformance.empty());
    }
    SUBCASE("serialization round-trips through JSON") {
        const auto j = nlohmann::json::parse(dependent_sequence_to_json(ds));
        CHECK(j["j"] == 1);
        CHECK(j["pairs"].size() == 2);
        CHECK(j["c_k"][0] == "1/128");
        CHECK(j["conformance"].size() == ds.conformance.size());
    }
}

TEST_CASE("dependent sequence builder guards") {
    auto reg = fresh_toy(30);
    CodingRegistry coding(reg);
    KusLayer kus(reg, coding);
    CHECK_THROWS_WITH_AS(dependent_sequence(kus, 0, 1, {}, {}),
                         doctest::Contains("empty-input"), Error);
    CHECK_THROWS_WITH_AS(dependent_sequence(kus, 1, 0, {}, {}),
                         doctest::Contains("empty-input"), Error);
    MaterialSource odd_weight;
    odd_weight.block_weight_index = 3;
    CHECK_THROWS_WITH_AS(dependent_sequence(kus, 1, 1, odd_weight, {}),
                         doctest::Contains("invalid-weight"), Error);
    // The coded weight 4*33 = 132 falls outside this explicit schedule.
    CHECK_THROWS_WITH_AS(dependent_sequence(kus, 1, 2, {}, {}),
                         doctest::Contains("needs-closed-form-schedule"), Error);
}

TEST_CASE("alternating audit reports exact toy-scale intervals") {
    SUBCASE("length one") {
        auto reg = fresh_toy(40);
        CodingRegistry coding(reg);
        KusLayer kus(reg, coding);
        const DependentSequence ds = dependent_sequence(kus, 1, 1, {}, {});
        const AlternatingReport rep = alternating_audit(kus, ds);
        CHECK(rep.alt_lo == Rational(1, 2));
        CHECK(rep.alt_hi == Rational(1));
        CHECK(rep.alt_bound == Rational(250, 16));
        CHECK(rep.alt_bound_observed);
        CHECK(rep.toy);
        // m_1 * e*_{gamma_1}(x_1) evaluated through the chain.
        CHECK(rep.plus_witness == Rational(1, 128));
        CHECK(rep.plus_lo >= rep.plus_witness);
        CHECK_FALSE(rep.notes.empty());
    }
    SUBCASE("length two") {
        auto reg = fresh_toy(200);
        CodingRegistry coding(reg);
        KusLayer kus(reg, coding);
        const DependentSequence ds = dependent_sequence(kus, 1, 2, {}, {});
        const AlternatingReport rep = alternating_audit(kus, ds);
        CHECK(rep.alt_lo > 0);
        CHECK(rep.alt_hi >= rep.alt_lo);
        // The unnormalized even step dominates; the bound is observational.
        CHECK_FALSE(rep.alt_bound_observed);
        CHECK(rep.toy);
        CHECK(rep.plus_witness != 0);
        CHECK(rep.plus_lo >= rat_abs(rep.plus_witness));
    }
}
