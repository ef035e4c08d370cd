#include "doctest.h"

#include "bdforge/error.hpp"
#include "bdforge/special.hpp"

using namespace bdforge;

namespace {

// Witness registry on the desk-scale rule, wide enough for the sigma-driven
// weight 4*sigma = 20 that the fixtures below produce.
struct Fixture {
    Registry reg{ParamSchedule::toy_rule(24), Registry::Mode::Witness};
    NodeId base = 0;
    // First pair: eta1 has weight index 6 (m_6 = 128 > n_1^2 = 64).
    NodeId eta1 = 0, zeta1 = 0;
    VectorX x1;
    // Regular blocks and the weight-20 chains over them.
    NodeId b1 = 0, b2 = 0, chi1 = 0, chi2 = 0;
    NodeId zeta2 = 0;
    VectorX x2;

    Fixture() {
        base = reg.base_node();
        eta1 = reg.make_node(7, 0, 6, Interval{1, 1}, 1, 1, base);
        zeta1 = reg.make_node(8, 0, 1, reg.delta_interval(7), 1, 1, eta1);
        x1 = scale_vec(d_basis(base), Rational(1, 2));
        b1 = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, base);
        b2 = reg.make_node(21, 0, 2, Interval{b1, b1}, 1, 1, b1);
        chi1 = reg.make_node(21, 0, 20, Interval{b1, b1}, 1, 1, b1);
        chi2 = reg.make_node(22, chi1, 20, Interval{b2, b2}, 1, 1, b2);
        zeta2 = reg.make_node(23, zeta1, 1, reg.delta_interval(22), 1,
                              Rational(1, 256), chi2);
        // Truncated prescribed average over the two blocks: scale m_20/2.
        SparseMap c;
        c[b1] = Rational(Int(1) << 20);
        c[b2] = Rational(Int(1) << 20);
        x2 = make_vector(std::move(c));
    }

    SpecialSequence seq1() const { return {1, {{zeta1, x1}}}; }
    SpecialSequence seq2() const { return {1, {{zeta1, x1}, {zeta2, x2}}}; }
};

}  // namespace

TEST_CASE("sigma: growth bound, injectivity, determinism") {
    Registry reg(ParamSchedule::toy_rule(12), Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    const NodeId t10 = reg.make_node(10, 0, 2, Interval{1, 1}, 1, 1, base);
    const NodeId zs = reg.make_node(11, 0, 1, Interval{t10, t10}, 1, 1, t10);
    const VectorX x = d_basis(t10);

    CodingRegistry coding(reg);
    // m_1 = 4, max rng_FDD = 10: first value is exactly 4*10 + 1 = 41.
    const auto v1 = coding.assign({{zs, x}});
    CHECK(v1 == 41);
    CHECK(coding.assign({{zs, x}}) == v1);  // deterministic replay
    CHECK(coding.lookup({{zs, x}}) == v1);
    const auto v2 = coding.assign({{zs, scale_vec(x, 2)}});
    CHECK(v2 > v1);  // injective via the monotone counter
    CHECK(coding.counter() == v2);

    // Persistence round trip reproduces values and the counter.
    CodingRegistry fresh(reg);
    fresh.load_jsonl(coding.to_jsonl());
    CHECK(fresh.lookup({{zs, x}}) == v1);
    CHECK(fresh.lookup({{zs, scale_vec(x, 2)}}) == v2);
    CHECK(fresh.counter() == v2);
    CHECK(fresh.assign({{zs, scale_vec(x, 3)}}) > v2);
}

TEST_CASE("sigma: membership in Q is enforced") {
    Registry reg(ParamSchedule::toy_rule(24), Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    const NodeId t10 = reg.make_node(10, 0, 2, Interval{1, 1}, 1, 1, base);
    const NodeId t21 = reg.make_node(21, 0, 2, Interval{t10, t10}, 1, 1, t10);
    const NodeId zs = reg.make_node(11, 0, 1, Interval{t10, t10}, 1, 1, t10);
    CodingRegistry coding(reg);

    CHECK_THROWS_WITH_AS(coding.assign({}), doctest::Contains("not-in-Q"), Error);
    CHECK_THROWS_WITH_AS(coding.assign({{zs, VectorX{}}}),
                         doctest::Contains("not-in-Q"), Error);
    CHECK_THROWS_WITH_AS(coding.assign({{base, d_basis(t10)}}),
                         doctest::Contains("not-in-Q"), Error);
    // rank(zeta) below min rng_FDD of the vector.
    CHECK_THROWS_WITH_AS(coding.assign({{zs, d_basis(t21)}}),
                         doctest::Contains("not-in-Q"), Error);
    // Non-successive pair vectors.
    const NodeId z2 = reg.make_node(22, 0, 1, Interval{t21, t21}, 1, 1, t21);
    CHECK_THROWS_WITH_AS(
        coding.assign({{zs, d_basis(t10)}, {z2, d_basis(t10)}}),
        doctest::Contains("not-in-Q"), Error);
}

TEST_CASE("sigma: growth bound overflow is refused") {
    const auto ps = ParamSchedule::explicit_list(
        {4, (Int(1) << 62) + 1}, {4, 8}, {2, 3});
    Registry reg(ps, Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    const NodeId z = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, base);
    CodingRegistry coding(reg);
    CHECK_THROWS_WITH_AS(coding.assign({{z, d_basis(base)}}),
                         doctest::Contains("value-too-large"), Error);
}

TEST_CASE("lambda_gamma_x branches") {
    Registry reg(minimal_schedule(2), Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    const NodeId gneg =
        reg.make_node(2, 0, 1, Interval{1, 1}, -1, Rational(1, 2), base);
    const NodeId gpos =
        reg.make_node(2, 0, 1, Interval{1, 1}, 1, Rational(1, 2), base);

    // Nonzero coordinate 3/4 with eps = -1.
    CHECK(lambda_gamma_x(reg, gneg, scale_vec(d_basis(base), Rational(3, 4))) ==
          Rational(-3, 4));
    // Zero coordinate falls back to eps / n_k^2 with n_1 = 4.
    CHECK(lambda_gamma_x(reg, gpos, VectorX{}) == Rational(1, 16));
    CHECK(lambda_gamma_x(reg, gneg, d_basis(gneg)) == Rational(-1, 16));
    CHECK_THROWS_WITH_AS(lambda_gamma_x(reg, base, VectorX{}),
                         doctest::Contains("no-analysis"), Error);
}

TEST_CASE("compatible tree analyses: reflexive, symmetric, CT checks") {
    Registry reg(minimal_schedule(3), Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    const NodeId a = reg.make_node(3, 0, 1, Interval{1, 1}, 1, 1, base);
    const NodeId aflip = reg.make_node(3, 0, 1, Interval{1, 1}, -1, 1, base);
    const NodeId b = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, base);

    CHECK(compatible_tree_analyses(reg, base, base).ok);
    CHECK(compatible_tree_analyses(reg, base, a).first_violation == "CT1");
    for (NodeId u : {a, aflip, b}) CHECK(compatible_tree_analyses(reg, u, u).ok);
    // Sign flip preserves the tree shape and every per-node record.
    CHECK(compatible_tree_analyses(reg, a, aflip).ok);
    // Equal shape, different weight: first failure is CT2.
    const auto cert = compatible_tree_analyses(reg, a, b);
    CHECK_FALSE(cert.ok);
    CHECK(cert.first_violation == "CT2");
    // Symmetry on every tested pair.
    for (NodeId u : {a, aflip, b})
        for (NodeId v : {a, aflip, b}) {
            const auto uv = compatible_tree_analyses(reg, u, v);
            const auto vu = compatible_tree_analyses(reg, v, u);
            CHECK(uv.ok == vu.ok);
            CHECK(uv.first_violation == vu.first_violation);
        }
}

TEST_CASE("regular membership and the restriction operator") {
    Registry reg(ParamSchedule::toy_rule(8), Registry::Mode::Witness);
    const NodeId base = reg.base_node();
    CodingRegistry coding(reg);
    KusLayer kus(reg, coding);

    CHECK(kus.in_gamma(base));
    const NodeId r1 = reg.make_node(3, 0, 2, Interval{1, 1}, 1, 1, base);
    CHECK(kus.accept_regular(r1));
    CHECK(kus.in_gamma(r1));
    CHECK(reg.node(r1).klass == NodeClass::Regular);
    CHECK(kus.self_determined_check(r1));

    // Odd weight is never regular; a regular tuple over an excluded eta fails.
    const NodeId odd = reg.make_node(2, 0, 1, Interval{1, 1}, 1, 1, base);
    CHECK_FALSE(kus.accept_regular(odd));
    const NodeId over =
        reg.make_node(5, 0, 2, Interval{odd, odd}, 1, 1, odd);
    CHECK_FALSE(kus.accept_regular(over));
    CHECK_FALSE(kus.in_gamma(over));
    CHECK_FALSE(kus.self_determined_check(over));

    // R drops excluded coordinates and is idempotent.
    CHECK(kus.restrict_R(d_basis(over)).zero());
    const VectorX mix = add_vec(d_basis(r1), d_basis(over));
    const VectorX once = kus.restrict_R(mix);
    CHECK(once.coeffs == d_basis(r1).coeffs);
    CHECK(kus.restrict_R(once).coeffs == once.coeffs);
    const SparseFunctional f = e_star(reg, over);
    const auto rf = kus.restrict_R(f);
    CHECK(kus.restrict_R(rf).coeffs == rf.coeffs);
}

TEST_CASE("special sequences: structural clauses") {
    Fixture fx;
    CodingRegistry coding(fx.reg);
    KusLayer kus(fx.reg, coding);
    REQUIRE(kus.accept_regular(fx.eta1));
    REQUIRE(kus.accept_regular(fx.b1));
    REQUIRE(kus.accept_regular(fx.b2));
    REQUIRE(kus.accept_regular(fx.chi1));
    REQUIRE(kus.accept_regular(fx.chi2));

    // Length-1 sequence: first-weight rule and the odd clause pass.
    const auto rep1 = kus.is_special_sequence(fx.seq1());
    CHECK(rep1.ok);
    CHECK_FALSE(rep1.toy_truncated);

    // sigma for the prefix drives the even-entry weight: 4 * 5 = 20.
    CHECK(coding.assign({{fx.zeta1, fx.x1}}) == 5);
    const auto rep2 = kus.is_special_sequence(fx.seq2());
    CHECK(rep2.ok);
    CHECK(rep2.toy_truncated);  // 2 blocks instead of n_20

    // Odd entry with lambda != 1 violates (iii).
    const NodeId zbad = fx.reg.make_node(8, 0, 1, fx.reg.delta_interval(7), 1,
                                         Rational(1, 2), fx.eta1);
    const auto bad3 = kus.is_special_sequence({1, {{zbad, fx.x1}}});
    CHECK_FALSE(bad3.ok);
    REQUIRE(!bad3.violations.empty());
    CHECK(bad3.violations.front().find("(iii)") != std::string::npos);

    // First weight not of the form m_{4l-2} violates (ii).
    const NodeId eta4 =
        fx.reg.make_node(7, 0, 4, Interval{1, 1}, 1, 1, fx.base);
    REQUIRE(kus.accept_regular(eta4));
    const NodeId z4 =
        fx.reg.make_node(8, 0, 1, fx.reg.delta_interval(7), 1, 1, eta4);
    const auto bad2 = kus.is_special_sequence({1, {{z4, fx.x1}}});
    CHECK_FALSE(bad2.ok);
    CHECK(bad2.violations.front().find("(ii)") != std::string::npos);

    // m_{4l-2} <= n_{2j-1}^2 also violates (ii): weight 2 gives m_2 = 8 <= 64.
    const NodeId eta2 =
        fx.reg.make_node(7, 0, 2, Interval{1, 1}, 1, 1, fx.base);
    REQUIRE(kus.accept_regular(eta2));
    const NodeId z2 =
        fx.reg.make_node(8, 0, 1, fx.reg.delta_interval(7), 1, 1, eta2);
    const auto bad22 = kus.is_special_sequence({1, {{z2, fx.x1}}});
    CHECK_FALSE(bad22.ok);
    CHECK(bad22.violations.front().find("(ii)") != std::string::npos);
}

TEST_CASE("special sequences: neighbouring blocks violate (iv)") {
    Fixture fx;
    CodingRegistry coding(fx.reg);
    KusLayer kus(fx.reg, coding);
    REQUIRE(kus.accept_regular(fx.eta1));
    REQUIRE(kus.accept_regular(fx.b1));
    coding.assign({{fx.zeta1, fx.x1}});

    // b2n extends the chain of b1, so the two blocks are neighbours.
    const NodeId b2n =
        fx.reg.make_node(21, fx.b1, 2, Interval{fx.b1, fx.b1}, 1, 1, fx.b1);
    const NodeId chi2n =
        fx.reg.make_node(22, fx.chi1, 20, Interval{b2n, b2n}, 1, 1, b2n);
    const NodeId z2n = fx.reg.make_node(23, fx.zeta1, 1,
                                        Interval{chi2n, chi2n}, 1,
                                        Rational(1, 256), chi2n);
    SparseMap c;
    c[fx.b1] = Rational(Int(1) << 20);
    c[b2n] = Rational(Int(1) << 20);
    const auto rep =
        kus.is_special_sequence({1, {{fx.zeta1, fx.x1}, {z2n, make_vector(std::move(c))}}});
    CHECK_FALSE(rep.ok);
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.find("neighbours") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("special membership: certificates, compatibility, replacements") {
    Fixture fx;
    CodingRegistry coding(fx.reg);
    KusLayer kus(fx.reg, coding);
    REQUIRE(kus.accept_regular(fx.eta1));
    REQUIRE(kus.accept_regular(fx.b1));
    REQUIRE(kus.accept_regular(fx.b2));
    REQUIRE(kus.accept_regular(fx.chi1));
    REQUIRE(kus.accept_regular(fx.chi2));
    coding.assign({{fx.zeta1, fx.x1}});

    std::string why;
    CHECK(kus.accept_special(fx.zeta1, fx.seq1(), &why));
    CHECK(kus.accept_special(fx.zeta2, fx.seq2(), &why));
    CHECK(fx.reg.node(fx.zeta2).klass == NodeClass::Special);
    CHECK(kus.in_gamma(fx.zeta2));
    CHECK(kus.self_determined_check(fx.zeta1));
    CHECK(kus.self_determined_check(fx.zeta2));

    // Even-age node with eps = -1 is incompatible.
    const NodeId zneg = fx.reg.make_node(23, fx.zeta1, 1,
                                         fx.reg.delta_interval(22), -1,
                                         Rational(1, 256), fx.chi2);
    CHECK_FALSE(kus.node_compatible_with(zneg, fx.seq2(), &why));
    CHECK(why.find("epsilon") != std::string::npos);
    CHECK_FALSE(kus.accept_special(zneg, fx.seq2()));

    // Age-1 node whose eta fails CT2 against eta_1 is incompatible.
    const NodeId eta4 =
        fx.reg.make_node(7, 0, 4, Interval{1, 1}, 1, 1, fx.base);
    REQUIRE(kus.accept_regular(eta4));
    const NodeId zct = fx.reg.make_node(8, 0, 1, fx.reg.delta_interval(7), 1,
                                        1, eta4);
    CHECK_FALSE(kus.node_compatible_with(zct, fx.seq1(), &why));
    CHECK(why.find("tree analyses differ") != std::string::npos);

    // Replacement constructions: a sign-flipped sibling target at odd age and
    // a net-perturbed lambda at even age stay compatible at the same rank.
    const NodeId eta1b =
        fx.reg.make_node(7, 0, 6, Interval{1, 1}, -1, 1, fx.base);
    REQUIRE(kus.accept_regular(eta1b));
    const NodeId ztilde = fx.reg.make_node(8, 0, 1, fx.reg.delta_interval(7),
                                           1, 1, eta1b);
    CHECK(kus.node_compatible_with(ztilde, fx.seq1(), &why));
    CHECK(fx.reg.node(ztilde).rank == fx.reg.node(fx.zeta1).rank);
    const Rational lam = Rational(1, 256) + Rational(1, Int(1) << 50);
    const NodeId z2tilde = fx.reg.make_node(23, fx.zeta1, 1,
                                            fx.reg.delta_interval(22), 1, lam,
                                            fx.chi2);
    CHECK(kus.node_compatible_with(z2tilde, fx.seq2(), &why));
    CHECK(fx.reg.node(z2tilde).rank == fx.reg.node(fx.zeta2).rank);

    // A sequence with the wrong j is rejected up front.
    SpecialSequence wrongj = fx.seq2();
    wrongj.j = 2;
    CHECK_FALSE(kus.accept_special(fx.reg.make_node(
                                       23, fx.zeta1, 1, fx.reg.delta_interval(22),
                                       1, Rational(3, 256), fx.chi2),
                                   wrongj, &why));
    CHECK(why.find("j") != std::string::npos);
}
