#include "doctest.h"

#include "bdforge/error.hpp"
#include "bdforge/space.hpp"

using namespace bdforge;

namespace {

Registry small_universe() {
    Registry reg(minimal_schedule(3), Registry::Mode::Universe);
    reg.base_node();
    EnumCaps caps;
    caps.net_cap = 5;
    reg.enumerate_delta(2, caps);
    caps.max_interval_len = 2;
    caps.max_targets = 2;
    reg.enumerate_delta(3, caps);
    return reg;
}

}  // namespace

TEST_CASE("biorthogonality is the exact identity matrix") {
    auto reg = small_universe();
    for (NodeId i : reg.ids())
        for (NodeId j : reg.ids())
            CHECK(eval(d_star(i), d_basis(j)) == (i == j ? 1 : 0));
}

TEST_CASE("eval, coordinate, and projection identities") {
    auto reg = small_universe();
    const NodeId g = reg.ids().back();
    CHECK(coordinate(reg, d_basis(g), g) == 1);
    // Coordinates below the support vanish by triangularity.
    VectorX x = d_basis(g);
    for (NodeId id : reg.ids()) {
        if (id >= g) break;
        const Rational c = coordinate(reg, x, id);
        CHECK(c == 0);
    }
    // Projection compatibility between the d- and d*-sides.
    const Interval I{2, reg.max_gamma(2)};
    VectorX y = make_vector(
        {{1, Rational(3)}, {g, Rational(-1, 2)}, {g - 1, Rational(5, 7)}});
    for (NodeId id : reg.ids())
        CHECK(coordinate(reg, project(y, I), id) ==
              eval(proj_star(e_star(reg, id), I), y));
    CHECK(project(y, Interval{1, reg.max_gamma(99)}).coeffs == y.coeffs);
    CHECK(project(y, Interval{1, 0}).zero());
}

TEST_CASE("skipped block sequences") {
    auto reg = small_universe();
    const Interval d2 = reg.delta_interval(2);
    const Interval d3 = reg.delta_interval(3);
    const VectorX a = d_basis(1);
    const VectorX b = d_basis(d2.lo);
    const VectorX c = d_basis(d3.lo);
    CHECK(is_skipped(reg, {a}));            // singleton, vacuous
    CHECK(is_skipped(reg, {a, c}));         // ranks 1 and 3 skip rank 2
    CHECK_FALSE(is_skipped(reg, {a, b}));   // adjacent ranks
    CHECK_FALSE(is_skipped(reg, {b, c}));
    CHECK_THROWS_WITH_AS(is_skipped(reg, {}), doctest::Contains("zero-vector"),
                         Error);
}

TEST_CASE("local support") {
    auto reg = small_universe();
    CHECK(local_support(reg, d_basis(1)) == std::set<NodeId>{1});
    const NodeId g = reg.delta_interval(2).lo;
    const auto ls = local_support(reg, d_basis(g));
    CHECK(ls.count(g) == 1);
    for (NodeId id : ls) CHECK(reg.node(id).rank <= 2);
    CHECK_THROWS_WITH_AS(local_support(reg, VectorX{}),
                         doctest::Contains("zero-vector"), Error);
}

TEST_CASE("norm bounds are certified intervals") {
    auto reg = small_universe();
    const auto nb = norm_bounds(reg, d_basis(1), reg.max_rank_touched());
    CHECK(nb.lo >= 1);
    CHECK(nb.hi <= 2);
    CHECK(nb.lo <= nb.hi);
    CHECK(nb.lo_witness != 0);

    const VectorX x = make_vector({{reg.delta_interval(2).lo, Rational(-7, 3)}});
    const auto nx = norm_bounds(reg, x, 3);
    CHECK(nx.lo >= Rational(7, 3));  // own coordinate witness
    // Monotonicity: more witnesses never lower lo, never change hi.
    const auto n2 = norm_bounds(reg, x, 2);
    CHECK(n2.lo <= nx.lo);
    CHECK(n2.hi == nx.hi);

    CHECK_THROWS_WITH_AS(norm_bounds(reg, x, 1),
                         doctest::Contains("cutoff-too-low"), Error);
    CHECK_THROWS_WITH_AS(norm_bounds(reg, VectorX{}, 3),
                         doctest::Contains("zero-vector"), Error);
}

TEST_CASE("vector JSON round trip") {
    const VectorX x = make_vector({{1, Rational(1, 3)}, {9, Rational(-4)}});
    CHECK(vector_from_json(vector_to_json(x)).coeffs == x.coeffs);
    CHECK(make_vector({{5, Rational(0)}}).zero());
}
