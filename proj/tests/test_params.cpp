#include "doctest.h"

#include <algorithm>

#include "bdforge/error.hpp"
#include "bdforge/params.hpp"

using namespace bdforge;

TEST_CASE("closed-form rule conforms through K=3") {
    const auto ps = ParamSchedule::closed_form();
    CHECK(ps.m(1) == 4);
    CHECK(ps.n(1) == 4);
    CHECK(ps.l(1) == 2);
    CHECK(ps.m(2) == 16);
    CHECK(ps.l(3) == 8);
    const auto rep = validate_schedule(ps, 3);
    CHECK(rep.conforming);
    for (const auto& e : rep.entries) {
        CHECK(e.first_ok);
        CHECK(e.second_ok);
    }
    // Values beyond the bit budget refuse materialization but still validate.
    CHECK_THROWS_WITH_AS(ps.n(5), doctest::Contains("value-too-large"), Error);
    CHECK(validate_schedule(ps, 12).conforming);
}

TEST_CASE("explicit schedules validate by direct arithmetic") {
    const auto good = ParamSchedule::explicit_list({4, 16}, {4, 64}, {2, 3});
    CHECK(validate_schedule(good, 2).conforming);

    const auto bad = ParamSchedule::explicit_list({4, 32}, {4, 64}, {2, 3});
    const auto rep = validate_schedule(bad, 2);
    CHECK_FALSE(rep.conforming);
    REQUIRE(rep.entries.size() == 1);
    CHECK(rep.entries[0].k == 2);
    CHECK_FALSE(rep.entries[0].first_ok);  // 32*4 = 128 > 64 = 4^3

    CHECK_THROWS_WITH_AS(validate_schedule(good, 3),
                         doctest::Contains("schedule-incomplete"), Error);
}

TEST_CASE("minimal_schedule matches the exhaustive-search oracle") {
    const auto k1 = minimal_schedule(1);
    CHECK(k1.m(1) == 4);
    CHECK(k1.n(1) == 4);
    CHECK(k1.l(1) == 2);

    const auto k2 = minimal_schedule(2);
    CHECK(k2.m(2) == 16);
    CHECK(k2.n(2) == 64);
    CHECK(k2.l(2) == 3);
    CHECK(validate_schedule(k2, 2).conforming);

    // Oracle: smallest (l2, m2, n2) lexicographically with strict increase,
    // the growth rule m2 >= m1^2, and both schedule inequalities.
    bool found = false;
    for (Int l2 = 3; !found && l2 <= 8; ++l2)
        for (Int m2 = 16; !found && m2 <= 256; ++m2)
            for (Int n2 = 5; !found && n2 <= 65536; ++n2) {
                if (Rational(m2 * 4) > rat_pow(Rational(4), l2)) continue;
                if (rat_pow(Rational(1), l2) > Rational(n2, 4 * m2)) continue;
                CHECK(l2 == k2.l(2));
                CHECK(m2 == k2.m(2));
                CHECK(n2 == k2.n(2));
                found = true;
            }
    CHECK(found);

    const auto k3 = minimal_schedule(3);
    CHECK(validate_schedule(k3, 3).conforming);
    CHECK(k3.m(3) * 16 <= rat_pow(Rational(4), k3.l(3)));
    CHECK(rat_pow(Rational(64, 16), k3.l(3)) <= Rational(k3.n(3), 16 * k3.m(3)));
}

TEST_CASE("toy rule is flagged non-conforming") {
    const auto ps = ParamSchedule::toy_rule(4);
    CHECK(ps.m(1) == 4);
    CHECK(ps.n(1) == 8);
    const auto rep = validate_schedule(ps, 4);
    CHECK_FALSE(rep.base_standard);
    CHECK_FALSE(rep.conforming);
}

TEST_CASE("nets are symmetric sorted grids") {
    const auto ps = minimal_schedule(1);
    const auto net = build_net(ps, 1);
    CHECK(net.points.size() == 129);  // 2*4*n_1^2 + 1
    CHECK(net.mesh == Rational(1, 64));
    CHECK_FALSE(net.toy);
    CHECK(std::is_sorted(net.points.begin(), net.points.end()));
    CHECK(std::adjacent_find(net.points.begin(), net.points.end()) ==
          net.points.end());
    CHECK(net.points.front() == -1);
    CHECK(net.points.back() == 1);
    for (const auto& p : net.points)
        CHECK(std::find(net.points.begin(), net.points.end(), -p) !=
              net.points.end());

    const auto capped = build_net(ps, 1, 5);
    REQUIRE(capped.points.size() == 5);
    CHECK(capped.points[0] == -1);
    CHECK(capped.points[1] == Rational(-1, 2));
    CHECK(capped.points[2] == 0);
    CHECK(capped.points[3] == Rational(1, 2));
    CHECK(capped.points[4] == 1);
    CHECK(capped.toy);

    CHECK_THROWS_WITH_AS(build_net(ps, 1, 2), doctest::Contains("invalid-cap"),
                         Error);
}

TEST_CASE("net membership without materialization") {
    const auto ps = minimal_schedule(2);
    CHECK(net_contains(ps, 1, std::nullopt, Rational(1, 64)));
    CHECK(net_contains(ps, 1, std::nullopt, Rational(-1)));
    CHECK(net_contains(ps, 1, std::nullopt, Rational(0)));
    CHECK_FALSE(net_contains(ps, 1, std::nullopt, Rational(1, 3)));
    CHECK_FALSE(net_contains(ps, 1, std::nullopt, Rational(3, 2)));
    CHECK(net_contains(ps, 1, 5, Rational(1, 2)));
    CHECK_FALSE(net_contains(ps, 1, 5, Rational(1, 64)));
    // Capped nets stay on the conforming grid when the mesh divides evenly.
    const auto net = build_net(ps, 1, 5);
    CHECK(net.grid_subset);
}

TEST_CASE("schedule JSON round trip") {
    const auto ps = minimal_schedule(2);
    const auto back = ParamSchedule::from_json(ps.to_json(2));
    CHECK(back.m(2) == 16);
    CHECK(back.n(2) == 64);
    CHECK(back.l(2) == 3);
    const auto cf = ParamSchedule::from_json(ParamSchedule::closed_form().to_json());
    CHECK(cf.closed());
}
