#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lcsync/errors.hpp"
#include "support.hpp"

using namespace lcsync;
using lcsync::test::cycle;
using lcsync::test::field;
using lcsync::test::vdp;

TEST_SUITE("curves")
{
    TEST_CASE("switching curves lie on their side of the plane")
    {
        const auto sw = switching_curves(field(2.0, Region::exterior));
        REQUIRE(!sw.plus.points.empty());
        REQUIRE(!sw.minus.points.empty());
        for (const auto& p : sw.plus.points) {
            CHECK(p.x1 > 0.0);
        }
        for (const auto& p : sw.minus.points) {
            CHECK(p.x1 < 0.0);
        }
    }

    TEST_CASE("crossing counts of the critical trajectory")
    {
        const auto& lc = *cycle();
        CHECK(critical_crossings(vdp(), lc, Region::exterior, ForceBound(2.0)).empty());
        CHECK(critical_crossings(vdp(), lc, Region::exterior, ForceBound(0.2)).size() == 2);
        CHECK(critical_crossings(vdp(), lc, Region::interior, ForceBound(0.5)).size() == 4);
    }

    TEST_CASE("critical K brackets the change in crossing count")
    {
        const auto& lc = *cycle();
        const double Kc = critical_K(vdp(), lc, 2, Region::exterior, 0.2, 0.5, 1e-6);
        CHECK(critical_crossings(vdp(), lc, Region::exterior, ForceBound(Kc - 1e-5)).size() >= 2);
        CHECK(critical_crossings(vdp(), lc, Region::exterior, ForceBound(Kc + 1e-5)).size() < 2);
        CHECK_THROWS_AS(critical_K(vdp(), lc, 2, Region::exterior, 0.5, 1.0), DomainError);
    }

    TEST_CASE("crossing parameters put the n-th crossing at the requested point")
    {
        const auto& lc = *cycle();
        const auto Ks = crossing_parameters(vdp(), lc, Region::exterior, 1, 5.0, 0.3, 1.0);
        REQUIRE(Ks.size() == 1);
        const auto xs = critical_crossings(vdp(), lc, Region::exterior, ForceBound(Ks[0]));
        REQUIRE(!xs.empty());
        CHECK(xs[0] == doctest::Approx(5.0).epsilon(1e-5));
    }

    TEST_CASE("crossing parameters find roots between a scan point and the birth of the crossing")
    {
        // With 4 scan points on [0.2, 0.3] the second crossing is below 5 at
        // 0.2 and 0.2333 and does not exist yet at 0.2667 and 0.3.
        const auto& lc = *cycle();
        const auto Ks = crossing_parameters(vdp(), lc, Region::exterior, 2, 5.0, 0.2, 0.3, 4);
        REQUIRE(Ks.size() == 1);
        const double Kc2 = critical_K(vdp(), lc, 2, Region::exterior, 0.2, 0.3, 1e-6);
        CHECK(Ks[0] < Kc2);
        CHECK(Ks[0] > 0.2333);
        const auto xs = critical_crossings(vdp(), lc, Region::exterior, ForceBound(Ks[0]));
        REQUIRE(xs.size() == 2);
        CHECK(xs[1] == doctest::Approx(5.0).epsilon(1e-4));
    }

    TEST_CASE("critical curves are monotone in the exterior")
    {
        const auto curves = critical_curves(vdp(), *cycle(), Region::exterior, {0.2, 0.3, 0.5, 0.8}, 2);
        REQUIRE(curves.size() == 2);
        for (const auto& c : curves) {
            for (std::size_t i = 1; i < c.points.size(); ++i) {
                CHECK(c.points[i - 1].first < c.points[i].first);
                CHECK(c.points[i - 1].second < c.points[i].second);
            }
        }
    }

    TEST_CASE("coexistence curve passes through the origin")
    {
        const auto bc = coexistence_curve(field(2.0, Region::interior));
        REQUIRE(!bc.branches.empty());
        CHECK(bc.max_time_gap < 1e-5);
        // Distance from the origin to the polyline, segment by segment.
        double nearest = 1e9;
        for (const auto& b : bc.branches) {
            for (std::size_t i = 0; i < b.points.size(); ++i) {
                const PhasePoint p = b.points[i];
                CHECK(cycle()->chi(p) < 0.0);
                if (i == 0) {
                    continue;
                }
                const PhasePoint q = b.points[i - 1];
                const double dx = p.x1 - q.x1, dy = p.x2 - q.x2;
                const double s = std::clamp(-(q.x1 * dx + q.x2 * dy) / (dx * dx + dy * dy), 0.0, 1.0);
                nearest = std::min(nearest, std::hypot(q.x1 + s * dx, q.x2 + s * dy));
            }
        }
        CHECK(nearest < 1e-3);
        CHECK_THROWS_AS(coexistence_curve(field(2.0, Region::exterior)), DomainError);
    }

    TEST_CASE("phase diagram and min-time inputs are validated")
    {
        CHECK_THROWS_AS(phase_diagram(vdp(), cycle(), Region::exterior, {1.0}, {1.0}), DomainError);
        CHECK_THROWS_AS(min_time_curve(vdp(), cycle(), {5.0, 0.0}, {1.0, 2.0}), DomainError);
        CHECK_THROWS_AS(min_time_curve(vdp(), cycle(), {5.0, 0.0}, {-1.0, 1.0, 2.0}), DomainError);
    }

    TEST_CASE("small phase diagram")
    {
        FieldOptions o;
        o.n_anchors = 64;
        const auto pd = phase_diagram(vdp(), cycle(), Region::exterior, {0.5, 2.0}, {2.5, 5.0}, o, 2);
        REQUIRE(pd.bangs.size() == 2);
        CHECK(pd.bangs[1][0] == 2);
        CHECK(pd.bangs[1][1] == 2);
        CHECK(pd.bangs[0][1] == 3);
    }
}
