#include <doctest.h>

#include <cmath>
#include <set>
#include <string>

#include "lcsync/errors.hpp"
#include "support.hpp"

using namespace lcsync;
using lcsync::test::cycle;
using lcsync::test::field;
using lcsync::test::vdp;

namespace {

std::string pattern(const BangSchedule& s)
{
    std::string out;
    for (int v : s.pattern()) {
        out += v > 0 ? '+' : '-';
    }
    return out;
}

}  // namespace

TEST_SUITE("synthesis")
{
    TEST_CASE("sheets split the cycle at the extreme points")
    {
        const auto& lc = *cycle();
        for (Region r : {Region::exterior, Region::interior}) {
            const auto sheets = SynthesisField::sheet_layout(lc, r);
            REQUIRE(sheets.size() == 2);
            CHECK(sheets[0].phase_lo == doctest::Approx(0.0));
            CHECK(sheets[0].phase_hi == doctest::Approx(lc.period() / 2));
            CHECK(sheets[1].phase_hi == doctest::Approx(lc.period()));
            CHECK(sheets[0].final_sign == -sheets[1].final_sign);
        }
    }

    TEST_CASE("exterior field at K = 2")
    {
        const auto& f = field(2.0, Region::exterior);
        CHECK(f.extremals().size() > 512);
        CHECK(f.max_anchor_gap() < 0.05);
        for (const auto& sh : f.sheets()) {
            for (std::size_t i = 1; i < sh.members.size(); ++i) {
                CHECK(f.extremals()[sh.members[i - 1]].anchor_phase < f.extremals()[sh.members[i]].anchor_phase);
            }
        }
        const auto a = f.optimal_for_point({5.0, 0.0});
        CHECK(a.t_f == doctest::Approx(2.038401).epsilon(1e-6));
        CHECK(pattern(a.schedule) == "-+");
        CHECK(distance(a.x0_snap, {5.0, 0.0}) < 1e-8);
    }

    TEST_CASE("the two sheets mirror each other member for member")
    {
        for (Region region : {Region::exterior, Region::interior}) {
            const auto& f = field(2.0, region);
            const auto& lo = f.sheets()[0].members;
            const auto& hi = f.sheets()[1].members;
            REQUIRE(lo.size() == hi.size());
            double worst = 0.0;
            for (std::size_t i = 0; i < lo.size(); ++i) {
                const auto& a = f.extremals()[lo[i]];
                const auto& b = f.extremals()[hi[i]];
                worst = std::max(worst, distance(a.earliest_point(), -b.earliest_point()));
                worst = std::max(worst, std::abs(a.duration() - b.duration()));
            }
            CHECK(worst < 1e-5);
        }
    }

    TEST_CASE("optimal schedules replay onto the cycle")
    {
        const auto& f = field(2.0, Region::exterior);
        lcsync::test::Uniform u(7);
        for (int i = 0; i < 12; ++i) {
            PhasePoint x0{u(-4.0, 4.0), u(-4.0, 4.0)};
            if (cycle()->chi(x0) < 0.05) {
                continue;
            }
            const auto a = f.optimal_for_point(x0);
            const auto rep = replay_forward(vdp(), x0, a.schedule, 2.0, *cycle());
            CHECK(rep.miss < 1e-6);
            // Candidates are sorted and the answer is the first of them.
            CHECK(a.all.front().t_f == a.t_f);
            for (std::size_t k = 1; k < a.all.size(); ++k) {
                CHECK(a.all[k - 1].t_f <= a.all[k].t_f);
            }
        }
    }

    TEST_CASE("answers on the cycle and in the wrong region")
    {
        const auto& f = field(2.0, Region::exterior);
        const PhasePoint on = cycle()->point_at(1.0);
        const auto a = f.optimal_for_point(on);
        CHECK(a.t_f == 0.0);
        CHECK(a.schedule.bangs() == 0);
        CHECK_THROWS_AS(f.optimal_for_point({0.3, 0.3}), DomainError);
    }

    TEST_CASE("short horizon leaves far points uncovered")
    {
        FieldOptions o;
        o.n_anchors = 64;
        o.rewind.t_back_max = 0.5;
        const auto f = SynthesisField::build(vdp(), cycle(), ForceBound(2.0), Region::exterior, o);
        CHECK_THROWS_AS(f.optimal_for_point({8.0, 8.0}), CoverageError);
    }

    TEST_CASE("refinement from a perturbed guess recovers the candidate")
    {
        const auto& f = field(2.0, Region::exterior);
        const auto a = f.optimal_for_point({3.0, 1.0});
        const auto c = SynthesisField::refine_at(vdp(), *cycle(), ForceBound(2.0), Region::exterior, a.best.sheet,
                                                 a.best.anchor_phase + 0.01, a.t_f + 0.02, {3.0, 1.0});
        REQUIRE(c.has_value());
        CHECK(c->t_f == doctest::Approx(a.t_f).epsilon(1e-8));
    }

    TEST_CASE("interior field at K = 2 uses single bangs")
    {
        const auto& f = field(2.0, Region::interior);
        const auto a = f.optimal_for_point({1.0, 0.0});
        CHECK(a.t_f == doctest::Approx(0.691028).epsilon(1e-5));
        CHECK(a.schedule.bangs() == 1);
        CHECK(a.candidates >= 2);
    }

    TEST_CASE("invalid field options")
    {
        FieldOptions o;
        o.n_anchors = 2;
        CHECK_THROWS_AS(SynthesisField::build(vdp(), cycle(), ForceBound(2.0), Region::exterior, o), DomainError);
    }
}
