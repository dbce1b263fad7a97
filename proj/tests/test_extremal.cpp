#include <doctest.h>

#include <cmath>

#include "lcsync/errors.hpp"
#include "support.hpp"

using namespace lcsync;
using lcsync::test::cycle;
using lcsync::test::vdp;

namespace {

PhasePoint anchor_costate(const ExtremalTrajectory& tr)
{
    const auto& y = tr.arcs.back().samples.back().y;
    return {y[2], y[3]};
}

}  // namespace

TEST_SUITE("extremal")
{
    TEST_CASE("final costate satisfies H = 0 and transversality")
    {
        const auto& lc = *cycle();
        for (double ph = 0.2; ph < lc.period(); ph += 0.7) {
            const PhasePoint xf = lc.point_at(ph);
            const PhasePoint t = lc.tangent_at(ph);
            for (int s : {-1, 1}) {
                const auto c = final_costate(vdp(), lc, xf, s * 2.0);
                CHECK(c.p0 == -1.0);
                CHECK(std::abs(c.p1 * t.x1 + c.p2 * t.x2) < 1e-12);
                const ExtendedState st{xf, c.p1, c.p2, c.p0};
                CHECK(std::abs(hamiltonian(vdp(), st, s * 2.0)) < 1e-12);
            }
        }
    }

    TEST_CASE("extreme points use the abnormal multiplier")
    {
        const auto& lc = *cycle();
        const auto [left, right] = lc.extreme_points();
        const auto c = final_costate(vdp(), lc, right, 2.0);
        CHECK(c.p0 == 0.0);
        CHECK(std::abs(c.p2) < 1e-12);
    }

    TEST_CASE("admissible final signs cover both regions")
    {
        const auto& lc = *cycle();
        const ForceBound K(2.0);
        for (double ph = 0.3; ph < lc.period(); ph += 0.9) {
            const PhasePoint xf = lc.point_at(ph);
            const auto ext = final_bang_sign(vdp(), lc, xf, Region::exterior, K);
            const auto in = final_bang_sign(vdp(), lc, xf, Region::interior, K);
            REQUIRE(ext.size() == 1);
            REQUIRE(in.size() == 1);
            CHECK(ext[0] == -in[0]);
            // The last bang must point back towards the cycle.
            const auto f = vector_field(vdp(), xf, ext[0] * 2.0);
            const PhasePoint n = lc.outward_normal(xf);
            CHECK(f.dx1 * n.x1 + f.dx2 * n.x2 < 0.0);
        }
    }

    TEST_CASE("Hamiltonian is conserved and switches sit at p2 = 0")
    {
        const auto& lc = *cycle();
        for (double K : {0.3, 2.0}) {
            for (double ph : {0.4, 2.0, 4.1}) {
                const int s = final_bang_sign(vdp(), lc, lc.point_at(ph), Region::exterior, ForceBound(K)).at(0);
                RewindOptions ro;
                ro.t_back_max = 20.0;
                const auto tr = rewind_from_phase(vdp(), lc, ph, s, ForceBound(K), Region::exterior, ro);
                CHECK(tr.max_abs_hamiltonian(vdp()) < 1e-7);
                for (const auto& sw : tr.switch_states) {
                    CHECK(std::abs(sw.p2) < 1e-9);
                }
                CHECK(tr.switch_states.size() + 1 == tr.schedule.bangs());
                for (std::size_t a = 0; a + 1 < tr.arcs.size(); ++a) {
                    CHECK(tr.arcs[a].sign == -tr.arcs[a + 1].sign);
                }
                CHECK(tr.arcs.back().sign == s);
            }
        }
    }

    TEST_CASE("costate ODE agrees with an independent integrator")
    {
        const auto& lc = *cycle();
        RewindOptions ro;
        ro.t_back_max = 0.6;
        const double ph = 1.1;
        const int s = final_bang_sign(vdp(), lc, lc.point_at(ph), Region::exterior, ForceBound(2.0)).at(0);
        const auto tr = rewind_from_phase(vdp(), lc, ph, s, ForceBound(2.0), Region::exterior, ro);
        REQUIRE(tr.arcs.size() == 1);
        const auto& first = tr.arcs.front().samples.front();
        const auto& last = tr.arcs.front().samples.back();
        const auto y = lcsync::test::rk4([&](const State4& v) { return canonical_rhs(vdp(), v, s * 2.0); }, first.y,
                                         last.t - first.t, 4000);
        for (int i = 0; i < 4; ++i) {
            CHECK(y[i] == doctest::Approx(last.y[i]).epsilon(1e-8));
        }
    }

    TEST_CASE("forward replay of a rewound schedule returns to the anchor")
    {
        const auto& lc = *cycle();
        for (double ph : {0.7, 3.3, 5.0}) {
            const int s = final_bang_sign(vdp(), lc, lc.point_at(ph), Region::exterior, ForceBound(0.5)).at(0);
            RewindOptions ro;
            ro.t_back_max = 12.0;
            const auto tr = rewind_from_phase(vdp(), lc, ph, s, ForceBound(0.5), Region::exterior, ro);
            const auto rep = replay_forward(vdp(), tr.earliest_point(), tr.schedule, 0.5, lc);
            CHECK(distance(rep.terminal, tr.anchor) < 1e-6);
            CHECK(rep.miss < 1e-6);
        }
    }

    TEST_CASE("critical trajectories switch on the x1-axis")
    {
        const auto& lc = *cycle();
        const auto tr = critical_trajectory(vdp(), lc, CriticalSide::left, ForceBound(0.2));
        CHECK(tr.kind == TrajectoryKind::critical_left);
        CHECK(tr.p0 == 0.0);
        for (const auto& s : tr.switch_states) {
            CHECK(std::abs(s.x.x2) < 1e-6);
        }
        for (const auto& s : tr.axis_states) {
            CHECK(std::abs(s.p2) < 1e-6);
        }
        const auto xs = axis_crossings(tr);
        REQUIRE(xs.size() == 2);
        CHECK(lc.x_max() < xs[0]);
        CHECK(xs[0] < xs[1]);
    }

    TEST_CASE("critical trajectories are point symmetric")
    {
        const auto& lc = *cycle();
        const auto l = critical_trajectory(vdp(), lc, CriticalSide::left, ForceBound(0.5));
        const auto r = critical_trajectory(vdp(), lc, CriticalSide::right, ForceBound(0.5));
        const auto xl = axis_crossings(l), xr = axis_crossings(r);
        REQUIRE(xl.size() == xr.size());
        for (std::size_t i = 0; i < xl.size(); ++i) {
            CHECK(xl[i] == doctest::Approx(xr[i]).epsilon(1e-8));
        }
        CHECK(l.schedule.pattern().back() == -r.schedule.pattern().back());
    }

    TEST_CASE("interior rewinds stop when they leave the cycle")
    {
        const auto& lc = *cycle();
        const double ph = 0.9;
        const int s = final_bang_sign(vdp(), lc, lc.point_at(ph), Region::interior, ForceBound(2.0)).at(0);
        const auto tr = rewind_from_phase(vdp(), lc, ph, s, ForceBound(2.0), Region::interior);
        CHECK(tr.termination == Termination::region_exit);
        // Exits are detected against a margin of a couple of polyline resolutions.
        const double margin = 2.0 * lc.resolution() + 1e-8;
        for (const auto& arc : tr.arcs) {
            for (const auto& smp : arc.samples) {
                CHECK(lc.chi({smp.y[0], smp.y[1]}) < margin);
            }
        }
    }

    TEST_CASE("bad inputs")
    {
        const auto& lc = *cycle();
        CHECK_THROWS_AS(rewind_extremal(vdp(), lc, {4.0, 0.0}, 1, ForceBound(1.0), Region::exterior), DomainError);
        CHECK_THROWS_AS(rewind_from_phase(vdp(), lc, 1.0, 0, ForceBound(1.0), Region::exterior), DomainError);
        CHECK_THROWS_AS(region_from_string("outside"), DomainError);
        CHECK(region_from_string("interior") == Region::interior);
    }
}
