#include "lcsync/extremal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

constexpr double kOnCycleSlack = 1e-7;
constexpr double kSingularTol = 1e-9;

int sgn(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

void require_on_cycle(const LimitCycle& lc, PhasePoint xf)
{
    const double d = lc.distance_to(xf);
    if (d > 2.0 * lc.resolution() + kOnCycleSlack) {
        std::ostringstream os;
        os << "final point (" << xf.x1 << ", " << xf.x2 << ") is not on the limit cycle (distance " << d << ")";
        throw DomainError(os.str());
    }
}

/// Index of the extreme point within `snap` of xf: -1 left, +1 right, 0 none.
int near_extreme(const LimitCycle& lc, PhasePoint xf, double snap)
{
    const auto [left, right] = lc.extreme_points();
    if (distance(xf, left) <= snap) {
        return -1;
    }
    if (distance(xf, right) <= snap) {
        return 1;
    }
    return 0;
}

void check_singular_arc(const LienardSystem& sys, const std::vector<Sample>& samples, double F, double window)
{
    double start = 0.0;
    bool open = false;
    for (const Sample& s : samples) {
        const auto es = ExtendedState::unpack(s.y, 0.0);
        const double dp2 = costate_field(sys, es, F).dp2;
        if (std::abs(s.y[3]) < kSingularTol && std::abs(dp2) < kSingularTol) {
            if (!open) {
                open = true;
                start = s.t;
            } else if (std::abs(s.t - start) > window) {
                std::ostringstream os;
                os << "singular arc: p2 and its derivative vanish on an interval starting at t = " << start;
                throw NumericalError(os.str());
            }
        } else {
            open = false;
        }
    }
}

}  // namespace

std::string to_string(Region r) { return r == Region::exterior ? "exterior" : "interior"; }

std::string to_string(TrajectoryKind k)
{
    switch (k) {
        case TrajectoryKind::generic:
            return "generic";
        case TrajectoryKind::critical_left:
            return "critical_left";
        case TrajectoryKind::critical_right:
            return "critical_right";
    }
    return "generic";
}

std::string to_string(Termination t)
{
    switch (t) {
        case Termination::horizon:
            return "horizon";
        case Termination::max_bangs:
            return "max_bangs";
        case Termination::region_exit:
            return "region_exit";
        case Termination::escape:
            return "escape";
        case Termination::step_failure:
            return "step_failure";
    }
    return "horizon";
}

Region region_from_string(const std::string& s)
{
    if (s == "exterior" || s == "ext") {
        return Region::exterior;
    }
    if (s == "interior" || s == "int") {
        return Region::interior;
    }
    throw DomainError("region must be 'exterior' or 'interior', got '" + s + "'");
}

int BangSchedule::sign_at(double t) const
{
    std::size_t n = 0;
    while (n < switches.size() && switches[n] <= t) {
        ++n;
    }
    return (n % 2 == 0) ? first_sign : -first_sign;
}

std::vector<int> BangSchedule::pattern() const
{
    std::vector<int> out;
    int s = first_sign;
    for (std::size_t i = 0; i < bangs(); ++i) {
        out.push_back(s);
        s = -s;
    }
    return out;
}

PhasePoint ExtremalTrajectory::earliest_point() const
{
    const State4& y = arcs.front().samples.front().y;
    return {y[0], y[1]};
}

State4 ExtremalTrajectory::state_at_remaining(double remaining) const
{
    const double t = std::clamp(schedule.t_f - remaining, 0.0, schedule.t_f);
    for (const Arc& arc : arcs) {
        const auto& s = arc.samples;
        if (t > s.back().t && &arc != &arcs.back()) {
            continue;
        }
        auto it = std::lower_bound(s.begin(), s.end(), t, [](const Sample& a, double v) { return a.t < v; });
        if (it == s.begin()) {
            return s.front().y;
        }
        if (it == s.end()) {
            return s.back().y;
        }
        const Sample& b = *it;
        const Sample& a = *std::prev(it);
        const double w = b.t > a.t ? (t - a.t) / (b.t - a.t) : 0.0;
        State4 out{};
        for (std::size_t i = 0; i < 4; ++i) {
            out[i] = a.y[i] + w * (b.y[i] - a.y[i]);
        }
        return out;
    }
    return arcs.back().samples.back().y;
}

double ExtremalTrajectory::max_abs_hamiltonian(const LienardSystem& sys) const
{
    double worst = 0.0;
    for (const Arc& arc : arcs) {
        for (const Sample& s : arc.samples) {
            worst = std::max(worst, std::abs(hamiltonian(sys, ExtendedState::unpack(s.y, p0), arc.sign * K)));
        }
    }
    return worst;
}

std::size_t ExtremalTrajectory::sample_count() const
{
    std::size_t n = 0;
    for (const Arc& arc : arcs) {
        n += arc.samples.size();
    }
    return n;
}

FinalCostate final_costate(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, double Ff,
                           double snap_distance)
{
    if (Ff == 0.0 || !std::isfinite(Ff)) {
        throw DomainError("final force must be +K or -K");
    }
    if (near_extreme(lc, xf, snap_distance) != 0) {
        return {static_cast<double>(sgn(Ff)), 0.0, 0.0};
    }
    if (std::abs(xf.x2) <= snap_distance) {
        std::ostringstream os;
        os << "inconsistent final point (" << xf.x1 << ", " << xf.x2
           << "): x2 vanishes away from the extreme points, so it is not on the cycle";
        throw DomainError(os.str());
    }
    const double p1 = (sys.mu * sys.h(xf.x1) * xf.x2 + sys.v_prime(xf.x1)) / (Ff * xf.x2);
    return {p1, 1.0 / Ff, -1.0};
}

std::vector<int> final_bang_sign(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, Region region,
                                 ForceBound bound, double snap_distance)
{
    require_on_cycle(lc, xf);
    const int side = near_extreme(lc, xf, snap_distance);
    const int orient = region == Region::exterior ? -1 : 1;
    if (side == 0) {
        return {orient * sgn(xf.x2)};
    }
    // At an extreme point x2_f = 0 and x2 just before t_f is
    // eps (V'(x1f) - Ff); reaching the cycle from the chosen side requires
    // x2^- Ff < 0 outside and > 0 inside.
    const double x1f = side * lc.x_max();
    std::vector<int> out;
    for (int s : {1, -1}) {
        const double Ff = s * bound.K();
        const double x2_before = sys.v_prime(x1f) - Ff;
        if (orient * x2_before * Ff > 0.0) {
            out.push_back(s);
        }
    }
    return out;
}

ExtremalTrajectory rewind_extremal(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, int final_sign,
                                   ForceBound bound, Region region, const RewindOptions& opt)
{
    if (final_sign != 1 && final_sign != -1) {
        throw DomainError("final force sign must be +1 or -1");
    }
    require_on_cycle(lc, xf);
    const double K = bound.K();

    ExtremalTrajectory traj;
    traj.region = region;
    traj.K = K;
    const int extreme = near_extreme(lc, xf, opt.snap_distance);
    if (extreme != 0) {
        xf = {extreme * lc.x_max(), 0.0};
        traj.kind = extreme < 0 ? TrajectoryKind::critical_left : TrajectoryKind::critical_right;
    }
    traj.anchor = xf;
    traj.anchor_phase = lc.phase_of(xf);

    const FinalCostate pf = final_costate(sys, lc, xf, final_sign * K, opt.snap_distance);
    traj.p0 = pf.p0;

    const double orient = region == Region::exterior ? 1.0 : -1.0;
    const double margin = 2.0 * lc.resolution() + 1e-9;
    const double r2 = opt.escape_radius * opt.escape_radius;

    std::vector<EventSpec> events;
    events.push_back({"switch", [](double, const State4& y) { return y[3]; }, Crossing::any, true});
    events.push_back({"escape", [r2](double, const State4& y) { return r2 - (y[0] * y[0] + y[1] * y[1]); },
                      Crossing::any, true});
    if (opt.stop_on_region_exit) {
        events.push_back({"region_exit",
                          [&lc, orient, margin](double, const State4& y) {
                              return orient * lc.chi({y[0], y[1]}) + margin;
                          },
                          Crossing::any, true});
    }
    if (opt.record_axis_crossings) {
        events.push_back({"axis", [](double, const State4& y) { return y[1]; }, Crossing::any, false});
    }

    struct Piece {
        int sign;
        std::vector<Sample> samples;  // backward time, descending
    };
    std::vector<Piece> pieces;
    std::vector<double> switch_taus;
    std::vector<State4> switch_ys;
    std::vector<std::pair<double, State4>> axis_hits;

    State4 y{xf.x1, xf.x2, pf.p1, pf.p2};
    int sign = final_sign;
    double tau = 0.0;
    const double chatter = 10.0 * opt.tol.t_tol;

    while (true) {
        const double F = sign * K;
        const Field field = [&sys, F](double, const State4& s) { return canonical_rhs(sys, s, F); };
        const auto res = integrate(field, y, -tau, -opt.t_back_max, Direction::backward, events, opt.tol);
        check_singular_arc(sys, res.samples, F, chatter);
        pieces.push_back({sign, res.samples});
        for (const auto& ev : res.events) {
            if (ev.label == "axis") {
                axis_hits.emplace_back(-ev.t, ev.y);
            }
        }
        tau = -res.t_end();

        if (res.status == Status::reached_t_max) {
            traj.termination = Termination::horizon;
            break;
        }
        if (res.status == Status::step_failure) {
            traj.termination = Termination::step_failure;
            break;
        }
        const auto& last = res.events.back();
        if (last.label == "escape") {
            traj.termination = Termination::escape;
            break;
        }
        if (last.label == "region_exit") {
            traj.termination = Termination::region_exit;
            break;
        }
        // p2 crossed zero.
        const double prev = switch_taus.empty() ? 0.0 : switch_taus.back();
        if (tau - prev < chatter) {
            std::ostringstream os;
            os << "chattering: consecutive switches " << tau - prev << " apart";
            throw NumericalError(os.str());
        }
        switch_taus.push_back(tau);
        switch_ys.push_back(last.y);
        if (pieces.size() >= opt.max_bangs) {
            traj.termination = Termination::max_bangs;
            break;
        }
        y = last.y;
        y[3] = 0.0;
        sign = -sign;
    }

    const double duration = tau;
    traj.schedule.t_f = duration;
    traj.schedule.first_sign = pieces.back().sign;
    for (auto it = switch_taus.rbegin(); it != switch_taus.rend(); ++it) {
        traj.schedule.switches.push_back(duration - *it);
    }
    for (auto it = switch_ys.rbegin(); it != switch_ys.rend(); ++it) {
        traj.switch_states.push_back(ExtendedState::unpack(*it, traj.p0));
    }
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
        Arc arc;
        arc.sign = it->sign;
        arc.samples.reserve(it->samples.size());
        for (auto s = it->samples.rbegin(); s != it->samples.rend(); ++s) {
            arc.samples.push_back({duration + s->t, s->y});
        }
        traj.arcs.push_back(std::move(arc));
    }
    std::sort(axis_hits.begin(), axis_hits.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [t_back, ya] : axis_hits) {
        traj.axis_states.push_back(ExtendedState::unpack(ya, traj.p0));
        traj.axis_times.push_back(duration - t_back);
    }
    return traj;
}

ExtremalTrajectory rewind_from_phase(const LienardSystem& sys, const LimitCycle& lc, double phase,
                                     int final_sign, ForceBound bound, Region region, const RewindOptions& opt)
{
    auto traj = rewind_extremal(sys, lc, lc.point_at(phase), final_sign, bound, region, opt);
    if (traj.kind == TrajectoryKind::generic) {
        double p = std::fmod(phase, lc.period());
        traj.anchor_phase = p < 0.0 ? p + lc.period() : p;
    }
    return traj;
}

ExtremalTrajectory critical_trajectory(const LienardSystem& sys, const LimitCycle& lc, CriticalSide side,
                                       ForceBound bound, Region region, const RewindOptions& opt)
{
    const auto [left, right] = lc.extreme_points();
    const PhasePoint xf = side == CriticalSide::left ? left : right;
    // Exterior: BL+ (left, +K) and BR- (right, -K). Interior: left -K, right +K.
    const int side_sign = side == CriticalSide::left ? -1 : 1;
    const int sign = region == Region::exterior ? -side_sign : side_sign;
    const auto admissible = final_bang_sign(sys, lc, xf, region, bound, opt.snap_distance);
    if (std::find(admissible.begin(), admissible.end(), sign) == admissible.end()) {
        std::ostringstream os;
        os << "no " << to_string(region) << " critical trajectory ends at (" << xf.x1
           << ", 0) for K = " << bound.K() << " (V'(x_max) = " << sys.v_prime(lc.x_max()) << ")";
        throw DomainError(os.str());
    }
    RewindOptions o = opt;
    o.record_axis_crossings = true;
    auto traj = rewind_extremal(sys, lc, xf, sign, bound, region, o);

    for (const ExtendedState& s : traj.switch_states) {
        if (std::abs(s.x.x2) > opt.axis_tol) {
            std::ostringstream os;
            os << "critical trajectory switches off the x1-axis (x2 = " << s.x.x2
               << "); integration tolerance too loose";
            throw NumericalError(os.str());
        }
    }
    for (const ExtendedState& s : traj.axis_states) {
        if (std::abs(s.p2) > opt.axis_tol) {
            std::ostringstream os;
            os << "critical trajectory crosses the x1-axis without switching (p2 = " << s.p2
               << " at x1 = " << s.x.x1 << ")";
            throw NumericalError(os.str());
        }
    }
    return traj;
}

std::vector<double> axis_crossings(const ExtremalTrajectory& traj)
{
    if (traj.kind == TrajectoryKind::generic) {
        throw DomainError("axis crossings are defined for critical trajectories only");
    }
    std::vector<std::pair<double, double>> hits;  // (forward time, |x1|)
    for (std::size_t i = 0; i < traj.switch_states.size(); ++i) {
        hits.emplace_back(traj.schedule.switches[i], std::abs(traj.switch_states[i].x.x1));
    }
    for (std::size_t i = 0; i < traj.axis_states.size(); ++i) {
        const double t = traj.axis_times[i];
        const bool dup = std::any_of(traj.schedule.switches.begin(), traj.schedule.switches.end(),
                                     [t](double ts) { return std::abs(ts - t) < 1e-6; });
        if (!dup) {
            hits.emplace_back(t, std::abs(traj.axis_states[i].x.x1));
        }
    }
    std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<double> out;
    for (const auto& h : hits) {
        out.push_back(h.second);
    }
    return out;
}

ReplayResult replay_forward(const LienardSystem& sys, PhasePoint x0, const BangSchedule& schedule, double K,
                            const LimitCycle& lc, const Tolerances& tol)
{
    State4 y{x0.x1, x0.x2, 0.0, 0.0};
    std::vector<double> knots{0.0};
    knots.insert(knots.end(), schedule.switches.begin(), schedule.switches.end());
    knots.push_back(schedule.t_f);
    int sign = schedule.first_sign;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (knots[i + 1] > knots[i]) {
            const double F = sign * K;
            const Field field = [&sys, F](double, const State4& s) { return canonical_rhs(sys, s, F); };
            y = integrate(field, y, knots[i], knots[i + 1], Direction::forward, {}, tol).final_state();
        }
        sign = -sign;
    }
    const PhasePoint terminal{y[0], y[1]};
    return {terminal, lc.distance_to(terminal)};
}

}  // namespace lcsync
