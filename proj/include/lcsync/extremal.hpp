#pragma once

// Single Pontryagin extremals rewound backward in time from a final point on
// the limit cycle.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lcsync/integrate.hpp"
#include "lcsync/limit_cycle.hpp"
#include "lcsync/model.hpp"

namespace lcsync {

enum class Region { exterior, interior };
enum class CriticalSide { left, right };

/// Generic extremals end at ordinary cycle points; critical ones end at an
/// extreme point (p0 = 0). In the exterior the left/right critical
/// trajectories carry final force +K / -K.
enum class TrajectoryKind { generic, critical_left, critical_right };

enum class Termination { horizon, max_bangs, region_exit, escape, step_failure };

std::string to_string(Region r);
std::string to_string(TrajectoryKind k);
std::string to_string(Termination t);
Region region_from_string(const std::string& s);

/// Piecewise-constant bang-bang control on [0, t_f].
struct BangSchedule {
    double t_f = 0.0;
    std::vector<double> switches;  // 0 < t_s1 < ... < t_f
    int first_sign = 1;

    std::size_t bangs() const { return t_f > 0.0 ? switches.size() + 1 : 0; }
    int sign_at(double t) const;
    /// Signs of the bangs in time order.
    std::vector<int> pattern() const;
};

struct FinalCostate {
    double p1;
    double p2;
    double p0;
};

struct Arc {
    int sign;                     // force = sign * K on this arc
    std::vector<Sample> samples;  // forward time, ascending
};

struct ExtremalTrajectory {
    PhasePoint anchor;
    double anchor_phase = 0.0;
    Region region = Region::exterior;
    double K = 0.0;
    double p0 = -1.0;
    TrajectoryKind kind = TrajectoryKind::generic;
    Termination termination = Termination::horizon;
    BangSchedule schedule;
    std::vector<Arc> arcs;  // time order: arcs.front() starts at the earliest point
    std::vector<ExtendedState> switch_states;  // time order
    std::vector<ExtendedState> axis_states;    // x2 = 0 crossings, time order (if requested)
    std::vector<double> axis_times;

    double duration() const { return schedule.t_f; }
    PhasePoint earliest_point() const;
    /// State a time `remaining` before reaching the anchor (linear in samples).
    State4 state_at_remaining(double remaining) const;
    /// Largest |H| over every stored sample with the active force.
    double max_abs_hamiltonian(const LienardSystem& sys) const;
    std::size_t sample_count() const;
};

struct RewindOptions {
    double t_back_max = 150.0;
    std::size_t max_bangs = 64;
    double escape_radius = 15.0;
    bool stop_on_region_exit = true;
    bool record_axis_crossings = false;
    double snap_distance = 1e-6;
    /// Critical trajectories: allowed |x2| at a switch and |p2| at an axis crossing.
    double axis_tol = 1e-6;
    Tolerances tol{};
};

/// Final costate from the Hamiltonian-zero and transversality conditions.
FinalCostate final_costate(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, double Ff,
                           double snap_distance = 1e-6);

/// Admissible signs of the last bang at xf (empty if none is consistent).
std::vector<int> final_bang_sign(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, Region region,
                                 ForceBound bound, double snap_distance = 1e-6);

/// Rewinds the canonical system from xf with final force final_sign * K,
/// flipping the force at every zero of p2.
ExtremalTrajectory rewind_extremal(const LienardSystem& sys, const LimitCycle& lc, PhasePoint xf, int final_sign,
                                   ForceBound bound, Region region, const RewindOptions& opt = {});

/// Same, with xf = lc.point_at(phase).
ExtremalTrajectory rewind_from_phase(const LienardSystem& sys, const LimitCycle& lc, double phase,
                                     int final_sign, ForceBound bound, Region region,
                                     const RewindOptions& opt = {});

/// Trajectory rewound from an extreme point of the cycle. Checks that every
/// switching point lies on the x1-axis and every axis crossing is a switch.
ExtremalTrajectory critical_trajectory(const LienardSystem& sys, const LimitCycle& lc, CriticalSide side,
                                       ForceBound bound, Region region = Region::exterior,
                                       const RewindOptions& opt = {});

/// |x1| at the successive x1-axis crossings of a critical trajectory, in
/// backward order (nearest the anchor first).
std::vector<double> axis_crossings(const ExtremalTrajectory& traj);

struct ReplayResult {
    PhasePoint terminal;
    double miss;
};

/// Forward integration of the state equations under a bang-bang schedule.
ReplayResult replay_forward(const LienardSystem& sys, PhasePoint x0, const BangSchedule& schedule, double K,
                            const LimitCycle& lc, const Tolerances& tol = {});

}  // namespace lcsync
