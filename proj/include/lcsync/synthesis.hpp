#pragma once

// Global field of extremals for a fixed force bound and region, optimal
// control queries, and the curves extracted from the field.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lcsync/extremal.hpp"

namespace lcsync {

struct FieldOptions {
    std::size_t n_anchors = 256;
    RewindOptions rewind{};
    /// Neighbouring extremals further apart than this (at equal remaining
    /// time) get an extra anchor between them.
    double max_gap = 0.08;
    /// Only points with |x| below this radius count towards the gap.
    double refine_radius = 8.0;
    int max_refine_depth = 14;
    /// Spacing of the remaining-time grid used for the mesh.
    double sample_dt = 0.02;
    double time_tie_tol = 1e-5;
    /// A mesh cell seeds a Newton solve when the query lies within
    /// match_factor times the local extremal spacing, plus match_delta.
    double match_factor = 2.0;
    double match_delta = 0.0;
    std::size_t index_cells = 256;
    unsigned jobs = 1;
};

/// A family of extremals whose anchors sweep one arc of the cycle with a
/// common final force; consecutive members bound the mesh cells.
struct Sheet {
    int final_sign = 1;
    double phase_lo = 0.0;
    double phase_hi = 0.0;
    std::vector<std::size_t> members;  // indices into extremals(), ascending phase
};

struct Candidate {
    double t_f = 0.0;
    double anchor_phase = 0.0;
    int final_sign = 1;
    std::size_t sheet = 0;
    BangSchedule schedule;
    PhasePoint x0_snap;
    PhasePoint anchor;
};

struct OptimalAnswer {
    double t_f = 0.0;
    BangSchedule schedule;
    PhasePoint x0_snap;
    std::size_t candidates = 0;
    bool degenerate = false;
    Candidate best;
    std::vector<Candidate> all;  // sorted by t_f
};

struct Polyline {
    std::string id;
    std::vector<PhasePoint> points;
};

class SynthesisField {
public:
    static SynthesisField build(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc, ForceBound bound,
                                Region region, const FieldOptions& opt = {});

    double K() const { return K_; }
    Region region() const { return region_; }
    const FieldOptions& options() const { return opt_; }
    const LimitCycle& cycle() const { return *lc_; }
    const LienardSystem& system() const { return sys_; }
    const std::vector<ExtremalTrajectory>& extremals() const { return extremals_; }
    const std::vector<Sheet>& sheets() const { return sheets_; }
    /// Extremals that were rewound and then discarded as dominated.
    const std::vector<ExtremalTrajectory>& pruned() const { return pruned_; }
    /// Critical trajectories of this field (left first), if they exist.
    const std::vector<ExtremalTrajectory>& criticals() const { return criticals_; }
    /// Largest phase gap between consecutive anchors of a sheet.
    double max_anchor_gap() const;

    /// All PMP candidates through x0, sorted by connection time.
    std::vector<Candidate> candidates(PhasePoint x0) const;
    /// Fastest candidate. Throws CoverageError if no extremal reaches x0.
    OptimalAnswer optimal_for_point(PhasePoint x0) const;

    /// Remaining time and bang count of an extremal through x0 obtained by
    /// re-rewinding from `phase` in `sheet` and Newton refinement.
    std::optional<Candidate> refine(std::size_t sheet, double phase, double remaining, PhasePoint x0) const;

    /// Sheets of a field (without members): lower half of the cycle first.
    static std::vector<Sheet> sheet_layout(const LimitCycle& lc, Region region);

    /// Same Newton refinement without a built field, for continuation in K.
    static std::optional<Candidate> refine_at(const LienardSystem& sys, const LimitCycle& lc, ForceBound bound,
                                              Region region, std::size_t sheet, double phase, double remaining,
                                              PhasePoint x0, const FieldOptions& opt = {});

private:
    struct Cell {
        std::uint32_t sheet;
        std::uint32_t member;  // index within sheet.members (left edge)
        std::uint32_t k;       // remaining-time index
    };

    void resample();
    void build_index();
    void prune_dominated(std::vector<ExtremalTrajectory> extra);
    std::array<PhasePoint, 4> quad(const Cell& c) const;

    LienardSystem sys_;
    std::shared_ptr<const LimitCycle> lc_;
    double K_ = 0.0;
    Region region_ = Region::exterior;
    FieldOptions opt_;
    std::vector<ExtremalTrajectory> extremals_;
    std::vector<std::vector<PhasePoint>> grid_points_;  // per extremal, at remaining = k * sample_dt
    std::vector<Sheet> sheets_;
    std::vector<ExtremalTrajectory> pruned_;
    std::vector<ExtremalTrajectory> criticals_;
    std::vector<Cell> cells_;
    std::vector<std::vector<std::uint32_t>> buckets_;
    double box_lo1_ = 0.0, box_lo2_ = 0.0, box_w1_ = 1.0, box_w2_ = 1.0;
};

struct SwitchingCurves {
    Polyline plus;   // switch points with x1 > 0
    Polyline minus;  // switch points with x1 < 0
    /// One branch per (sheet, switch index counted back from the anchor), in anchor order.
    std::vector<Polyline> branches;
};

SwitchingCurves switching_curves(const SynthesisField& field);

struct CoexistenceOptions {
    std::size_t grid = 32;
    int max_iter = 40;
};

struct CoexistenceCurve {
    std::vector<Polyline> branches;
    double max_time_gap = 0.0;  // largest |dt_f| between the two best candidates on the curve
    std::string diagnostic;
};

/// Locus inside the cycle where the two fastest candidates (with opposite
/// final bangs) need the same time.
CoexistenceCurve coexistence_curve(const SynthesisField& field, const CoexistenceOptions& opt = {});

/// |x1| at the x1-axis crossings of the left critical trajectory of the region, in backward order.
std::vector<double> critical_crossings(const LienardSystem& sys, const LimitCycle& lc, Region region,
                                       ForceBound bound, const RewindOptions& opt = {});

/// K at which the critical trajectory gains its n-th axis crossing. The count
/// at K_lo must be >= n and the count at K_hi below n.
double critical_K(const LienardSystem& sys, const LimitCycle& lc, int n, Region region, double K_lo, double K_hi,
                  double tol = 1e-4, const RewindOptions& opt = {});

struct CriticalCurve {
    int n = 0;
    Region region = Region::exterior;
    std::vector<std::pair<double, double>> points;  // (K, x_n(K)), K ascending
};

std::vector<CriticalCurve> critical_curves(const LienardSystem& sys, const LimitCycle& lc, Region region,
                                           const std::vector<double>& K_grid, int n_max,
                                           const RewindOptions& opt = {});

/// Values of K in [K_lo, K_hi] where the n-th crossing sits exactly at x10.
std::vector<double> crossing_parameters(const LienardSystem& sys, const LimitCycle& lc, Region region, int n,
                                        double x10, double K_lo, double K_hi, std::size_t scan = 64,
                                        double tol = 1e-6, const RewindOptions& opt = {});

struct PhaseDiagram {
    Region region = Region::exterior;
    std::vector<double> K_grid;
    std::vector<double> x10_grid;
    std::vector<std::vector<int>> bangs;  // [K index][x10 index], 0 where the query failed
    std::vector<CriticalCurve> curves;
    std::vector<std::string> diagnostics;
};

PhaseDiagram phase_diagram(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc, Region region,
                           const std::vector<double>& K_grid, const std::vector<double>& x10_grid,
                           const FieldOptions& opt = {}, int n_max = 4);

struct MinTimePoint {
    double K = 0.0;
    double t_f = 0.0;
    int bangs = 0;
    std::size_t sheet = 0;
    double anchor_phase = 0.0;
};

struct Kink {
    double K = 0.0;          // centre of the final bisection bracket
    double bracket = 0.0;    // width of that bracket
    double t_left = 0.0;     // t_f at the lower end
    double t_right = 0.0;    // t_f at the upper end
    int bangs_left = 0;
    int bangs_right = 0;
};

struct MinTimeOptions {
    FieldOptions field;
    double noise_factor = 5.0;
    /// Kink bisection stops once the two sides agree to continuity_tol in
    /// t_f or the bracket is narrower than K_tol.
    double continuity_tol = 1e-5;
    double K_tol = 1e-13;
};

struct MinTimeCurve {
    PhasePoint x0;
    Region region = Region::exterior;
    std::vector<MinTimePoint> points;  // K ascending
    std::vector<Kink> kinks;
    bool truncated = false;
    std::string diagnostic;
};

MinTimeCurve min_time_curve(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc, PhasePoint x0,
                            std::vector<double> K_grid, const MinTimeOptions& opt = {});

}  // namespace lcsync
