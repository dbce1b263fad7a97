#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "lcsync/integrate.hpp"
#include "lcsync/model.hpp"

namespace lcsync {

struct LimitCycleOptions {
    std::size_t n_samples = 4096;
    double tol = 1e-11;  // |R(x*) - x*| on the Poincare section
    int max_iter = 60;
    double relax_time = 150.0;
    PhasePoint seed{0.1, 0.0};
    Tolerances integration{};
};

/// The stable limit cycle of the unforced system, sampled at equal time
/// intervals starting from the rightmost point (+x_max, 0) and moving
/// clockwise (forward time).
class LimitCycle {
public:
    static LimitCycle find(const LienardSystem& sys, const LimitCycleOptions& opt = {});

    const std::vector<PhasePoint>& samples() const { return samples_; }
    double period() const { return period_; }
    double x_max() const { return x_max_; }
    double mu() const { return mu_; }
    /// Upper bound on the distance between the polyline and the true orbit.
    double resolution() const { return resolution_; }
    /// Largest chord between consecutive samples.
    double max_chord() const { return max_chord_; }

    /// Point on the cycle a time `phase` after the rightmost point.
    PhasePoint point_at(double phase) const;
    /// Unit tangent (direction of forward motion) of the orbit at `phase`.
    PhasePoint tangent_at(double phase) const;
    /// Phase of the polyline point nearest to x.
    double phase_of(PhasePoint x) const;

    /// Signed distance: negative inside, positive outside the cycle.
    double chi(PhasePoint x) const;
    /// Unsigned distance to the polyline.
    double distance_to(PhasePoint x) const;
    bool encloses(PhasePoint x) const;

    /// (-x_max, 0) and (+x_max, 0).
    std::pair<PhasePoint, PhasePoint> extreme_points() const;

    /// Unit vector along (mu h(x1) x2 + V'(x1), x2), pointing out of the cycle.
    PhasePoint outward_normal(PhasePoint xf) const;

    const LienardSystem& system() const { return sys_; }

    /// First-return map on {x2 = 0, x1 > 0}: returns (R(x), return time).
    static std::pair<double, double> return_map(const LienardSystem& sys, double x, const Tolerances& tol = {});

private:
    struct Block {
        std::size_t begin;  // first segment index
        std::size_t end;    // one past last segment index
        double cx, cy, radius;
        double ymin, ymax, xmax;
    };

    struct Nearest {
        double dist;
        std::size_t segment;
        double s;  // fraction along the segment
    };

    Nearest nearest(PhasePoint x) const;
    void build_blocks();

    std::vector<PhasePoint> samples_;
    std::vector<Block> blocks_;
    LienardSystem sys_;
    IntegrationResult orbit_;  // one period of dense output from (x_max, 0)
    double period_ = 0.0;
    double x_max_ = 0.0;
    double mu_ = 0.0;
    double resolution_ = 0.0;
    double max_chord_ = 0.0;
};

/// Relaxation time: first time after which the free trajectory from x0 stays
/// within `fraction * x_max` of the cycle for a full period.
double relaxation_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, double fraction = 0.01,
                       double t_max = 400.0);

}  // namespace lcsync
