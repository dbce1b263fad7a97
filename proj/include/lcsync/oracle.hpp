#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lcsync/extremal.hpp"

namespace lcsync {

struct OracleOptions {
    std::size_t max_bangs = 4;
    std::size_t starts = 32;  // per (bang count, first sign)
    double feas_tol = 1e-4;
    double penalty = 1e6;
    std::uint64_t seed = 1;
    std::size_t max_evals = 3000;  // per local search
    double escape_radius = 50.0;
    std::vector<double> grid{0.2, 0.6, 1.2, 2.4, 4.0};  // coarse seed values for each bang duration
    Tolerances tol{1e-9, 1e-9, 1e-10, 0.25, 2000000, 100000};
};

struct DirectProblem {
    PhasePoint x0;
    double K = 1.0;
    std::size_t n_bangs = 1;
    int first_sign = 1;
};

struct DirectSolution {
    bool feasible = false;
    double t_f = 0.0;
    double miss = 0.0;  // chi at the terminal point
    std::vector<double> durations;
    BangSchedule schedule;  // zero-length bangs removed
    std::size_t evaluations = 0;
};

struct OracleResult {
    bool feasible = false;
    double t_f = 0.0;
    BangSchedule schedule;
    DirectSolution best;
    std::vector<DirectSolution> per_problem;  // one per (n, first_sign), n ascending, -1 before +1
    std::string diagnostic;
};

/// Terminal state after running the bangs with the given durations.
PhasePoint shoot(const LienardSystem& sys, PhasePoint x0, double K, int first_sign,
                 const std::vector<double>& durations, const Tolerances& tol);

/// First time the forward bang-bang run with fixed switch times meets the
/// cycle, or a negative value if it does not within t_max.
double arrival_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, double K, int first_sign,
                    const std::vector<double>& switches, double t_max, const Tolerances& tol = {});

/// Penalised local search for one (n, first_sign) from the given bang durations.
DirectSolution solve_direct(const LienardSystem& sys, const LimitCycle& lc, const DirectProblem& problem,
                            std::vector<double> start, const OracleOptions& opt);

/// Best direct solution over all bang counts up to max_bangs and both first signs.
OracleResult direct_min_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, ForceBound bound,
                             const OracleOptions& opt = {});

}  // namespace lcsync
