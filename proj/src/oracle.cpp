#include "lcsync/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

constexpr double kBlowUp = 1e12;
constexpr double kZeroBang = 1e-7;

double uniform01(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

BangSchedule merge_schedule(int first_sign, const std::vector<double>& durations)
{
    BangSchedule sch;
    std::vector<std::pair<int, double>> bangs;
    int sign = first_sign;
    for (double d : durations) {
        if (d > kZeroBang) {
            if (!bangs.empty() && bangs.back().first == sign) {
                bangs.back().second += d;
            } else {
                bangs.emplace_back(sign, d);
            }
        }
        sign = -sign;
    }
    sch.first_sign = bangs.empty() ? first_sign : bangs.front().first;
    double t = 0.0;
    for (std::size_t i = 0; i < bangs.size(); ++i) {
        t += bangs[i].second;
        if (i + 1 < bangs.size()) {
            sch.switches.push_back(t);
        }
    }
    sch.t_f = t;
    return sch;
}

struct Objective {
    const LienardSystem& sys;
    const LimitCycle& lc;
    const DirectProblem& prob;
    const OracleOptions& opt;
    std::size_t evals = 0;

    /// Returns (objective, miss).
    std::pair<double, double> operator()(const std::vector<double>& d)
    {
        ++evals;
        std::vector<double> dur(d.size());
        std::transform(d.begin(), d.end(), dur.begin(), [](double v) { return std::abs(v); });
        const double t = std::accumulate(dur.begin(), dur.end(), 0.0);
        PhasePoint x;
        try {
            x = shoot(sys, prob.x0, prob.K, prob.first_sign, dur, opt.tol);
        } catch (const NumericalError&) {
            return {kBlowUp, kBlowUp};
        }
        if (!std::isfinite(x.x1) || !std::isfinite(x.x2) || std::hypot(x.x1, x.x2) > opt.escape_radius) {
            return {kBlowUp, kBlowUp};
        }
        const double miss = lc.chi(x);
        return {t + opt.penalty * miss * miss, miss};
    }
};

/// Nelder-Mead on |d|; returns the best vertex.
std::vector<double> nelder_mead(Objective& f, std::vector<double> x0, double step, std::size_t max_evals)
{
    const std::size_t n = x0.size();
    std::vector<std::vector<double>> simplex(n + 1, x0);
    std::vector<double> value(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        simplex[i + 1][i] += step * std::max(std::abs(x0[i]), 0.2);
    }
    for (std::size_t i = 0; i <= n; ++i) {
        value[i] = f(simplex[i]).first;
    }
    const std::size_t budget = f.evals + max_evals;
    std::vector<std::size_t> order(n + 1);
    while (f.evals < budget) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value[a] < value[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[n - 1];
        double size = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                size = std::max(size, std::abs(simplex[i][k] - simplex[best][k]));
            }
        }
        if (size < 1e-10 && value[worst] - value[best] < 1e-12) {
            break;
        }
        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i != worst) {
                for (std::size_t k = 0; k < n; ++k) {
                    centroid[k] += simplex[i][k] / static_cast<double>(n);
                }
            }
        }
        auto along = [&](double c) {
            std::vector<double> p(n);
            for (std::size_t k = 0; k < n; ++k) {
                p[k] = centroid[k] + c * (simplex[worst][k] - centroid[k]);
            }
            return p;
        };
        const auto xr = along(-1.0);
        const double fr = f(xr).first;
        if (fr < value[best]) {
            const auto xe = along(-2.0);
            const double fe = f(xe).first;
            if (fe < fr) {
                simplex[worst] = xe;
                value[worst] = fe;
            } else {
                simplex[worst] = xr;
                value[worst] = fr;
            }
        } else if (fr < value[second]) {
            simplex[worst] = xr;
            value[worst] = fr;
        } else {
            const bool outside = fr < value[worst];
            const auto xc = along(outside ? -0.5 : 0.5);
            const double fc = f(xc).first;
            if (fc < (outside ? fr : value[worst])) {
                simplex[worst] = xc;
                value[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) {
                        continue;
                    }
                    for (std::size_t k = 0; k < n; ++k) {
                        simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
                    }
                    value[i] = f(simplex[i]).first;
                }
            }
        }
    }
    const auto it = std::min_element(value.begin(), value.end());
    auto out = simplex[static_cast<std::size_t>(it - value.begin())];
    for (double& v : out) {
        v = std::abs(v);
    }
    return out;
}

}  // namespace

PhasePoint shoot(const LienardSystem& sys, PhasePoint x0, double K, int first_sign,
                 const std::vector<double>& durations, const Tolerances& tol)
{
    State4 y{x0.x1, x0.x2, 0.0, 0.0};
    int sign = first_sign;
    double t = 0.0;
    for (double d : durations) {
        if (!std::isfinite(d)) {
            throw NumericalError("non-finite bang duration");
        }
        if (t + d > t) {
            const double F = sign * K;
            const Field field = [&sys, F](double, const State4& s) { return canonical_rhs(sys, s, F); };
            const auto res = integrate(field, y, t, t + d, Direction::forward, {}, tol);
            if (res.status == Status::step_failure) {
                throw NumericalError("forward shooting failed");
            }
            y = res.final_state();
            t += d;
        }
        sign = -sign;
    }
    return {y[0], y[1]};
}

double arrival_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, double K, int first_sign,
                    const std::vector<double>& switches, double t_max, const Tolerances& tol)
{
    std::vector<double> knots{0.0};
    knots.insert(knots.end(), switches.begin(), switches.end());
    knots.push_back(t_max);
    if (!std::is_sorted(knots.begin(), knots.end())) {
        throw DomainError("switch times must be increasing and below t_max");
    }
    const EventSpec hit{"cycle", [&lc](double, const State4& s) { return lc.chi({s[0], s[1]}); }, Crossing::any,
                        true};
    State4 y{x0.x1, x0.x2, 0.0, 0.0};
    int sign = first_sign;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (knots[i + 1] > knots[i]) {
            const double F = sign * K;
            const Field field = [&sys, F](double, const State4& s) { return canonical_rhs(sys, s, F); };
            const auto res = integrate(field, y, knots[i], knots[i + 1], Direction::forward, {hit}, tol);
            if (res.status == Status::terminal_event) {
                return res.events.back().t;
            }
            if (res.status == Status::step_failure) {
                return -1.0;
            }
            y = res.final_state();
        }
        sign = -sign;
    }
    return -1.0;
}

DirectSolution solve_direct(const LienardSystem& sys, const LimitCycle& lc, const DirectProblem& problem,
                            std::vector<double> start, const OracleOptions& opt)
{
    if (start.size() != problem.n_bangs || problem.n_bangs == 0) {
        throw DomainError("start vector must hold one duration per bang");
    }
    Objective f{sys, lc, problem, opt};
    double best = f(start).first;
    double step = 0.25;
    for (int round = 0; round < 6; ++round) {
        auto x = nelder_mead(f, start, step, opt.max_evals);
        const double v = f(x).first;
        const bool improved = v < best - 1e-12;
        if (v <= best) {
            best = v;
            start = std::move(x);
        }
        if (!improved && round > 0) {
            break;
        }
        step *= 0.2;
    }
    DirectSolution sol;
    sol.durations = start;
    sol.t_f = std::accumulate(start.begin(), start.end(), 0.0);
    sol.miss = f(start).second;
    sol.feasible = std::abs(sol.miss) <= opt.feas_tol;
    sol.schedule = merge_schedule(problem.first_sign, start);
    sol.evaluations = f.evals;
    return sol;
}

OracleResult direct_min_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, ForceBound bound,
                             const OracleOptions& opt)
{
    if (opt.max_bangs == 0 || opt.starts == 0 || opt.grid.empty()) {
        throw DomainError("oracle needs max_bangs >= 1, starts >= 1 and a non-empty seed grid");
    }
    OracleResult out;
    if (std::abs(lc.chi(x0)) <= opt.feas_tol) {
        out.feasible = true;
        out.schedule.first_sign = 1;
        out.best.feasible = true;
        out.best.schedule = out.schedule;
        return out;
    }
    std::mt19937_64 rng(opt.seed);
    for (std::size_t n = 1; n <= opt.max_bangs; ++n) {
        for (int first : {-1, 1}) {
            DirectProblem prob{x0, bound.K(), n, first};
            Objective f{sys, lc, prob, opt};
            // Coarse grid over bang durations; the best points seed the local searches.
            std::vector<std::pair<double, std::vector<double>>> pool;
            std::vector<std::size_t> idx(n, 0);
            while (true) {
                std::vector<double> d(n);
                for (std::size_t k = 0; k < n; ++k) {
                    d[k] = opt.grid[idx[k]];
                }
                pool.emplace_back(f(d).first, d);
                std::size_t k = 0;
                while (k < n && ++idx[k] == opt.grid.size()) {
                    idx[k++] = 0;
                }
                if (k == n) {
                    break;
                }
            }
            std::stable_sort(pool.begin(), pool.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            DirectSolution best;
            best.t_f = std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < opt.starts; ++s) {
                std::vector<double> d = pool[s % pool.size()].second;
                if (s >= pool.size() || s > 0) {
                    for (double& v : d) {
                        v *= 0.8 + 0.4 * uniform01(rng);
                    }
                }
                auto sol = solve_direct(sys, lc, prob, d, opt);
                const bool better = (sol.feasible && !best.feasible) ||
                                    (sol.feasible == best.feasible && sol.t_f < best.t_f);
                if (better) {
                    best = std::move(sol);
                }
            }
            out.per_problem.push_back(best);
        }
    }

    double t_best = std::numeric_limits<double>::infinity();
    for (const auto& s : out.per_problem) {
        if (s.feasible) {
            t_best = std::min(t_best, s.t_f);
        }
    }
    if (!std::isfinite(t_best)) {
        std::ostringstream os;
        os << "no schedule with up to " << opt.max_bangs << " bangs reaches the cycle from (" << x0.x1 << ", "
           << x0.x2 << ") within chi tolerance " << opt.feas_tol;
        out.diagnostic = os.str();
        return out;
    }
    // Extra bangs of zero length reproduce the same time; report the fewest.
    const DirectSolution* pick = nullptr;
    for (const auto& s : out.per_problem) {
        if (!s.feasible || s.t_f > t_best * (1.0 + 1e-5) + 1e-7) {
            continue;
        }
        if (!pick || s.schedule.bangs() < pick->schedule.bangs() ||
            (s.schedule.bangs() == pick->schedule.bangs() && s.t_f < pick->t_f)) {
            pick = &s;
        }
    }
    out.feasible = true;
    out.best = *pick;
    out.t_f = pick->t_f;
    out.schedule = pick->schedule;
    return out;
}

}  // namespace lcsync
