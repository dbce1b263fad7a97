#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include "lcsync/errors.hpp"
#include "lcsync/synthesis.hpp"

namespace lcsync {

SwitchingCurves switching_curves(const SynthesisField& field)
{
    SwitchingCurves out;
    out.plus.id = "S+";
    out.minus.id = "S-";
    std::map<std::pair<std::size_t, std::size_t>, Polyline> branches;
    for (std::size_t s = 0; s < field.sheets().size(); ++s) {
        for (std::size_t m : field.sheets()[s].members) {
            const auto& sw = field.extremals()[m].switch_states;
            for (std::size_t j = 0; j < sw.size(); ++j) {
                const PhasePoint p = sw[sw.size() - 1 - j].x;
                auto& b = branches[{s, j}];
                if (b.id.empty()) {
                    std::ostringstream os;
                    os << "sheet" << s << "_switch" << j + 1;
                    b.id = os.str();
                }
                b.points.push_back(p);
            }
        }
    }
    for (auto& [key, b] : branches) {
        for (const PhasePoint& p : b.points) {
            (p.x1 > 0.0 ? out.plus : out.minus).points.push_back(p);
        }
        if (b.points.size() >= 2) {
            out.branches.push_back(std::move(b));
        }
    }
    if (out.plus.points.size() < 2) {
        out.plus.points.clear();
    }
    if (out.minus.points.size() < 2) {
        out.minus.points.clear();
    }
    return out;
}

namespace {

/// Fastest candidate time per final-bang sign.
std::pair<double, double> best_by_sign(const std::vector<Candidate>& cands)
{
    double plus = std::numeric_limits<double>::infinity();
    double minus = plus;
    for (const Candidate& c : cands) {
        double& slot = c.final_sign > 0 ? plus : minus;
        slot = std::min(slot, c.t_f);
    }
    return {plus, minus};
}

std::vector<Polyline> chain(std::vector<PhasePoint> pts, double link, const std::string& prefix)
{
    std::vector<Polyline> out;
    while (!pts.empty()) {
        auto far = std::max_element(pts.begin(), pts.end(), [](PhasePoint a, PhasePoint b) {
            return std::hypot(a.x1, a.x2) < std::hypot(b.x1, b.x2);
        });
        Polyline line;
        line.id = prefix + std::to_string(out.size());
        line.points.push_back(*far);
        pts.erase(far);
        while (!pts.empty()) {
            const PhasePoint tail = line.points.back();
            auto next = std::min_element(pts.begin(), pts.end(), [tail](PhasePoint a, PhasePoint b) {
                return distance(a, tail) < distance(b, tail);
            });
            if (distance(*next, tail) > link) {
                break;
            }
            line.points.push_back(*next);
            pts.erase(next);
        }
        out.push_back(std::move(line));
    }
    return out;
}

}  // namespace

CoexistenceCurve coexistence_curve(const SynthesisField& field, const CoexistenceOptions& opt)
{
    if (field.region() != Region::interior) {
        throw DomainError("the coexistence curve is defined for interior fields");
    }
    if (opt.grid < 4) {
        throw DomainError("coexistence grid needs at least 4 nodes per side");
    }
    const LimitCycle& lc = field.cycle();
    double y_max = 0.0;
    for (const PhasePoint& p : lc.samples()) {
        y_max = std::max(y_max, std::abs(p.x2));
    }
    const std::size_t n = opt.grid;
    const double h1 = 2.0 * lc.x_max() / static_cast<double>(n - 1);
    const double h2 = 2.0 * y_max / static_cast<double>(n - 1);
    const double margin = 10.0 * lc.resolution();

    struct Node {
        bool valid = false;
        int winner = 0;
    };
    auto node_at = [&](std::size_t i, std::size_t j) {
        return PhasePoint{-lc.x_max() + static_cast<double>(i) * h1, -y_max + static_cast<double>(j) * h2};
    };
    std::vector<Node> nodes(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const PhasePoint p = node_at(i, j);
            if (lc.chi(p) >= -margin) {
                continue;
            }
            const auto cands = field.candidates(p);
            if (cands.empty()) {
                continue;
            }
            nodes[i * n + j] = {true, cands.front().final_sign};
        }
    }

    const double tie = field.options().time_tie_tol;
    CoexistenceCurve out;
    std::vector<PhasePoint> points;
    std::size_t failed = 0;
    auto bisect = [&](PhasePoint a, PhasePoint b) {
        auto gap = [&](double s) -> std::optional<double> {
            const PhasePoint p{a.x1 + s * (b.x1 - a.x1), a.x2 + s * (b.x2 - a.x2)};
            const auto [tp, tm] = best_by_sign(field.candidates(p));
            if (!std::isfinite(tp) || !std::isfinite(tm)) {
                return std::nullopt;
            }
            return tp - tm;
        };
        auto ga = gap(0.0);
        auto gb = gap(1.0);
        if (!ga || !gb || (*ga > 0.0) == (*gb > 0.0)) {
            ++failed;
            return;
        }
        double sa = 0.0, sb = 1.0, fa = *ga, fb = *gb;
        int side = 0;
        for (int it = 0; it < opt.max_iter; ++it) {
            const double s = (sa * fb - sb * fa) / (fb - fa);
            const auto gs = gap(s);
            if (!gs) {
                ++failed;
                return;
            }
            if (std::abs(*gs) < 0.1 * tie || sb - sa < 1e-12) {
                points.push_back({a.x1 + s * (b.x1 - a.x1), a.x2 + s * (b.x2 - a.x2)});
                out.max_time_gap = std::max(out.max_time_gap, std::abs(*gs));
                return;
            }
            if ((*gs > 0.0) == (fa > 0.0)) {
                sa = s;
                fa = *gs;
                if (side == -1) {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                sb = s;
                fb = *gs;
                if (side == 1) {
                    fa *= 0.5;
                }
                side = 1;
            }
        }
        ++failed;
    };

    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const Node& a = nodes[i * n + j];
            if (!a.valid) {
                continue;
            }
            if (i + 1 < n && nodes[(i + 1) * n + j].valid && nodes[(i + 1) * n + j].winner != a.winner) {
                bisect(node_at(i, j), node_at(i + 1, j));
            }
            if (j + 1 < n && nodes[i * n + j + 1].valid && nodes[i * n + j + 1].winner != a.winner) {
                bisect(node_at(i, j), node_at(i, j + 1));
            }
        }
    }
    if (points.empty()) {
        out.diagnostic = "no change of the winning final bang found on the grid";
        return out;
    }
    if (failed > 0) {
        std::ostringstream os;
        os << failed << " grid edge(s) changed winner without a bracketed tie (field boundary)";
        out.diagnostic = os.str();
    }
    out.branches = chain(std::move(points), 3.0 * std::hypot(h1, h2), "Bc");
    return out;
}

std::vector<double> critical_crossings(const LienardSystem& sys, const LimitCycle& lc, Region region,
                                       ForceBound bound, const RewindOptions& opt)
{
    const auto [left, right] = lc.extreme_points();
    (void)right;
    const int sign = region == Region::exterior ? 1 : -1;
    const auto admissible = final_bang_sign(sys, lc, left, region, bound, opt.snap_distance);
    if (std::find(admissible.begin(), admissible.end(), sign) == admissible.end()) {
        return {};
    }
    // Near the birth of a crossing the switch is almost tangent to the axis
    // and its position is ill-conditioned; counting only needs a coarse check.
    RewindOptions o = opt;
    o.axis_tol = std::max(o.axis_tol, 1e-2);
    return axis_crossings(critical_trajectory(sys, lc, CriticalSide::left, bound, region, o));
}

double critical_K(const LienardSystem& sys, const LimitCycle& lc, int n, Region region, double K_lo, double K_hi,
                  double tol, const RewindOptions& opt)
{
    if (n < 1) {
        throw DomainError("crossing index starts at 1");
    }
    if (!(K_lo > 0.0) || !(K_hi > K_lo) || !(tol > 0.0)) {
        throw DomainError("critical K needs 0 < K_lo < K_hi and tol > 0");
    }
    auto count = [&](double K) {
        return static_cast<int>(critical_crossings(sys, lc, region, ForceBound(K), opt).size());
    };
    const int c_lo = count(K_lo);
    const int c_hi = count(K_hi);
    if (c_lo < n || c_hi >= n) {
        std::ostringstream os;
        os << "bracket [" << K_lo << ", " << K_hi << "] does not straddle crossing " << n << " (counts " << c_lo
           << " and " << c_hi << ")";
        throw DomainError(os.str());
    }
    while (K_hi - K_lo > tol) {
        const double mid = 0.5 * (K_lo + K_hi);
        if (count(mid) >= n) {
            K_lo = mid;
        } else {
            K_hi = mid;
        }
    }
    return 0.5 * (K_lo + K_hi);
}

std::vector<CriticalCurve> critical_curves(const LienardSystem& sys, const LimitCycle& lc, Region region,
                                           const std::vector<double>& K_grid, int n_max, const RewindOptions& opt)
{
    std::vector<double> Ks = K_grid;
    std::sort(Ks.begin(), Ks.end());
    std::vector<CriticalCurve> curves(static_cast<std::size_t>(std::max(n_max, 0)));
    for (int n = 1; n <= n_max; ++n) {
        curves[static_cast<std::size_t>(n - 1)].n = n;
        curves[static_cast<std::size_t>(n - 1)].region = region;
    }
    const RewindOptions& o = opt;
    std::vector<int> counts;
    for (double K : Ks) {
        const auto xs = critical_crossings(sys, lc, region, ForceBound(K), o);
        counts.push_back(static_cast<int>(xs.size()));
        for (int n = 1; n <= n_max && n <= static_cast<int>(xs.size()); ++n) {
            curves[static_cast<std::size_t>(n - 1)].points.emplace_back(K, xs[static_cast<std::size_t>(n - 1)]);
        }
    }
    // Add the birth point of each crossing where the count changes inside the grid.
    for (std::size_t i = 0; i + 1 < Ks.size(); ++i) {
        for (int n = counts[i + 1] + 1; n <= std::min(counts[i], n_max); ++n) {
            const double Kc = critical_K(sys, lc, n, region, Ks[i], Ks[i + 1], 1e-6 * Ks[i + 1], o);
            const auto xs = critical_crossings(sys, lc, region, ForceBound(Kc * (1.0 - 1e-7)), o);
            if (static_cast<int>(xs.size()) >= n) {
                curves[static_cast<std::size_t>(n - 1)].points.emplace_back(Kc, xs[static_cast<std::size_t>(n - 1)]);
            }
        }
    }
    for (auto& c : curves) {
        std::sort(c.points.begin(), c.points.end());
    }
    return curves;
}

std::vector<double> crossing_parameters(const LienardSystem& sys, const LimitCycle& lc, Region region, int n,
                                        double x10, double K_lo, double K_hi, std::size_t scan, double tol,
                                        const RewindOptions& opt)
{
    if (n < 1 || scan < 2 || !(K_lo > 0.0) || !(K_hi > K_lo)) {
        throw DomainError("crossing_parameters needs n >= 1, scan >= 2 and 0 < K_lo < K_hi");
    }
    const RewindOptions& o = opt;
    auto excess = [&](double K) -> std::optional<double> {
        const auto xs = critical_crossings(sys, lc, region, ForceBound(K), o);
        if (static_cast<int>(xs.size()) < n) {
            return std::nullopt;
        }
        return xs[static_cast<std::size_t>(n - 1)] - x10;
    };
    auto bisect = [&](double a, double ga, double b) {
        while (std::abs(b - a) > tol) {
            const double m = 0.5 * (a + b);
            const auto gm = excess(m);
            if (!gm) {
                break;
            }
            if ((*gm > 0.0) == (ga > 0.0)) {
                a = m;
                ga = *gm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    };
    std::vector<double> out;
    double K_prev = K_lo;
    auto g_prev = excess(K_prev);
    for (std::size_t i = 1; i < scan; ++i) {
        const double K = K_lo + (K_hi - K_lo) * static_cast<double>(i) / static_cast<double>(scan - 1);
        const auto g = excess(K);
        if (g && g_prev) {
            if ((*g > 0.0) != (*g_prev > 0.0)) {
                out.push_back(bisect(K_prev, *g_prev, K));
            }
        } else if (g || g_prev) {
            // The crossing is born between the two scan points and may pass x10
            // before it disappears, so the sign is compared at its birth as well.
            double in = g ? K : K_prev;
            double gone = g ? K_prev : K;
            const double g_in = g ? *g : *g_prev;
            double g_edge = g_in;
            while (std::abs(gone - in) > 1e-3 * tol) {
                const double m = 0.5 * (in + gone);
                std::optional<double> gm;
                try {
                    gm = excess(m);
                } catch (const NumericalError&) {
                    // switch too close to tangency to place; the crossing is not born yet
                }
                if (gm) {
                    in = m;
                    g_edge = *gm;
                } else {
                    gone = m;
                }
            }
            if ((g_edge > 0.0) != (g_in > 0.0)) {
                out.push_back(bisect(g ? K : K_prev, g_in, in));
            }
        }
        K_prev = K;
        g_prev = g;
    }
    return out;
}

PhaseDiagram phase_diagram(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc, Region region,
                           const std::vector<double>& K_grid, const std::vector<double>& x10_grid,
                           const FieldOptions& opt, int n_max)
{
    if (K_grid.empty() || x10_grid.empty()) {
        throw DomainError("phase diagram grids must not be empty");
    }
    PhaseDiagram pd;
    pd.region = region;
    pd.K_grid = K_grid;
    pd.x10_grid = x10_grid;
    for (double x : x10_grid) {
        const double chi = lc->chi({x, 0.0});
        if ((chi > 0.0) != (region == Region::exterior)) {
            std::ostringstream os;
            os << "x10 = " << x << " is not in the " << to_string(region) << " region";
            throw DomainError(os.str());
        }
    }
    for (double K : K_grid) {
        const auto field = SynthesisField::build(sys, lc, ForceBound(K), region, opt);
        std::vector<int> row;
        for (double x : x10_grid) {
            try {
                row.push_back(static_cast<int>(field.optimal_for_point({x, 0.0}).schedule.bangs()));
            } catch (const CoverageError& e) {
                row.push_back(0);
                pd.diagnostics.push_back(e.what());
            }
        }
        pd.bangs.push_back(std::move(row));
    }
    pd.curves = critical_curves(sys, *lc, region, K_grid, n_max, opt.rewind);
    return pd;
}

MinTimeCurve min_time_curve(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc, PhasePoint x0,
                            std::vector<double> K_grid, const MinTimeOptions& opt)
{
    if (K_grid.size() < 3) {
        throw DomainError("a min-time curve needs at least 3 values of K");
    }
    for (double K : K_grid) {
        if (!(K > 0.0)) {
            throw DomainError("K values must be positive");
        }
    }
    MinTimeCurve out;
    out.x0 = x0;
    out.region = lc->chi(x0) > 0.0 ? Region::exterior : Region::interior;
    std::sort(K_grid.begin(), K_grid.end(), std::greater<>());
    K_grid.erase(std::unique(K_grid.begin(), K_grid.end()), K_grid.end());

    auto from_candidate = [](double K, const Candidate& c) {
        return MinTimePoint{K, c.t_f, static_cast<int>(c.schedule.bangs()), c.sheet, c.anchor_phase};
    };
    auto solve = [&](double K) {
        const auto field = SynthesisField::build(sys, lc, ForceBound(K), out.region, opt.field);
        return from_candidate(K, field.optimal_for_point(x0).best);
    };
    // Continue known optimal branches to a nearby K; fall back to a new field.
    auto solve_near = [&](double K, std::initializer_list<const MinTimePoint*> hints) {
        std::optional<MinTimePoint> best;
        for (const MinTimePoint* h : hints) {
            const auto c = SynthesisField::refine_at(sys, *lc, ForceBound(K), out.region, h->sheet,
                                                     h->anchor_phase, h->t_f, x0, opt.field);
            if (c && (!best || c->t_f < best->t_f)) {
                best = from_candidate(K, *c);
            }
        }
        return best ? *best : solve(K);
    };

    // Largest K first: coverage only gets harder as K shrinks.
    for (double K : K_grid) {
        try {
            out.points.push_back(solve(K));
        } catch (const CoverageError& e) {
            out.truncated = true;
            out.diagnostic = e.what();
            break;
        }
    }
    std::reverse(out.points.begin(), out.points.end());
    const auto& pts = out.points;
    if (pts.size() < 3) {
        return out;
    }

    // One-sided slope jumps, compared against the typical jump along the curve.
    std::vector<double> slope;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        slope.push_back((pts[i + 1].t_f - pts[i].t_f) / (pts[i + 1].K - pts[i].K));
    }
    std::vector<double> jump;  // jump[i] sits at point i + 1
    for (std::size_t i = 0; i + 1 < slope.size(); ++i) {
        jump.push_back(std::abs(slope[i + 1] - slope[i]));
    }
    std::vector<double> sorted = jump;
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
    const double noise = std::max(sorted[sorted.size() / 2], 1e-12);

    std::vector<std::pair<std::size_t, std::size_t>> brackets;  // adjacent point indices
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i].bangs != pts[i + 1].bangs) {
            brackets.emplace_back(i, i + 1);
        }
    }
    for (std::size_t i = 0; i < jump.size(); ++i) {
        const bool peak = (i == 0 || jump[i] >= jump[i - 1]) && (i + 1 == jump.size() || jump[i] >= jump[i + 1]);
        const bool known = std::any_of(brackets.begin(), brackets.end(),
                                       [i](const auto& b) { return b.first <= i + 2 && i <= b.second; });
        if (!peak || known || jump[i] <= opt.noise_factor * noise) {
            continue;
        }
        // A smooth curve halves its slope jump with the spacing; a kink keeps it.
        const MinTimePoint& c = pts[i + 1];
        const MinTimePoint l = solve_near(0.5 * (pts[i].K + c.K), {&pts[i], &c});
        const MinTimePoint r = solve_near(0.5 * (c.K + pts[i + 2].K), {&c, &pts[i + 2]});
        const double fine = std::abs((r.t_f - c.t_f) / (r.K - c.K) - (c.t_f - l.t_f) / (c.K - l.K));
        if (fine >= 0.75 * jump[i]) {
            brackets.emplace_back(i, i + 2);
        }
    }
    std::sort(brackets.begin(), brackets.end());

    for (const auto& [ia, ib] : brackets) {
        MinTimePoint a = pts[ia];
        MinTimePoint b = pts[ib];
        if (a.bangs != b.bangs) {
            try {
                while (b.K - a.K > opt.K_tol && std::abs(a.t_f - b.t_f) > opt.continuity_tol) {
                    const MinTimePoint m = solve_near(0.5 * (a.K + b.K), {&a, &b});
                    if (m.K <= a.K || m.K >= b.K) {
                        break;
                    }
                    (m.bangs == a.bangs ? a : b) = m;
                }
            } catch (const CoverageError& e) {
                out.diagnostic = e.what();
            }
        }
        out.kinks.push_back(Kink{0.5 * (a.K + b.K), b.K - a.K, a.t_f, b.t_f, a.bangs, b.bangs});
    }
    return out;
}

}  // namespace lcsync
