#include "lcsync/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <atomic>
#include <mutex>
#include <thread>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

constexpr double kNewtonTol = 1e-12;
constexpr double kAcceptTol = 1e-10;  // about the event time tolerance times |f|

double segment_distance(PhasePoint p, PhasePoint a, PhasePoint b)
{
    const double dx = b.x1 - a.x1;
    const double dy = b.x2 - a.x2;
    const double len2 = dx * dx + dy * dy;
    const double s = len2 > 0.0 ? std::clamp(((p.x1 - a.x1) * dx + (p.x2 - a.x2) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x1 - (a.x1 + s * dx), p.x2 - (a.x2 + s * dy));
}

bool inside_polygon(PhasePoint p, const std::array<PhasePoint, 4>& q)
{
    bool in = false;
    for (std::size_t i = 0, j = 3; i < 4; j = i++) {
        if ((q[i].x2 > p.x2) != (q[j].x2 > p.x2)) {
            const double xc = q[i].x1 + (p.x2 - q[i].x2) * (q[j].x1 - q[i].x1) / (q[j].x2 - q[i].x2);
            if (p.x1 < xc) {
                in = !in;
            }
        }
    }
    return in;
}

double quad_distance(PhasePoint p, const std::array<PhasePoint, 4>& q)
{
    if (inside_polygon(p, q)) {
        return 0.0;
    }
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 4; ++i) {
        d = std::min(d, segment_distance(p, q[i], q[(i + 1) % 4]));
    }
    return d;
}

/// Inverse of the bilinear map (u, v) -> quad, clamped to the unit square.
std::pair<double, double> inverse_bilinear(PhasePoint p, const std::array<PhasePoint, 4>& q)
{
    // q[0] = (u=0,v=0), q[1] = (0,1), q[2] = (1,1), q[3] = (1,0)
    double u = 0.5, v = 0.5;
    for (int it = 0; it < 20; ++it) {
        const double x = (1 - u) * (1 - v) * q[0].x1 + (1 - u) * v * q[1].x1 + u * v * q[2].x1 + u * (1 - v) * q[3].x1;
        const double y = (1 - u) * (1 - v) * q[0].x2 + (1 - u) * v * q[1].x2 + u * v * q[2].x2 + u * (1 - v) * q[3].x2;
        const double xu = -(1 - v) * q[0].x1 - v * q[1].x1 + v * q[2].x1 + (1 - v) * q[3].x1;
        const double yu = -(1 - v) * q[0].x2 - v * q[1].x2 + v * q[2].x2 + (1 - v) * q[3].x2;
        const double xv = -(1 - u) * q[0].x1 + (1 - u) * q[1].x1 + u * q[2].x1 - u * q[3].x1;
        const double yv = -(1 - u) * q[0].x2 + (1 - u) * q[1].x2 + u * q[2].x2 - u * q[3].x2;
        const double det = xu * yv - xv * yu;
        if (std::abs(det) < 1e-300) {
            break;
        }
        const double rx = p.x1 - x;
        const double ry = p.x2 - y;
        u = std::clamp(u + (rx * yv - xv * ry) / det, 0.0, 1.0);
        v = std::clamp(v + (xu * ry - rx * yu) / det, 0.0, 1.0);
    }
    return {u, v};
}

template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn)
{
    if (jobs <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (unsigned w = 0; w < jobs; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace

SynthesisField SynthesisField::build(const LienardSystem& sys, std::shared_ptr<const LimitCycle> lc,
                                     ForceBound bound, Region region, const FieldOptions& opt)
{
    if (opt.n_anchors < 64) {
        throw DomainError("a field needs at least 64 anchors");
    }
    SynthesisField field;
    field.sys_ = sys;
    field.lc_ = std::move(lc);
    field.K_ = bound.K();
    field.region_ = region;
    field.opt_ = opt;
    const LimitCycle& cyc = *field.lc_;
    const double T = cyc.period();
    const double half = 0.5 * T;

    field.sheets_ = sheet_layout(cyc, region);

    const std::size_t per_sheet = opt.n_anchors / 2;
    const double step = half / static_cast<double>(per_sheet);

    struct Job {
        std::size_t sheet;
        double phase;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < 2; ++s) {
        for (std::size_t j = 0; j < per_sheet; ++j) {
            jobs.push_back({s, field.sheets_[s].phase_lo + (static_cast<double>(j) + 0.5) * step});
        }
    }

    auto rewind_job = [&](const Job& job) {
        return rewind_from_phase(field.sys_, cyc, job.phase, field.sheets_[job.sheet].final_sign, bound, region,
                                 opt.rewind);
    };

    std::vector<ExtremalTrajectory> first(jobs.size());
    parallel_for(jobs.size(), opt.jobs, [&](std::size_t i) { first[i] = rewind_job(jobs[i]); });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        field.sheets_[jobs[i].sheet].members.push_back(field.extremals_.size());
        field.extremals_.push_back(std::move(first[i]));
    }

    // Boundary members at the extreme points. The upper end of each sheet is
    // the critical trajectory proper; the lower end (BL-/BR+ in the exterior)
    // only exists for large K and must survive a dominance check.
    std::vector<ExtremalTrajectory> lower_ends;
    for (std::size_t s = 0; s < 2; ++s) {
        Sheet& sh = field.sheets_[s];
        for (bool upper : {true, false}) {
            const double phase = upper ? sh.phase_hi : sh.phase_lo;
            const PhasePoint xe = phase == half ? cyc.extreme_points().first : cyc.extreme_points().second;
            const auto signs = final_bang_sign(field.sys_, cyc, xe, region, bound, opt.rewind.snap_distance);
            if (std::find(signs.begin(), signs.end(), sh.final_sign) == signs.end()) {
                continue;
            }
            RewindOptions ro = opt.rewind;
            ro.record_axis_crossings = true;
            auto tr = rewind_extremal(field.sys_, cyc, xe, sh.final_sign, bound, region, ro);
            tr.anchor_phase = phase;
            if (upper) {
                field.criticals_.push_back(tr);
                sh.members.push_back(field.extremals_.size());
                field.extremals_.push_back(std::move(tr));
            } else {
                lower_ends.push_back(std::move(tr));
            }
        }
    }
    std::sort(field.criticals_.begin(), field.criticals_.end(), [](const auto& a, const auto& b) {
        return a.anchor.x1 < b.anchor.x1;
    });

    // Adaptive refinement between neighbours that drift apart. The two sheets
    // mirror each other member for member, so a gap refined in one is refined
    // in both and the field stays symmetric.
    field.resample();
    const double min_gap = step / std::pow(2.0, opt.max_refine_depth);
    const double r2 = opt.refine_radius * opt.refine_radius;
    auto roi = [r2](PhasePoint p) { return p.x1 * p.x1 + p.x2 * p.x2 <= r2; };
    auto too_wide = [&](const Sheet& sh, std::size_t m) {
        const auto& a = field.grid_points_[sh.members[m]];
        const auto& b = field.grid_points_[sh.members[m + 1]];
        const double pa = field.extremals_[sh.members[m]].anchor_phase;
        const double pb = field.extremals_[sh.members[m + 1]].anchor_phase;
        if (pb - pa <= min_gap) {
            return false;
        }
        double gap = 0.0;
        const std::size_t common = std::min(a.size(), b.size());
        for (std::size_t k = 0; k < common; ++k) {
            if (roi(a[k]) || roi(b[k])) {
                gap = std::max(gap, distance(a[k], b[k]));
            }
        }
        const auto& longer = a.size() > b.size() ? a : b;
        const auto& shorter = a.size() > b.size() ? b : a;
        if (common > 0 && common < longer.size() && roi(shorter.back())) {
            for (std::size_t k = common; k < longer.size(); ++k) {
                if (roi(longer[k])) {
                    gap = std::max(gap, distance(longer[k], shorter.back()));
                }
            }
        }
        return gap > opt.max_gap;
    };
    while (true) {
        std::array<std::vector<char>, 2> wide;
        for (std::size_t s = 0; s < 2; ++s) {
            const Sheet& sh = field.sheets_[s];
            for (std::size_t m = 0; m + 1 < sh.members.size(); ++m) {
                wide[s].push_back(too_wide(sh, m) ? 1 : 0);
            }
        }
        if (wide[0].size() == wide[1].size()) {
            for (std::size_t m = 0; m < wide[0].size(); ++m) {
                wide[0][m] = wide[1][m] = wide[0][m] | wide[1][m];
            }
        }
        std::vector<Job> inserts;
        for (std::size_t s = 0; s < 2; ++s) {
            const Sheet& sh = field.sheets_[s];
            for (std::size_t m = 0; m < wide[s].size(); ++m) {
                if (wide[s][m]) {
                    const double pa = field.extremals_[sh.members[m]].anchor_phase;
                    const double pb = field.extremals_[sh.members[m + 1]].anchor_phase;
                    inserts.push_back({s, 0.5 * (pa + pb)});
                }
            }
        }
        if (inserts.empty()) {
            break;
        }
        std::vector<ExtremalTrajectory> extra(inserts.size());
        parallel_for(inserts.size(), opt.jobs, [&](std::size_t i) { extra[i] = rewind_job(inserts[i]); });
        for (std::size_t i = 0; i < inserts.size(); ++i) {
            field.extremals_.push_back(std::move(extra[i]));
            field.sheets_[inserts[i].sheet].members.push_back(field.extremals_.size() - 1);
        }
        for (Sheet& sh : field.sheets_) {
            std::sort(sh.members.begin(), sh.members.end(), [&](std::size_t x, std::size_t y) {
                return field.extremals_[x].anchor_phase < field.extremals_[y].anchor_phase;
            });
        }
        field.resample();
    }

    field.build_index();
    if (!lower_ends.empty()) {
        field.prune_dominated(std::move(lower_ends));
    }
    return field;
}

void SynthesisField::resample()
{
    const double dt = opt_.sample_dt;
    grid_points_.resize(extremals_.size());
    for (std::size_t e = 0; e < extremals_.size(); ++e) {
        if (!grid_points_[e].empty()) {
            continue;
        }
        const auto& tr = extremals_[e];
        const auto n = static_cast<std::size_t>(std::floor(tr.duration() / dt)) + 1;
        grid_points_[e].reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const State4 y = tr.state_at_remaining(static_cast<double>(k) * dt);
            grid_points_[e].push_back({y[0], y[1]});
        }
    }
}

std::array<PhasePoint, 4> SynthesisField::quad(const Cell& c) const
{
    const Sheet& sh = sheets_[c.sheet];
    const auto& a = grid_points_[sh.members[c.member]];
    const auto& b = grid_points_[sh.members[c.member + 1]];
    return {a[c.k], a[c.k + 1], b[c.k + 1], b[c.k]};
}

void SynthesisField::build_index()
{
    cells_.clear();
    double lo1 = std::numeric_limits<double>::infinity(), lo2 = lo1, hi1 = -lo1, hi2 = -lo1;
    for (std::uint32_t s = 0; s < sheets_.size(); ++s) {
        const Sheet& sh = sheets_[s];
        for (std::uint32_t m = 0; m + 1 < sh.members.size(); ++m) {
            const auto& a = grid_points_[sh.members[m]];
            const auto& b = grid_points_[sh.members[m + 1]];
            const std::size_t common = std::min(a.size(), b.size());
            for (std::uint32_t k = 0; k + 1 < common; ++k) {
                cells_.push_back({s, m, k});
                for (const PhasePoint& p : {a[k], a[k + 1], b[k], b[k + 1]}) {
                    lo1 = std::min(lo1, p.x1);
                    hi1 = std::max(hi1, p.x1);
                    lo2 = std::min(lo2, p.x2);
                    hi2 = std::max(hi2, p.x2);
                }
            }
        }
    }
    const std::size_t n = opt_.index_cells;
    buckets_.assign(n * n, {});
    if (cells_.empty()) {
        return;
    }
    box_lo1_ = lo1;
    box_lo2_ = lo2;
    box_w1_ = std::max(hi1 - lo1, 1e-12) / static_cast<double>(n);
    box_w2_ = std::max(hi2 - lo2, 1e-12) / static_cast<double>(n);
    auto clampi = [n](double v) {
        return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
    };
    for (std::uint32_t c = 0; c < cells_.size(); ++c) {
        const auto q = quad(cells_[c]);
        double a1 = q[0].x1, b1 = q[0].x1, a2 = q[0].x2, b2 = q[0].x2;
        for (const auto& p : q) {
            a1 = std::min(a1, p.x1);
            b1 = std::max(b1, p.x1);
            a2 = std::min(a2, p.x2);
            b2 = std::max(b2, p.x2);
        }
        const std::size_t i0 = clampi((a1 - box_lo1_) / box_w1_), i1 = clampi((b1 - box_lo1_) / box_w1_);
        const std::size_t j0 = clampi((a2 - box_lo2_) / box_w2_), j1 = clampi((b2 - box_lo2_) / box_w2_);
        for (std::size_t i = i0; i <= i1; ++i) {
            for (std::size_t j = j0; j <= j1; ++j) {
                buckets_[i * n + j].push_back(c);
            }
        }
    }
}

double SynthesisField::max_anchor_gap() const
{
    double gap = 0.0;
    for (const Sheet& sh : sheets_) {
        for (std::size_t m = 0; m + 1 < sh.members.size(); ++m) {
            gap = std::max(gap, extremals_[sh.members[m + 1]].anchor_phase - extremals_[sh.members[m]].anchor_phase);
        }
    }
    return gap;
}

std::vector<Sheet> SynthesisField::sheet_layout(const LimitCycle& lc, Region region)
{
    // Lower half of the cycle (phase in (0, T/2), x2 < 0) and upper half.
    const double T = lc.period();
    const int lower_sign = region == Region::exterior ? 1 : -1;
    return {Sheet{lower_sign, 0.0, 0.5 * T, {}}, Sheet{-lower_sign, 0.5 * T, T, {}}};
}

std::optional<Candidate> SynthesisField::refine(std::size_t sheet, double phase, double remaining,
                                                PhasePoint x0) const
{
    return refine_at(sys_, *lc_, ForceBound(K_), region_, sheet, phase, remaining, x0, opt_);
}

std::optional<Candidate> SynthesisField::refine_at(const LienardSystem& sys, const LimitCycle& cyc,
                                                   ForceBound bound, Region region, std::size_t sheet, double phase,
                                                   double remaining, PhasePoint x0, const FieldOptions& opt)
{
    const auto layout = sheet_layout(cyc, region);
    if (sheet >= layout.size()) {
        throw DomainError("sheet index out of range");
    }
    const Sheet& sh = layout[sheet];
    const double K = bound.K();

    struct Eval {
        PhasePoint x;
        int sign;
        ExtremalTrajectory traj;
    };
    auto eval = [&](double th, double tau) -> std::optional<Eval> {
        if (!(tau > 0.0)) {
            return std::nullopt;
        }
        RewindOptions ro = opt.rewind;
        ro.t_back_max = tau;
        ro.record_axis_crossings = false;
        auto tr = rewind_from_phase(sys, cyc, th, sh.final_sign, bound, region, ro);
        if (tr.termination != Termination::horizon && tr.termination != Termination::max_bangs) {
            return std::nullopt;
        }
        if (std::abs(tr.duration() - tau) > 1e-9) {
            return std::nullopt;
        }
        const PhasePoint x = tr.earliest_point();
        const int sign = tr.arcs.front().sign;
        return Eval{x, sign, std::move(tr)};
    };

    const double h_max = 1e-6 * cyc.period();
    double th = std::clamp(phase, sh.phase_lo, sh.phase_hi);
    double tau = remaining;
    auto cur = eval(th, tau);
    if (!cur) {
        return std::nullopt;
    }
    double res = distance(cur->x, x0);
    for (int it = 0; it < 100 && res > kNewtonTol; ++it) {
        // Near a sheet end the family fans out from the extreme point, so the
        // difference step shrinks with the distance to that end.
        const double edge = std::min(th - sh.phase_lo, sh.phase_hi - th);
        const double h = std::max(std::min(h_max, 0.01 * edge), 1e-15 * cyc.period());
        const double hs = (th + h > sh.phase_hi) ? -h : h;
        const auto nb = eval(th + hs, tau);
        if (!nb) {
            return std::nullopt;
        }
        const double j11 = (nb->x.x1 - cur->x.x1) / hs;
        const double j21 = (nb->x.x2 - cur->x.x2) / hs;
        const auto f = vector_field(sys, cur->x, cur->sign * K);
        const double j12 = -f.dx1;
        const double j22 = -f.dx2;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300) {
            return std::nullopt;
        }
        const double r1 = x0.x1 - cur->x.x1;
        const double r2 = x0.x2 - cur->x.x2;
        double d_th = (r1 * j22 - j12 * r2) / det;
        double d_tau = (j11 * r2 - r1 * j21) / det;
        const double limit_th = 0.05 * cyc.period();
        const double scale = std::max({1.0, std::abs(d_th) / limit_th, std::abs(d_tau) / 0.5});
        d_th /= scale;
        d_tau /= scale;
        bool improved = false;
        for (int ls = 0; ls < 10; ++ls) {
            const double th_n = std::clamp(th + d_th, sh.phase_lo, sh.phase_hi);
            const double tau_n = tau + d_tau;
            auto next = eval(th_n, tau_n);
            if (next) {
                const double r = distance(next->x, x0);
                if (r < res) {
                    th = th_n;
                    tau = tau_n;
                    cur = std::move(next);
                    res = r;
                    improved = true;
                    break;
                }
            }
            d_th *= 0.5;
            d_tau *= 0.5;
        }
        if (!improved) {
            break;
        }
    }
    if (res > kAcceptTol) {
        return std::nullopt;
    }
    Candidate c;
    c.t_f = tau;
    c.anchor_phase = th;
    c.final_sign = sh.final_sign;
    c.sheet = sheet;
    c.schedule = cur->traj.schedule;
    c.x0_snap = cur->x;
    c.anchor = cur->traj.anchor;
    return c;
}

std::vector<Candidate> SynthesisField::candidates(PhasePoint x0) const
{
    std::vector<Candidate> out;
    if (cells_.empty()) {
        return out;
    }
    const std::size_t n = opt_.index_cells;
    const double fi = (x0.x1 - box_lo1_) / box_w1_;
    const double fj = (x0.x2 - box_lo2_) / box_w2_;
    if (fi < 0.0 || fj < 0.0 || fi >= static_cast<double>(n) || fj >= static_cast<double>(n)) {
        return out;
    }
    const auto& bucket = buckets_[static_cast<std::size_t>(fi) * n + static_cast<std::size_t>(fj)];

    struct Seed {
        double dist;
        std::size_t sheet;
        double phase;
        double tau;
        double phase_width;
    };
    std::vector<Seed> seeds;
    for (std::uint32_t ci : bucket) {
        const Cell& c = cells_[ci];
        const auto q = quad(c);
        const double width = std::max(distance(q[0], q[3]), distance(q[1], q[2]));
        const double slack = opt_.match_delta + opt_.match_factor * width + 1e-12;
        const double d = quad_distance(x0, q);
        if (d > slack) {
            continue;
        }
        const auto [u, v] = inverse_bilinear(x0, q);
        const Sheet& sh = sheets_[c.sheet];
        const double pa = extremals_[sh.members[c.member]].anchor_phase;
        const double pb = extremals_[sh.members[c.member + 1]].anchor_phase;
        seeds.push_back({d, c.sheet, pa + u * (pb - pa), (static_cast<double>(c.k) + v) * opt_.sample_dt, pb - pa});
    }
    std::sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.dist < b.dist; });

    const double period = lc_->period();
    std::vector<Seed> tried;
    for (const Seed& s : seeds) {
        // Seeds on a thin band of nearly tangent neighbours converge to the
        // same extremal; one Newton solve per neighbourhood is enough.
        auto near = [&](std::size_t sheet, double phase, double tau) {
            return sheet == s.sheet && std::abs(phase - s.phase) < std::max(3.0 * s.phase_width, 0.02 * period) &&
                   std::abs(tau - s.tau) < std::max(3.0 * opt_.sample_dt, 0.02 * s.tau);
        };
        const bool covered = std::any_of(out.begin(), out.end(), [&](const Candidate& c) {
            return near(c.sheet, c.anchor_phase, c.t_f);
        });
        const bool failed_nearby = std::any_of(tried.begin(), tried.end(), [&](const Seed& t) {
            return near(t.sheet, t.phase, t.tau);
        });
        if (covered || failed_nearby) {
            continue;
        }
        auto c = refine(s.sheet, s.phase, s.tau, x0);
        if (!c) {
            tried.push_back(s);
            continue;
        }
        const bool dup = std::any_of(out.begin(), out.end(), [&](const Candidate& o) {
            return o.sheet == c->sheet && std::abs(o.anchor_phase - c->anchor_phase) < 1e-6 &&
                   std::abs(o.t_f - c->t_f) < 1e-6;
        });
        if (!dup) {
            out.push_back(std::move(*c));
        }
    }
    std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) { return a.t_f < b.t_f; });
    return out;
}

OptimalAnswer SynthesisField::optimal_for_point(PhasePoint x0) const
{
    const double chi = lc_->chi(x0);
    OptimalAnswer ans;
    if (std::abs(chi) <= lc_->resolution()) {
        ans.t_f = 0.0;
        ans.x0_snap = x0;
        ans.candidates = 1;
        ans.best.x0_snap = x0;
        ans.best.anchor = x0;
        return ans;
    }
    if ((chi > 0.0) != (region_ == Region::exterior)) {
        std::ostringstream os;
        os << "point (" << x0.x1 << ", " << x0.x2 << ") is not in the " << to_string(region_) << " region";
        throw DomainError(os.str());
    }
    ans.all = candidates(x0);
    if (ans.all.empty()) {
        std::ostringstream os;
        os << "no extremal of the K = " << K_ << " " << to_string(region_) << " field reaches (" << x0.x1 << ", "
           << x0.x2 << "); increase t_back_max, escape_radius or n_anchors";
        throw CoverageError(os.str());
    }
    ans.best = ans.all.front();
    ans.t_f = ans.best.t_f;
    ans.schedule = ans.best.schedule;
    ans.x0_snap = ans.best.x0_snap;
    ans.candidates = ans.all.size();
    ans.degenerate = ans.all.size() > 1 && ans.all[1].t_f - ans.all[0].t_f < opt_.time_tie_tol;
    return ans;
}

void SynthesisField::prune_dominated(std::vector<ExtremalTrajectory> extra)
{
    bool kept_any = false;
    for (auto& tr : extra) {
        bool dominated = true;
        const double dur = tr.duration();
        const int probes = 16;
        for (int i = 1; i <= probes && dominated; ++i) {
            const double rem = dur * static_cast<double>(i) / static_cast<double>(probes + 1);
            const State4 y = tr.state_at_remaining(rem);
            const PhasePoint p{y[0], y[1]};
            if (std::abs(lc_->chi(p)) <= 10.0 * lc_->resolution()) {
                continue;
            }
            const auto cands = candidates(p);
            const bool beaten = std::any_of(cands.begin(), cands.end(), [&](const Candidate& c) {
                return c.t_f < rem - opt_.time_tie_tol;
            });
            dominated = beaten;
        }
        if (dominated) {
            pruned_.push_back(std::move(tr));
            continue;
        }
        // Attach as the lower boundary of the sheet with the same final sign.
        for (Sheet& sh : sheets_) {
            if (sh.final_sign == tr.arcs.back().sign) {
                extremals_.push_back(std::move(tr));
                sh.members.insert(sh.members.begin(), extremals_.size() - 1);
                kept_any = true;
                break;
            }
        }
    }
    if (kept_any) {
        resample();
        build_index();
    }
}

}  // namespace lcsync
