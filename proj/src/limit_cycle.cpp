#include "lcsync/limit_cycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

constexpr std::size_t kBlockSize = 64;

Field free_field(const LienardSystem& sys)
{
    return [&sys](double, const State4& y) { return canonical_rhs(sys, y, 0.0); };
}

double point_segment_distance(PhasePoint p, PhasePoint a, PhasePoint b, double& s)
{
    const double dx = b.x1 - a.x1;
    const double dy = b.x2 - a.x2;
    const double len2 = dx * dx + dy * dy;
    s = len2 > 0.0 ? std::clamp(((p.x1 - a.x1) * dx + (p.x2 - a.x2) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x1 - (a.x1 + s * dx), p.x2 - (a.x2 + s * dy));
}

}  // namespace

std::pair<double, double> LimitCycle::return_map(const LienardSystem& sys, double x, const Tolerances& tol)
{
    EventSpec section{"section", [](double, const State4& y) { return y[1]; }, Crossing::falling, true};
    const auto res = integrate(free_field(sys), {x, 0.0, 0.0, 0.0}, 0.0, 200.0, Direction::forward, {section}, tol);
    if (res.status != Status::terminal_event) {
        throw NumericalError("return map: trajectory did not come back to the section");
    }
    return {res.events.back().y[0], res.events.back().t};
}

LimitCycle LimitCycle::find(const LienardSystem& sys, const LimitCycleOptions& opt)
{
    if (opt.n_samples < 16) {
        throw DomainError("limit cycle needs at least 16 samples");
    }
    EventSpec section{"section", [](double, const State4& y) { return y[1]; }, Crossing::falling, false};
    const auto relaxed = integrate(free_field(sys), {opt.seed.x1, opt.seed.x2, 0.0, 0.0}, 0.0, opt.relax_time,
                                   Direction::forward, {section}, opt.integration);
    if (relaxed.events.size() < 3) {
        throw NumericalError("relaxation run produced fewer than three section crossings");
    }
    double xa = relaxed.events[relaxed.events.size() - 2].y[0];
    double xb = relaxed.events.back().y[0];
    double fa = xb - xa;
    auto [rb, tb] = return_map(sys, xb, opt.integration);
    double fb = rb - xb;
    double period = tb;
    int it = 0;
    while (std::abs(fb) >= opt.tol) {
        if (++it > opt.max_iter || fb == fa) {
            std::ostringstream os;
            os << "limit cycle secant iteration did not converge; last bracket [" << xa << ", " << xb
               << "], residual " << fb;
            throw NumericalError(os.str());
        }
        const double xn = xb - fb * (xb - xa) / (fb - fa);
        xa = xb;
        fa = fb;
        xb = xn;
        std::tie(rb, period) = return_map(sys, xb, opt.integration);
        fb = rb - xb;
    }

    LimitCycle lc;
    lc.sys_ = sys;
    lc.mu_ = sys.mu;
    lc.x_max_ = xb;
    lc.period_ = period;
    lc.orbit_ = integrate(free_field(lc.sys_), {xb, 0.0, 0.0, 0.0}, 0.0, period, Direction::forward, {},
                          opt.integration);

    const std::size_t n = opt.n_samples;
    lc.samples_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = period * static_cast<double>(k) / static_cast<double>(n);
        const State4 y = lc.orbit_.at(t);
        lc.samples_[k] = {y[0], y[1]};
    }
    lc.samples_[0] = {xb, 0.0};

    double res = 0.0;
    double chord = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const PhasePoint a = lc.samples_[k];
        const PhasePoint b = lc.samples_[(k + 1) % n];
        const double tm = period * (static_cast<double>(k) + 0.5) / static_cast<double>(n);
        const State4 ym = lc.orbit_.at(tm);
        double s = 0.0;
        res = std::max(res, point_segment_distance({ym[0], ym[1]}, a, b, s));
        chord = std::max(chord, distance(a, b));
    }
    lc.resolution_ = res + 1e-12;
    lc.max_chord_ = chord;
    lc.build_blocks();
    return lc;
}

void LimitCycle::build_blocks()
{
    blocks_.clear();
    const std::size_t n = samples_.size();
    for (std::size_t b = 0; b < n; b += kBlockSize) {
        Block blk{};
        blk.begin = b;
        blk.end = std::min(n, b + kBlockSize);
        double cx = 0.0, cy = 0.0;
        blk.ymin = std::numeric_limits<double>::infinity();
        blk.ymax = -blk.ymin;
        blk.xmax = -blk.ymin;
        for (std::size_t k = blk.begin; k <= blk.end; ++k) {
            const PhasePoint p = samples_[k % n];
            cx += p.x1;
            cy += p.x2;
            blk.ymin = std::min(blk.ymin, p.x2);
            blk.ymax = std::max(blk.ymax, p.x2);
            blk.xmax = std::max(blk.xmax, p.x1);
        }
        const double cnt = static_cast<double>(blk.end - blk.begin + 1);
        blk.cx = cx / cnt;
        blk.cy = cy / cnt;
        blk.radius = 0.0;
        for (std::size_t k = blk.begin; k <= blk.end; ++k) {
            blk.radius = std::max(blk.radius, distance(samples_[k % n], {blk.cx, blk.cy}));
        }
        blocks_.push_back(blk);
    }
}

LimitCycle::Nearest LimitCycle::nearest(PhasePoint x) const
{
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const Block& blk = blocks_[b];
        order.emplace_back(std::max(0.0, distance(x, {blk.cx, blk.cy}) - blk.radius), b);
    }
    std::sort(order.begin(), order.end());
    const std::size_t n = samples_.size();
    Nearest best{std::numeric_limits<double>::infinity(), 0, 0.0};
    for (const auto& [bound, b] : order) {
        if (bound > best.dist) {
            break;
        }
        for (std::size_t k = blocks_[b].begin; k < blocks_[b].end; ++k) {
            double s = 0.0;
            const double d = point_segment_distance(x, samples_[k], samples_[(k + 1) % n], s);
            if (d < best.dist) {
                best = {d, k, s};
            }
        }
    }
    return best;
}

double LimitCycle::distance_to(PhasePoint x) const { return nearest(x).dist; }

bool LimitCycle::encloses(PhasePoint x) const
{
    const std::size_t n = samples_.size();
    bool inside = false;
    for (const Block& blk : blocks_) {
        if (x.x2 < blk.ymin || x.x2 > blk.ymax || x.x1 > blk.xmax) {
            continue;
        }
        for (std::size_t k = blk.begin; k < blk.end; ++k) {
            const PhasePoint a = samples_[k];
            const PhasePoint b = samples_[(k + 1) % n];
            if ((a.x2 > x.x2) != (b.x2 > x.x2)) {
                const double xc = a.x1 + (x.x2 - a.x2) * (b.x1 - a.x1) / (b.x2 - a.x2);
                if (x.x1 < xc) {
                    inside = !inside;
                }
            }
        }
    }
    return inside;
}

double LimitCycle::chi(PhasePoint x) const
{
    const double d = distance_to(x);
    return encloses(x) ? -d : d;
}

PhasePoint LimitCycle::point_at(double phase) const
{
    double t = std::fmod(phase, period_);
    if (t < 0.0) {
        t += period_;
    }
    const State4 y = orbit_.at(t);
    return {y[0], y[1]};
}

PhasePoint LimitCycle::tangent_at(double phase) const
{
    const auto f = vector_field(sys_, point_at(phase), 0.0);
    const double n = std::hypot(f.dx1, f.dx2);
    return {f.dx1 / n, f.dx2 / n};
}

double LimitCycle::phase_of(PhasePoint x) const
{
    const Nearest nb = nearest(x);
    return period_ * (static_cast<double>(nb.segment) + nb.s) / static_cast<double>(samples_.size());
}

std::pair<PhasePoint, PhasePoint> LimitCycle::extreme_points() const
{
    return {PhasePoint{-x_max_, 0.0}, PhasePoint{x_max_, 0.0}};
}

PhasePoint LimitCycle::outward_normal(PhasePoint xf) const
{
    const double n1 = sys_.mu * sys_.h(xf.x1) * xf.x2 + sys_.v_prime(xf.x1);
    const double n2 = xf.x2;
    if (std::abs(n1) < 1e-12 && std::abs(n2) < 1e-12) {
        throw NumericalError("degenerate normal: both components vanish");
    }
    const double len = std::hypot(n1, n2);
    PhasePoint n{n1 / len, n2 / len};
    const double eps = 10.0 * resolution_ + 1e-6;
    if (chi({xf.x1 + eps * n.x1, xf.x2 + eps * n.x2}) < chi({xf.x1 - eps * n.x1, xf.x2 - eps * n.x2})) {
        n = -n;
    }
    return n;
}

double relaxation_time(const LienardSystem& sys, const LimitCycle& lc, PhasePoint x0, double fraction,
                       double t_max)
{
    const auto run = integrate(free_field(sys), {x0.x1, x0.x2, 0.0, 0.0}, 0.0, t_max, Direction::forward);
    const double threshold = fraction * lc.x_max();
    const double dt = lc.period() / 256.0;
    double last_outside = 0.0;
    for (double t = 0.0; t <= t_max; t += dt) {
        const State4 y = run.at(t);
        if (lc.distance_to({y[0], y[1]}) > threshold) {
            last_outside = t;
        }
    }
    if (t_max - last_outside < lc.period()) {
        throw NumericalError("trajectory does not settle within the integration window");
    }
    return last_outside;
}

}  // namespace lcsync
