#include "lcsync/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include <boost/math/tools/toms748_solve.hpp>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

// Dormand-Prince 5(4) tableau with Hairer's dense-output weights.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

constexpr std::size_t N = 4;

State4 axpy_sum(const State4& y, double h, std::initializer_list<std::pair<double, const State4*>> terms)
{
    State4 out = y;
    for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (const auto& [w, k] : terms) {
            acc += w * (*k)[i];
        }
        out[i] += h * acc;
    }
    return out;
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

bool direction_matches(Crossing want, int before, int after, double time_sign)
{
    if (before == after || before == 0 || after == 0) {
        return false;
    }
    // Convert the crossing seen in tau into one in physical time.
    const bool rising_in_tau = after > before;
    const bool rising_in_t = time_sign > 0 ? rising_in_tau : !rising_in_tau;
    switch (want) {
        case Crossing::rising:
            return rising_in_t;
        case Crossing::falling:
            return !rising_in_t;
        case Crossing::any:
            return true;
    }
    return false;
}

}  // namespace

State4 DenseSegment::eval(double t) const
{
    const double span = t_end - t_begin;
    const double s = span == 0.0 ? 0.0 : (t - t_begin) / span;
    const double s1 = 1.0 - s;
    State4 out{};
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = coeff[0][i] + s * (coeff[1][i] + s1 * (coeff[2][i] + s * (coeff[3][i] + s1 * coeff[4][i])));
    }
    return out;
}

State4 IntegrationResult::at(double t) const
{
    if (segments.empty()) {
        return samples.front().y;
    }
    const bool fwd = segments.front().t_end >= segments.front().t_begin;
    auto it = std::lower_bound(segments.begin(), segments.end(), t, [fwd](const DenseSegment& seg, double v) {
        return fwd ? seg.t_end < v : seg.t_end > v;
    });
    if (it == segments.end()) {
        it = std::prev(segments.end());
    }
    return it->eval(t);
}

IntegrationResult integrate(const Field& field, const State4& y0, double t0, double t_max, Direction dir,
                            const std::vector<EventSpec>& events, const Tolerances& tol)
{
    if (!(tol.rel > 0.0) || !(tol.abs > 0.0) || !(tol.t_tol > 0.0)) {
        throw DomainError("integration tolerances must be positive");
    }
    if (t_max == t0 || !std::isfinite(t_max) || !std::isfinite(t0)) {
        throw DomainError("integration interval is empty or non-finite");
    }
    for (double v : y0) {
        if (!std::isfinite(v)) {
            throw DomainError("non-finite initial state");
        }
    }
    const double time_sign = dir == Direction::forward ? 1.0 : -1.0;
    const double tau_end = time_sign * (t_max - t0);
    if (!(tau_end > 0.0)) {
        throw DomainError("t_max lies on the wrong side of t0 for the requested direction");
    }

    // Everything below runs in tau >= 0; physical time is t0 + time_sign * tau.
    auto phys = [&](double tau) { return t0 + time_sign * tau; };
    auto rhs = [&](double tau, const State4& y) {
        State4 d = field(phys(tau), y);
        if (time_sign < 0.0) {
            for (double& v : d) {
                v = -v;
            }
        }
        return d;
    };

    IntegrationResult res;
    res.samples.push_back({t0, y0});

    std::vector<double> g_prev(events.size());
    for (std::size_t e = 0; e < events.size(); ++e) {
        g_prev[e] = events[e].guard(t0, y0);
    }

    State4 y = y0;
    State4 k1 = rhs(0.0, y);
    double tau = 0.0;

    // Initial step guess (Hairer & Wanner, hinit).
    double h;
    {
        double dnf = 0.0, dny = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sk = tol.abs + tol.rel * std::abs(y[i]);
            dnf += (k1[i] / sk) * (k1[i] / sk);
            dny += (y[i] / sk) * (y[i] / sk);
        }
        h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
        h = std::min({h, tol.h_max, tau_end});
        State4 y1 = y;
        for (std::size_t i = 0; i < N; ++i) {
            y1[i] += h * k1[i];
        }
        const State4 k2 = rhs(h, y1);
        double der2 = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sk = tol.abs + tol.rel * std::abs(y[i]);
            der2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::abs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, h * 1e-3) : std::pow(0.01 / der12, 0.2);
        h = std::min({100.0 * h, h1, tol.h_max, tau_end});
    }

    std::size_t steps = 0;
    bool first_step = true;
    while (tau < tau_end) {
        if (++steps > tol.max_steps) {
            res.status = Status::step_failure;
            return res;
        }
        if (h < 1e-14 * std::max(1.0, tau)) {
            res.status = Status::step_failure;
            return res;
        }
        if (tau + h > tau_end) {
            h = tau_end - tau;
        }

        const State4 k2 = rhs(tau + c2 * h, axpy_sum(y, h, {{a21, &k1}}));
        const State4 k3 = rhs(tau + c3 * h, axpy_sum(y, h, {{a31, &k1}, {a32, &k2}}));
        const State4 k4 = rhs(tau + c4 * h, axpy_sum(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const State4 k5 = rhs(tau + c5 * h, axpy_sum(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const State4 k6 =
            rhs(tau + h, axpy_sum(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const State4 y_new = axpy_sum(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        const State4 k7 = rhs(tau + h, y_new);

        double err = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < N; ++i) {
            const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sk = tol.abs + tol.rel * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err += (ei / sk) * (ei / sk);
            finite = finite && std::isfinite(y_new[i]);
        }
        err = std::sqrt(err / static_cast<double>(N));
        if (!finite || !std::isfinite(err)) {
            h *= 0.2;
            continue;
        }
        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            continue;
        }

        DenseSegment seg;
        seg.t_begin = phys(tau);
        seg.t_end = phys(tau + h);
        for (std::size_t i = 0; i < N; ++i) {
            const double ydiff = y_new[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            seg.coeff[0][i] = y[i];
            seg.coeff[1][i] = ydiff;
            seg.coeff[2][i] = bspl;
            seg.coeff[3][i] = ydiff - h * k7[i] - bspl;
            seg.coeff[4][i] =
                h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        const double tau_new = tau + h;

        // Event scan over the accepted step.
        struct Hit {
            double tau;
            std::size_t index;
        };
        std::vector<Hit> hits;
        std::vector<double> g_new(events.size());
        for (std::size_t e = 0; e < events.size(); ++e) {
            g_new[e] = events[e].guard(phys(tau_new), y_new);
            const int sb = sign_of(g_prev[e]);
            const int sa = sign_of(g_new[e]);
            if (sb == 0 || sa == 0 || sb == sa) {
                continue;
            }
            auto g_at = [&](double tt) { return events[e].guard(phys(tt), seg.eval(phys(tt))); };
            std::uintmax_t max_iter = 200;
            const double t_tol = tol.t_tol;
            auto [lo, hi] = boost::math::tools::toms748_solve(
                g_at, tau, tau_new, g_prev[e], g_new[e],
                [t_tol](double a, double b) { return std::abs(b - a) <= t_tol; }, max_iter);
            const double root = 0.5 * (lo + hi);
            if (first_step && root < tol.t_tol) {
                continue;  // too close to the start: not an event
            }
            if (!direction_matches(events[e].direction, sb, sa, time_sign)) {
                continue;
            }
            hits.push_back({root, e});
        }
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.tau < b.tau; });

        std::optional<Hit> stop;
        for (const Hit& hit : hits) {
            if (res.events.size() >= tol.max_events) {
                throw NumericalError("event overflow: more than " + std::to_string(tol.max_events) + " events");
            }
            const double te = phys(hit.tau);
            res.events.push_back({te, events[hit.index].label, hit.index, seg.eval(te)});
            if (events[hit.index].terminal) {
                stop = hit;
                break;
            }
        }

        if (stop) {
            const double te = phys(stop->tau);
            const State4 ye = seg.eval(te);
            // Keep the full-step interpolant but clip its reported range.
            res.segments.push_back(seg);
            res.samples.push_back({te, ye});
            res.status = Status::terminal_event;
            return res;
        }

        res.segments.push_back(seg);
        res.samples.push_back({phys(tau_new), y_new});
        y = y_new;
        k1 = k7;
        tau = tau_new;
        for (std::size_t e = 0; e < events.size(); ++e) {
            if (g_new[e] != 0.0) {
                g_prev[e] = g_new[e];
            }
        }
        first_step = false;

        const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h = std::min(h * fac, tol.h_max);
    }
    res.status = Status::reached_t_max;
    return res;
}

}  // namespace lcsync
