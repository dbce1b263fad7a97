#include "lcsync/model.hpp"

#include <cmath>
#include <sstream>

#include "lcsync/errors.hpp"

namespace lcsync {

namespace {

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v)) {
        throw DomainError(std::string("non-finite ") + what);
    }
}

double simpson_step(const LienardSystem::ScalarFn& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double distance(PhasePoint a, PhasePoint b) { return std::hypot(a.x1 - b.x1, a.x2 - b.x2); }

ExtendedState ExtendedState::unpack(const std::array<double, 4>& v, double p0)
{
    return ExtendedState{{v[0], v[1]}, v[2], v[3], p0};
}

ForceBound::ForceBound(double K) : K_(K)
{
    if (!(K > 0.0) || !std::isfinite(K)) {
        throw DomainError("force bound K must be positive and finite");
    }
}

LienardSystem LienardSystem::van_der_pol(double mu)
{
    if (!(mu > 0.0) || !std::isfinite(mu)) {
        throw DomainError("damping coefficient mu must be positive");
    }
    LienardSystem sys;
    sys.name = "vdp";
    sys.mu = mu;
    sys.h = [](double x) { return x * x - 1.0; };
    sys.h_prime = [](double x) { return 2.0 * x; };
    sys.v_prime = [](double x) { return x; };
    sys.v_second = [](double) { return 1.0; };
    return sys;
}

LienardSystem LienardSystem::by_name(const std::string& name, double mu)
{
    if (name == "vdp" || name == "van_der_pol") {
        return van_der_pol(mu);
    }
    throw DomainError("unknown system '" + name + "' (available: vdp)");
}

VectorField2 vector_field(const LienardSystem& sys, PhasePoint x, double F)
{
    require_finite(x.x1, "x1");
    require_finite(x.x2, "x2");
    require_finite(F, "force");
    return {x.x2, -sys.mu * sys.h(x.x1) * x.x2 - sys.v_prime(x.x1) + F};
}

CostateRate costate_field(const LienardSystem& sys, const ExtendedState& s, double F)
{
    require_finite(s.p1, "p1");
    require_finite(s.p2, "p2");
    require_finite(F, "force");
    const double x1 = s.x.x1;
    const double x2 = s.x.x2;
    return {s.p2 * (sys.mu * sys.h_prime(x1) * x2 + sys.v_second(x1)), -s.p1 + sys.mu * sys.h(x1) * s.p2};
}

double hamiltonian(const LienardSystem& sys, const ExtendedState& s, double F)
{
    const auto f = vector_field(sys, s.x, F);
    return s.p1 * f.dx1 + s.p2 * f.dx2 + s.p0;
}

std::array<double, 4> canonical_rhs(const LienardSystem& sys, const std::array<double, 4>& y, double F)
{
    const double x1 = y[0];
    const double x2 = y[1];
    const double hx = sys.h(x1);
    return {x2, -sys.mu * hx * x2 - sys.v_prime(x1) + F,
            y[3] * (sys.mu * sys.h_prime(x1) * x2 + sys.v_second(x1)), -y[2] + sys.mu * hx * y[3]};
}

double optimal_force(double p2, ForceBound bound)
{
    if (p2 == 0.0) {
        throw NumericalError("optimal_force evaluated at a switching instant (p2 == 0)");
    }
    require_finite(p2, "p2");
    return p2 > 0.0 ? bound.K() : -bound.K();
}

double xi_integral(const LienardSystem& sys, double x, double tol)
{
    if (x == 0.0) {
        return 0.0;
    }
    const double fa = sys.h(0.0);
    const double fb = sys.h(x);
    const double fm = sys.h(0.5 * x);
    const double whole = x / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(sys.h, 0.0, x, fa, fm, fb, whole, tol, 40);
}

LienardReport check_lienard_conditions(const LienardSystem& sys, std::span<const double> x_probe)
{
    LienardReport rep;
    std::vector<double> grid;
    for (double x : x_probe) {
        if (x > 0.0 && std::isfinite(x)) {
            grid.push_back(x);
        }
    }
    if (grid.size() < 2) {
        throw DomainError("probe grid needs at least two positive points");
    }
    rep.checked_up_to = grid.back();

    rep.potential_single_minimum = true;
    for (double x : grid) {
        if (!(sys.v_prime(x) > 0.0) || !(sys.v_prime(-x) < 0.0)) {
            rep.potential_single_minimum = false;
            std::ostringstream os;
            os << "V' has wrong sign at |x| = " << x;
            rep.diagnostics.push_back(os.str());
            break;
        }
    }

    std::vector<double> xi(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        xi[i] = xi_integral(sys, grid[i]);
    }

    std::size_t sign_changes = 0;
    std::size_t first_change = grid.size();
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if ((xi[i - 1] < 0.0) != (xi[i] < 0.0)) {
            ++sign_changes;
            if (first_change == grid.size()) {
                first_change = i;
            }
        }
    }

    if (sign_changes == 0) {
        if (xi.front() < 0.0) {
            throw DomainError("probe grid does not bracket the positive zero of xi (xi < 0 up to x = " +
                              std::to_string(grid.back()) + ")");
        }
        rep.diagnostics.emplace_back("xi has no positive zero on the probe grid");
        return rep;
    }

    rep.single_positive_zero = sign_changes == 1;
    if (!rep.single_positive_zero) {
        rep.diagnostics.emplace_back("xi changes sign more than once");
    }

    double lo = grid[first_change - 1];
    double hi = grid[first_change];
    double flo = xi[first_change - 1];
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = xi_integral(sys, mid);
        if ((fmid < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    rep.zero = 0.5 * (lo + hi);

    rep.negative_before_zero = xi.front() < 0.0;
    for (std::size_t i = 0; i < first_change; ++i) {
        rep.negative_before_zero = rep.negative_before_zero && xi[i] < 0.0;
    }
    if (!rep.negative_before_zero) {
        rep.diagnostics.emplace_back("xi is not negative on (0, a)");
    }

    rep.nondecreasing_after_zero = true;
    for (std::size_t i = first_change + 1; i < grid.size(); ++i) {
        if (xi[i] < xi[i - 1] - 1e-12) {
            rep.nondecreasing_after_zero = false;
            rep.diagnostics.emplace_back("xi decreases beyond its zero at x = " + std::to_string(grid[i]));
            break;
        }
    }
    return rep;
}

}  // namespace lcsync
