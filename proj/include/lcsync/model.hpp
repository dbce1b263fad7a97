#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace lcsync {

/// Phase-space point (position, velocity) in dimensionless units.
struct PhasePoint {
    double x1 = 0.0;
    double x2 = 0.0;

    friend PhasePoint operator-(PhasePoint a) { return {-a.x1, -a.x2}; }
    friend bool operator==(const PhasePoint&, const PhasePoint&) = default;
};

double distance(PhasePoint a, PhasePoint b);

/// Canonical-system state: phase point, costate and the constant multiplier p0.
struct ExtendedState {
    PhasePoint x;
    double p1 = 0.0;
    double p2 = 0.0;
    double p0 = 0.0;  // 0 or -1

    std::array<double, 4> packed() const { return {x.x1, x.x2, p1, p2}; }
    static ExtendedState unpack(const std::array<double, 4>& v, double p0);
};

/// Bound on the magnitude of the control force, |F| <= K.
class ForceBound {
public:
    explicit ForceBound(double K);
    double K() const { return K_; }

private:
    double K_;
};

/// Liénard oscillator  x'' + mu h(x) x' + V'(x) = F.
///
/// h must be even and V' odd. The derivatives h' and V'' are supplied
/// analytically; they enter the costate equations.
struct LienardSystem {
    using ScalarFn = std::function<double(double)>;

    std::string name;
    double mu = 0.0;
    ScalarFn h;
    ScalarFn h_prime;
    ScalarFn v_prime;
    ScalarFn v_second;

    static LienardSystem van_der_pol(double mu);
    /// Looks a shipped system up by name ("vdp").
    static LienardSystem by_name(const std::string& name, double mu);
};

struct VectorField2 {
    double dx1;
    double dx2;
};

struct CostateRate {
    double dp1;
    double dp2;
};

/// Driven state equations (x2, -mu h(x1) x2 - V'(x1) + F).
VectorField2 vector_field(const LienardSystem& sys, PhasePoint x, double F);

/// Costate equations p' = -grad_x H.
CostateRate costate_field(const LienardSystem& sys, const ExtendedState& s, double F);

/// Pontryagin Hamiltonian p . f(x, F) + p0.
double hamiltonian(const LienardSystem& sys, const ExtendedState& s, double F);

/// Full 4-d canonical right-hand side for a fixed force.
std::array<double, 4> canonical_rhs(const LienardSystem& sys, const std::array<double, 4>& y, double F);

/// Bang-bang law sgn(p2) K. Throws NumericalError at p2 == 0: switching
/// instants belong to the integrator's event logic, not to this function.
double optimal_force(double p2, ForceBound bound);

/// Outcome of the limit-cycle existence checks on a probe grid.
struct LienardReport {
    bool potential_single_minimum = false;  // V' < 0 on x < 0 and V' > 0 on x > 0
    bool single_positive_zero = false;      // xi has exactly one sign change on the grid
    bool negative_before_zero = false;      // xi < 0 on (0, a)
    bool nondecreasing_after_zero = false;  // xi non-decreasing on (a, x_hi]
    double zero = 0.0;                      // a, refined by bisection
    double checked_up_to = 0.0;             // growth of xi is only verified up to here
    std::vector<std::string> diagnostics;

    bool passed() const
    {
        return potential_single_minimum && single_positive_zero && negative_before_zero &&
               nondecreasing_after_zero;
    }
};

/// Evaluates xi(x) = int_0^x h on the probe grid and checks the existence
/// conditions for a unique stable limit cycle. Throws DomainError if the
/// grid does not bracket a positive zero of xi while xi starts negative.
LienardReport check_lienard_conditions(const LienardSystem& sys, std::span<const double> x_probe);

/// Adaptive Simpson quadrature of h over [0, x].
double xi_integral(const LienardSystem& sys, double x, double tol = 1e-12);

}  // namespace lcsync
