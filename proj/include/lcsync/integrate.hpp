#pragma once

// Adaptive Dormand-Prince 5(4) integration of the 4-d canonical system with
// dense output and bracketed event location, in either time direction.

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace lcsync {

using State4 = std::array<double, 4>;
using Field = std::function<State4(double t, const State4& y)>;
using Guard = std::function<double(double t, const State4& y)>;

enum class Direction { forward, backward };
enum class Crossing { rising, falling, any };

/// Crossing direction refers to the guard as a function of physical time t,
/// whatever the integration direction.
struct EventSpec {
    std::string label;
    Guard guard;
    Crossing direction = Crossing::any;
    bool terminal = false;
};

struct Tolerances {
    double rel = 1e-10;
    double abs = 1e-10;
    double t_tol = 1e-10;  // event time localisation
    double h_max = 0.25;
    std::size_t max_steps = 2'000'000;
    std::size_t max_events = 100'000;
};

struct Sample {
    double t;
    State4 y;
};

struct EventRecord {
    double t;
    std::string label;
    std::size_t spec_index;
    State4 y;
};

enum class Status { reached_t_max, terminal_event, step_failure };

/// Quartic Dormand-Prince interpolant over one accepted step.
struct DenseSegment {
    double t_begin;
    double t_end;
    std::array<State4, 5> coeff;

    State4 eval(double t) const;
};

struct IntegrationResult {
    std::vector<Sample> samples;
    std::vector<EventRecord> events;
    std::vector<DenseSegment> segments;
    Status status = Status::reached_t_max;

    double t_begin() const { return samples.front().t; }
    double t_end() const { return samples.back().t; }
    const State4& final_state() const { return samples.back().y; }
    /// Dense-output evaluation anywhere inside the integrated interval.
    State4 at(double t) const;
};

/// Integrates y' = field(t, y) from t0 towards t_max. Backward runs are
/// carried out in tau = t0 - t with the negated field; reported times are
/// always physical times. Events are not reported within t_tol of t0.
IntegrationResult integrate(const Field& field, const State4& y0, double t0, double t_max, Direction dir,
                            const std::vector<EventSpec>& events = {}, const Tolerances& tol = {});

}  // namespace lcsync
