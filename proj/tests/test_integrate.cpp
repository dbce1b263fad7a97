#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lcsync/errors.hpp"
#include "lcsync/integrate.hpp"

using namespace lcsync;

namespace {

// Harmonic oscillator in the first two components, decay in the last two.
State4 oscillator(double, const State4& y) { return {y[1], -y[0], -y[2], 0.5 * y[3]}; }

}  // namespace

TEST_SUITE("integrate")
{
    TEST_CASE("forward solution matches the closed form")
    {
        const auto run = integrate(oscillator, {1.0, 0.0, 1.0, 1.0}, 0.0, 10.0, Direction::forward);
        REQUIRE(run.status == Status::reached_t_max);
        const auto y = run.final_state();
        CHECK(y[0] == doctest::Approx(std::cos(10.0)).epsilon(1e-8));
        CHECK(y[1] == doctest::Approx(-std::sin(10.0)).epsilon(1e-8));
        CHECK(y[2] == doctest::Approx(std::exp(-10.0)).epsilon(1e-7));
        CHECK(y[3] == doctest::Approx(std::exp(5.0)).epsilon(1e-8));
    }

    TEST_CASE("dense output between steps")
    {
        const auto run = integrate(oscillator, {1.0, 0.0, 1.0, 1.0}, 0.0, 6.0, Direction::forward);
        for (double t = 0.05; t < 6.0; t += 0.37) {
            const auto y = run.at(t);
            CHECK(std::abs(y[0] - std::cos(t)) < 1e-7);
            CHECK(std::abs(y[1] + std::sin(t)) < 1e-7);
        }
    }

    TEST_CASE("backward integration returns to the start")
    {
        const auto fwd = integrate(oscillator, {0.3, -0.8, 2.0, 0.1}, 0.0, 4.0, Direction::forward);
        const auto back = integrate(oscillator, fwd.final_state(), 4.0, 0.0, Direction::backward);
        CHECK(back.t_end() == doctest::Approx(0.0));
        const auto y = back.final_state();
        CHECK(y[0] == doctest::Approx(0.3).epsilon(1e-8));
        CHECK(y[1] == doctest::Approx(-0.8).epsilon(1e-8));
        CHECK(y[2] == doctest::Approx(2.0).epsilon(1e-8));
        CHECK(y[3] == doctest::Approx(0.1).epsilon(1e-8));
    }

    TEST_CASE("events are located at the analytic crossing times")
    {
        const std::vector<EventSpec> events{
            {"x1_down", [](double, const State4& y) { return y[0]; }, Crossing::falling, false},
            {"x2_up", [](double, const State4& y) { return y[1]; }, Crossing::rising, false}};
        const auto run = integrate(oscillator, {1.0, 0.0, 1.0, 1.0}, 0.0, 8.0, Direction::forward, events);
        std::vector<double> down, up;
        for (const auto& e : run.events) {
            (e.label == "x1_down" ? down : up).push_back(e.t);
        }
        REQUIRE(down.size() == 2);
        CHECK(down[0] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
        CHECK(down[1] == doctest::Approx(2.5 * std::numbers::pi).epsilon(1e-9));
        REQUIRE(up.size() == 1);
        CHECK(up[0] == doctest::Approx(std::numbers::pi).epsilon(1e-9));
    }

    TEST_CASE("terminal event stops the run")
    {
        const std::vector<EventSpec> events{
            {"stop", [](double, const State4& y) { return y[0] + 0.5; }, Crossing::any, true}};
        const auto run = integrate(oscillator, {1.0, 0.0, 0.0, 0.0}, 0.0, 10.0, Direction::forward, events);
        CHECK(run.status == Status::terminal_event);
        CHECK(run.t_end() == doctest::Approx(std::acos(-0.5)).epsilon(1e-9));
        CHECK(run.final_state()[0] == doctest::Approx(-0.5).epsilon(1e-9));
    }

    TEST_CASE("empty or inverted intervals are rejected")
    {
        CHECK_THROWS_AS(integrate(oscillator, {1, 0, 0, 0}, 1.0, 1.0, Direction::forward), DomainError);
        CHECK_THROWS_AS(integrate(oscillator, {1, 0, 0, 0}, 1.0, 0.0, Direction::forward), DomainError);
        CHECK_THROWS_AS(integrate(oscillator, {1, 0, 0, 0}, 0.0, 1.0, Direction::backward), DomainError);
    }
}
