#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>

#include "lcsync/synthesis.hpp"

namespace lcsync::test {

inline const LienardSystem& vdp()
{
    static const LienardSystem sys = LienardSystem::van_der_pol(0.1);
    return sys;
}

inline std::shared_ptr<const LimitCycle> cycle()
{
    static const auto lc = std::make_shared<const LimitCycle>(LimitCycle::find(vdp()));
    return lc;
}

// Fields are expensive; keep one per (K, region) for the whole run.
inline const SynthesisField& field(double K, Region region)
{
    static std::vector<std::pair<std::pair<double, Region>, std::unique_ptr<SynthesisField>>> cache;
    for (const auto& [key, f] : cache) {
        if (key.first == K && key.second == region) {
            return *f;
        }
    }
    cache.emplace_back(std::make_pair(K, region),
                       std::make_unique<SynthesisField>(SynthesisField::build(vdp(), cycle(), ForceBound(K), region)));
    return *cache.back().second;
}

struct Uniform {
    std::mt19937_64 rng;
    explicit Uniform(std::uint64_t seed) : rng(seed) {}
    double operator()(double a, double b) { return a + (b - a) * static_cast<double>(rng() >> 11) * 0x1.0p-53; }
};

// Classical RK4 with a fixed step, used as an independent reference integrator.
template <class Rhs>
std::array<double, 4> rk4(Rhs rhs, std::array<double, 4> y, double t_end, std::size_t steps)
{
    const double h = t_end / static_cast<double>(steps);
    auto axpy = [](const std::array<double, 4>& a, double s, const std::array<double, 4>& b) {
        std::array<double, 4> r{};
        for (int i = 0; i < 4; ++i) {
            r[i] = a[i] + s * b[i];
        }
        return r;
    };
    for (std::size_t i = 0; i < steps; ++i) {
        const auto k1 = rhs(y);
        const auto k2 = rhs(axpy(y, h / 2, k1));
        const auto k3 = rhs(axpy(y, h / 2, k2));
        const auto k4 = rhs(axpy(y, h, k3));
        for (int j = 0; j < 4; ++j) {
            y[j] += h / 6.0 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
        }
    }
    return y;
}

}  // namespace lcsync::test
