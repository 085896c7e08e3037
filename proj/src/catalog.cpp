#include "pilotwave/catalog.hpp"

#include <cmath>

namespace pilotwave::catalog {

using quantum::Complex;
using quantum::Superposition;
using quantum::Term;

namespace {

SystemConstants dims(int d) {
    SystemConstants c;
    c.dimension = d;
    return c;
}

}  // namespace

Superposition box_ground_1d(double length) {
    return Superposition(SolvableSystem::box({length, 0.0}, dims(1)), {{1.0, {1, 0}}});
}

Superposition box_eigenstate_2d(quantum::Index2 n, Vec2 lengths) {
    return Superposition(SolvableSystem::box(lengths, dims(2)), {{1.0, n}});
}

Superposition oscillator_eigenstate(quantum::Index2 n, Vec2 omegas, int dimension) {
    return Superposition(SolvableSystem::harmonic(omegas, dims(dimension)), {{1.0, n}});
}

Superposition plane_wave(double k, int n) {
    const double cell = 2.0 * M_PI * n / k;
    return Superposition(SolvableSystem::free_particle({cell, 0.0}, dims(1)), {{1.0, {n, 0}}});
}

Superposition box_two_mode() {
    return Superposition(SolvableSystem::box({1.0, 0.0}, dims(1)),
                         {{std::sqrt(0.9), {1, 0}}, {std::sqrt(0.1), {2, 0}}});
}

Superposition oscillator_coherent(double nbar, int n_max, double omega) {
    std::vector<Term> terms;
    double p = std::exp(-nbar);
    for (int n = 0; n <= n_max; ++n) {
        if (n > 0) p *= nbar / n;
        terms.push_back({std::sqrt(p), {n, 0}});
    }
    return Superposition(SolvableSystem::harmonic({omega, 0.0}, dims(1)), std::move(terms));
}

Superposition oscillator_vortex() {
    return Superposition(SolvableSystem::harmonic({1.0, 1.0}, dims(2)),
                         {{1.0, {1, 0}}, {Complex(0.0, 1.0), {0, 1}}});
}

Superposition oscillator_vortex_pair(double a) {
    // (x + i y)^2 - a^2 = (x^2 - y^2) + 2 i x y - a^2 in Hermite functions.
    const double r = 1.0 / std::sqrt(2.0);
    return Superposition(SolvableSystem::harmonic({1.0, 1.0}, dims(2)),
                         {{r, {2, 0}}, {-r, {0, 2}}, {Complex(0.0, 1.0), {1, 1}}, {-a * a, {0, 0}}});
}

Superposition anisotropic_chaotic() {
    return Superposition(SolvableSystem::harmonic({1.0, std::sqrt(2.0)}, dims(2)),
                         {{1.0, {0, 0}}, {1.0, {1, 0}}, {1.0, {1, 1}}});
}

Superposition box_odd_2d() {
    return Superposition(SolvableSystem::box({1.0, 1.0}, dims(2)),
                         {{0.8, {1, 2}}, {Complex(0.0, 0.5), {2, 2}}, {Complex(0.3, 0.2), {1, 4}}});
}

Superposition box_vortex_2d() {
    return Superposition(SolvableSystem::box({1.0, 1.0}, dims(2)),
                         {{1.0, {1, 2}}, {Complex(0.0, 1.0), {2, 1}}, {0.3, {1, 1}}});
}

std::vector<NamedState> reference_states() {
    std::vector<NamedState> out;
    out.push_back({"box_ground_1d", box_ground_1d()});
    out.push_back({"box_two_mode", box_two_mode()});
    out.push_back({"box_eigenstate_2d_21", box_eigenstate_2d({2, 1})});
    out.push_back({"box_odd_2d", box_odd_2d()});
    out.push_back({"box_vortex_2d", box_vortex_2d()});
    out.push_back({"oscillator_ground_1d", oscillator_eigenstate({0, 0})});
    out.push_back({"oscillator_coherent", oscillator_coherent()});
    out.push_back({"oscillator_vortex", oscillator_vortex()});
    out.push_back({"oscillator_vortex_pair", oscillator_vortex_pair()});
    out.push_back({"anisotropic_chaotic", anisotropic_chaotic()});
    out.push_back({"plane_wave", plane_wave(1.5)});
    return out;
}

}  // namespace pilotwave::catalog
