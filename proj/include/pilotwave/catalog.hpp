#pragma once

// Named reference superpositions over the solvable systems.

#include <string>
#include <vector>

#include "pilotwave/quantum.hpp"

namespace pilotwave::catalog {

struct NamedState {
    std::string name;
    quantum::Superposition state;
};

// Eigenstates.
quantum::Superposition box_ground_1d(double length = 1.0);
quantum::Superposition box_eigenstate_2d(quantum::Index2 n, Vec2 lengths = {1.0, 1.0});
quantum::Superposition oscillator_eigenstate(quantum::Index2 n, Vec2 omegas = {1.0, 1.0},
                                             int dimension = 1);
// e^(i k x) on a periodic cell of length 2 pi n / k.
quantum::Superposition plane_wave(double k, int n = 1);

// |c1|^2 = 0.9, |c2|^2 = 0.1 in the unit 1D box: no interior nodes at any time.
quantum::Superposition box_two_mode();
// Poissonian |c_n|^2 with mean occupation nbar, truncated at n_max.
quantum::Superposition oscillator_coherent(double nbar = 2.0, int n_max = 20, double omega = 1.0);
// (phi_10 + i phi_01) / sqrt 2 of the isotropic oscillator: one vortex at the origin.
quantum::Superposition oscillator_vortex();
// ((x + i y)^2 - a^2) Gaussian of the isotropic oscillator: two +1 vortices at (+-a, 0).
quantum::Superposition oscillator_vortex_pair(double a = 0.8);
// phi_00 + phi_10 + phi_11 of the oscillator with frequencies (1, sqrt 2).
quantum::Superposition anisotropic_chaotic();
// Modes odd under y -> 1 - y in the unit square, so y = 1/2 is a nodal line.
quantum::Superposition box_odd_2d();
// Moving vortex in the unit square: phi_11 + phi_12 + i phi_21.
quantum::Superposition box_vortex_2d();

// States used by property checks (normalization, residuals, ...).
std::vector<NamedState> reference_states();

}  // namespace pilotwave::catalog
