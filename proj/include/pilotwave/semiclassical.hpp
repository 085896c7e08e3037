#pragma once

// Stationary-phase semiclassics on the solvable systems: Hamilton-Jacobi
// residuals, the 1D van Vleck propagator and energy Green function, the mean
// (Weyl) level density, Gutzwiller-type trace sums and recurrence spectra.

#include <complex>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pilotwave/errors.hpp"
#include "pilotwave/quantum.hpp"
#include "pilotwave/systems.hpp"

namespace pilotwave::semiclassical {

using Complex = std::complex<double>;

// ---- actions and propagators ---------------------------------------------------

// R(x, t): an action field in the time domain.
using ActionField = std::function<double(const Vec2& x, double t)>;

// |dR/dt + |grad R|^2 / 2m + V| by fourth-order central differences of step h.
double hamilton_jacobi_residual(const ActionField& action, const SolvableSystem& system,
                                const Vec2& x, double t, double h = 1e-3);

// Hamilton's principal function R(x, t; x1) of the direct path from x1 at time
// 0 (free or harmonic, separable in 2D). Throws DomainError for boxes.
ActionField principal_function(const SolvableSystem& system, const Vec2& x1);

struct ClassicalAction {
    enum class Kind { time_domain, energy_domain };
    Kind kind = Kind::time_domain;
    double value = 0.0;
    // -d2R/dx1dx2 in the time domain; 1 / |xdot1 xdot2| in the energy domain.
    double stability = 0.0;
    int conjugate_points = 0; // caustics (time domain) or turning points (energy domain)
    int reflections = 0;      // hard-wall bounces
    double initial_momentum = 0.0;
    double duration = 0.0;    // travel time (energy domain)
};

struct PropagatorValue {
    Complex value{};
    int contributing_paths = 0;
    bool no_path = false;
    std::vector<ClassicalAction> paths;
};

struct PathOptions {
    int max_bounces = 64; // wall reflections (box) or turning points (oscillator)
};

// Classical paths from x1 to x2 in time dt found by shooting on the initial
// momentum with the closed-form flow map.
std::vector<ClassicalAction> classical_paths_1d(const SolvableSystem& system, double x1,
                                                double x2, double dt,
                                                const PathOptions& options = {});

// K_sc = sum |-d2R/dx1dx2|^(1/2) (2 pi i hbar)^(-1/2) exp(i (R / hbar - phi)),
// phi = pi/2 per conjugate point and pi per wall reflection.
PropagatorValue van_vleck_1d(const SolvableSystem& system, double x1, double x2, double dt,
                             const PathOptions& options = {});

// G_sc(x2, x1, E) = (1 / i hbar) sum |xdot1 xdot2|^(-1/2) exp(i (S / hbar - phi)),
// with phi = pi/2 per turning point and pi per wall bounce. Free and box systems
// accept complex E (analytic continuation, making the bounce sum converge);
// the oscillator needs real E. Throws NumericalError if an endpoint is a
// turning point and DomainError for x1 == x2 or E below the potential.
PropagatorValue semiclassical_green_1d(const SolvableSystem& system, double x1, double x2,
                                       Complex energy, const PathOptions& options = {});

// ---- level densities -------------------------------------------------------------

// Phase-space shell volume / (2 pi hbar)^D, leading Weyl term; 0 below the
// potential minimum.
double mean_level_density(const SolvableSystem& system, double energy);

// Same quantity from a hit-or-miss estimate of the phase-space volume between
// E (1 -+ shell) over a bounding box of the energy surface.
double mean_level_density_monte_carlo(const SolvableSystem& system, double energy,
                                      std::size_t samples, std::uint64_t seed,
                                      double shell = 0.05);

// Amplitude selection per system class:
//   one_dimensional  A = T / (pi hbar)                  (1D libration)
//   isolated         A = T / (pi hbar |det(M^k - I)|^(1/2))
enum class OrbitClass { one_dimensional, isolated };

struct TraceOrbit {
    std::string id;
    OrbitClass orbit_class = OrbitClass::one_dimensional;
    std::function<double(double)> action; // S(E) of the primitive orbit
    std::function<double(double)> period; // T(E)
    double monodromy_trace = 2.0;         // trace of the reduced monodromy matrix
    int phase_index = 0;                  // Maslov index of one traversal
};

// Primitive orbit of the 1D oscillator: S = 2 pi E / omega, T = 2 pi / omega, index 2.
TraceOrbit oscillator_trace_orbit(const SolvableSystem& system);

struct LevelDensity {
    std::vector<double> energies;
    std::vector<double> mean;
    std::vector<double> oscillatory;
    std::vector<double> total;
    double smoothing = 0.0;
};

// d_sc(E) = dbar(E) + sum_j sum_{k=1..K} A_jk cos(k S_j / hbar - k nu_j pi / 2)
// exp(-(gamma k T_j / hbar)^2 / 2). gamma > 0 is required.
LevelDensity trace_formula_density(const SolvableSystem& system,
                                   const std::vector<TraceOrbit>& orbits,
                                   const std::vector<double>& energies, int repetitions,
                                   double gamma);

// The exact spectrum smoothed with the same Gaussian.
std::vector<double> smoothed_spectrum_density(const std::vector<double>& levels,
                                              const std::vector<double>& energies, double gamma);

// Eigenvalues below e_max in ascending order.
std::vector<double> spectrum(const SolvableSystem& system, double e_max);

// ---- recurrences -------------------------------------------------------------------

struct Peak {
    double t = 0.0;
    double height = 0.0;
    std::size_t index = 0;
};

// Samples strictly above both neighbours and above floor; on a plateau the
// leftmost sample is reported.
std::vector<Peak> find_peaks(const std::vector<double>& x, const std::vector<double>& y,
                             double floor);

struct OrbitPeriod {
    std::string id;
    double period = 0.0;
};

struct Association {
    double peak_t = 0.0;
    double peak_height = 0.0;
    std::string orbit_id; // empty when unmatched
    int repetition = 0;
    double delta_t = 0.0; // peak_t - repetition * period
    bool matched = false;
};

struct RecurrenceSpectrum {
    std::vector<double> times;
    std::vector<double> abs_c;
    std::vector<Peak> peaks;
    std::vector<Association> associations;
};

// |C(t)| with C(t) = sum |c_n|^2 exp(-i E_n t / hbar); peaks above 0.05.
// Throws DomainError unless the grid starts at 0 and increases.
RecurrenceSpectrum recurrence_spectrum(const quantum::Superposition& sup,
                                       const std::vector<double>& times);

// Matches every peak to all orbit repetitions with |peak_t - k T| <= tol.
// Peaks without a match produce one association with matched = false.
std::vector<Association> match_peaks_to_orbits(const std::vector<Peak>& peaks,
                                               const std::vector<OrbitPeriod>& orbits,
                                               double tol, int max_repetition = 1000);

std::vector<double> uniform_grid(double start, double stop, std::size_t count);

}  // namespace pilotwave::semiclassical
