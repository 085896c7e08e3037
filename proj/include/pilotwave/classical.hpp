#pragma once

// Classical Hamiltonian dynamics: the diamagnetic Kepler problem in
// semiparabolic (regularized) coordinates and the solvable reference systems,
// with Lyapunov, Poincare-section, coverage and closed-orbit diagnostics.
//
// Regularized coordinates: mu^2 = r + z, nu^2 = r - z, dt = (mu^2 + nu^2) dtau.
// The pseudo-Hamiltonian
//     h = |P|^2 / 2 - E (mu^2 + nu^2) + B^2/8 mu^2 nu^2 (mu^2 + nu^2)
// equals 2 on the physical energy shell H = E.

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pilotwave/errors.hpp"
#include "pilotwave/systems.hpp"

namespace pilotwave::classical {

// For the diamagnetic system q = (mu, nu), p = (p_mu, p_nu) and t is the
// physical time; unused components stay zero in 1D.
struct PhaseState {
    Vec2 q{0.0, 0.0};
    Vec2 p{0.0, 0.0};
    double t = 0.0;
};

using ClassicalSystem = std::variant<DiamagneticSystem, SolvableSystem>;

int dimension(const ClassicalSystem& system);
bool is_regularized(const ClassicalSystem& system);

// ---- regularized diamagnetic flow -------------------------------------------

struct RegularizedDerivative {
    Vec2 dq{};   // d(mu, nu)/dtau
    Vec2 dp{};   // d(p_mu, p_nu)/dtau
    double dt{}; // dt/dtau = mu^2 + nu^2
};

double pseudo_energy(const DiamagneticSystem& system, const PhaseState& state);
RegularizedDerivative regularized_derivative(const DiamagneticSystem& system,
                                             const PhaseState& state);

// Start at the nucleus with pseudo-energy 2. alpha is the angle in the (mu, nu)
// plane; the physical launch angle from the +z (field) axis is 2 alpha, so
// alpha = 0 is field-parallel and alpha = pi/4 field-perpendicular.
PhaseState launch_from_nucleus(double alpha);

// Regularized state whose physical point is (rho, z) moving with momentum
// (p_rho, p_z); the state lands on the pseudo-energy shell automatically when
// the physical state is on the energy shell.
PhaseState regularize(double rho, double z, double p_rho, double p_z, double t = 0.0);

struct CylindricalState {
    double t = 0.0;
    double rho = 0.0;
    double z = 0.0;
    double p_rho = 0.0; // undefined (NaN) exactly at the nucleus
    double p_z = 0.0;
};

CylindricalState to_cylindrical(const PhaseState& regularized);

// Maps a regularized state between the physical (E, B) system and its scaled
// counterpart (mu -> B^(1/3) mu, p unchanged, t -> B t).
PhaseState to_scaled(const DiamagneticSystem& physical, const PhaseState& state);
PhaseState from_scaled(const DiamagneticSystem& physical, const PhaseState& scaled_state);

// Scalar conserved by the flow: pseudo-energy h for the diamagnetic system,
// H otherwise.
double conserved_quantity(const ClassicalSystem& system, const PhaseState& state);

// ---- trajectories ------------------------------------------------------------

struct Trajectory {
    int dimension = 2;
    bool regularized = false;
    std::vector<PhaseState> samples;
    std::vector<double> s;               // integration variable (tau or t) per sample
    std::vector<double> invariant_drift; // |conserved - conserved(initial)| per sample

    double max_drift() const;
    std::size_t size() const { return samples.size(); }
};

// Integration failure that keeps the part of the trajectory that was computed.
class IntegrationError : public NumericalError {
public:
    IntegrationError(const std::string& what, Trajectory partial_trajectory)
        : NumericalError(what), partial(std::move(partial_trajectory)) {}
    Trajectory partial;
};

struct IntegrationOptions {
    double tol = 1e-10;
    // Spacing of recorded samples in the integration variable; 0 records every
    // accepted step.
    double sample_interval = 0.0;
};

// Integrates for `duration` units of physical time.
Trajectory integrate_classical(const ClassicalSystem& system, const PhaseState& initial,
                               double duration, const IntegrationOptions& options = {});

std::vector<CylindricalState> to_physical(const Trajectory& trajectory);

// ---- chaos diagnostics ---------------------------------------------------------

struct ChaosDiagnostics {
    double lyapunov_estimate = 0.0;
    double horizon = 0.0;
    std::vector<Vec2> section_points;
    double coverage_fraction = 0.0;
    std::vector<double> running_estimate; // estimate after each renormalization
};

struct LyapunovOptions {
    double renormalization_interval = 1.0; // physical time units
    double offset = 1e-8;                  // along q1 in (regularized) phase space
    double tol = 1e-10;
};

ChaosDiagnostics lyapunov_exponent(const ClassicalSystem& system, const PhaseState& initial,
                                   double horizon, const LyapunovOptions& options = {});

// Hyperplane normal . (q1, q2, p1, p2) = offset, crossed with
// d(normal . y)/ds having the sign of `orientation`. Section points report the
// two phase-space components selected by `report` (0,1 -> q; 2,3 -> p).
struct SectionPlane {
    std::array<double, 4> normal{0.0, 1.0, 0.0, 0.0};
    double offset = 0.0;
    int orientation = 1;
    std::array<int, 2> report{0, 2};
};

std::vector<Vec2> poincare_section(const ClassicalSystem& system, const Trajectory& trajectory,
                                   const SectionPlane& section, double tol = 1e-10);

// Zero-velocity curve V(rho, z) = E of the physical Hamiltonian.
class AccessibleRegion {
public:
    explicit AccessibleRegion(const DiamagneticSystem& system);
    double rho_max() const { return rho_max_; }
    double z_max() const { return z_max_; }
    bool contains(double rho, double z) const;
    // Boundary polyline (rho >= 0) from the +z to the -z extreme.
    std::vector<Vec2> boundary(int points = 200) const;

private:
    DiamagneticSystem system_;
    double rho_max_;
    double z_max_;
};

// Fraction of the accessible-region cells (grid x grid raster of the bounding
// box rho in [0, rho_max], z in [-z_max, z_max]) visited by the trajectory.
double coverage_fraction(const DiamagneticSystem& system, const Trajectory& trajectory,
                         int grid = 100);

// ---- closed orbits -------------------------------------------------------------

struct ClosedOrbit {
    PhaseState launch;
    double launch_angle = 0.0; // alpha of launch_from_nucleus; NaN when not a nucleus launch
    Trajectory path;
    double period = 0.0;
    double action = 0.0;
    double monodromy_trace = 0.0;
    int phase_index = 0;
    double closure_residual = 0.0;
};

struct OrbitSearchOptions {
    int angle_grid = 241;        // launch angles on [0, pi/2], endpoints included
    double closure_tol = 1e-6;   // regularized distance from the nucleus at return
    double max_period = 10.0;    // physical (scaled) time
    double tol = 1e-11;
    double sample_interval = 0.01;
};

struct ExcludedCandidate {
    double launch_angle = 0.0;
    double residual = 0.0;
    std::string reason;
};

struct OrbitSearchResult {
    std::vector<ClosedOrbit> orbits;
    std::vector<ExcludedCandidate> excluded;
};

OrbitSearchResult find_closed_orbits(const DiamagneticSystem& system,
                                     const OrbitSearchOptions& options = {});

// Near-nucleus returns of a nucleus launch: local minima of mu^2 + nu^2 and the
// (mu, nu)-plane angular momentum L there (L changes sign across a closed orbit).
struct NucleusReturn {
    double s = 0.0;
    double t = 0.0;
    double angular_momentum = 0.0;
    double distance2 = 0.0; // mu^2 + nu^2
};

std::vector<NucleusReturn> nucleus_returns(const DiamagneticSystem& system, double alpha,
                                           double max_period, double tol = 1e-11);

// Re-converges a closed orbit of a nearby system (continuation in energy).
std::optional<ClosedOrbit> continue_closed_orbit(const DiamagneticSystem& system,
                                                 const ClosedOrbit& seed,
                                                 const OrbitSearchOptions& options = {});

// The primitive periodic orbit of a 1D oscillator at energy E.
ClosedOrbit harmonic_orbit(const SolvableSystem& system, double energy, double tol = 1e-12);

struct OrbitInvariants {
    double action = 0.0;
    double period = 0.0;
    double monodromy_trace = 0.0;
    int phase_index = 0;
};

OrbitInvariants orbit_invariants(const ClosedOrbit& orbit, const ClassicalSystem& system,
                                 double tol = 1e-12);

}  // namespace pilotwave::classical
