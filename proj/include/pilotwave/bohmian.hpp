#pragma once

// de Broglie-Bohm dynamics on exact superpositions: guidance velocity
// v = grad(sigma) / m, single trajectories with a node guard band,
// quantum-equilibrium ensembles, Bohmian Lyapunov estimates and circulation.

#include <cstdint>
#include <optional>
#include <vector>

#include "pilotwave/quantum.hpp"

namespace pilotwave::bohmian {

using quantum::Superposition;

// Throws NodeSingularity when rho(x, t) is below the node threshold.
Vec2 velocity_field(const Superposition& sup, const Vec2& x, double t);

struct BohmianSample {
    double t = 0.0;
    Vec2 x{0.0, 0.0};
    Vec2 v{0.0, 0.0};
    double Q = 0.0;
    double rho = 0.0;
};

enum class TrajectoryStatus { completed, node_halt, domain_breach };

struct NodeEncounter {
    double t = 0.0;
    Vec2 x{0.0, 0.0};
    double rho = 0.0;
};

struct BohmianTrajectory {
    Vec2 initial{0.0, 0.0};
    int dimension = 1;
    std::vector<BohmianSample> samples;
    TrajectoryStatus status = TrajectoryStatus::completed;
    // Set when the run stopped at the guard band or outside the domain.
    std::optional<NodeEncounter> halt;
    double min_step = 0.0;
    std::size_t guard_rejections = 0; // trial stages that landed in the guard band
    std::size_t steps = 0;

    const BohmianSample& back() const { return samples.back(); }
};

struct BohmianOptions {
    // Target for the global position error. Local error control runs at
    // step_tolerance_ratio x tol.
    double tol = 1e-10;
    double step_tolerance_ratio = 1e-2;
    // Sample spacing in time (dense output); 0 records every accepted step.
    double sample_interval = 0.0;
    double h_max = 0.0;
    double h_min = 1e-14;
    // false keeps only the initial and final samples.
    bool record_path = true;
};

// Integrates dx/dt = v(x, t) from t0 to t1 (t1 < t0 integrates backwards).
// Throws DomainError if x0 is outside the domain and NodeSingularity if it is
// inside the guard band.
BohmianTrajectory integrate_bohmian(const Superposition& sup, const Vec2& x0, double t0,
                                    double t1, const BohmianOptions& options = {});

// max |m d2x/dt2 + grad(V + Q)| over the interior samples; the acceleration
// comes from second differences of the recorded positions (fourth order on a
// uniform grid). Throws DomainError for fewer than 3 samples.
double newtonian_residual(const BohmianTrajectory& traj, const Superposition& sup);

// ---- ensembles ---------------------------------------------------------------

struct Ensemble {
    std::uint64_t seed = 0;
    double t = 0.0;
    std::vector<Vec2> positions;
    std::size_t size() const { return positions.size(); }
};

Ensemble sample_quantum_equilibrium(const Superposition& sup, double t, std::size_t count,
                                    std::uint64_t seed);

struct MemberFailure {
    std::size_t member_id = 0;
    TrajectoryStatus status = TrajectoryStatus::node_halt;
    NodeEncounter where;
};

struct EnsembleEvolution {
    Ensemble ensemble;                   // halted members keep their last position
    std::vector<MemberFailure> failures; // ordered by member id
};

// threads = 0 uses the hardware concurrency.
EnsembleEvolution evolve_ensemble(const Ensemble& ensemble, const Superposition& sup, double t1,
                                  const BohmianOptions& options = {}, unsigned threads = 0);

// Normalized 50-bin histograms of an ensemble (per axis in 2D: bins x bins
// cells over the characteristic domain) and of rho^2 at time t.
std::vector<double> ensemble_histogram(const Ensemble& ensemble, const Superposition& sup,
                                       int bins = 50);
std::vector<double> density_histogram(const Superposition& sup, double t, int bins = 50);
double l1_distance(const std::vector<double>& a, const std::vector<double>& b);

// ---- chaos and vortices --------------------------------------------------------

struct LyapunovOptions {
    double offset = 1e-9;
    double renormalization_interval = 1.0;
    double tol = 1e-10; // global position tolerance of each partner trajectory
};

struct BohmianLyapunov {
    double estimate = 0.0;
    double horizon_reached = 0.0;
    bool halted = false; // a node halt cut the run short; estimate covers horizon_reached
    std::vector<double> running_estimate;
};

BohmianLyapunov bohmian_lyapunov(const Superposition& sup, const Vec2& x0, double t0,
                                 double horizon, const LyapunovOptions& options = {});

struct CirculationResult {
    std::vector<Vec2> loop; // polygon vertices; the closing edge is implied
    double raw_integral = 0.0;
    int winding = 0;
    double residual = 0.0; // |raw - winding * 2 pi hbar / m|
};

// Contour integral of v along the closed polygon by adaptive Gauss-Kronrod on
// each edge. Throws NodeSingularity if an edge passes through the guard band
// and NumericalError if the result is not quantized to 1e-6 * 2 pi hbar / m.
CirculationResult circulation(const Superposition& sup, const std::vector<Vec2>& loop, double t);

// Axis-aligned square loop helper.
std::vector<Vec2> square_loop(const Vec2& center, double half_width);

}  // namespace pilotwave::bohmian
