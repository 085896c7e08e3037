#pragma once

// Analytic eigenbases of the solvable systems, exact superposition evolution
// psi(x, t) = sum_n c_n phi_n(x) exp(-i E_n t / hbar), and the polar
// decomposition psi = rho exp(i sigma / hbar) with the quantum potential
// Q = -(hbar^2 / 2m) lap(rho) / rho.

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "pilotwave/errors.hpp"
#include "pilotwave/systems.hpp"

namespace pilotwave::quantum {

using Complex = std::complex<double>;
using CVec2 = std::array<Complex, 2>;
using Index2 = std::array<int, 2>;

// Quantum numbers: box n >= 1, oscillator n >= 0, free particle n in Z
// (momentum 2 pi hbar n / L on the periodic cell). Unused 1D entries are 0.
struct EigenstateRef {
    Index2 n{0, 0};
    double energy = 0.0;
    // +1 / -1 under reflection about the domain centre per axis; 0 when the
    // state has no definite parity (plane waves with n != 0).
    Index2 parity{0, 0};
};

EigenstateRef eigenstate(const SolvableSystem& system, Index2 n);
double eigen_energy(const SolvableSystem& system, Index2 n);

// psi and its derivatives through third order (needed for grad Q).
struct WaveDerivatives {
    Complex psi{};
    CVec2 grad{};
    std::array<CVec2, 2> hessian{};
    CVec2 grad_laplacian{};

    Complex laplacian() const { return hessian[0][0] + hessian[1][1]; }
};

struct EigenfunctionValue {
    Complex value{};
    CVec2 gradient{};
    Complex laplacian{};
};

EigenfunctionValue eigenfunction(const SolvableSystem& system, const EigenstateRef& state,
                                 const Vec2& x);
WaveDerivatives eigenfunction_derivatives(const SolvableSystem& system,
                                          const EigenstateRef& state, const Vec2& x);

struct Term {
    Complex coefficient{};
    Index2 n{0, 0};
};

class Superposition {
public:
    // Normalizes the coefficients; throws DomainError for an empty or zero state
    // or invalid quantum numbers.
    Superposition(SolvableSystem system, std::vector<Term> terms);

    const SolvableSystem& system() const { return system_; }
    const std::vector<Term>& terms() const { return terms_; }
    const std::vector<EigenstateRef>& states() const { return states_; }
    std::size_t size() const { return terms_.size(); }
    int dimension() const { return system_.dimension(); }
    // Norm of the input coefficients before normalization.
    double input_norm() const { return input_norm_; }

    // rho below this flags node proximity: 1e-10 x the domain-average rho at t = 0.
    double node_threshold() const { return node_threshold_; }
    double average_amplitude() const { return average_rho_; }

    // Rectangle used as the characteristic domain (the box or cell itself; for
    // oscillators a truncated box of sqrt(2 n_max + 1) + 7 oscillator lengths).
    std::array<Vec2, 2> characteristic_domain() const;

    bool is_stationary() const;
    Superposition with_global_phase(double phase) const;

private:
    SolvableSystem system_;
    std::vector<Term> terms_;
    std::vector<EigenstateRef> states_;
    double input_norm_ = 1.0;
    double average_rho_ = 0.0;
    double node_threshold_ = 0.0;
};

WaveDerivatives evaluate_wavefunction(const Superposition& sup, const Vec2& x, double t);

struct WavefieldSample {
    Complex psi{};
    CVec2 grad_psi{};
    Complex lap_psi{};
    double rho = 0.0;
    double sigma = 0.0;
    Vec2 grad_sigma{0.0, 0.0};
    double Q = 0.0;
    bool near_node = false;
};

// sigma is reported on the branch nearest `sigma_reference` when given,
// otherwise in (-pi hbar, pi hbar]. Throws NodeSingularity when rho == 0.
WavefieldSample polar_fields(const WaveDerivatives& raw, const SystemConstants& constants,
                             double node_threshold = 0.0,
                             std::optional<double> sigma_reference = std::nullopt,
                             const Vec2& where = {0.0, 0.0});

// Evaluates polar fields along a path and keeps sigma continuous.
class PhaseTracker {
public:
    explicit PhaseTracker(const Superposition& sup) : sup_(&sup) {}
    WavefieldSample sample(const Vec2& x, double t);
    void reset() { last_.reset(); }

private:
    const Superposition* sup_;
    std::optional<double> last_;
};

WavefieldSample wavefield(const Superposition& sup, const Vec2& x, double t);

// Q and its gradient from analytic derivatives of rho^2 = psi psi*.
struct QuantumPotential {
    double Q = 0.0;
    Vec2 gradient{0.0, 0.0};
};
QuantumPotential quantum_potential(const Superposition& sup, const Vec2& x, double t);

struct Node {
    Vec2 position{0.0, 0.0};
    // Sign of the phase winding around a 2D node (+1 counter-clockwise); 0 in 1D.
    int winding = 0;
    double residual = 0.0; // |psi| at the refined point
};

struct Region {
    Vec2 lo{0.0, 0.0};
    Vec2 hi{0.0, 0.0};
};

// Interior zeros of psi at time t. 1D: local minima of |psi| on the grid refined
// by Gauss-Newton. 2D: cells where both Re psi and Im psi change sign, refined by
// Newton on (Re psi, Im psi); only isolated (vortex) nodes are reported.
std::vector<Node> find_nodes(const Superposition& sup, const Region& region, double t,
                             int resolution = 200);

Region default_region(const Superposition& sup);

}  // namespace pilotwave::quantum
