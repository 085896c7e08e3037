#pragma once

// Internal: smooth classical flows in ODE form y = (q[D], p[D], t).

#include <array>
#include <memory>
#include <span>

#include "pilotwave/classical.hpp"
#include "pilotwave/ode.hpp"

namespace pilotwave::classical::detail {

using Matrix4 = std::array<std::array<double, 4>, 4>;

class SmoothFlow {
public:
    virtual ~SmoothFlow() = default;
    virtual int dimension() const = 0;
    virtual bool regularized() const = 0;
    // d(q, p, t)/ds.
    virtual void rhs(std::span<const double> y, std::span<double> dy) const = 0;
    virtual double invariant(std::span<const double> y) const = 0;
    // Jacobian of d(q, p)/ds with respect to (q, p), leading 2D x 2D block used.
    virtual Matrix4 jacobian(std::span<const double> y) const = 0;
    // dq/ds, used for the reduced action p . dq/ds.
    virtual Vec2 velocity(std::span<const double> y) const = 0;

    std::size_t state_size() const { return static_cast<std::size_t>(2 * dimension() + 1); }
};

// nullptr for the hard-wall box, whose flow is propagated in closed form.
std::unique_ptr<SmoothFlow> make_flow(const ClassicalSystem& system);

std::vector<double> pack(const PhaseState& s, int dimension);
PhaseState unpack(std::span<const double> y, int dimension);

// Closed-form hard-wall box propagation over physical time dt.
PhaseState propagate_box(const SolvableSystem& box, const PhaseState& state, double dt);

ode::Tolerances tolerances_for(double tol);

}  // namespace pilotwave::classical::detail
