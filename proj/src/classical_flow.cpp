#include "classical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pilotwave::classical {

namespace detail {

namespace {

class DiamagneticFlow final : public SmoothFlow {
public:
    explicit DiamagneticFlow(const DiamagneticSystem& s)
        : e_(s.energy()), b2_(s.field() * s.field()) {}
    int dimension() const override { return 2; }
    bool regularized() const override { return true; }

    void rhs(std::span<const double> y, std::span<double> dy) const override {
        const double mu = y[0], nu = y[1];
        const double mu2 = mu * mu, nu2 = nu * nu;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = 2.0 * e_ * mu - 0.25 * b2_ * mu * nu2 * (2.0 * mu2 + nu2);
        dy[3] = 2.0 * e_ * nu - 0.25 * b2_ * nu * mu2 * (mu2 + 2.0 * nu2);
        dy[4] = mu2 + nu2;
    }

    double invariant(std::span<const double> y) const override {
        const double mu2 = y[0] * y[0], nu2 = y[1] * y[1];
        return 0.5 * (y[2] * y[2] + y[3] * y[3]) - e_ * (mu2 + nu2) +
               0.125 * b2_ * mu2 * nu2 * (mu2 + nu2);
    }

    Matrix4 jacobian(std::span<const double> y) const override {
        const double mu = y[0], nu = y[1];
        const double mu2 = mu * mu, nu2 = nu * nu;
        Matrix4 j{};
        j[0][2] = 1.0;
        j[1][3] = 1.0;
        // -Hessian of the regularized potential.
        j[2][0] = 2.0 * e_ - 0.125 * b2_ * (12.0 * mu2 * nu2 + 2.0 * nu2 * nu2);
        j[3][1] = 2.0 * e_ - 0.125 * b2_ * (2.0 * mu2 * mu2 + 12.0 * mu2 * nu2);
        j[2][1] = j[3][0] = -b2_ * mu * nu * (mu2 + nu2);
        return j;
    }

    Vec2 velocity(std::span<const double> y) const override { return {y[2], y[3]}; }

private:
    double e_;
    double b2_;
};

class QuadraticFlow final : public SmoothFlow {
public:
    explicit QuadraticFlow(const SolvableSystem& s) : system_(s) {
        for (int i = 0; i < 2; ++i) {
            const double w = s.kind() == SolvableSystem::Kind::harmonic ? s.omegas()[i] : 0.0;
            k_[i] = s.mass() * w * w;
        }
    }
    int dimension() const override { return system_.dimension(); }
    bool regularized() const override { return false; }

    void rhs(std::span<const double> y, std::span<double> dy) const override {
        const int d = dimension();
        const double m = system_.mass();
        for (int i = 0; i < d; ++i) {
            dy[i] = y[d + i] / m;
            dy[d + i] = -k_[i] * y[i];
        }
        dy[2 * d] = 1.0;
    }

    double invariant(std::span<const double> y) const override {
        const int d = dimension();
        double h = 0.0;
        for (int i = 0; i < d; ++i)
            h += 0.5 * y[d + i] * y[d + i] / system_.mass() + 0.5 * k_[i] * y[i] * y[i];
        return h;
    }

    Matrix4 jacobian(std::span<const double>) const override {
        const int d = dimension();
        Matrix4 j{};
        for (int i = 0; i < d; ++i) {
            j[i][d + i] = 1.0 / system_.mass();
            j[d + i][i] = -k_[i];
        }
        return j;
    }

    Vec2 velocity(std::span<const double> y) const override {
        const int d = dimension();
        Vec2 v{0.0, 0.0};
        for (int i = 0; i < d; ++i) v[i] = y[d + i] / system_.mass();
        return v;
    }

private:
    SolvableSystem system_;
    Vec2 k_{};
};

}  // namespace

std::unique_ptr<SmoothFlow> make_flow(const ClassicalSystem& system) {
    if (const auto* d = std::get_if<DiamagneticSystem>(&system))
        return std::make_unique<DiamagneticFlow>(*d);
    const auto& s = std::get<SolvableSystem>(system);
    if (s.kind() == SolvableSystem::Kind::box) return nullptr;
    return std::make_unique<QuadraticFlow>(s);
}

std::vector<double> pack(const PhaseState& s, int dimension) {
    std::vector<double> y(static_cast<std::size_t>(2 * dimension + 1));
    for (int i = 0; i < dimension; ++i) {
        y[i] = s.q[i];
        y[dimension + i] = s.p[i];
    }
    y[2 * dimension] = s.t;
    return y;
}

PhaseState unpack(std::span<const double> y, int dimension) {
    PhaseState s;
    for (int i = 0; i < dimension; ++i) {
        s.q[i] = y[i];
        s.p[i] = y[dimension + i];
    }
    s.t = y[2 * dimension];
    return s;
}

PhaseState propagate_box(const SolvableSystem& box, const PhaseState& state, double dt) {
    PhaseState out = state;
    out.t = state.t + dt;
    for (int i = 0; i < box.dimension(); ++i) {
        const double len = box.lengths()[i];
        const double v = state.p[i] / box.mass();
        double u = std::fmod(state.q[i] + v * dt, 2.0 * len);
        if (u < 0.0) u += 2.0 * len;
        if (u <= len) {
            out.q[i] = u;
            out.p[i] = state.p[i];
        } else {
            out.q[i] = 2.0 * len - u;
            out.p[i] = -state.p[i];
        }
    }
    return out;
}

ode::Tolerances tolerances_for(double tol) {
    if (!(tol > 0.0)) throw DomainError("integration tolerance must be positive");
    ode::Tolerances t;
    t.rtol = tol;
    t.atol = tol;
    return t;
}

}  // namespace detail

using detail::pack;
using detail::unpack;

int dimension(const ClassicalSystem& system) {
    if (std::holds_alternative<DiamagneticSystem>(system)) return 2;
    return std::get<SolvableSystem>(system).dimension();
}

bool is_regularized(const ClassicalSystem& system) {
    return std::holds_alternative<DiamagneticSystem>(system);
}

double pseudo_energy(const DiamagneticSystem& system, const PhaseState& state) {
    const auto y = pack(state, 2);
    return detail::make_flow(system)->invariant(y);
}

RegularizedDerivative regularized_derivative(const DiamagneticSystem& system,
                                             const PhaseState& state) {
    for (double v : {state.q[0], state.q[1], state.p[0], state.p[1]})
        if (!std::isfinite(v)) throw DomainError("regularized state has non-finite components");
    const auto y = pack(state, 2);
    std::array<double, 5> dy{};
    detail::make_flow(system)->rhs(y, dy);
    return {{dy[0], dy[1]}, {dy[2], dy[3]}, dy[4]};
}

PhaseState launch_from_nucleus(double alpha) {
    PhaseState s;
    s.p = {2.0 * std::cos(alpha), 2.0 * std::sin(alpha)};
    return s;
}

PhaseState regularize(double rho, double z, double p_rho, double p_z, double t) {
    const double r = std::hypot(rho, z);
    PhaseState s;
    s.q = {std::sqrt(std::max(0.0, r + z)), std::sqrt(std::max(0.0, r - z))};
    // Point transformation: P_mu = p_rho nu + p_z mu, P_nu = p_rho mu - p_z nu.
    s.p = {p_rho * s.q[1] + p_z * s.q[0], p_rho * s.q[0] - p_z * s.q[1]};
    s.t = t;
    return s;
}

CylindricalState to_cylindrical(const PhaseState& reg) {
    const double mu = reg.q[0], nu = reg.q[1];
    const double w = mu * mu + nu * nu;
    CylindricalState c;
    c.t = reg.t;
    c.rho = std::abs(mu * nu);
    c.z = 0.5 * (mu * mu - nu * nu);
    if (w == 0.0) {
        c.p_rho = c.p_z = std::numeric_limits<double>::quiet_NaN();
    } else {
        const double sign = mu * nu < 0.0 ? -1.0 : 1.0;
        c.p_rho = sign * (reg.p[0] * nu + reg.p[1] * mu) / w;
        c.p_z = (reg.p[0] * mu - reg.p[1] * nu) / w;
    }
    return c;
}

PhaseState to_scaled(const DiamagneticSystem& physical, const PhaseState& state) {
    const double b = physical.field();
    const double lscale = std::cbrt(b);
    PhaseState s = state;
    s.q = {state.q[0] * lscale, state.q[1] * lscale};
    s.t = state.t * b;
    return s;
}

PhaseState from_scaled(const DiamagneticSystem& physical, const PhaseState& scaled_state) {
    const double b = physical.field();
    const double lscale = std::cbrt(b);
    PhaseState s = scaled_state;
    s.q = {scaled_state.q[0] / lscale, scaled_state.q[1] / lscale};
    s.t = scaled_state.t / b;
    return s;
}

double conserved_quantity(const ClassicalSystem& system, const PhaseState& state) {
    const auto flow = detail::make_flow(system);
    const int d = dimension(system);
    if (flow) return flow->invariant(pack(state, d));
    const auto& box = std::get<SolvableSystem>(system);
    double h = 0.0;
    for (int i = 0; i < d; ++i) h += 0.5 * state.p[i] * state.p[i] / box.mass();
    return h;
}

double Trajectory::max_drift() const {
    double m = 0.0;
    for (double d : invariant_drift) m = std::max(m, d);
    return m;
}

namespace {

constexpr double min_internal_tol = 1e-15;

void record(Trajectory& traj, const PhaseState& s, double sval, double h0, double h) {
    traj.samples.push_back(s);
    traj.s.push_back(sval);
    traj.invariant_drift.push_back(std::abs(h - h0));
}

Trajectory integrate_box(const SolvableSystem& box, const PhaseState& initial, double duration,
                         const IntegrationOptions& options) {
    Trajectory traj;
    traj.dimension = box.dimension();
    const double dt = options.sample_interval > 0.0 ? options.sample_interval : duration / 1000.0;
    const auto steps = static_cast<std::size_t>(std::ceil(duration / dt - 1e-9));
    const double h0 = conserved_quantity(box, initial);
    for (std::size_t k = 0; k <= steps; ++k) {
        const double elapsed = std::min(duration, static_cast<double>(k) * dt);
        const PhaseState s = detail::propagate_box(box, initial, elapsed);
        record(traj, s, s.t, h0, conserved_quantity(box, s));
    }
    return traj;
}

Trajectory integrate_smooth(const detail::SmoothFlow& flow_ref, const PhaseState& initial,
                            double duration, const IntegrationOptions& options,
                            double internal_tol) {
    const auto* flow = &flow_ref;
    const int d = flow->dimension();
    const bool reg = flow->regularized();
    auto y0 = pack(initial, d);
    const double h0 = flow->invariant(y0);

    Trajectory traj;
    traj.dimension = d;
    traj.regularized = reg;
    const std::size_t n = flow->state_size();
    const std::size_t t_index = n - 1;
    const double t_end = initial.t + duration;

    ode::DormandPrince stepper(
        n, [&](double, std::span<const double> y, std::span<double> dy) { flow->rhs(y, dy); },
        detail::tolerances_for(internal_tol));
    stepper.initialize(0.0, y0);
    record(traj, initial, 0.0, h0, h0);
    if (duration == 0.0) return traj;

    std::vector<double> buf(n);
    double next_sample = options.sample_interval;
    // Regularized runs are driven in tau until the physical clock reaches t_end.
    const double s_limit = reg ? std::numeric_limits<double>::max() : duration;

    for (;;) {
        const auto status = stepper.step(s_limit);
        if (status != ode::StepStatus::accepted && status != ode::StepStatus::reached_end) {
            throw IntegrationError("classical integration failed (step-size underflow)",
                                   std::move(traj));
        }
        double s_stop = stepper.t();
        bool done = status == ode::StepStatus::reached_end;
        if (reg && stepper.y()[t_index] >= t_end) {
            ode::Crossing c;
            const bool found = ode::find_crossing(
                stepper, [&](double, std::span<const double> y) { return y[t_index] - t_end; }, 0,
                c);
            s_stop = found ? c.t : stepper.t();
            done = true;
        }
        if (options.sample_interval > 0.0) {
            while (next_sample < s_stop) {
                stepper.interpolate(next_sample, buf);
                const auto st = unpack(buf, d);
                record(traj, st, next_sample, h0, flow->invariant(buf));
                next_sample += options.sample_interval;
            }
        }
        if (done) {
            stepper.interpolate(s_stop, buf);
            if (reg) buf[t_index] = t_end;
            record(traj, unpack(buf, d), s_stop, h0, flow->invariant(buf));
            return traj;
        }
        if (options.sample_interval <= 0.0) {
            const auto y = stepper.y();
            record(traj, unpack(y, d), stepper.t(), h0, flow->invariant(y));
        }
    }
}

}  // namespace

Trajectory integrate_classical(const ClassicalSystem& system, const PhaseState& initial,
                               double duration, const IntegrationOptions& options) {
    if (!(duration >= 0.0) || !std::isfinite(duration))
        throw DomainError("integration duration must be finite and non-negative");
    for (double v : {initial.q[0], initial.q[1], initial.p[0], initial.p[1], initial.t})
        if (!std::isfinite(v)) throw DomainError("initial state has non-finite components");

    if (const auto* s = std::get_if<SolvableSystem>(&system);
        s && s->kind() == SolvableSystem::Kind::box) {
        if (!s->inside(initial.q)) throw DomainError("initial point outside the box");
        return integrate_box(*s, initial, duration, options);
    }

    const auto flow = detail::make_flow(system);
    detail::tolerances_for(options.tol);
    if (flow->regularized() &&
        std::abs(flow->invariant(pack(initial, 2)) - 2.0) > std::max(options.tol, 1e-13))
        throw DomainError("initial state is not on the pseudo-energy shell h = 2");
    // The step controller bounds local error; the drift contract is global, so
    // tighten the internal tolerance (drift scales linearly with it) and rerun.
    double internal_tol = options.tol;
    Trajectory traj = integrate_smooth(*flow, initial, duration, options, internal_tol);
    for (int attempt = 0; attempt < 3; ++attempt) {
        const double drift = traj.max_drift();
        if (drift <= 10.0 * options.tol || internal_tol <= min_internal_tol) break;
        internal_tol = std::max(min_internal_tol, internal_tol * 5.0 * options.tol / drift);
        traj = integrate_smooth(*flow, initial, duration, options, internal_tol);
    }
    return traj;
}

std::vector<CylindricalState> to_physical(const Trajectory& trajectory) {
    if (!trajectory.regularized)
        throw DomainError("to_physical requires a regularized (diamagnetic) trajectory");
    std::vector<CylindricalState> out;
    out.reserve(trajectory.size());
    for (const auto& s : trajectory.samples) out.push_back(to_cylindrical(s));
    return out;
}

}  // namespace pilotwave::classical
