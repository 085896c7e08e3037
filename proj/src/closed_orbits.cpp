#include <algorithm>
#include <cmath>
#include <limits>

#include "classical_flow.hpp"

namespace pilotwave::classical {

using detail::pack;
using detail::unpack;

std::vector<NucleusReturn> nucleus_returns(const DiamagneticSystem& system, double alpha,
                                           double max_period, double tol) {
    const auto flow = detail::make_flow(system);
    ode::DormandPrince stepper(
        5, [&](double, std::span<const double> y, std::span<double> dy) { flow->rhs(y, dy); },
        detail::tolerances_for(tol));
    stepper.initialize(0.0, pack(launch_from_nucleus(alpha), 2));

    // Minima of mu^2 + nu^2: mu p_mu + nu p_nu crosses zero upwards.
    const auto radial = [](double, std::span<const double> y) {
        return y[0] * y[2] + y[1] * y[3];
    };
    std::vector<NucleusReturn> out;
    const double infinity = std::numeric_limits<double>::max();
    while (true) {
        const auto status = stepper.step(infinity);
        if (status != ode::StepStatus::accepted)
            throw NumericalError("nucleus-return integration failed");
        ode::Crossing c;
        if (ode::find_crossing(stepper, radial, 1, c) && c.t > 0.0) {
            if (c.y[4] > max_period) break;
            out.push_back({c.t, c.y[4], c.y[0] * c.y[3] - c.y[1] * c.y[2],
                           c.y[0] * c.y[0] + c.y[1] * c.y[1]});
        }
        if (stepper.y()[4] > max_period) break;
    }
    return out;
}

namespace {

struct Root {
    double alpha;
    NucleusReturn event;
    std::size_t index;
};

std::optional<std::size_t> nearest_event(const std::vector<NucleusReturn>& events, double t,
                                         double window = 0.05) {
    std::optional<std::size_t> best;
    double best_dt = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double dt = std::abs(events[i].t - t);
        if (dt < best_dt) {
            best_dt = dt;
            best = i;
        }
    }
    if (best && best_dt > window * t + 1e-9) return std::nullopt;
    return best;
}

// Root of L(alpha) on the branch of returns that passes through t_ref.
std::optional<Root> refine_return(const DiamagneticSystem& system, double a, double la, double b,
                                  double lb, double t_ref, const OrbitSearchOptions& opt) {
    const double horizon = 1.1 * t_ref + 1.0;
    Root best{a, {}, 0};
    double best_abs = std::numeric_limits<double>::max();
    int side = 0;
    for (int it = 0; it < 100; ++it) {
        double m = (la * b - lb * a) / (la - lb);
        if (!std::isfinite(m) || m <= std::min(a, b) || m >= std::max(a, b)) m = 0.5 * (a + b);
        const auto events = nucleus_returns(system, m, horizon, opt.tol);
        const auto idx = nearest_event(events, t_ref);
        if (!idx) return std::nullopt;
        const auto& ev = events[*idx];
        t_ref = ev.t;
        const double lm = ev.angular_momentum;
        if (std::abs(lm) < best_abs) {
            best_abs = std::abs(lm);
            best = {m, ev, *idx};
        }
        if (lm == 0.0 || std::abs(b - a) < 4e-16) break;
        if ((lm < 0.0) == (la < 0.0)) {
            a = m;
            la = lm;
            if (side == -1) lb *= 0.5;
            side = -1;
        } else {
            b = m;
            lb = lm;
            if (side == 1) la *= 0.5;
            side = 1;
        }
        if (std::sqrt(ev.distance2) < 1e-3 * opt.closure_tol) break;
    }
    return best;
}

ClosedOrbit build_orbit(const DiamagneticSystem& system, const Root& root,
                        const OrbitSearchOptions& opt) {
    ClosedOrbit orbit;
    orbit.launch = launch_from_nucleus(root.alpha);
    orbit.launch_angle = root.alpha;
    orbit.period = root.event.t;
    orbit.closure_residual = std::sqrt(root.event.distance2);

    // Path sampled in tau up to the return.
    const auto flow = detail::make_flow(system);
    ode::DormandPrince stepper(
        5, [&](double, std::span<const double> y, std::span<double> dy) { flow->rhs(y, dy); },
        detail::tolerances_for(opt.tol));
    const auto y0 = pack(orbit.launch, 2);
    stepper.initialize(0.0, y0);
    Trajectory& path = orbit.path;
    path.dimension = 2;
    path.regularized = true;
    const double h0 = flow->invariant(y0);
    path.samples.push_back(orbit.launch);
    path.s.push_back(0.0);
    path.invariant_drift.push_back(0.0);
    std::vector<double> buf(5);
    const double s_end = root.event.s;
    const double ds = opt.sample_interval > 0.0 ? opt.sample_interval : s_end / 1000.0;
    double next = ds;
    while (true) {
        const auto status = stepper.step(s_end);
        while (next < stepper.t()) {
            stepper.interpolate(next, buf);
            path.samples.push_back(unpack(buf, 2));
            path.s.push_back(next);
            path.invariant_drift.push_back(std::abs(flow->invariant(buf) - h0));
            next += ds;
        }
        if (status == ode::StepStatus::reached_end) break;
        if (status != ode::StepStatus::accepted)
            throw NumericalError("closed-orbit path integration failed");
    }
    const auto last = stepper.y();
    path.samples.push_back(unpack(last, 2));
    path.s.push_back(s_end);
    path.invariant_drift.push_back(std::abs(flow->invariant(last) - h0));

    const auto inv = orbit_invariants(orbit, system, opt.tol);
    orbit.action = inv.action;
    orbit.monodromy_trace = inv.monodromy_trace;
    orbit.phase_index = inv.phase_index;
    return orbit;
}

// True when the launch at alpha already passed through the nucleus before the
// given return, i.e. the candidate is a composite of shorter closed orbits.
bool closes_earlier(const DiamagneticSystem& system, const Root& root,
                    const OrbitSearchOptions& opt) {
    const auto events = nucleus_returns(system, root.alpha, root.event.t * 0.999, opt.tol);
    for (const auto& ev : events)
        if (ev.t < root.event.t * (1.0 - 1e-6) && std::sqrt(ev.distance2) <= opt.closure_tol)
            return true;
    return false;
}

}  // namespace

OrbitSearchResult find_closed_orbits(const DiamagneticSystem& system,
                                     const OrbitSearchOptions& opt) {
    if (!(system.energy() < 0.0)) throw DomainError("closed-orbit search requires E < 0");
    if (opt.angle_grid < 2) throw DomainError("launch-angle grid needs at least two points");
    const int n = opt.angle_grid;
    const double spacing = (M_PI / 2.0) / (n - 1);
    std::vector<double> alphas(n);
    std::vector<std::vector<NucleusReturn>> events(n);
    for (int i = 0; i < n; ++i) {
        alphas[i] = i == n - 1 ? M_PI / 2.0 : i * spacing;
        events[i] = nucleus_returns(system, alphas[i], opt.max_period, opt.tol);
    }

    std::vector<Root> roots;
    OrbitSearchResult result;
    // Grid points sitting exactly on a closed orbit (the symmetry axes).
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < events[i].size(); ++k) {
            const auto& ev = events[i][k];
            if (std::sqrt(ev.distance2) <= opt.closure_tol && std::abs(ev.angular_momentum) <= 1e-12) {
                roots.push_back({alphas[i], ev, k});
                break;
            }
        }
    }
    for (int i = 0; i + 1 < n; ++i) {
        for (std::size_t k = 0; k < events[i].size(); ++k) {
            const auto& ev = events[i][k];
            // Return times can move quickly with the launch angle; pair mutually
            // nearest returns of neighbouring launches.
            const auto j = nearest_event(events[i + 1], ev.t, 0.15);
            if (!j || nearest_event(events[i], events[i + 1][*j].t, 0.15) != k) continue;
            const auto& other = events[i + 1][*j];
            if (!(ev.angular_momentum * other.angular_momentum < 0.0)) continue;
            const auto root = refine_return(system, alphas[i], ev.angular_momentum, alphas[i + 1],
                                            other.angular_momentum, 0.5 * (ev.t + other.t), opt);
            if (!root) {
                result.excluded.push_back({0.5 * (alphas[i] + alphas[i + 1]),
                                           std::numeric_limits<double>::quiet_NaN(),
                                           "return branch lost during refinement"});
                continue;
            }
            const double residual = std::sqrt(root->event.distance2);
            if (residual > opt.closure_tol) {
                result.excluded.push_back({root->alpha, residual, "no closure within tolerance"});
                continue;
            }
            if (root->event.t > opt.max_period) {
                result.excluded.push_back({root->alpha, residual, "period exceeds bound"});
                continue;
            }
            roots.push_back(*root);
        }
    }

    std::vector<ClosedOrbit> orbits;
    for (const auto& root : roots) {
        if (closes_earlier(system, root, opt)) {
            result.excluded.push_back({root.alpha, std::sqrt(root.event.distance2),
                                       "composite of a shorter closed orbit"});
            continue;
        }
        orbits.push_back(build_orbit(system, root, opt));
    }
    std::sort(orbits.begin(), orbits.end(), [](const ClosedOrbit& a, const ClosedOrbit& b) {
        return a.launch_angle < b.launch_angle ||
               (a.launch_angle == b.launch_angle && a.period < b.period);
    });
    // Deduplicate near-identical launches with matching periods.
    for (auto& o : orbits) {
        bool merged = false;
        for (auto& kept : result.orbits) {
            if (std::abs(kept.launch_angle - o.launch_angle) < spacing &&
                std::abs(kept.period - o.period) <= 1e-4 * kept.period) {
                if (o.closure_residual < kept.closure_residual) kept = std::move(o);
                merged = true;
                break;
            }
        }
        if (!merged) result.orbits.push_back(std::move(o));
    }
    return result;
}

std::optional<ClosedOrbit> continue_closed_orbit(const DiamagneticSystem& system,
                                                 const ClosedOrbit& seed,
                                                 const OrbitSearchOptions& opt) {
    const double horizon = 1.2 * seed.period + 1.0;
    auto l_at = [&](double alpha) -> std::optional<NucleusReturn> {
        const auto events = nucleus_returns(system, alpha, horizon, opt.tol);
        const auto idx = nearest_event(events, seed.period);
        if (!idx) return std::nullopt;
        return events[*idx];
    };
    const auto centre = l_at(seed.launch_angle);
    if (!centre) return std::nullopt;
    if (std::abs(centre->angular_momentum) <= 1e-12 &&
        std::sqrt(centre->distance2) <= opt.closure_tol)
        return build_orbit(system, {seed.launch_angle, *centre, 0}, opt);
    for (double delta = 1e-4; delta < 0.05; delta *= 2.0) {
        for (double sgn : {1.0, -1.0}) {
            const double other = seed.launch_angle + sgn * delta;
            const auto ev = l_at(other);
            if (!ev || !(ev->angular_momentum * centre->angular_momentum < 0.0)) continue;
            const auto root =
                refine_return(system, seed.launch_angle, centre->angular_momentum, other,
                              ev->angular_momentum, 0.5 * (centre->t + ev->t), opt);
            if (root && std::sqrt(root->event.distance2) <= opt.closure_tol)
                return build_orbit(system, *root, opt);
        }
    }
    return std::nullopt;
}

ClosedOrbit harmonic_orbit(const SolvableSystem& system, double energy, double tol) {
    if (system.kind() != SolvableSystem::Kind::harmonic || system.dimension() != 1)
        throw DomainError("harmonic_orbit requires a 1D harmonic oscillator");
    if (!(energy > 0.0)) throw DomainError("oscillator orbit energy must be positive");
    const double w = system.omegas()[0];
    ClosedOrbit orbit;
    orbit.launch.q = {std::sqrt(2.0 * energy / system.mass()) / w, 0.0};
    orbit.launch_angle = std::numeric_limits<double>::quiet_NaN();
    orbit.period = 2.0 * M_PI / w;
    IntegrationOptions io;
    io.tol = tol;
    io.sample_interval = orbit.period / 1000.0;
    orbit.path = integrate_classical(system, orbit.launch, orbit.period, io);
    orbit.closure_residual = std::abs(orbit.path.samples.back().q[0] - orbit.launch.q[0]);
    const auto inv = orbit_invariants(orbit, system, tol);
    orbit.action = inv.action;
    orbit.monodromy_trace = inv.monodromy_trace;
    orbit.phase_index = inv.phase_index;
    return orbit;
}

OrbitInvariants orbit_invariants(const ClosedOrbit& orbit, const ClassicalSystem& system,
                                 double tol) {
    if (orbit.path.size() < 2 || !(orbit.period > 0.0))
        throw DomainError("degenerate (zero-length) orbit");
    const double s_span = orbit.path.s.back() - orbit.path.s.front();
    if (!(s_span > 0.0)) throw DomainError("degenerate (zero-length) orbit");
    const auto flow = detail::make_flow(system);
    if (!flow) throw DomainError("orbit invariants need a smooth flow (not the hard-wall box)");

    const int d = flow->dimension();
    const std::size_t n = flow->state_size();
    const std::size_t m = static_cast<std::size_t>(2 * d);
    // y | S | Phi (m x m, row-major)
    const std::size_t total = n + 1 + m * m;
    std::vector<double> y0(total, 0.0);
    const auto start = pack(orbit.path.samples.front(), d);
    std::copy(start.begin(), start.end(), y0.begin());
    for (std::size_t i = 0; i < m; ++i) y0[n + 1 + i * m + i] = 1.0;

    auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
        flow->rhs(y.subspan(0, n), dy.subspan(0, n));
        const Vec2 v = flow->velocity(y);
        double ds = 0.0;
        for (int i = 0; i < d; ++i) ds += y[d + i] * v[i];
        dy[n] = ds;
        const auto j = flow->jacobian(y);
        const double* phi = y.data() + n + 1;
        double* dphi = dy.data() + n + 1;
        for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < m; ++c) {
                double acc = 0.0;
                for (std::size_t k = 0; k < m; ++k) acc += j[r][k] * phi[k * m + c];
                dphi[r * m + c] = acc;
            }
    };

    auto transverse = [&](std::span<const double> y) {
        const Vec2 v = flow->velocity(y);
        const double norm = std::hypot(v[0], v[1]);
        return Vec2{-v[1] / norm, v[0] / norm};
    };
    const Vec2 n0 = d == 2 ? transverse(y0) : Vec2{1.0, 0.0};

    // Position response to an initial transverse momentum kick (Jacobi field).
    auto jacobi = [&](std::span<const double> y) {
        const double* phi = y.data() + n + 1;
        if (d == 1) return phi[0 * m + 1];
        const Vec2 nt = transverse(y);
        double acc = 0.0;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) acc += nt[r] * phi[r * m + (d + c)] * n0[c];
        return acc;
    };

    ode::DormandPrince stepper(total, rhs, detail::tolerances_for(tol));
    stepper.initialize(0.0, y0);
    std::vector<double> jf{0.0};
    double jf_max = 0.0;
    for (;;) {
        const auto status = stepper.step(s_span);
        if (status != ode::StepStatus::accepted && status != ode::StepStatus::reached_end)
            throw NumericalError("orbit invariant integration failed");
        const double v = jacobi(stepper.y());
        jf.push_back(v);
        jf_max = std::max(jf_max, std::abs(v));
        if (status == ode::StepStatus::reached_end) break;
    }
    const double zero_band = 1e-7 * jf_max;
    int conjugate = 0;
    double last_sign = 0.0;
    for (std::size_t k = 1; k < jf.size(); ++k) {
        if (std::abs(jf[k]) <= zero_band) continue;
        const double sg = jf[k] > 0.0 ? 1.0 : -1.0;
        if (last_sign != 0.0 && sg != last_sign) ++conjugate;
        last_sign = sg;
    }
    if (std::abs(jf.back()) <= zero_band) ++conjugate;

    const auto yend = stepper.y();
    const double* phi = yend.data() + n + 1;
    OrbitInvariants out;
    out.action = yend[n];
    out.period = yend[n - 1] - y0[n - 1];
    out.phase_index = conjugate;
    if (d == 1) {
        out.monodromy_trace = phi[0] + phi[m + 1];
    } else {
        const Vec2 ne = transverse(yend);
        auto block = [&](int row_off, int col_off) {
            double acc = 0.0;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    acc += ne[r] * phi[(row_off + r) * m + (col_off + c)] * n0[c];
            return acc;
        };
        out.monodromy_trace = block(0, 0) + block(d, d);
    }
    return out;
}

}  // namespace pilotwave::classical
