#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "classical_flow.hpp"

namespace pilotwave::classical {

using detail::pack;
using detail::unpack;

namespace {

double phase_distance(std::span<const double> a, std::span<const double> b, int d) {
    double s = 0.0;
    for (int i = 0; i < 2 * d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

ChaosDiagnostics lyapunov_exponent(const ClassicalSystem& system, const PhaseState& initial,
                                   double horizon, const LyapunovOptions& options) {
    if (!(horizon > 0.0)) throw DomainError("Lyapunov horizon must be positive");
    if (!(options.renormalization_interval > 0.0) || !(options.offset > 0.0))
        throw DomainError("Lyapunov renormalization interval and offset must be positive");

    // Wall reflections are isometries of the tangent space, so the box shares
    // the tangent dynamics of the free particle.
    std::unique_ptr<detail::SmoothFlow> flow;
    if (const auto* s = std::get_if<SolvableSystem>(&system);
        s && s->kind() == SolvableSystem::Kind::box) {
        flow = detail::make_flow(SolvableSystem::free_particle(s->lengths(), s->constants()));
    } else {
        flow = detail::make_flow(system);
    }
    const int d = flow->dimension();
    const std::size_t n = flow->state_size();
    const std::size_t t_index = n - 1;

    std::vector<double> y(2 * n);
    const auto ref = pack(initial, d);
    std::copy(ref.begin(), ref.end(), y.begin());
    std::copy(ref.begin(), ref.end(), y.begin() + static_cast<std::ptrdiff_t>(n));
    y[n] += options.offset;

    auto rhs = [&](double, std::span<const double> yy, std::span<double> dy) {
        flow->rhs(yy.subspan(0, n), dy.subspan(0, n));
        flow->rhs(yy.subspan(n, n), dy.subspan(n, n));
    };
    ode::DormandPrince stepper(2 * n, rhs, detail::tolerances_for(options.tol));
    stepper.initialize(0.0, y);

    ChaosDiagnostics out;
    out.horizon = horizon;
    double log_sum = 0.0;
    const double t0 = initial.t;
    double elapsed = 0.0;
    int k = 1;
    const int intervals =
        static_cast<int>(std::floor(horizon / options.renormalization_interval + 1e-9));
    const double infinity = std::numeric_limits<double>::max();

    while (k <= intervals) {
        const double target = t0 + k * options.renormalization_interval;
        const auto status = stepper.step(infinity);
        if (status != ode::StepStatus::accepted)
            throw NumericalError("Lyapunov integration failed");
        if (stepper.y()[t_index] < target) continue;
        ode::Crossing c;
        if (!ode::find_crossing(
                stepper, [&](double, std::span<const double> yy) { return yy[t_index] - target; },
                0, c)) {
            c.t = stepper.t();
            c.y.assign(stepper.y().begin(), stepper.y().end());
        }
        std::span<const double> a(c.y.data(), n), b(c.y.data() + n, n);
        const double dist = phase_distance(a, b, d);
        if (!(dist > 0.0) || !std::isfinite(dist))
            throw NumericalError("Lyapunov separation collapsed or diverged");
        log_sum += std::log(dist / options.offset);
        elapsed = target - t0;
        out.running_estimate.push_back(log_sum / elapsed);
        for (std::size_t i = 0; i < n; ++i)
            c.y[n + i] = c.y[i] + (c.y[n + i] - c.y[i]) * (options.offset / dist);
        stepper.initialize(c.t, c.y);
        ++k;
    }
    out.lyapunov_estimate = elapsed > 0.0 ? log_sum / elapsed : 0.0;
    return out;
}

std::vector<Vec2> poincare_section(const ClassicalSystem& system, const Trajectory& trajectory,
                                   const SectionPlane& section, double tol) {
    std::vector<Vec2> points;
    if (trajectory.size() < 2) return points;
    const int d = trajectory.dimension;
    auto g_state = [&](const PhaseState& s) {
        const std::array<double, 4> v{s.q[0], s.q[1], s.p[0], s.p[1]};
        double g = -section.offset;
        for (int i = 0; i < 4; ++i) g += section.normal[i] * v[i];
        return g * static_cast<double>(section.orientation >= 0 ? 1 : -1);
    };
    auto report = [&](const PhaseState& s) {
        const std::array<double, 4> v{s.q[0], s.q[1], s.p[0], s.p[1]};
        return Vec2{v[section.report[0]], v[section.report[1]]};
    };

    const auto flow = detail::make_flow(system);
    const auto* box = std::get_if<SolvableSystem>(&system);

    for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
        const double ga = g_state(trajectory.samples[k]);
        const double gb = g_state(trajectory.samples[k + 1]);
        if (!(ga < 0.0 && gb >= 0.0)) continue;
        const double sa = trajectory.s[k];
        const double sb = trajectory.s[k + 1];
        if (!flow) {
            // Hard-wall box: bisect on the closed-form propagation.
            double lo = 0.0, hi = sb - sa;
            for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, sb); ++it) {
                const double mid = 0.5 * (lo + hi);
                const auto st = detail::propagate_box(*box, trajectory.samples[k], mid);
                (g_state(st) < 0.0 ? lo : hi) = mid;
            }
            points.push_back(report(detail::propagate_box(*box, trajectory.samples[k], hi)));
            continue;
        }
        ode::DormandPrince stepper(
            flow->state_size(),
            [&](double, std::span<const double> y, std::span<double> dy) { flow->rhs(y, dy); },
            detail::tolerances_for(tol));
        stepper.initialize(sa, pack(trajectory.samples[k], d));
        bool found = false;
        while (!found) {
            const auto status = stepper.step(sb);
            ode::Crossing c;
            if (ode::find_crossing(
                    stepper,
                    [&](double, std::span<const double> y) { return g_state(unpack(y, d)); }, 1,
                    c)) {
                points.push_back(report(unpack(c.y, d)));
                found = true;
            }
            if (status != ode::StepStatus::accepted) break;
        }
    }
    return points;
}

// ---- accessible region ----------------------------------------------------------

namespace {

template <class F>
double bisect_increasing(F f, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

AccessibleRegion::AccessibleRegion(const DiamagneticSystem& system) : system_(system) {
    const double e = system.energy();
    if (!(e < 0.0)) throw DomainError("accessible region is unbounded for E >= 0");
    const double b2 = system.field() * system.field();
    z_max_ = -1.0 / e;
    const auto f = [&](double rho) { return b2 * rho * rho / 8.0 - 1.0 / rho - e; };
    double hi = z_max_;
    while (f(hi) < 0.0) hi *= 2.0;
    rho_max_ = bisect_increasing(f, 1e-300, hi);
}

bool AccessibleRegion::contains(double rho, double z) const {
    if (rho == 0.0 && z == 0.0) return true;
    return system_.physical_potential(rho, z) <= system_.energy();
}

std::vector<Vec2> AccessibleRegion::boundary(int points) const {
    std::vector<Vec2> out;
    if (points < 2) return out;
    const double e = system_.energy();
    const double b2 = system_.field() * system_.field();
    for (int i = 0; i < points; ++i) {
        const double z = z_max_ * std::cos(M_PI * i / (points - 1));
        const auto f = [&](double rho) {
            return -1.0 / std::hypot(rho, z) + b2 * rho * rho / 8.0 - e;
        };
        double rho = 0.0;
        if (f(0.0) < 0.0) rho = bisect_increasing(f, 0.0, rho_max_ * (1.0 + 1e-12));
        out.push_back({rho, z});
    }
    return out;
}

double coverage_fraction(const DiamagneticSystem& system, const Trajectory& trajectory,
                         int grid) {
    if (grid < 1) throw DomainError("coverage grid must be positive");
    if (!trajectory.regularized)
        throw DomainError("coverage requires a diamagnetic (regularized) trajectory");
    const AccessibleRegion region(system);
    const double drho = region.rho_max() / grid;
    const double dz = 2.0 * region.z_max() / grid;
    std::vector<char> accessible(static_cast<std::size_t>(grid) * grid, 0);
    std::size_t n_accessible = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j)
            if (region.contains((i + 0.5) * drho, -region.z_max() + (j + 0.5) * dz)) {
                accessible[static_cast<std::size_t>(i) * grid + j] = 1;
                ++n_accessible;
            }
    if (n_accessible == 0) return 0.0;

    std::vector<char> visited(accessible.size(), 0);
    auto mark = [&](double rho, double z) {
        const int i = std::clamp(static_cast<int>(std::floor(rho / drho)), 0, grid - 1);
        const int j =
            std::clamp(static_cast<int>(std::floor((z + region.z_max()) / dz)), 0, grid - 1);
        visited[static_cast<std::size_t>(i) * grid + j] = 1;
    };
    const auto phys = to_physical(trajectory);
    for (std::size_t k = 0; k < phys.size(); ++k) {
        mark(phys[k].rho, phys[k].z);
        if (k + 1 == phys.size()) break;
        // Rasterize the chord between samples at quarter-cell resolution.
        const double dr = phys[k + 1].rho - phys[k].rho;
        const double dzz = phys[k + 1].z - phys[k].z;
        const int pieces =
            static_cast<int>(std::ceil(4.0 * std::max(std::abs(dr) / drho, std::abs(dzz) / dz)));
        for (int m = 1; m < pieces; ++m) {
            const double f = static_cast<double>(m) / pieces;
            mark(phys[k].rho + f * dr, phys[k].z + f * dzz);
        }
    }
    std::size_t hit = 0;
    for (std::size_t c = 0; c < visited.size(); ++c)
        if (visited[c] && accessible[c]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(n_accessible);
}

}  // namespace pilotwave::classical
