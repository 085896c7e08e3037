#include "pilotwave/bohmian.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "pilotwave/ode.hpp"
#include "pilotwave/random.hpp"

namespace pilotwave::bohmian {

using quantum::Complex;
using quantum::evaluate_wavefunction;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

Vec2 guidance(const quantum::WaveDerivatives& w, const SystemConstants& c) {
    Vec2 v{0.0, 0.0};
    for (int i = 0; i < c.dimension; ++i) v[i] = c.hbar / c.mass * (w.grad[i] / w.psi).imag();
    return v;
}

BohmianSample make_sample(const Superposition& sup, const Vec2& x, double t) {
    const auto w = evaluate_wavefunction(sup, x, t);
    BohmianSample s;
    s.t = t;
    s.x = x;
    s.rho = std::abs(w.psi);
    s.v = guidance(w, sup.system().constants());
    s.Q = quantum::quantum_potential(sup, x, t).Q;
    return s;
}

Vec2 to_vec(std::span<const double> y, int d) { return d == 1 ? Vec2{y[0], 0.0} : Vec2{y[0], y[1]}; }

double density(const Superposition& sup, const Vec2& x, double t) {
    return std::norm(evaluate_wavefunction(sup, x, t).psi);
}

}  // namespace

Vec2 velocity_field(const Superposition& sup, const Vec2& x, double t) {
    const auto w = evaluate_wavefunction(sup, x, t);
    const double rho = std::abs(w.psi);
    if (rho == 0.0 || rho < sup.node_threshold())
        throw NodeSingularity("velocity requested inside the node guard band", x, rho);
    return guidance(w, sup.system().constants());
}

BohmianTrajectory integrate_bohmian(const Superposition& sup, const Vec2& x0, double t0,
                                    double t1, const BohmianOptions& options) {
    if (!(options.tol > 0.0) || !(options.step_tolerance_ratio > 0.0))
        throw DomainError("tolerance must be positive");
    if (!std::isfinite(t0) || !std::isfinite(t1)) throw DomainError("time span must be finite");
    const int d = sup.dimension();
    const auto& sys = sup.system();
    const double threshold = sup.node_threshold();

    BohmianTrajectory traj;
    traj.initial = x0;
    traj.dimension = d;
    traj.samples.push_back(make_sample(sup, x0, t0));
    if (traj.samples.back().rho < threshold)
        throw NodeSingularity("initial position inside the node guard band", x0,
                              traj.samples.back().rho);
    if (t1 == t0) return traj;

    struct Guard {
        bool outside = false;
        NodeEncounter at;
    } last_guard;
    bool guarded = false;

    auto rhs = [&](double t, std::span<const double> y, std::span<double> dy) {
        const Vec2 x = to_vec(y, d);
        bool ok = std::isfinite(x[0]) && std::isfinite(x[1]) && sys.inside(x);
        if (ok) {
            const auto w = evaluate_wavefunction(sup, x, t);
            const double rho = std::abs(w.psi);
            if (rho > 0.0 && rho >= threshold) {
                const Vec2 v = guidance(w, sys.constants());
                for (int i = 0; i < d; ++i) dy[i] = v[i];
                return;
            }
            last_guard = {false, {t, x, rho}};
        } else {
            last_guard = {true, {t, x, 0.0}};
        }
        guarded = true;
        ++traj.guard_rejections;
        for (int i = 0; i < d; ++i) dy[i] = nan;
    };

    ode::Tolerances tol;
    tol.rtol = options.tol * options.step_tolerance_ratio;
    tol.atol = tol.rtol;
    tol.h_min = options.h_min;
    tol.h_max = options.h_max;
    ode::DormandPrince stepper(d, rhs, tol);
    stepper.set_admissible([&](double t, std::span<const double> y) {
        const Vec2 x = to_vec(y, d);
        if (!sys.inside(x)) return false;
        return std::abs(evaluate_wavefunction(sup, x, t).psi) >= threshold;
    });
    std::array<double, 2> y0{x0[0], x0[1]};
    stepper.initialize(t0, std::span<const double>(y0.data(), d));

    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double interval = options.sample_interval;
    auto observer = [&](const ode::DormandPrince& s) {
        ++traj.steps;
        if (options.record_path && interval <= 0.0 && s.t() != t1)
            traj.samples.push_back(make_sample(sup, to_vec(s.y(), d), s.t()));
        return true;
    };

    // With a sample interval every sample time is a step end point, so samples
    // carry the integrator's accuracy rather than the interpolant's.
    ode::StepStatus status = ode::StepStatus::reached_end;
    for (std::size_t k = 1;; ++k) {
        double target = t1;
        if (interval > 0.0) {
            target = t0 + dir * interval * static_cast<double>(k);
            if (dir * (target - t1) >= -1e-12 * interval) target = t1;
        }
        status = stepper.advance_to(target, observer);
        if (status != ode::StepStatus::reached_end || target == t1) break;
        if (options.record_path) traj.samples.push_back(make_sample(sup, to_vec(stepper.y(), d), target));
    }
    traj.min_step = stepper.statistics().min_step;
    if (status == ode::StepStatus::reached_end) {
        traj.samples.push_back(make_sample(sup, to_vec(stepper.y(), d), t1));
        return traj;
    }
    if (status == ode::StepStatus::too_many_steps)
        throw NumericalError("Bohmian integration exceeded the step budget");
    if (!guarded) throw NumericalError("Bohmian integration step size underflow away from nodes");
    // Halted at the guard band: keep the partial path up to the last accepted step.
    if (traj.samples.back().t != stepper.t())
        traj.samples.push_back(make_sample(sup, to_vec(stepper.y(), d), stepper.t()));
    traj.status = last_guard.outside ? TrajectoryStatus::domain_breach : TrajectoryStatus::node_halt;
    traj.halt = last_guard.at;
    return traj;
}

double newtonian_residual(const BohmianTrajectory& traj, const Superposition& sup) {
    const auto& s = traj.samples;
    if (s.size() < 3) throw DomainError("Newtonian residual needs at least 3 samples");
    const int d = traj.dimension;
    const double m = sup.system().mass();

    const double h0 = s[1].t - s[0].t;
    bool uniform = s.size() >= 5;
    for (std::size_t k = 1; uniform && k < s.size(); ++k)
        uniform = std::abs((s[k].t - s[k - 1].t) - h0) <= 1e-9 * std::abs(h0);

    auto force = [&](const BohmianSample& p) {
        const auto q = quantum::quantum_potential(sup, p.x, p.t);
        const Vec2 gv = sup.system().potential_gradient(p.x);
        return Vec2{gv[0] + q.gradient[0], gv[1] + q.gradient[1]};
    };

    double worst = 0.0;
    const std::size_t lo = uniform ? 2 : 1;
    for (std::size_t k = lo; k + lo < s.size(); ++k) {
        const Vec2 f = force(s[k]);
        double r2 = 0.0;
        for (int i = 0; i < d; ++i) {
            double a;
            if (uniform) {
                a = (-s[k - 2].x[i] + 16 * s[k - 1].x[i] - 30 * s[k].x[i] + 16 * s[k + 1].x[i] -
                     s[k + 2].x[i]) /
                    (12 * h0 * h0);
            } else {
                const double hm = s[k].t - s[k - 1].t, hp = s[k + 1].t - s[k].t;
                a = 2.0 * ((s[k + 1].x[i] - s[k].x[i]) / hp - (s[k].x[i] - s[k - 1].x[i]) / hm) /
                    (hp + hm);
            }
            r2 += std::pow(m * a + f[i], 2);
        }
        worst = std::max(worst, std::sqrt(r2));
    }
    return worst;
}

Ensemble sample_quantum_equilibrium(const Superposition& sup, double t, std::size_t count,
                                    std::uint64_t seed) {
    Ensemble out;
    out.seed = seed;
    out.t = t;
    if (count == 0) return out;
    const int d = sup.dimension();
    const auto dom = sup.characteristic_domain();

    constexpr int grid = 256;
    double peak = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double x = dom[0][0] + (dom[1][0] - dom[0][0]) * i / (grid - 1);
        if (d == 1) {
            peak = std::max(peak, density(sup, {x, 0.0}, t));
            continue;
        }
        for (int j = 0; j < grid; ++j) {
            const double y = dom[0][1] + (dom[1][1] - dom[0][1]) * j / (grid - 1);
            peak = std::max(peak, density(sup, {x, y}, t));
        }
    }
    const double envelope = 1.1 * peak;

    out.positions.reserve(count);
    for (std::size_t member = 0; member < count; ++member) {
        for (std::uint64_t attempt = 0;; ++attempt) {
            Vec2 x{0.0, 0.0};
            for (int i = 0; i < d; ++i)
                x[i] = dom[0][i] + (dom[1][i] - dom[0][i]) * random::counter_uniform(seed, member, 3 * attempt + i);
            const double p = density(sup, x, t);
            if (p > envelope) throw NumericalError("rejection envelope below the sampled density");
            if (random::counter_uniform(seed, member, 3 * attempt + 2) * envelope < p) {
                out.positions.push_back(x);
                break;
            }
        }
    }
    return out;
}

EnsembleEvolution evolve_ensemble(const Ensemble& ensemble, const Superposition& sup, double t1,
                                  const BohmianOptions& options, unsigned threads) {
    EnsembleEvolution out;
    out.ensemble.seed = ensemble.seed;
    out.ensemble.t = t1;
    out.ensemble.positions = ensemble.positions;
    if (t1 == ensemble.t) return out;

    auto opts = options;
    opts.record_path = false;
    const std::size_t n = ensemble.size();
    std::vector<std::optional<MemberFailure>> failed(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= n) return;
            try {
                const auto traj = integrate_bohmian(sup, ensemble.positions[k], ensemble.t, t1, opts);
                out.ensemble.positions[k] = traj.back().x;
                if (traj.status != TrajectoryStatus::completed)
                    failed[k] = MemberFailure{k, traj.status, *traj.halt};
            } catch (const NodeSingularity& e) {
                failed[k] = MemberFailure{k, TrajectoryStatus::node_halt,
                                          {ensemble.t, e.position, e.amplitude}};
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    for (auto& f : failed)
        if (f) out.failures.push_back(*f);
    return out;
}

std::vector<double> ensemble_histogram(const Ensemble& ensemble, const Superposition& sup, int bins) {
    if (bins < 1) throw DomainError("histogram needs at least one bin");
    const int d = sup.dimension();
    const auto dom = sup.characteristic_domain();
    std::vector<double> h(d == 1 ? bins : bins * bins, 0.0);
    if (ensemble.size() == 0) return h;
    auto bin = [&](double x, int i) {
        const double u = (x - dom[0][i]) / (dom[1][i] - dom[0][i]);
        return std::clamp(static_cast<int>(std::floor(u * bins)), 0, bins - 1);
    };
    const double w = 1.0 / static_cast<double>(ensemble.size());
    for (const auto& x : ensemble.positions) {
        if (d == 1)
            h[bin(x[0], 0)] += w;
        else
            h[bin(x[0], 0) * bins + bin(x[1], 1)] += w;
    }
    return h;
}

std::vector<double> density_histogram(const Superposition& sup, double t, int bins) {
    if (bins < 1) throw DomainError("histogram needs at least one bin");
    using GL = boost::math::quadrature::gauss<double, 10>;
    const int d = sup.dimension();
    const auto dom = sup.characteristic_domain();
    const double wx = (dom[1][0] - dom[0][0]) / bins, wy = (dom[1][1] - dom[0][1]) / bins;
    std::vector<double> h(d == 1 ? bins : bins * bins, 0.0);
    for (int i = 0; i < bins; ++i) {
        const double a = dom[0][0] + i * wx;
        if (d == 1) {
            h[i] = GL::integrate([&](double x) { return density(sup, {x, 0.0}, t); }, a, a + wx);
            continue;
        }
        for (int j = 0; j < bins; ++j) {
            const double b = dom[0][1] + j * wy;
            h[i * bins + j] = GL::integrate(
                [&](double x) {
                    return GL::integrate([&](double y) { return density(sup, {x, y}, t); }, b, b + wy);
                },
                a, a + wx);
        }
    }
    return h;
}

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DomainError("histograms have different bin counts");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

BohmianLyapunov bohmian_lyapunov(const Superposition& sup, const Vec2& x0, double t0,
                                 double horizon, const LyapunovOptions& options) {
    if (!(horizon > 0.0)) throw DomainError("Lyapunov horizon must be positive");
    if (!(options.offset > 0.0) || !(options.renormalization_interval > 0.0))
        throw DomainError("Lyapunov offset and interval must be positive");
    const int d = sup.dimension();
    BohmianOptions opts;
    opts.tol = options.tol;
    opts.record_path = false;

    BohmianLyapunov out;
    Vec2 a = x0, b = x0;
    b[0] += options.offset;
    double t = t0, log_sum = 0.0;
    const double t_end = t0 + horizon;
    while (t < t_end - 1e-12 * horizon) {
        const double t_next = std::min(t_end, t + options.renormalization_interval);
        const auto ta = integrate_bohmian(sup, a, t, t_next, opts);
        const auto tb = integrate_bohmian(sup, b, t, t_next, opts);
        if (ta.status != TrajectoryStatus::completed || tb.status != TrajectoryStatus::completed) {
            out.halted = true;
            break;
        }
        a = ta.back().x;
        const Vec2 bb = tb.back().x;
        Vec2 sep{bb[0] - a[0], d == 2 ? bb[1] - a[1] : 0.0};
        const double dist = std::hypot(sep[0], sep[1]);
        if (!(dist > 0.0)) throw NumericalError("Lyapunov partner trajectories coincided");
        log_sum += std::log(dist / options.offset);
        for (auto& c : sep) c *= options.offset / dist;
        b = {a[0] + sep[0], a[1] + sep[1]};
        t = t_next;
        out.running_estimate.push_back(log_sum / (t - t0));
    }
    out.horizon_reached = t - t0;
    out.estimate = out.horizon_reached > 0.0 ? log_sum / out.horizon_reached : 0.0;
    return out;
}

CirculationResult circulation(const Superposition& sup, const std::vector<Vec2>& loop, double t) {
    if (sup.dimension() != 2) throw DomainError("circulation needs a 2D superposition");
    if (loop.size() < 3) throw DomainError("loop needs at least 3 vertices");
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    CirculationResult out;
    out.loop = loop;
    for (std::size_t k = 0; k < loop.size(); ++k) {
        const Vec2 a = loop[k], b = loop[(k + 1) % loop.size()];
        const Vec2 e{b[0] - a[0], b[1] - a[1]};
        auto f = [&](double s) {
            const Vec2 x{a[0] + s * e[0], a[1] + s * e[1]};
            try {
                const Vec2 v = velocity_field(sup, x, t);
                return v[0] * e[0] + v[1] * e[1];
            } catch (const NodeSingularity& err) {
                throw NodeSingularity("loop crosses the node guard band", err.position, err.amplitude);
            }
        };
        out.raw_integral += GK::integrate(f, 0.0, 1.0, 20, 1e-14);
    }
    const double unit = 2.0 * M_PI * sup.system().hbar() / sup.system().mass();
    out.winding = static_cast<int>(std::lround(out.raw_integral / unit));
    out.residual = std::abs(out.raw_integral - out.winding * unit);
    if (out.residual > 1e-6 * unit)
        throw NumericalError("circulation is not quantized; the loop passes too close to a node");
    return out;
}

std::vector<Vec2> square_loop(const Vec2& center, double half_width) {
    const double c0 = center[0], c1 = center[1], h = half_width;
    return {{c0 - h, c1 - h}, {c0 + h, c1 - h}, {c0 + h, c1 + h}, {c0 - h, c1 + h}};
}

}  // namespace pilotwave::bohmian
