#include "pilotwave/semiclassical.hpp"

#include <algorithm>
#include <cmath>

#include "pilotwave/random.hpp"

namespace pilotwave::semiclassical {

namespace {

constexpr Complex I{0.0, 1.0};

template <class F>
double diff4(F f, double h) {
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

void require_1d(const SolvableSystem& s) {
    if (s.dimension() != 1) throw DomainError("1D system required");
}

void require_inside(const SolvableSystem& s, double x) {
    if (!std::isfinite(x)) throw DomainError("position must be finite");
    if (!s.inside({x, 0.0})) throw DomainError("position outside the box");
}

// Wall positions k L strictly between a and b.
int walls_between(double a, double b, double len) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    const long first = static_cast<long>(std::floor(lo / len)) + 1;
    const long last = static_cast<long>(std::ceil(hi / len)) - 1;
    return static_cast<int>(std::max(0L, last - first + 1));
}

// Images of x2 reached from x1 by straight unfolded motion with at most max bounces.
struct Image {
    double position;
    int bounces;
};

std::vector<Image> box_images(double x1, double x2, double len, int max_bounces) {
    std::vector<Image> out;
    const int span = max_bounces / 2 + 2;
    for (int j = -span; j <= span; ++j)
        for (int sign : {1, -1}) {
            const double xi = sign * x2 + 2.0 * j * len;
            const int b = walls_between(x1, xi, len);
            if (b <= max_bounces) out.push_back({xi, b});
        }
    std::sort(out.begin(), out.end(), [&](const Image& a, const Image& b) {
        return std::abs(a.position - x1) < std::abs(b.position - x1);
    });
    return out;
}

// Newton shooting on the initial momentum for a flow map linear in p.
double shoot(const std::function<double(double)>& endpoint, double target, double slope) {
    double p = 0.0;
    for (int it = 0; it < 4; ++it) {
        const double miss = endpoint(p) - target;
        if (miss == 0.0) break;
        p -= miss / slope;
    }
    return p;
}

Complex complex_k(const SolvableSystem& s, Complex energy) {
    return std::sqrt(2.0 * s.mass() * energy) / s.hbar();
}

}  // namespace

double hamilton_jacobi_residual(const ActionField& action, const SolvableSystem& system,
                                const Vec2& x, double t, double h) {
    if (!(h > 0.0)) throw DomainError("difference step must be positive");
    const double dRdt = diff4([&](double e) { return action(x, t + e); }, h);
    double kinetic = 0.0;
    for (int i = 0; i < system.dimension(); ++i) {
        const double g = diff4(
            [&](double e) {
                Vec2 y = x;
                y[i] += e;
                return action(y, t);
            },
            h);
        kinetic += g * g / (2.0 * system.mass());
    }
    return std::abs(dRdt + kinetic + system.potential(x));
}

ActionField principal_function(const SolvableSystem& system, const Vec2& x1) {
    const double m = system.mass();
    const int d = system.dimension();
    switch (system.kind()) {
        case SolvableSystem::Kind::free:
            return [=](const Vec2& x, double t) {
                double r = 0.0;
                for (int i = 0; i < d; ++i) r += m * (x[i] - x1[i]) * (x[i] - x1[i]) / (2.0 * t);
                return r;
            };
        case SolvableSystem::Kind::harmonic: {
            const Vec2 w = system.omegas();
            return [=](const Vec2& x, double t) {
                double r = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double s = std::sin(w[i] * t), c = std::cos(w[i] * t);
                    r += m * w[i] / (2.0 * s) * ((x1[i] * x1[i] + x[i] * x[i]) * c - 2.0 * x1[i] * x[i]);
                }
                return r;
            };
        }
        case SolvableSystem::Kind::box: break;
    }
    throw DomainError("no single-path principal function for a box");
}

std::vector<ClassicalAction> classical_paths_1d(const SolvableSystem& system, double x1,
                                                double x2, double dt, const PathOptions& options) {
    require_1d(system);
    require_inside(system, x1);
    require_inside(system, x2);
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("propagation time must be positive");
    const double m = system.mass();
    std::vector<ClassicalAction> out;
    auto add = [&](double value, double stability, int conj, int refl, double p) {
        ClassicalAction a;
        a.kind = ClassicalAction::Kind::time_domain;
        a.value = value;
        a.stability = stability;
        a.conjugate_points = conj;
        a.reflections = refl;
        a.initial_momentum = p;
        a.duration = dt;
        out.push_back(a);
    };

    switch (system.kind()) {
        case SolvableSystem::Kind::free: {
            const double p = shoot([&](double q) { return x1 + q * dt / m; }, x2, dt / m);
            const double dx = p * dt / m;
            add(0.5 * m * dx * dx / dt, m / dt, 0, 0, p);
            break;
        }
        case SolvableSystem::Kind::harmonic: {
            const double w = system.omegas()[0];
            const double s = std::sin(w * dt), c = std::cos(w * dt);
            // At a caustic every momentum (or none) connects the endpoints.
            if (std::abs(s) < 1e-12) break;
            const double p = shoot([&](double q) { return x1 * c + q * s / (m * w); }, x2, s / (m * w));
            const double xe = x1 * c + p * s / (m * w);
            const double value = m * w / (2.0 * s) * ((x1 * x1 + xe * xe) * c - 2.0 * x1 * xe);
            add(value, m * w / s, static_cast<int>(std::floor(w * dt / M_PI)), 0, p);
            break;
        }
        case SolvableSystem::Kind::box: {
            const double len = system.lengths()[0];
            for (const auto& img : box_images(x1, x2, len, options.max_bounces)) {
                const double p = m * (img.position - x1) / dt;
                const double dx = img.position - x1;
                add(0.5 * m * dx * dx / dt, m / dt, 0, img.bounces, p);
            }
            break;
        }
    }
    return out;
}

PropagatorValue van_vleck_1d(const SolvableSystem& system, double x1, double x2, double dt,
                             const PathOptions& options) {
    PropagatorValue out;
    out.paths = classical_paths_1d(system, x1, x2, dt, options);
    const double hbar = system.hbar();
    const Complex norm = 1.0 / std::sqrt(2.0 * M_PI * I * hbar);
    for (const auto& p : out.paths) {
        const double phase = p.value / hbar - 0.5 * M_PI * p.conjugate_points - M_PI * p.reflections;
        out.value += std::sqrt(std::abs(p.stability)) * norm * std::polar(1.0, phase);
    }
    out.contributing_paths = static_cast<int>(out.paths.size());
    out.no_path = out.paths.empty();
    return out;
}

PropagatorValue semiclassical_green_1d(const SolvableSystem& system, double x1, double x2,
                                       Complex energy, const PathOptions& options) {
    require_1d(system);
    require_inside(system, x1);
    require_inside(system, x2);
    if (x1 == x2) throw DomainError("semiclassical Green function needs x1 != x2");
    const double m = system.mass(), hbar = system.hbar();
    PropagatorValue out;
    auto add_path = [&](double value, double stability, int turns, int bounces, double duration) {
        ClassicalAction a;
        a.kind = ClassicalAction::Kind::energy_domain;
        a.value = value;
        a.stability = stability;
        a.conjugate_points = turns;
        a.reflections = bounces;
        a.duration = duration;
        out.paths.push_back(a);
    };

    if (system.kind() == SolvableSystem::Kind::harmonic) {
        if (energy.imag() != 0.0) throw DomainError("oscillator Green function needs real energy");
        const double e = energy.real();
        const double w = system.omegas()[0];
        if (!(e > 0.0)) throw DomainError("energy below the potential minimum");
        const double a = std::sqrt(2.0 * e / (m * w * w));
        for (double x : {x1, x2}) {
            if (std::abs(std::abs(x) - a) <= 1e-12 * a) throw NumericalError("endpoint at a turning point");
            if (std::abs(x) > a) throw DomainError("energy below the potential at an endpoint");
        }
        // x = a sin(phi), p = m w a cos(phi); S = (E / w)(phi + sin phi cos phi).
        auto action = [&](double phi) { return e / w * (phi + std::sin(phi) * std::cos(phi)); };
        const double t1 = std::asin(x1 / a), t2 = std::asin(x2 / a);
        const double v1 = a * w * std::cos(t1), v2 = a * w * std::cos(t2);
        for (double start : {t1, M_PI - t1}) {
            std::vector<double> ends;
            for (int n = 0; n <= options.max_bounces / 2 + 1; ++n)
                for (double base : {t2, M_PI - t2}) {
                    double phi = base + 2.0 * M_PI * n;
                    while (phi <= start) phi += 2.0 * M_PI;
                    ends.push_back(phi);
                }
            std::sort(ends.begin(), ends.end());
            ends.erase(std::unique(ends.begin(), ends.end()), ends.end());
            for (double phi : ends) {
                // Turning points at pi/2 + n pi inside (start, phi).
                const int turns = static_cast<int>(std::floor((phi - M_PI / 2) / M_PI) -
                                                   std::floor((start - M_PI / 2) / M_PI));
                if (turns > options.max_bounces) break;
                add_path(action(phi) - action(start), 1.0 / (v1 * v2), turns, 0, (phi - start) / w);
            }
        }
        const Complex pref = 1.0 / (I * hbar);
        for (const auto& p : out.paths)
            out.value += pref * std::sqrt(p.stability) *
                         std::polar(1.0, p.value / hbar - 0.5 * M_PI * p.conjugate_points);
    } else {
        if (!(energy.real() > 0.0)) throw DomainError("energy below the potential minimum");
        const Complex k = complex_k(system, energy);
        const Complex amp = m / (I * hbar * hbar * k);
        const double v = hbar * k.real() / m;
        if (system.kind() == SolvableSystem::Kind::free) {
            const double len = std::abs(x2 - x1);
            add_path(hbar * k.real() * len, 1.0 / (v * v), 0, 0, len / v);
            out.value = amp * std::exp(I * k * len);
        } else {
            for (const auto& img : box_images(x1, x2, system.lengths()[0], options.max_bounces)) {
                const double len = std::abs(img.position - x1);
                add_path(hbar * k.real() * len, 1.0 / (v * v), 0, img.bounces, len / v);
                out.value += amp * std::exp(I * k * len) * (img.bounces % 2 == 0 ? 1.0 : -1.0);
            }
        }
    }
    out.contributing_paths = static_cast<int>(out.paths.size());
    out.no_path = out.paths.empty();
    return out;
}

double mean_level_density(const SolvableSystem& system, double energy) {
    if (!std::isfinite(energy)) throw DomainError("energy must be finite");
    if (energy <= 0.0) return 0.0;
    const double m = system.mass(), hbar = system.hbar();
    const auto& L = system.lengths();
    const auto& w = system.omegas();
    const bool one = system.dimension() == 1;
    switch (system.kind()) {
        case SolvableSystem::Kind::harmonic:
            return one ? 1.0 / (hbar * w[0]) : energy / (hbar * hbar * w[0] * w[1]);
        case SolvableSystem::Kind::box:
        case SolvableSystem::Kind::free:
            // N(E) = L p / (pi hbar) in 1D, A m E / (2 pi hbar^2) in 2D.
            return one ? L[0] / (M_PI * hbar) * std::sqrt(m / (2.0 * energy))
                       : m * L[0] * L[1] / (2.0 * M_PI * hbar * hbar);
    }
    return 0.0;
}

double mean_level_density_monte_carlo(const SolvableSystem& system, double energy,
                                      std::size_t samples, std::uint64_t seed, double shell) {
    if (energy <= 0.0) return 0.0;
    if (samples == 0) throw DomainError("Monte Carlo estimate needs samples");
    if (!(shell > 0.0 && shell < 1.0)) throw DomainError("shell width must lie in (0, 1)");
    const int d = system.dimension();
    const double m = system.mass();
    const double e_lo = energy * (1.0 - shell), e_hi = energy * (1.0 + shell);

    std::array<double, 4> lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        if (system.kind() == SolvableSystem::Kind::harmonic) {
            const double a = std::sqrt(2.0 * e_hi / (m * system.omegas()[i] * system.omegas()[i]));
            lo[i] = -a;
            hi[i] = a;
        } else {
            lo[i] = 0.0;
            hi[i] = system.lengths()[i];
        }
        const double pmax = std::sqrt(2.0 * m * e_hi);
        lo[d + i] = -pmax;
        hi[d + i] = pmax;
    }
    double volume = 1.0;
    for (int i = 0; i < 2 * d; ++i) volume *= hi[i] - lo[i];

    std::size_t hits = 0;
    for (std::size_t n = 0; n < samples; ++n) {
        std::array<double, 4> z{};
        for (int i = 0; i < 2 * d; ++i)
            z[i] = lo[i] + (hi[i] - lo[i]) * random::counter_uniform(seed, n, static_cast<std::uint64_t>(i));
        Vec2 x{z[0], d == 2 ? z[1] : 0.0};
        double h = system.potential(x);
        for (int i = 0; i < d; ++i) h += z[d + i] * z[d + i] / (2.0 * m);
        if (h > e_lo && h <= e_hi) ++hits;
    }
    const double shell_volume = volume * static_cast<double>(hits) / static_cast<double>(samples);
    return shell_volume / (e_hi - e_lo) / std::pow(2.0 * M_PI * system.hbar(), d);
}

TraceOrbit oscillator_trace_orbit(const SolvableSystem& system) {
    if (system.kind() != SolvableSystem::Kind::harmonic || system.dimension() != 1)
        throw DomainError("oscillator orbit needs a 1D harmonic system");
    const double w = system.omegas()[0];
    TraceOrbit o;
    o.id = "oscillator";
    o.orbit_class = OrbitClass::one_dimensional;
    o.action = [w](double e) { return 2.0 * M_PI * e / w; };
    o.period = [w](double) { return 2.0 * M_PI / w; };
    o.monodromy_trace = 2.0;
    o.phase_index = 2;
    return o;
}

LevelDensity trace_formula_density(const SolvableSystem& system,
                                   const std::vector<TraceOrbit>& orbits,
                                   const std::vector<double>& energies, int repetitions,
                                   double gamma) {
    if (!(gamma > 0.0)) throw DomainError("smoothing width must be positive");
    if (repetitions < 0) throw DomainError("repetition cutoff must be non-negative");
    const double hbar = system.hbar();
    LevelDensity out;
    out.energies = energies;
    out.smoothing = gamma;
    for (double e : energies) {
        const double mean = mean_level_density(system, e);
        double osc = 0.0;
        for (const auto& orb : orbits) {
            const double s = orb.action(e), period = orb.period(e);
            // tr(M^k) by the Chebyshev recursion t_k = tr t_{k-1} - t_{k-2}.
            double t_prev = 2.0, t_cur = orb.monodromy_trace;
            for (int k = 1; k <= repetitions; ++k) {
                double amp = period / (M_PI * hbar);
                if (orb.orbit_class == OrbitClass::isolated) {
                    const double det = std::abs(2.0 - t_cur);
                    if (det < 1e-12) throw NumericalError("orbit " + orb.id + " is not isolated");
                    amp /= std::sqrt(det);
                }
                const double damp = std::exp(-0.5 * std::pow(gamma * k * period / hbar, 2));
                osc += amp * damp * std::cos(k * s / hbar - k * orb.phase_index * M_PI / 2);
                const double next = orb.monodromy_trace * t_cur - t_prev;
                t_prev = t_cur;
                t_cur = next;
            }
        }
        out.mean.push_back(mean);
        out.oscillatory.push_back(osc);
        out.total.push_back(mean + osc);
    }
    return out;
}

std::vector<double> smoothed_spectrum_density(const std::vector<double>& levels,
                                              const std::vector<double>& energies, double gamma) {
    if (!(gamma > 0.0)) throw DomainError("smoothing width must be positive");
    std::vector<double> out;
    out.reserve(energies.size());
    const double norm = 1.0 / (gamma * std::sqrt(2.0 * M_PI));
    for (double e : energies) {
        double s = 0.0;
        for (double l : levels) s += std::exp(-0.5 * std::pow((e - l) / gamma, 2));
        out.push_back(norm * s);
    }
    return out;
}

std::vector<double> spectrum(const SolvableSystem& system, double e_max) {
    std::vector<double> out;
    const int d = system.dimension();
    const int first = system.kind() == SolvableSystem::Kind::box ? 1 : 0;
    auto energy = [&](quantum::Index2 n) { return quantum::eigen_energy(system, n); };
    auto below = [&](int n, int axis) {
        quantum::Index2 idx{first, d == 2 ? first : 0};
        idx[axis] = n;
        return energy(idx) <= e_max;
    };
    if (system.kind() == SolvableSystem::Kind::free) {
        const double kmax = std::sqrt(2.0 * system.mass() * std::max(e_max, 0.0)) / system.hbar();
        const int nx = static_cast<int>(kmax * system.lengths()[0] / (2 * M_PI)) + 1;
        const int ny = d == 2 ? static_cast<int>(kmax * system.lengths()[1] / (2 * M_PI)) + 1 : 0;
        for (int i = -nx; i <= nx; ++i)
            for (int j = -ny; j <= ny; ++j)
                if (energy({i, j}) <= e_max) out.push_back(energy({i, j}));
    } else {
        for (int i = first; below(i, 0); ++i) {
            if (d == 1) {
                out.push_back(energy({i, 0}));
                continue;
            }
            for (int j = first; energy({i, j}) <= e_max; ++j) out.push_back(energy({i, j}));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Peak> find_peaks(const std::vector<double>& x, const std::vector<double>& y,
                             double floor) {
    if (x.size() != y.size()) throw DomainError("peak search needs matching grids");
    std::vector<Peak> out;
    const std::size_t n = y.size();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(y[i] > y[i - 1]) || !(y[i] > floor)) continue;
        std::size_t j = i;
        while (j + 1 < n && y[j + 1] == y[i]) ++j;
        if (j + 1 < n && y[j + 1] < y[i]) out.push_back({x[i], y[i], i});
        i = j;
    }
    return out;
}

RecurrenceSpectrum recurrence_spectrum(const quantum::Superposition& sup,
                                       const std::vector<double>& times) {
    if (times.empty() || times.front() != 0.0) throw DomainError("recurrence grid must start at 0");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw DomainError("recurrence grid must increase");
    RecurrenceSpectrum out;
    out.times = times;
    const double hbar = sup.system().hbar();
    out.abs_c.reserve(times.size());
    for (double t : times) {
        Complex c{};
        for (std::size_t k = 0; k < sup.size(); ++k)
            c += std::norm(sup.terms()[k].coefficient) * std::polar(1.0, -sup.states()[k].energy * t / hbar);
        out.abs_c.push_back(std::min(1.0, std::abs(c)));
    }
    out.peaks = find_peaks(out.times, out.abs_c, 0.05);
    return out;
}

std::vector<Association> match_peaks_to_orbits(const std::vector<Peak>& peaks,
                                               const std::vector<OrbitPeriod>& orbits,
                                               double tol, int max_repetition) {
    if (!(tol >= 0.0)) throw DomainError("matching tolerance must be non-negative");
    std::vector<Association> out;
    for (const auto& pk : peaks) {
        bool any = false;
        for (const auto& orb : orbits) {
            if (!(orb.period > 0.0)) continue;
            const long k0 = std::lround(pk.t / orb.period);
            for (long k = std::max(1L, k0 - 1); k <= std::min<long>(max_repetition, k0 + 1); ++k) {
                const double dt = pk.t - k * orb.period;
                if (std::abs(dt) > tol) continue;
                out.push_back({pk.t, pk.height, orb.id, static_cast<int>(k), dt, true});
                any = true;
            }
        }
        if (!any) out.push_back({pk.t, pk.height, "", 0, 0.0, false});
    }
    return out;
}

std::vector<double> uniform_grid(double start, double stop, std::size_t count) {
    if (count < 2) throw DomainError("grid needs at least two points");
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i)
        g[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

}  // namespace pilotwave::semiclassical
