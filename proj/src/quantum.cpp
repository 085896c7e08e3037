#include "pilotwave/quantum.hpp"

#include <algorithm>
#include <cmath>

namespace pilotwave::quantum {

namespace {

constexpr Complex I{0.0, 1.0};

// One-dimensional factor and its first three derivatives.
struct Factor {
    Complex f, d1, d2, d3;
};

Factor box_factor(double len, int n, double x) {
    const double s = std::sqrt(2.0 / len);
    const double k = n * M_PI / len;
    const double sn = std::sin(k * x), cs = std::cos(k * x);
    return {s * sn, s * k * cs, -s * k * k * sn, -s * k * k * k * cs};
}

Factor oscillator_factor(double mass, double omega, double hbar, int n, double x) {
    const double ell = std::sqrt(hbar / (mass * omega));
    const double xi = x / ell;
    // Normalized Hermite functions by upward recursion.
    double prev = 0.0;
    double cur = std::pow(M_PI, -0.25) * std::exp(-0.5 * xi * xi);
    for (int k = 0; k < n; ++k) {
        const double next = std::sqrt(2.0 / (k + 1)) * xi * cur - std::sqrt(double(k) / (k + 1)) * prev;
        prev = cur;
        cur = next;
    }
    // psi_n' = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1}, with psi_{n+1} from the recursion.
    const double up = std::sqrt(2.0 / (n + 1)) * xi * cur - std::sqrt(double(n) / (n + 1)) * prev;
    const double d1 = std::sqrt(n / 2.0) * prev - std::sqrt((n + 1) / 2.0) * up;
    const double q = xi * xi - (2.0 * n + 1.0);
    const double d2 = q * cur;
    const double d3 = 2.0 * xi * cur + q * d1;
    const double norm = 1.0 / std::sqrt(ell);
    return {norm * cur, norm * d1 / ell, norm * d2 / (ell * ell), norm * d3 / (ell * ell * ell)};
}

Factor plane_factor(double len, int n, double x) {
    const double k = 2.0 * M_PI * n / len;
    const Complex f = std::exp(I * (k * x)) / std::sqrt(len);
    return {f, I * k * f, -k * k * f, -I * k * k * k * f};
}

Factor factor(const SolvableSystem& s, int axis, int n, double x) {
    switch (s.kind()) {
        case SolvableSystem::Kind::box: return box_factor(s.lengths()[axis], n, x);
        case SolvableSystem::Kind::harmonic:
            return oscillator_factor(s.mass(), s.omegas()[axis], s.hbar(), n, x);
        case SolvableSystem::Kind::free: return plane_factor(s.lengths()[axis], n, x);
    }
    return {};
}

void check_quantum_numbers(const SolvableSystem& s, Index2 n) {
    for (int i = 0; i < s.dimension(); ++i) {
        if (s.kind() == SolvableSystem::Kind::box && n[i] < 1)
            throw DomainError("box quantum numbers start at 1");
        if (s.kind() == SolvableSystem::Kind::harmonic && n[i] < 0)
            throw DomainError("oscillator quantum numbers must be non-negative");
    }
}

void check_inside(const SolvableSystem& s, const Vec2& x) {
    for (int i = 0; i < s.dimension(); ++i)
        if (!std::isfinite(x[i])) throw DomainError("position has non-finite components");
    if (!s.inside(x)) throw DomainError("position outside the box");
}

void accumulate(WaveDerivatives& w, const SolvableSystem& s, const Index2& n, const Vec2& x,
                Complex c) {
    const Factor fx = factor(s, 0, n[0], x[0]);
    if (s.dimension() == 1) {
        w.psi += c * fx.f;
        w.grad[0] += c * fx.d1;
        w.hessian[0][0] += c * fx.d2;
        w.grad_laplacian[0] += c * fx.d3;
        return;
    }
    const Factor fy = factor(s, 1, n[1], x[1]);
    w.psi += c * fx.f * fy.f;
    w.grad[0] += c * fx.d1 * fy.f;
    w.grad[1] += c * fx.f * fy.d1;
    w.hessian[0][0] += c * fx.d2 * fy.f;
    w.hessian[1][1] += c * fx.f * fy.d2;
    const Complex mixed = c * fx.d1 * fy.d1;
    w.hessian[0][1] += mixed;
    w.hessian[1][0] += mixed;
    w.grad_laplacian[0] += c * (fx.d3 * fy.f + fx.d1 * fy.d2);
    w.grad_laplacian[1] += c * (fx.d2 * fy.d1 + fx.f * fy.d3);
}

}  // namespace

double eigen_energy(const SolvableSystem& s, Index2 n) {
    check_quantum_numbers(s, n);
    const double hbar = s.hbar(), m = s.mass();
    double e = 0.0;
    for (int i = 0; i < s.dimension(); ++i) {
        switch (s.kind()) {
            case SolvableSystem::Kind::box: {
                const double k = n[i] * M_PI / s.lengths()[i];
                e += hbar * hbar * k * k / (2.0 * m);
                break;
            }
            case SolvableSystem::Kind::harmonic: e += hbar * s.omegas()[i] * (n[i] + 0.5); break;
            case SolvableSystem::Kind::free: {
                const double k = 2.0 * M_PI * n[i] / s.lengths()[i];
                e += hbar * hbar * k * k / (2.0 * m);
                break;
            }
        }
    }
    return e;
}

EigenstateRef eigenstate(const SolvableSystem& s, Index2 n) {
    EigenstateRef ref;
    if (s.dimension() == 1) n[1] = 0;
    ref.n = n;
    ref.energy = eigen_energy(s, n);
    for (int i = 0; i < s.dimension(); ++i) {
        switch (s.kind()) {
            case SolvableSystem::Kind::box: ref.parity[i] = n[i] % 2 == 1 ? 1 : -1; break;
            case SolvableSystem::Kind::harmonic: ref.parity[i] = n[i] % 2 == 0 ? 1 : -1; break;
            case SolvableSystem::Kind::free: ref.parity[i] = n[i] == 0 ? 1 : 0; break;
        }
    }
    return ref;
}

WaveDerivatives eigenfunction_derivatives(const SolvableSystem& s, const EigenstateRef& state,
                                          const Vec2& x) {
    check_inside(s, x);
    check_quantum_numbers(s, state.n);
    WaveDerivatives w;
    accumulate(w, s, state.n, x, 1.0);
    return w;
}

EigenfunctionValue eigenfunction(const SolvableSystem& s, const EigenstateRef& state,
                                 const Vec2& x) {
    const auto w = eigenfunction_derivatives(s, state, x);
    return {w.psi, w.grad, w.laplacian()};
}

Superposition::Superposition(SolvableSystem system, std::vector<Term> terms)
    : system_(std::move(system)), terms_(std::move(terms)) {
    if (terms_.empty()) throw DomainError("superposition needs at least one term");
    double norm2 = 0.0;
    for (auto& t : terms_) {
        if (!std::isfinite(t.coefficient.real()) || !std::isfinite(t.coefficient.imag()))
            throw DomainError("superposition coefficient is not finite");
        if (system_.dimension() == 1) t.n[1] = 0;
        states_.push_back(eigenstate(system_, t.n));
        norm2 += std::norm(t.coefficient);
    }
    for (std::size_t i = 0; i < terms_.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (terms_[i].n == terms_[j].n)
                throw DomainError("superposition lists the same eigenstate twice");
    if (!(norm2 > 0.0)) throw DomainError("superposition has zero norm");
    input_norm_ = std::sqrt(norm2);
    for (auto& t : terms_) t.coefficient /= input_norm_;

    // Domain-average amplitude at t = 0 (midpoint rule).
    const auto dom = characteristic_domain();
    const int d = system_.dimension();
    const int n = d == 1 ? 4096 : 256;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = dom[0][0] + (i + 0.5) * (dom[1][0] - dom[0][0]) / n;
        if (d == 1) {
            sum += std::abs(evaluate_wavefunction(*this, {x, 0.0}, 0.0).psi);
            continue;
        }
        for (int j = 0; j < n; ++j) {
            const double y = dom[0][1] + (j + 0.5) * (dom[1][1] - dom[0][1]) / n;
            sum += std::abs(evaluate_wavefunction(*this, {x, y}, 0.0).psi);
        }
    }
    average_rho_ = sum / std::pow(n, d);
    node_threshold_ = 1e-10 * average_rho_;
}

std::array<Vec2, 2> Superposition::characteristic_domain() const {
    std::array<Vec2, 2> dom{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
    for (int i = 0; i < system_.dimension(); ++i) {
        if (system_.kind() == SolvableSystem::Kind::harmonic) {
            int n_max = 0;
            for (const auto& t : terms_) n_max = std::max(n_max, t.n[i]);
            const double ell = std::sqrt(system_.hbar() / (system_.mass() * system_.omegas()[i]));
            const double half = (std::sqrt(2.0 * n_max + 1.0) + 7.0) * ell;
            dom[0][i] = -half;
            dom[1][i] = half;
        } else {
            dom[1][i] = system_.lengths()[i];
        }
    }
    return dom;
}

bool Superposition::is_stationary() const {
    for (const auto& s : states_)
        if (std::abs(s.energy - states_.front().energy) > 1e-14 * std::max(1.0, std::abs(s.energy)))
            return false;
    return true;
}

Superposition Superposition::with_global_phase(double phase) const {
    auto terms = terms_;
    for (auto& t : terms) t.coefficient *= std::polar(1.0, phase);
    return Superposition(system_, std::move(terms));
}

WaveDerivatives evaluate_wavefunction(const Superposition& sup, const Vec2& x, double t) {
    const auto& s = sup.system();
    check_inside(s, x);
    if (!std::isfinite(t)) throw DomainError("time must be finite");
    WaveDerivatives w;
    const auto& terms = sup.terms();
    const auto& states = sup.states();
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const Complex c = terms[k].coefficient * std::polar(1.0, -states[k].energy * t / s.hbar());
        accumulate(w, s, states[k].n, x, c);
    }
    return w;
}

WavefieldSample polar_fields(const WaveDerivatives& raw, const SystemConstants& constants,
                             double node_threshold, std::optional<double> sigma_reference,
                             const Vec2& where) {
    WavefieldSample out;
    out.psi = raw.psi;
    out.grad_psi = raw.grad;
    out.lap_psi = raw.laplacian();
    out.rho = std::abs(raw.psi);
    if (out.rho == 0.0)
        throw NodeSingularity("wavefunction vanishes: sigma, v and Q are undefined", where, 0.0);
    out.near_node = out.rho < node_threshold;
    const double hbar = constants.hbar;
    out.sigma = hbar * std::arg(raw.psi);
    if (sigma_reference) {
        const double period = 2.0 * M_PI * hbar;
        out.sigma += period * std::round((*sigma_reference - out.sigma) / period);
    }
    const double u = std::norm(raw.psi);
    Vec2 du{0.0, 0.0};
    double lap_u = 2.0 * (std::conj(raw.psi) * out.lap_psi).real();
    for (int i = 0; i < constants.dimension; ++i) {
        const Complex ratio = raw.grad[i] / raw.psi;
        out.grad_sigma[i] = hbar * ratio.imag();
        du[i] = 2.0 * (std::conj(raw.psi) * raw.grad[i]).real();
        lap_u += 2.0 * std::norm(raw.grad[i]);
    }
    // rho = sqrt(u): lap(rho)/rho = lap(u)/(2u) - |grad u|^2 / (4u^2).
    const double ratio = lap_u / (2.0 * u) - (du[0] * du[0] + du[1] * du[1]) / (4.0 * u * u);
    out.Q = -hbar * hbar / (2.0 * constants.mass) * ratio;
    return out;
}

WavefieldSample wavefield(const Superposition& sup, const Vec2& x, double t) {
    return polar_fields(evaluate_wavefunction(sup, x, t), sup.system().constants(),
                        sup.node_threshold(), std::nullopt, x);
}

WavefieldSample PhaseTracker::sample(const Vec2& x, double t) {
    auto s = polar_fields(evaluate_wavefunction(*sup_, x, t), sup_->system().constants(),
                          sup_->node_threshold(), last_, x);
    last_ = s.sigma;
    return s;
}

QuantumPotential quantum_potential(const Superposition& sup, const Vec2& x, double t) {
    const auto w = evaluate_wavefunction(sup, x, t);
    const auto& c = sup.system().constants();
    const double u = std::norm(w.psi);
    if (u == 0.0) throw NodeSingularity("quantum potential is singular at a node", x, 0.0);
    const int d = c.dimension;
    const Complex psic = std::conj(w.psi);
    const Complex lap = w.laplacian();
    Vec2 du{0.0, 0.0};
    std::array<Vec2, 2> ddu{Vec2{0.0, 0.0}, Vec2{0.0, 0.0}};
    double lap_u = 2.0 * (psic * lap).real();
    for (int i = 0; i < d; ++i) {
        du[i] = 2.0 * (psic * w.grad[i]).real();
        lap_u += 2.0 * std::norm(w.grad[i]);
        for (int k = 0; k < d; ++k)
            ddu[i][k] = 2.0 * (std::conj(w.grad[k]) * w.grad[i] + psic * w.hessian[i][k]).real();
    }
    Vec2 dlap_u{0.0, 0.0};
    for (int k = 0; k < d; ++k) {
        dlap_u[k] = 2.0 * (std::conj(w.grad[k]) * lap + psic * w.grad_laplacian[k]).real();
        for (int i = 0; i < d; ++i) dlap_u[k] += 4.0 * (std::conj(w.grad[i]) * w.hessian[i][k]).real();
    }
    const double g2 = du[0] * du[0] + du[1] * du[1];
    const double pref = -c.hbar * c.hbar / (2.0 * c.mass);
    QuantumPotential out;
    out.Q = pref * (lap_u / (2.0 * u) - g2 / (4.0 * u * u));
    for (int k = 0; k < d; ++k) {
        double dg2 = 0.0;
        for (int i = 0; i < d; ++i) dg2 += 2.0 * du[i] * ddu[i][k];
        out.gradient[k] = pref * (dlap_u[k] / (2.0 * u) - lap_u * du[k] / (2.0 * u * u) -
                                  dg2 / (4.0 * u * u) + g2 * du[k] / (2.0 * u * u * u));
    }
    return out;
}

Region default_region(const Superposition& sup) {
    const auto dom = sup.characteristic_domain();
    return {dom[0], dom[1]};
}

namespace {

std::vector<Node> nodes_1d(const Superposition& sup, const Region& r, double t, int res) {
    std::vector<Node> out;
    const double lo = r.lo[0], hi = r.hi[0];
    const double h = (hi - lo) / res;
    const double accept = 1e-8 * sup.average_amplitude();
    const double wall_margin = 1e-9 * (hi - lo);
    std::vector<double> mag(res + 1);
    for (int i = 0; i <= res; ++i) mag[i] = std::abs(evaluate_wavefunction(sup, {lo + i * h, 0.0}, t).psi);
    for (int i = 1; i < res; ++i) {
        if (!(mag[i] <= mag[i - 1] && mag[i] <= mag[i + 1])) continue;
        if (mag[i] == mag[i - 1] && i > 1) continue;
        double x = lo + i * h;
        for (int it = 0; it < 60; ++it) {
            const auto w = evaluate_wavefunction(sup, {x, 0.0}, t);
            const double g2 = std::norm(w.grad[0]);
            if (g2 == 0.0) break;
            const double step = (std::conj(w.grad[0]) * w.psi).real() / g2;
            x = std::clamp(x - step, lo, hi);
            if (std::abs(step) < 1e-15 * std::max(1.0, std::abs(x))) break;
        }
        const double res_abs = std::abs(evaluate_wavefunction(sup, {x, 0.0}, t).psi);
        if (res_abs > accept) continue;
        if (x - lo < wall_margin || hi - x < wall_margin) {
            if (sup.system().kind() == SolvableSystem::Kind::box) continue;
        }
        bool dup = false;
        for (const auto& n : out) dup = dup || std::abs(n.position[0] - x) < 0.5 * h;
        if (!dup) out.push_back({{x, 0.0}, 0, res_abs});
    }
    return out;
}

std::vector<Node> nodes_2d(const Superposition& sup, const Region& r, double t, int res) {
    std::vector<Node> out;
    const double hx = (r.hi[0] - r.lo[0]) / res, hy = (r.hi[1] - r.lo[1]) / res;
    const double accept = 1e-8 * sup.average_amplitude();
    std::vector<Complex> grid(static_cast<std::size_t>(res + 1) * (res + 1));
    auto at = [&](int i, int j) -> Complex& { return grid[static_cast<std::size_t>(i) * (res + 1) + j]; };
    for (int i = 0; i <= res; ++i)
        for (int j = 0; j <= res; ++j)
            at(i, j) = evaluate_wavefunction(sup, {r.lo[0] + i * hx, r.lo[1] + j * hy}, t).psi;
    auto changes = [](double a, double b, double c, double d) {
        const double mn = std::min({a, b, c, d}), mx = std::max({a, b, c, d});
        return mn <= 0.0 && mx >= 0.0 && mx > mn;
    };
    const bool box = sup.system().kind() == SolvableSystem::Kind::box;
    for (int i = 0; i < res; ++i) {
        for (int j = 0; j < res; ++j) {
            const Complex a = at(i, j), b = at(i + 1, j), c = at(i, j + 1), d = at(i + 1, j + 1);
            if (!changes(a.real(), b.real(), c.real(), d.real())) continue;
            if (!changes(a.imag(), b.imag(), c.imag(), d.imag())) continue;
            Vec2 x{r.lo[0] + (i + 0.5) * hx, r.lo[1] + (j + 0.5) * hy};
            bool ok = true;
            double det = 0.0;
            for (int it = 0; it < 50; ++it) {
                const auto w = evaluate_wavefunction(sup, x, t);
                const double j11 = w.grad[0].real(), j12 = w.grad[1].real();
                const double j21 = w.grad[0].imag(), j22 = w.grad[1].imag();
                det = j11 * j22 - j12 * j21;
                if (det == 0.0 || !std::isfinite(det)) {
                    ok = false;
                    break;
                }
                const double dx = (j22 * w.psi.real() - j12 * w.psi.imag()) / det;
                const double dy = (-j21 * w.psi.real() + j11 * w.psi.imag()) / det;
                x[0] -= dx;
                x[1] -= dy;
                if (!sup.system().inside(x)) {
                    ok = false;
                    break;
                }
                if (std::hypot(dx / hx, dy / hy) < 1e-14) break;
            }
            if (!ok) continue;
            // Must converge within the candidate cell or its neighbours.
            if (x[0] < r.lo[0] + (i - 1) * hx || x[0] > r.lo[0] + (i + 2) * hx ||
                x[1] < r.lo[1] + (j - 1) * hy || x[1] > r.lo[1] + (j + 2) * hy)
                continue;
            if (x[0] < r.lo[0] || x[0] > r.hi[0] || x[1] < r.lo[1] || x[1] > r.hi[1]) continue;
            const auto w = evaluate_wavefunction(sup, x, t);
            const double residual = std::abs(w.psi);
            if (residual > accept) continue;
            if (box) {
                const auto& len = sup.system().lengths();
                const double m = 1e-9;
                if (x[0] < m * len[0] || x[0] > (1 - m) * len[0] || x[1] < m * len[1] ||
                    x[1] > (1 - m) * len[1])
                    continue;
            }
            bool dup = false;
            for (const auto& n : out)
                dup = dup || (std::abs(n.position[0] - x[0]) < 0.5 * hx &&
                              std::abs(n.position[1] - x[1]) < 0.5 * hy);
            if (!dup) out.push_back({x, det > 0.0 ? 1 : -1, residual});
        }
    }
    std::sort(out.begin(), out.end(), [](const Node& a, const Node& b) {
        return a.position[0] < b.position[0] ||
               (a.position[0] == b.position[0] && a.position[1] < b.position[1]);
    });
    return out;
}

}  // namespace

std::vector<Node> find_nodes(const Superposition& sup, const Region& region, double t,
                             int resolution) {
    if (resolution < 2) throw DomainError("node search resolution must be at least 2");
    const int d = sup.dimension();
    for (int i = 0; i < d; ++i)
        if (!(region.hi[i] > region.lo[i])) throw DomainError("node search region is empty");
    if (!sup.system().inside(region.lo) || !sup.system().inside(region.hi))
        throw DomainError("node search region leaves the domain");
    return d == 1 ? nodes_1d(sup, region, t, resolution) : nodes_2d(sup, region, t, resolution);
}

}  // namespace pilotwave::quantum
