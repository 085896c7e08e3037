#include <boost/math/differentiation/finite_difference.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <functional>
#include <cmath>
#include <random>

#include "doctest.h"
#include "pilotwave/catalog.hpp"
#include "pilotwave/quantum.hpp"

using namespace pilotwave;
using namespace pilotwave::quantum;

namespace {

using GL = boost::math::quadrature::gauss<double, 40>;

// Composite Gauss-Legendre over [a, b] with `pieces` panels.
template <class F>
double integrate_1d(F f, double a, double b, int pieces = 40) {
    double s = 0.0;
    const double h = (b - a) / pieces;
    for (int k = 0; k < pieces; ++k) s += GL::integrate(f, a + k * h, a + (k + 1) * h);
    return s;
}

double norm_integral(const Superposition& sup, double t) {
    const auto dom = sup.characteristic_domain();
    if (sup.dimension() == 1)
        return integrate_1d([&](double x) { return std::norm(evaluate_wavefunction(sup, {x, 0.0}, t).psi); },
                            dom[0][0], dom[1][0]);
    return integrate_1d(
        [&](double x) {
            return integrate_1d(
                [&](double y) { return std::norm(evaluate_wavefunction(sup, {x, y}, t).psi); },
                dom[0][1], dom[1][1], 12);
        },
        dom[0][0], dom[1][0], 12);
}

Vec2 random_point(const Superposition& sup, std::mt19937_64& rng, double margin = 0.0) {
    const auto dom = sup.characteristic_domain();
    Vec2 x{0.0, 0.0};
    for (int i = 0; i < sup.dimension(); ++i) {
        double lo = dom[0][i], hi = dom[1][i];
        if (sup.system().kind() == SolvableSystem::Kind::harmonic) {
            lo *= 0.5;
            hi *= 0.5;
        }
        const double w = hi - lo;
        x[i] = std::uniform_real_distribution<double>(lo + margin * w, hi - margin * w)(rng);
    }
    return x;
}

// Fourth-order central difference of f at 0.
template <class F>
double central_difference(F f, double h) {
    return (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h);
}

double sigma_at(const Superposition& sup, const Vec2& x, double t, double ref) {
    return polar_fields(evaluate_wavefunction(sup, x, t), sup.system().constants(), 0.0, ref).sigma;
}

// Phase winding of psi around a rectangle sampled at m points per edge.
int winding_around(const Superposition& sup, Vec2 lo, Vec2 hi, double t, int m) {
    std::vector<Vec2> pts;
    for (int k = 0; k < m; ++k) pts.push_back({lo[0] + (hi[0] - lo[0]) * k / m, lo[1]});
    for (int k = 0; k < m; ++k) pts.push_back({hi[0], lo[1] + (hi[1] - lo[1]) * k / m});
    for (int k = 0; k < m; ++k) pts.push_back({hi[0] - (hi[0] - lo[0]) * k / m, hi[1]});
    for (int k = 0; k < m; ++k) pts.push_back({lo[0], hi[1] - (hi[1] - lo[1]) * k / m});
    double total = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const Complex a = evaluate_wavefunction(sup, pts[k], t).psi;
        const Complex b = evaluate_wavefunction(sup, pts[(k + 1) % pts.size()], t).psi;
        total += std::arg(b / a);
    }
    return static_cast<int>(std::lround(total / (2 * M_PI)));
}

}  // namespace

TEST_SUITE("quantum") {

TEST_CASE("closed-form eigenfunction values") {
    const auto box = SolvableSystem::box({2.0, 0.0}, {1.0, 1.0, 1});
    const auto g = eigenfunction(box, eigenstate(box, {1, 0}), {1.0, 0.0});
    CHECK(g.value.real() == doctest::Approx(std::sqrt(2.0 / 2.0)));
    CHECK(std::abs(g.gradient[0]) < 1e-15);
    CHECK(std::abs(eigenfunction(box, eigenstate(box, {3, 0}), {0.0, 0.0}).value) < 1e-15);
    CHECK(std::abs(eigenfunction(box, eigenstate(box, {3, 0}), {2.0, 0.0}).value) < 1e-14);
    CHECK_THROWS_AS(eigenfunction(box, eigenstate(box, {1, 0}), {2.1, 0.0}), DomainError);
    CHECK_THROWS_AS(eigenstate(box, {0, 0}), DomainError);

    for (double m : {1.0, 2.0})
        for (double w : {1.0, 3.0}) {
            const auto ho = SolvableSystem::harmonic({w, 0.0}, {0.7, m, 1});
            const auto v = eigenfunction(ho, eigenstate(ho, {0, 0}), {0.0, 0.0});
            CHECK(v.value.real() == doctest::Approx(std::pow(m * w / (M_PI * 0.7), 0.25)).epsilon(1e-14));
            CHECK(std::abs(v.gradient[0]) == 0.0);
        }
}

TEST_CASE("spectra") {
    const auto box = SolvableSystem::box({1.0, 2.0}, {1.0, 1.0, 2});
    CHECK(eigenstate(box, {2, 3}).energy == doctest::Approx(M_PI * M_PI / 2 * (4.0 + 9.0 / 4.0)));
    const auto ho = SolvableSystem::harmonic({1.0, std::sqrt(2.0)}, {1.0, 1.0, 2});
    CHECK(eigenstate(ho, {2, 1}).energy == doctest::Approx(2.5 + 1.5 * std::sqrt(2.0)));
    CHECK(eigenstate(ho, {2, 1}).parity == Index2{1, -1});
    const auto free = SolvableSystem::free_particle({2 * M_PI, 0.0}, {1.0, 1.0, 1});
    CHECK(eigenstate(free, {-3, 0}).energy == doctest::Approx(4.5));
}

TEST_CASE("eigenfunctions are orthonormal") {
    const auto box = SolvableSystem::box({1.5, 0.0}, {1.0, 1.0, 1});
    const auto ho = SolvableSystem::harmonic({1.3, 0.0}, {1.0, 0.8, 1});
    const auto free = SolvableSystem::free_particle({2.0, 0.0}, {1.0, 1.0, 1});
    struct Case {
        SolvableSystem s;
        double a, b;
        int first, last;
    };
    const double ell = std::sqrt(1.0 / (0.8 * 1.3));
    for (const auto& c : {Case{box, 0.0, 1.5, 1, 8}, Case{ho, -14 * ell, 14 * ell, 0, 12},
                          Case{free, 0.0, 2.0, -4, 4}}) {
        for (int m = c.first; m <= c.last; ++m)
            for (int n = c.first; n <= c.last; ++n) {
                const auto em = eigenstate(c.s, {m, 0}), en = eigenstate(c.s, {n, 0});
                const double re = integrate_1d(
                    [&](double x) {
                        return (std::conj(eigenfunction(c.s, em, {x, 0.0}).value) *
                                eigenfunction(c.s, en, {x, 0.0}).value).real();
                    },
                    c.a, c.b);
                CHECK(std::abs(re - (m == n ? 1.0 : 0.0)) < 1e-8);
            }
    }
}

TEST_CASE("superposition normalization") {
    const auto sys = SolvableSystem::box({1.0, 0.0}, {1.0, 1.0, 1});
    const Superposition s(sys, {{3.0, {1, 0}}, {Complex(0.0, 4.0), {2, 0}}});
    CHECK(s.input_norm() == doctest::Approx(5.0));
    double n2 = 0.0;
    for (const auto& t : s.terms()) n2 += std::norm(t.coefficient);
    CHECK(std::abs(n2 - 1.0) < 1e-12);
    CHECK_THROWS_AS(Superposition(sys, {}), DomainError);
    CHECK_THROWS_AS(Superposition(sys, {{0.0, {1, 0}}}), DomainError);
    CHECK_THROWS_AS(Superposition(sys, {{1.0, {1, 0}}, {1.0, {1, 0}}}), DomainError);

    for (const auto& named : catalog::reference_states()) {
        INFO(named.name);
        for (double t : {0.0, 0.37, 2.9}) CHECK(std::abs(norm_integral(named.state, t) - 1.0) < 1e-6);
    }
}

TEST_CASE("stationary states have time-independent density") {
    const auto s = catalog::oscillator_eigenstate({3, 0});
    for (double x : {-1.2, 0.1, 0.9})
        for (double t : {0.5, 7.0, 123.4})
            CHECK(std::abs(std::abs(evaluate_wavefunction(s, {x, 0.0}, t).psi) -
                           std::abs(evaluate_wavefunction(s, {x, 0.0}, 0.0).psi)) < 1e-12);
    CHECK(s.is_stationary());
    CHECK_FALSE(catalog::box_two_mode().is_stationary());
}

TEST_CASE("two-mode beat period") {
    const auto s = catalog::box_two_mode();
    const double de = s.states()[1].energy - s.states()[0].energy;
    const double period = 2 * M_PI / de;
    for (double x : {0.2, 0.5, 0.77}) {
        const Complex a = evaluate_wavefunction(s, {x, 0.0}, 0.3).psi;
        const Complex b = evaluate_wavefunction(s, {x, 0.0}, 0.3 + period).psi;
        const Complex phase = std::polar(1.0, -s.states()[0].energy * period);
        CHECK(std::abs(b - phase * a) < 1e-12);
    }
}

TEST_CASE("gradient and Laplacian match finite differences") {
    std::mt19937_64 rng(7);
    for (const auto& named : catalog::reference_states()) {
        INFO(named.name);
        const auto& s = named.state;
        const int d = s.dimension();
        for (int k = 0; k < 25; ++k) {
            const Vec2 x = random_point(s, rng, 0.02);
            const double t = 0.3 * k;
            const auto w = evaluate_wavefunction(s, x, t);
            const double h = 1e-5;
            for (int i = 0; i < d; ++i) {
                Vec2 a = x, b = x;
                a[i] += h;
                b[i] -= h;
                const Complex fd = (evaluate_wavefunction(s, a, t).psi - evaluate_wavefunction(s, b, t).psi) / (2 * h);
                CHECK(std::abs(fd - w.grad[i]) <= 1e-6 * std::max(std::abs(w.grad[i]), 1e-2));
            }
            auto psi = [&](double dx, double dy) { return evaluate_wavefunction(s, {x[0] + dx, x[1] + dy}, t).psi; };
            const double hs = 1e-3;
            Complex stencil;
            if (d == 1) {
                stencil = (-psi(2 * hs, 0) + 16.0 * psi(hs, 0) - 30.0 * psi(0, 0) + 16.0 * psi(-hs, 0) - psi(-2 * hs, 0)) /
                          (12 * hs * hs);
            } else {
                const double hn = 2e-4;
                stencil = (4.0 * (psi(hn, 0) + psi(-hn, 0) + psi(0, hn) + psi(0, -hn)) +
                           (psi(hn, hn) + psi(hn, -hn) + psi(-hn, hn) + psi(-hn, -hn)) - 20.0 * psi(0, 0)) /
                          (6 * hn * hn);
            }
            const Complex lap = w.laplacian();
            CHECK(std::abs(stencil - lap) <= 1e-5 * std::max(std::abs(lap), 1e-1));
        }
    }
}

TEST_CASE("polar decomposition") {
    const auto ground = catalog::oscillator_eigenstate({0, 0});
    for (double x : {-2.0, -0.3, 0.0, 1.4, 3.1}) {
        const auto f = polar_fields(evaluate_wavefunction(ground, {x, 0.0}, 0.0), ground.system().constants());
        CHECK(f.sigma == 0.0);
        CHECK(f.grad_sigma[0] == 0.0);
        CHECK(f.rho == doctest::Approx(std::abs(f.psi)));
        // Gaussian ground state: Q = hbar w / 2 - m w^2 x^2 / 2.
        CHECK(std::abs(f.Q - (0.5 - 0.5 * x * x)) < 1e-10);
        CHECK(std::abs(ground.system().potential({x, 0.0}) + f.Q - 0.5) < 1e-10);
    }
    const auto pw = catalog::plane_wave(1.7);
    for (double x : {0.1, 1.0, 3.3}) {
        const auto f = wavefield(pw, {x, 0.0}, 0.4);
        CHECK(f.grad_sigma[0] == doctest::Approx(1.7).epsilon(1e-13));
        CHECK(std::abs(f.Q) < 1e-12);
    }
    WaveDerivatives zero;
    CHECK_THROWS_AS(polar_fields(zero, SystemConstants{}), NodeSingularity);
}

TEST_CASE("quantum potential identities") {
    std::mt19937_64 rng(11);
    for (const auto& named : catalog::reference_states()) {
        INFO(named.name);
        const auto& s = named.state;
        for (int k = 0; k < 40; ++k) {
            const Vec2 x = random_point(s, rng, 0.1);
            const double t = 0.17 * k;
            const auto w = evaluate_wavefunction(s, x, t);
            if (std::abs(w.psi) < 1e-3) continue;
            const auto f = polar_fields(w, s.system().constants());
            // lap(rho)/rho = Re(lap psi / psi) + |Im(grad psi / psi)|^2.
            double oracle = (w.laplacian() / w.psi).real();
            for (int i = 0; i < s.dimension(); ++i) oracle += std::pow((w.grad[i] / w.psi).imag(), 2);
            CHECK(f.Q == doctest::Approx(-0.5 * oracle).epsilon(1e-9));
            const auto q = quantum_potential(s, x, t);
            CHECK(q.Q == doctest::Approx(f.Q).epsilon(1e-10));
            for (int i = 0; i < s.dimension(); ++i) {
                const double fd = boost::math::differentiation::finite_difference_derivative<std::function<double(double)>, double, 6>(
                    [&](double e) {
                        Vec2 y = x;
                        y[i] = e;
                        return quantum_potential(s, y, t).Q;
                    },
                    x[i]);
                CHECK(std::abs(fd - q.gradient[i]) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }
}

TEST_CASE("phase tracking keeps sigma continuous") {
    const auto pw = catalog::plane_wave(2.0, 3);
    PhaseTracker tracker(pw);
    double prev = tracker.sample({0.0, 0.0}, 0.0).sigma;
    for (int k = 1; k <= 300; ++k) {
        const double x = 3 * M_PI * k / 300.0;
        const double s = tracker.sample({x, 0.0}, 0.0).sigma;
        CHECK(std::abs(s - prev) < 0.1);
        prev = s;
    }
    CHECK(prev == doctest::Approx(6 * M_PI).epsilon(1e-12));
}

TEST_CASE("quantum Hamilton-Jacobi and continuity residuals") {
    std::mt19937_64 rng(3);
    for (const auto& named : catalog::reference_states()) {
        INFO(named.name);
        const auto& s = named.state;
        const auto& c = s.system().constants();
        const int d = s.dimension();
        int tested = 0;
        while (tested < 200) {
            const Vec2 x = random_point(s, rng, 0.01);
            const double t = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
            const auto f = wavefield(s, x, t);
            if (f.near_node || f.rho < 1e-3) continue;
            ++tested;
            const double dt = 2e-6;
            const double dsdt = central_difference([&](double e) { return sigma_at(s, x, t + e, f.sigma); }, dt);
            double kinetic = 0.0;
            for (int i = 0; i < d; ++i) kinetic += f.grad_sigma[i] * f.grad_sigma[i] / (2 * c.mass);
            CHECK(std::abs(dsdt + kinetic + f.Q + s.system().potential(x)) < 1e-6);

            const double dr2 = central_difference([&](double e) { return std::pow(wavefield(s, x, t + e).rho, 2); }, dt);
            double div = 0.0;
            for (int i = 0; i < d; ++i) {
                div += central_difference(
                           [&](double e) {
                               Vec2 y = x;
                               y[i] += e;
                               const auto fy = wavefield(s, y, t);
                               return fy.rho * fy.rho * fy.grad_sigma[i];
                           },
                           1e-5) /
                       c.mass;
            }
            CHECK(std::abs(dr2 + div) < 1e-6);
        }
    }
}

TEST_CASE("nodes of simple states") {
    const auto sys = SolvableSystem::box({1.0, 0.0}, {1.0, 1.0, 1});
    const Superposition n2(sys, {{1.0, {2, 0}}});
    const auto nodes = find_nodes(n2, default_region(n2), 0.0);
    REQUIRE(nodes.size() == 1);
    CHECK(std::abs(nodes[0].position[0] - 0.5) < 1e-8);
    const Superposition n3(sys, {{1.0, {3, 0}}});
    CHECK(find_nodes(n3, default_region(n3), 1.3, 97).size() == 2);

    CHECK(find_nodes(catalog::box_ground_1d(), default_region(catalog::box_ground_1d()), 0.0).empty());
    const auto g2 = catalog::box_eigenstate_2d({1, 1});
    CHECK(find_nodes(g2, default_region(g2), 0.0).empty());
    const auto h1 = catalog::oscillator_eigenstate({0, 0});
    CHECK(find_nodes(h1, default_region(h1), 0.0).empty());
    const auto h2 = catalog::oscillator_eigenstate({0, 0}, {1.0, 2.0}, 2);
    CHECK(find_nodes(h2, default_region(h2), 0.0).empty());
    for (double t : {0.0, 0.5, 1.1}) CHECK(find_nodes(catalog::box_two_mode(), default_region(catalog::box_two_mode()), t).empty());
}

TEST_CASE("vortex nodes and their windings") {
    const auto v = catalog::oscillator_vortex();
    const auto one = find_nodes(v, {{-3.0, -3.0}, {3.0, 3.0}}, 0.7, 61);
    REQUIRE(one.size() == 1);
    CHECK(std::hypot(one[0].position[0], one[0].position[1]) < 1e-10);
    CHECK(one[0].winding == 1);

    const auto pair = catalog::oscillator_vortex_pair(0.8);
    const auto two = find_nodes(pair, {{-3.0, -3.0}, {3.0, 3.0}}, 0.0, 61);
    REQUIRE(two.size() == 2);
    CHECK(two[0].position[0] == doctest::Approx(-0.8).epsilon(1e-10));
    CHECK(two[1].position[0] == doctest::Approx(0.8).epsilon(1e-10));
    CHECK(two[0].winding == 1);
    CHECK(two[1].winding == 1);
}

TEST_CASE("2D node count matches a winding scan on a finer grid") {
    for (const auto* name : {"box_vortex_2d", "oscillator_vortex_pair", "anisotropic_chaotic"}) {
        INFO(name);
        Superposition s = catalog::box_two_mode();
        for (const auto& n : catalog::reference_states())
            if (n.name == name) s = n.state;
        Region r = default_region(s);
        if (s.system().kind() == SolvableSystem::Kind::harmonic) r = {{-3.5, -3.5}, {3.5, 3.5}};
        for (double t : {0.0, 0.9, 2.3}) {
            const int res = 40;
            const auto nodes = find_nodes(s, r, t, res);
            // Oracle: cells of a 10x finer grid with non-zero phase winding.
            const int fine = 10 * res;
            int count = 0, signed_sum = 0, node_sum = 0;
            const double hx = (r.hi[0] - r.lo[0]) / fine, hy = (r.hi[1] - r.lo[1]) / fine;
            for (int i = 0; i < fine; ++i)
                for (int j = 0; j < fine; ++j) {
                    const Vec2 lo{r.lo[0] + i * hx, r.lo[1] + j * hy};
                    const Vec2 hi{lo[0] + hx, lo[1] + hy};
                    bool near_wall = false;
                    if (s.system().kind() == SolvableSystem::Kind::box)
                        near_wall = i == 0 || j == 0 || i == fine - 1 || j == fine - 1;
                    if (near_wall) continue;
                    const int w = winding_around(s, lo, hi, t, 2);
                    if (w != 0) {
                        ++count;
                        signed_sum += w;
                    }
                }
            for (const auto& n : nodes) node_sum += n.winding;
            CHECK(static_cast<int>(nodes.size()) == count);
            CHECK(node_sum == signed_sum);
        }
    }
}

TEST_CASE("node search arguments") {
    const auto s = catalog::box_two_mode();
    CHECK_THROWS_AS(find_nodes(s, {{0.5, 0.0}, {0.2, 0.0}}, 0.0), DomainError);
    CHECK_THROWS_AS(find_nodes(s, {{0.0, 0.0}, {1.5, 0.0}}, 0.0), DomainError);
    CHECK(s.node_threshold() == doctest::Approx(1e-10 * s.average_amplitude()));
}

}
