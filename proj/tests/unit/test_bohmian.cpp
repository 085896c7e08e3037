#include <boost/math/distributions/chi_squared.hpp>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "pilotwave/bohmian.hpp"
#include "pilotwave/catalog.hpp"

using namespace pilotwave;
using namespace pilotwave::bohmian;
using quantum::Complex;
using quantum::Superposition;

namespace {

// Closed-form bin probabilities of rho^2 for a c1 phi_1 + c2 phi_2 state in the
// unit box, with the relative phase delta of the two terms at time t.
double two_mode_cdf(double x, double c1, double c2, double delta) {
    const double p1 = x - std::sin(2 * M_PI * x) / (2 * M_PI);
    const double p2 = x - std::sin(4 * M_PI * x) / (4 * M_PI);
    const double cross = std::sin(M_PI * x) / M_PI - std::sin(3 * M_PI * x) / (3 * M_PI);
    return c1 * c1 * p1 + c2 * c2 * p2 + 2 * c1 * c2 * std::cos(delta) * cross;
}

std::vector<double> two_mode_bins(const Superposition& s, double t, int bins) {
    const double c1 = s.terms()[0].coefficient.real(), c2 = s.terms()[1].coefficient.real();
    const double delta = (s.states()[1].energy - s.states()[0].energy) * t;
    std::vector<double> p(bins);
    for (int i = 0; i < bins; ++i)
        p[i] = two_mode_cdf((i + 1.0) / bins, c1, c2, delta) - two_mode_cdf(double(i) / bins, c1, c2, delta);
    return p;
}

double beat_period(const Superposition& s) {
    return 2 * M_PI / (s.states()[1].energy - s.states()[0].energy);
}

Vec2 random_inside(const Superposition& s, std::mt19937_64& rng, double margin) {
    const auto dom = s.characteristic_domain();
    Vec2 x{0.0, 0.0};
    for (int i = 0; i < s.dimension(); ++i) {
        double lo = dom[0][i], hi = dom[1][i];
        if (s.system().kind() == SolvableSystem::Kind::harmonic) {
            lo *= 0.3;
            hi *= 0.3;
        }
        const double w = hi - lo;
        x[i] = std::uniform_real_distribution<double>(lo + margin * w, hi - margin * w)(rng);
    }
    return x;
}

}  // namespace

TEST_SUITE("bohmian") {

TEST_CASE("velocity field") {
    std::mt19937_64 rng(5);
    for (const auto& s : {catalog::box_ground_1d(), catalog::box_eigenstate_2d({2, 3}),
                          catalog::oscillator_eigenstate({3, 0}),
                          catalog::oscillator_eigenstate({1, 2}, {1.0, 1.7}, 2)}) {
        const auto phased = s.with_global_phase(0.7);
        for (int k = 0; k < 20; ++k) {
            const Vec2 x = random_inside(phased, rng, 0.02);
            if (std::abs(quantum::evaluate_wavefunction(phased, x, 0.0).psi) < 1e-3) continue;
            const Vec2 v = velocity_field(phased, x, 1.3 * k);
            CHECK(std::hypot(v[0], v[1]) < 1e-12);
        }
    }

    const double k = 1.5;
    const auto pw = catalog::plane_wave(k);
    for (double x : {0.1, 2.0, 3.9}) CHECK(velocity_field(pw, {x, 0.0}, 0.4)[0] == doctest::Approx(k).epsilon(1e-13));

    const auto n2 = Superposition(SolvableSystem::box({1.0, 0.0}, {}), {{1.0, {2, 0}}});
    CHECK_THROWS_AS(velocity_field(n2, {0.5, 0.0}, 0.0), NodeSingularity);
    CHECK_THROWS_AS(velocity_field(n2, {1.2, 0.0}, 0.0), DomainError);
}

TEST_CASE("velocity times density equals the probability current") {
    std::mt19937_64 rng(9);
    int tested = 0;
    for (const auto& named : catalog::reference_states()) {
        const auto& s = named.state;
        INFO(named.name);
        const auto& c = s.system().constants();
        for (int k = 0; k < 100; ++k) {
            const Vec2 x = random_inside(s, rng, 0.01);
            const double t = std::uniform_real_distribution<double>(0.0, 10.0)(rng);
            const auto w = quantum::evaluate_wavefunction(s, x, t);
            if (std::abs(w.psi) < s.node_threshold()) continue;
            const Vec2 v = velocity_field(s, x, t);
            for (int i = 0; i < s.dimension(); ++i) {
                // j = (hbar / m) Im(psi* grad psi)
                const double j = c.hbar / c.mass * (std::conj(w.psi) * w.grad[i]).imag();
                CHECK(std::abs(v[i] * std::norm(w.psi) - j) < 1e-10);
            }
            ++tested;
        }
    }
    CHECK(tested >= 1000);
}

TEST_CASE("particles rest in eigenstates") {
    std::mt19937_64 rng(17);
    BohmianOptions o;
    o.tol = 1e-11;
    for (const auto& s : {catalog::box_ground_1d(), catalog::box_eigenstate_2d({2, 1}),
                          catalog::oscillator_eigenstate({0, 0}),
                          catalog::oscillator_eigenstate({2, 1}, {1.0, 1.0}, 2)}) {
        for (int k = 0; k < 20; ++k) {
            Vec2 x0 = random_inside(s, rng, 0.02);
            while (std::abs(quantum::evaluate_wavefunction(s, x0, 0.0).psi) < 1e-3) x0 = random_inside(s, rng, 0.02);
            const auto traj = integrate_bohmian(s, x0, 0.0, 1000.0, o);
            REQUIRE(traj.status == TrajectoryStatus::completed);
            double drift = 0.0;
            for (const auto& p : traj.samples) drift = std::max(drift, std::hypot(p.x[0] - x0[0], p.x[1] - x0[1]));
            CHECK(drift < 1e-10);
        }
    }
}

TEST_CASE("trajectory samples are consistent") {
    const auto s = catalog::box_vortex_2d();
    BohmianOptions o;
    o.sample_interval = 0.01;
    const auto traj = integrate_bohmian(s, {0.3, 0.6}, 0.0, 3.0, o);
    REQUIRE(traj.status == TrajectoryStatus::completed);
    CHECK(traj.samples.size() == 301);
    for (std::size_t k = 1; k < traj.samples.size(); ++k) CHECK(traj.samples[k].t > traj.samples[k - 1].t);
    for (const auto& p : traj.samples) {
        const Vec2 v = velocity_field(s, p.x, p.t);
        CHECK(std::hypot(v[0] - p.v[0], v[1] - p.v[1]) < 1e-12);
        CHECK(p.rho == doctest::Approx(std::abs(quantum::evaluate_wavefunction(s, p.x, p.t).psi)));
    }
    CHECK(traj.back().t == 3.0);
}

TEST_CASE("odd modes keep the particle on its side of the nodal line") {
    // Every term has an even n_y, so psi vanishes on y = 1/2 for all t.
    const auto s = catalog::box_odd_2d();
    for (const Vec2 x0 : {Vec2{0.3, 0.7}, Vec2{0.8, 0.55}, Vec2{0.5, 0.9}}) {
        const auto traj = integrate_bohmian(s, x0, 0.0, 50.0);
        REQUIRE(traj.status == TrajectoryStatus::completed);
        double y_min = 1.0;
        for (const auto& p : traj.samples) y_min = std::min(y_min, p.x[1]);
        CHECK(y_min > 0.5);
    }
}

TEST_CASE("forward then backward integration retraces") {
    BohmianOptions o;
    o.tol = 1e-10;
    for (const auto& [s, x0] : {std::pair{catalog::box_two_mode(), Vec2{0.3, 0.0}},
                                std::pair{catalog::oscillator_coherent(), Vec2{0.4, 0.0}},
                                std::pair{catalog::box_vortex_2d(), Vec2{0.3, 0.6}},
                                std::pair{catalog::anisotropic_chaotic(), Vec2{0.3, 0.4}}}) {
        const auto fwd = integrate_bohmian(s, x0, 0.0, 2.0, o);
        const auto back = integrate_bohmian(s, fwd.back().x, 2.0, 0.0, o);
        REQUIRE(back.status == TrajectoryStatus::completed);
        CHECK(std::hypot(back.back().x[0] - x0[0], back.back().x[1] - x0[1]) <= 10 * o.tol);
    }
}

TEST_CASE("initial position checks") {
    const auto n2 = Superposition(SolvableSystem::box({1.0, 0.0}, {}), {{1.0, {2, 0}}});
    CHECK_THROWS_AS(integrate_bohmian(n2, {0.5, 0.0}, 0.0, 1.0), NodeSingularity);
    CHECK_THROWS_AS(integrate_bohmian(n2, {-0.1, 0.0}, 0.0, 1.0), DomainError);
    BohmianOptions bad;
    bad.tol = 0.0;
    CHECK_THROWS_AS(integrate_bohmian(n2, {0.3, 0.0}, 0.0, 1.0, bad), DomainError);
    const auto same = integrate_bohmian(n2, {0.3, 0.0}, 1.0, 1.0);
    CHECK(same.samples.size() == 1);
}

TEST_CASE("guidance agrees with the Newtonian form") {
    const auto s = catalog::box_two_mode();
    BohmianOptions o;
    o.tol = 1e-10;
    o.sample_interval = 1e-3;
    const auto traj = integrate_bohmian(s, {0.3, 0.0}, 0.0, 3.0, o);
    CHECK(newtonian_residual(traj, s) < 1e-4);

    // A particle at rest in an eigenstate feels no net force.
    for (const auto& e : {catalog::oscillator_eigenstate({2, 0}), catalog::box_ground_1d(),
                          catalog::oscillator_eigenstate({1, 1}, {1.0, 1.3}, 2)})
        for (const Vec2 x : {Vec2{0.3, 0.2}, Vec2{0.7, 0.45}}) {
            const auto q = quantum::quantum_potential(e, x, 0.0);
            const Vec2 gv = e.system().potential_gradient(x);
            CHECK(std::hypot(q.gradient[0] + gv[0], q.gradient[1] + gv[1]) < 1e-8);
        }

    const auto pw = catalog::plane_wave(1.5);
    const auto free_path = integrate_bohmian(pw, {0.2, 0.0}, 0.0, 1.0, o);
    for (const auto& p : free_path.samples) CHECK(std::abs(p.Q) < 1e-12);
    CHECK(newtonian_residual(free_path, pw) < 1e-9);

    auto short_traj = traj;
    short_traj.samples.resize(2);
    CHECK_THROWS_AS(newtonian_residual(short_traj, s), DomainError);
}

TEST_CASE("quantum equilibrium sampling") {
    const auto s = catalog::box_two_mode();
    CHECK(sample_quantum_equilibrium(s, 0.0, 0, 1).size() == 0);

    const auto a = sample_quantum_equilibrium(s, 0.2, 1000, 42);
    const auto b = sample_quantum_equilibrium(s, 0.2, 1000, 42);
    REQUIRE(a.size() == 1000);
    CHECK(std::memcmp(a.positions.data(), b.positions.data(), sizeof(Vec2) * a.size()) == 0);
    const auto c = sample_quantum_equilibrium(s, 0.2, 1000, 43);
    CHECK(c.positions != a.positions);
    // Counter-based draws: a prefix of a larger ensemble is the smaller ensemble.
    const auto longer = sample_quantum_equilibrium(s, 0.2, 1500, 42);
    CHECK(std::equal(a.positions.begin(), a.positions.end(), longer.positions.begin()));

    const int bins = 50;
    const std::size_t n = 100000;
    for (double t : {0.0, 0.13}) {
        const auto e = sample_quantum_equilibrium(s, t, n, 2024);
        for (const auto& x : e.positions) CHECK((x[0] >= 0.0 && x[0] <= 1.0));
        const auto observed = ensemble_histogram(e, s, bins);
        const auto expected = two_mode_bins(s, t, bins);
        double chi2 = 0.0;
        for (int i = 0; i < bins; ++i) chi2 += std::pow(observed[i] * n - expected[i] * n, 2) / (expected[i] * n);
        const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(bins - 1), chi2));
        CHECK(p > 0.01);
        const auto library = density_histogram(s, t, bins);
        for (int i = 0; i < bins; ++i) CHECK(library[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }

    const auto v = sample_quantum_equilibrium(catalog::oscillator_vortex(), 0.0, 2000, 3);
    const auto dom = catalog::oscillator_vortex().characteristic_domain();
    for (const auto& x : v.positions)
        CHECK((x[0] >= dom[0][0] && x[0] <= dom[1][0] && x[1] >= dom[0][1] && x[1] <= dom[1][1]));
}

TEST_CASE("ensemble evolution is equivariant") {
    const auto s = catalog::box_two_mode();
    const std::size_t n = 100000;
    const auto e = sample_quantum_equilibrium(s, 0.0, n, 11);
    BohmianOptions o;
    o.tol = 1e-6;
    const double t1 = 2.5 * beat_period(s);
    const auto ev = evolve_ensemble(e, s, t1, o);
    CHECK(ev.failures.empty());
    CHECK(ev.ensemble.t == t1);
    const auto h1 = ensemble_histogram(ev.ensemble, s);
    CHECK(l1_distance(h1, two_mode_bins(s, t1, 50)) < 0.02);
    // The density at t1 differs from the initial one, so the check is not vacuous.
    CHECK(l1_distance(two_mode_bins(s, 0.0, 50), two_mode_bins(s, t1, 50)) > 0.2);

    const auto other = sample_quantum_equilibrium(s, 0.0, n, 12);
    CHECK(l1_distance(ensemble_histogram(other, s), ensemble_histogram(e, s)) < 0.03);

    const auto same = evolve_ensemble(e, s, 0.0, o);
    CHECK(same.ensemble.positions == e.positions);
}

TEST_CASE("ensemble evolution keeps member order and is thread independent") {
    const auto s = catalog::box_vortex_2d();
    const auto e = sample_quantum_equilibrium(s, 0.0, 64, 5);
    const auto one = evolve_ensemble(e, s, 0.7, {}, 1);
    const auto four = evolve_ensemble(e, s, 0.7, {}, 4);
    CHECK(std::memcmp(one.ensemble.positions.data(), four.ensemble.positions.data(),
                      sizeof(Vec2) * e.size()) == 0);
    for (std::size_t k : {0, 17, 63}) {
        const auto traj = integrate_bohmian(s, e.positions[k], 0.0, 0.7);
        CHECK(traj.back().x == one.ensemble.positions[k]);
    }
}

TEST_CASE("Bohmian Lyapunov estimates") {
    const auto rest = bohmian_lyapunov(catalog::oscillator_eigenstate({1, 0}), {0.4, 0.0}, 0.0, 50.0);
    CHECK(std::abs(rest.estimate) < 1e-6);
    CHECK(rest.running_estimate.size() == 50);

    const auto regular = bohmian_lyapunov(catalog::box_two_mode(), {0.3, 0.0}, 0.0, 500.0);
    CHECK(regular.estimate <= 0.01);
    CHECK_FALSE(regular.halted);

    const auto chaotic = bohmian_lyapunov(catalog::anisotropic_chaotic(), {-0.5, 0.2}, 0.0, 1000.0);
    CHECK_FALSE(chaotic.halted);
    CHECK(chaotic.estimate > 0.01);
    CHECK(chaotic.horizon_reached == doctest::Approx(1000.0));

    CHECK_THROWS_AS(bohmian_lyapunov(catalog::box_two_mode(), {0.3, 0.0}, 0.0, 0.0), DomainError);
}

TEST_CASE("circulation is quantized") {
    const auto vortex = catalog::oscillator_vortex();
    CHECK(circulation(vortex, square_loop({0.0, 0.0}, 0.5), 0.3).winding == 1);
    CHECK(circulation(vortex, square_loop({1.0, 1.0}, 0.4), 0.3).winding == 0);
    // Clockwise traversal flips the sign.
    auto loop = square_loop({0.0, 0.0}, 1.0);
    std::reverse(loop.begin(), loop.end());
    CHECK(circulation(vortex, loop, 0.0).winding == -1);

    // (x + i y)^2 - a^2 has two same-sign vortices at (+-a, 0).
    const double a = 0.8;
    const auto pair = catalog::oscillator_vortex_pair(a);
    CHECK(circulation(pair, square_loop({0.0, 0.0}, 1.5), 0.0).winding == 2);
    CHECK(circulation(pair, square_loop({a, 0.0}, 0.3), 0.0).winding == 1);
    CHECK(circulation(pair, square_loop({0.0, 0.0}, 0.3), 0.0).winding == 0);

    for (double t : {0.0, 0.4, 1.9}) {
        const auto r = circulation(catalog::box_vortex_2d(), square_loop({0.5, 0.5}, 0.45), t);
        CHECK(r.residual <= 1e-6 * 2 * M_PI);
        int enclosed = 0;
        for (const auto& n : quantum::find_nodes(catalog::box_vortex_2d(), {{0.05, 0.05}, {0.95, 0.95}}, t))
            enclosed += n.winding;
        CHECK(r.winding == enclosed);
    }

    CHECK_THROWS_AS(circulation(vortex, {{-1.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}, 0.0), NodeSingularity);
    CHECK_THROWS_AS(circulation(vortex, {{0.0, 0.0}, {1.0, 0.0}}, 0.0), DomainError);
    CHECK_THROWS_AS(circulation(catalog::box_two_mode(), square_loop({0.5, 0.0}, 0.1), 0.0), DomainError);
}

TEST_CASE("trajectories never cross") {
    const auto s = catalog::box_vortex_2d();
    BohmianOptions o;
    o.sample_interval = 0.02;
    std::vector<BohmianTrajectory> paths;
    for (const Vec2 x0 : {Vec2{0.3, 0.6}, Vec2{0.31, 0.6}, Vec2{0.7, 0.2}, Vec2{0.5, 0.85}})
        paths.push_back(integrate_bohmian(s, x0, 0.0, 10.0, o));
    for (std::size_t i = 0; i < paths.size(); ++i)
        for (std::size_t j = 0; j < i; ++j) {
            REQUIRE(paths[i].samples.size() == paths[j].samples.size());
            double closest = 1e300;
            for (std::size_t k = 0; k < paths[i].samples.size(); ++k) {
                const auto& p = paths[i].samples[k].x;
                const auto& q = paths[j].samples[k].x;
                closest = std::min(closest, std::hypot(p[0] - q[0], p[1] - q[1]));
            }
            CHECK(closest > 0.0);
        }

    // 1D flow preserves order.
    const auto two = catalog::box_two_mode();
    const auto lo = integrate_bohmian(two, {0.4, 0.0}, 0.0, 5.0, o);
    const auto hi = integrate_bohmian(two, {0.41, 0.0}, 0.0, 5.0, o);
    for (std::size_t k = 0; k < lo.samples.size(); ++k) CHECK(lo.samples[k].x[0] < hi.samples[k].x[0]);
}

TEST_CASE("reflected trajectories solve the reflected problem") {
    // Odd n_x only: psi(1 - x, y) = psi(x, y).
    const Superposition s(SolvableSystem::box({1.0, 1.0}, {1.0, 1.0, 2}),
                          {{1.0, {1, 2}}, {Complex(0.0, 0.7), {3, 2}}, {0.4, {1, 3}}});
    BohmianOptions o;
    o.tol = 1e-11;
    o.sample_interval = 0.05;
    const auto a = integrate_bohmian(s, {0.2, 0.3}, 0.0, 5.0, o);
    const auto b = integrate_bohmian(s, {0.8, 0.3}, 0.0, 5.0, o);
    REQUIRE(a.samples.size() == b.samples.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < a.samples.size(); ++k)
        worst = std::max(worst, std::hypot(a.samples[k].x[0] - (1.0 - b.samples[k].x[0]),
                                           a.samples[k].x[1] - b.samples[k].x[1]));
    CHECK(worst <= o.tol);
}

}
