#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "pilotwave/classical.hpp"

using namespace pilotwave;
using namespace pilotwave::classical;

namespace {

// Central finite-difference gradient of the pseudo-Hamiltonian.
std::array<double, 4> fd_gradient(const DiamagneticSystem& sys, const PhaseState& s) {
    std::array<double, 4> g{};
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i) {
        PhaseState a = s, b = s;
        double* pa = i < 2 ? &a.q[i] : &a.p[i - 2];
        double* pb = i < 2 ? &b.q[i] : &b.p[i - 2];
        *pa += h;
        *pb -= h;
        g[i] = (pseudo_energy(sys, a) - pseudo_energy(sys, b)) / (2 * h);
    }
    return g;
}

double path_distance(const Trajectory& a, const Trajectory& b) {
    double d = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < n; ++k)
        for (int i = 0; i < 2; ++i) {
            d = std::max(d, std::abs(a.samples[k].q[i] - b.samples[k].q[i]));
            d = std::max(d, std::abs(a.samples[k].p[i] - b.samples[k].p[i]));
        }
    return d;
}

struct Bounds {
    double xmin, xmax, ymin, ymax;
};

Bounds bounds_of(const std::vector<Vec2>& pts) {
    Bounds b{1e300, -1e300, 1e300, -1e300};
    for (const auto& p : pts) {
        b.xmin = std::min(b.xmin, p[0]);
        b.xmax = std::max(b.xmax, p[0]);
        b.ymin = std::min(b.ymin, p[1]);
        b.ymax = std::max(b.ymax, p[1]);
    }
    return b;
}

// Box-counting dimension from the slope of log N(n) between n and 4n boxes per side.
double box_dimension(const std::vector<Vec2>& pts, int n) {
    const Bounds b = bounds_of(pts);
    auto count = [&](int m) {
        std::set<long> cells;
        for (const auto& p : pts) {
            const long i = std::min<long>(m - 1, static_cast<long>((p[0] - b.xmin) / (b.xmax - b.xmin) * m));
            const long j = std::min<long>(m - 1, static_cast<long>((p[1] - b.ymin) / (b.ymax - b.ymin) * m));
            cells.insert(i * m + j);
        }
        return static_cast<double>(cells.size());
    };
    return std::log(count(4 * n) / count(n)) / std::log(4.0);
}

// Local thickness: ratio of minor to major principal spread of the k nearest
// neighbours of each point (normalized coordinates); returns the median.
double median_local_thickness(const std::vector<Vec2>& pts, std::size_t k) {
    const Bounds b = bounds_of(pts);
    const double sx = b.xmax - b.xmin, sy = b.ymax - b.ymin;
    std::vector<double> ratios;
    std::vector<std::pair<double, std::size_t>> d(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = 0; j < pts.size(); ++j) {
            const double dx = (pts[j][0] - pts[i][0]) / sx, dy = (pts[j][1] - pts[i][1]) / sy;
            d[j] = {dx * dx + dy * dy, j};
        }
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        double mx = 0, my = 0;
        for (std::size_t a = 0; a < k; ++a) {
            mx += pts[d[a].second][0] / sx;
            my += pts[d[a].second][1] / sy;
        }
        mx /= k;
        my /= k;
        double cxx = 0, cyy = 0, cxy = 0;
        for (std::size_t a = 0; a < k; ++a) {
            const double dx = pts[d[a].second][0] / sx - mx, dy = pts[d[a].second][1] / sy - my;
            cxx += dx * dx;
            cyy += dy * dy;
            cxy += dx * dy;
        }
        const double tr = cxx + cyy, det = cxx * cyy - cxy * cxy;
        const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
        ratios.push_back(std::sqrt(std::max(0.0, tr / 2 - disc) / (tr / 2 + disc)));
    }
    std::sort(ratios.begin(), ratios.end());
    return ratios[ratios.size() / 2];
}

}  // namespace

TEST_SUITE("classical") {

TEST_CASE("regularized derivative at a symmetric rest point") {
    const auto sys = DiamagneticSystem::scaled(-0.4);
    PhaseState s;
    s.q = {0.8, 0.8};
    const auto d = regularized_derivative(sys, s);
    CHECK(d.dq[0] == 0.0);
    CHECK(d.dq[1] == 0.0);
    CHECK(d.dp[0] == doctest::Approx(d.dp[1]).epsilon(1e-15));
    CHECK(d.dt == doctest::Approx(1.28));
}

TEST_CASE("regularized derivative matches the finite-difference gradient") {
    const auto sys = DiamagneticSystem::scaled(-1.0);
    PhaseState unit;
    unit.q = {1.0, 0.0};
    const auto g = fd_gradient(sys, unit);
    CHECK(regularized_derivative(sys, unit).dp[0] == doctest::Approx(-g[0]).epsilon(1e-8));

    const std::vector<std::array<double, 4>> states{
        {0.3, -1.2, 0.7, 0.4}, {1.7, 0.9, -0.2, 1.1}, {-0.5, 2.1, 1.9, -0.8}, {2.4, 1.3, 0.0, 0.6}};
    for (double eps : {-1.0, -0.15, -0.5}) {
        const auto s2 = DiamagneticSystem::scaled(eps);
        for (const auto& v : states) {
            PhaseState s;
            s.q = {v[0], v[1]};
            s.p = {v[2], v[3]};
            const auto d = regularized_derivative(s2, s);
            const auto fd = fd_gradient(s2, s);
            const double scale = std::max({std::abs(fd[0]), std::abs(fd[1]), 1.0});
            CHECK(std::abs(d.dp[0] + fd[0]) / scale < 1e-8);
            CHECK(std::abs(d.dp[1] + fd[1]) / scale < 1e-8);
            CHECK(std::abs(d.dq[0] - fd[2]) / scale < 1e-8);
            CHECK(std::abs(d.dq[1] - fd[3]) / scale < 1e-8);
            CHECK(d.dt == doctest::Approx(v[0] * v[0] + v[1] * v[1]));
        }
    }
}

TEST_CASE("regularized derivative rejects non-finite states") {
    const auto sys = DiamagneticSystem::scaled(-1.0);
    PhaseState s;
    s.p[1] = std::nan("");
    CHECK_THROWS_AS(regularized_derivative(sys, s), DomainError);
}

TEST_CASE("coordinate maps") {
    const auto reg = regularize(0.7, -0.3, 0.2, 0.5, 1.5);
    const auto c = to_cylindrical(reg);
    CHECK(c.rho == doctest::Approx(0.7));
    CHECK(c.z == doctest::Approx(-0.3));
    CHECK(c.p_rho == doctest::Approx(0.2));
    CHECK(c.p_z == doctest::Approx(0.5));
    CHECK(c.t == 1.5);

    // On-shell physical state lands on the h = 2 shell.
    const auto sys = DiamagneticSystem::scaled(-0.6);
    const double rho = 0.9, z = 0.4, r = std::hypot(rho, z);
    const double v = std::sqrt(2.0 * (-0.6 + 1.0 / r - rho * rho / 8.0));
    const auto on_shell = regularize(rho, z, v * 0.6, v * 0.8);
    CHECK(pseudo_energy(sys, on_shell) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(pseudo_energy(sys, launch_from_nucleus(0.37)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("physical representation stores the derived scaled energy") {
    const auto sys = DiamagneticSystem::physical(-0.005, 1e-3);
    CHECK(sys.epsilon() == doctest::Approx(-0.5).epsilon(1e-13));
    CHECK_THROWS_AS(DiamagneticSystem::physical(-1.0, 0.0), DomainError);
}

TEST_CASE("pseudo-energy drift stays within ten times the tolerance") {
    for (double eps : {-1.0, -0.15}) {
        const auto sys = DiamagneticSystem::scaled(eps);
        for (double tol : {1e-10, 1e-11, 1e-12}) {
            IntegrationOptions io;
            io.tol = tol;
            const auto tr = integrate_classical(sys, launch_from_nucleus(0.3), 500.0, io);
            CHECK(tr.max_drift() <= 10.0 * tol);
            CHECK(tr.samples.back().t == doctest::Approx(500.0).epsilon(1e-14));
        }
    }
    const auto ho = SolvableSystem::harmonic({1.0, std::sqrt(2.0)}, {1.0, 1.0, 2});
    PhaseState s;
    s.q = {0.5, -0.2};
    s.p = {0.1, 0.9};
    const auto tr = integrate_classical(ho, s, 300.0);
    CHECK(tr.max_drift() <= 1e-9);
}

TEST_CASE("integration preconditions") {
    const auto sys = DiamagneticSystem::scaled(-1.0);
    PhaseState off = launch_from_nucleus(0.2);
    off.p[0] *= 1.01;
    CHECK_THROWS_AS(integrate_classical(sys, off, 1.0), DomainError);
    CHECK_THROWS_AS(integrate_classical(sys, launch_from_nucleus(0.2), -1.0), DomainError);
    const auto box = SolvableSystem::box({1.0, 1.0}, {1.0, 1.0, 1});
    PhaseState outside;
    outside.q = {1.5, 0.0};
    CHECK_THROWS_AS(integrate_classical(box, outside, 1.0), DomainError);
}

TEST_CASE("harmonic oscillator returns after one period") {
    const double w = 1.3;
    const auto ho1 = SolvableSystem::harmonic({w, 1.0}, {1.0, 1.0, 1});
    PhaseState s;
    s.q = {0.7, 0.0};
    s.p = {-0.4, 0.0};
    auto tr = integrate_classical(ho1, s, 2 * M_PI / w);
    CHECK(std::abs(tr.samples.back().q[0] - s.q[0]) < 1e-8);
    CHECK(std::abs(tr.samples.back().p[0] - s.p[0]) < 1e-8);

    const auto ho2 = SolvableSystem::harmonic({1.0, 2.0}, {1.0, 2.0, 2});
    s.q = {0.3, -0.6};
    s.p = {1.1, 0.25};
    tr = integrate_classical(ho2, s, 2 * M_PI);
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(tr.samples.back().q[i] - s.q[i]) < 1e-8);
        CHECK(std::abs(tr.samples.back().p[i] - s.p[i]) < 1e-8);
    }
}

TEST_CASE("hard-wall box reflection") {
    const auto box = SolvableSystem::box({2.0, 1.0}, {1.0, 1.0, 2});
    PhaseState s;
    s.q = {0.5, 0.5};
    s.p = {1.0, 0.25};
    IntegrationOptions io;
    io.sample_interval = 0.5;
    const auto tr = integrate_classical(box, s, 2.0, io);
    const auto& end = tr.samples.back();
    CHECK(end.q[0] == doctest::Approx(1.5));
    CHECK(end.p[0] == doctest::Approx(-1.0));
    CHECK(end.q[1] == doctest::Approx(1.0));
    CHECK(tr.max_drift() == 0.0);
}

TEST_CASE("scaling transformation maps physical onto scaled trajectories") {
    const double b = 1e-3, eps = -0.5;
    const auto phys = DiamagneticSystem::physical(eps * std::cbrt(b * b), b);
    const auto scaled = DiamagneticSystem::scaled(eps);
    const double alpha = 0.45;
    IntegrationOptions io_s, io_p;
    io_s.tol = io_p.tol = 1e-12;
    io_s.sample_interval = 0.02;
    io_p.sample_interval = 0.02 / std::cbrt(b);
    const auto ts = integrate_classical(scaled, launch_from_nucleus(alpha), 30.0, io_s);
    const auto tp = integrate_classical(phys, launch_from_nucleus(alpha), 30.0 / b, io_p);
    REQUIRE(ts.size() > 100);
    Trajectory mapped = tp;
    for (auto& st : mapped.samples) st = to_scaled(phys, st);
    const std::size_t n = std::min(ts.size(), mapped.size()) - 1;
    Trajectory a = ts, c = mapped;
    a.samples.resize(n);
    c.samples.resize(n);
    CHECK(path_distance(a, c) < 1e-6);
    for (std::size_t k = 97; k < n; k += 97)
        CHECK(std::abs(from_scaled(phys, ts.samples[k]).t - tp.samples[k].t) / tp.samples[k].t < 1e-6);
}

TEST_CASE("z reflection maps trajectories onto trajectories") {
    const auto sys = DiamagneticSystem::scaled(-0.15);
    IntegrationOptions io;
    io.sample_interval = 0.05;
    const double alpha = 0.31;
    const auto up = integrate_classical(sys, launch_from_nucleus(alpha), 50.0, io);
    const auto down = integrate_classical(sys, launch_from_nucleus(M_PI / 2 - alpha), 50.0, io);
    REQUIRE(up.size() == down.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < up.size(); ++k) {
        const auto a = to_cylindrical(up.samples[k]);
        const auto b = to_cylindrical(down.samples[k]);
        worst = std::max({worst, std::abs(a.rho - b.rho), std::abs(a.z + b.z)});
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("regular trajectory stays inside the accessible region") {
    const auto sys = DiamagneticSystem::scaled(-1.0);
    const AccessibleRegion region(sys);
    CHECK(region.z_max() == doctest::Approx(1.0));
    const auto edge = region.boundary(101);
    for (const auto& p : edge)
        if (p[0] > 0.0) CHECK(sys.physical_potential(p[0], p[1]) == doctest::Approx(-1.0).epsilon(1e-10));
    IntegrationOptions io;
    io.sample_interval = 0.01;
    for (double alpha : {0.1, 0.5, 0.9, 1.3}) {
        const auto tr = integrate_classical(sys, launch_from_nucleus(alpha), 200.0, io);
        for (const auto& c : to_physical(tr))
            CHECK(sys.physical_potential(c.rho, c.z) <= -1.0 + 1e-8);
        const double cov = coverage_fraction(sys, tr);
        CHECK(cov > 0.0);
        CHECK(cov <= 1.0);
    }
}

TEST_CASE("Lyapunov estimates vanish for integrable systems") {
    PhaseState s;
    s.q = {0.4, 0.3};
    s.p = {0.2, -0.5};
    const auto ho1 = SolvableSystem::harmonic({1.0, 1.0}, {1.0, 1.0, 1});
    const auto l1 = lyapunov_exponent(ho1, s, 2000 * M_PI);
    CHECK(std::abs(l1.lyapunov_estimate) < 0.01);

    const auto ho2 = SolvableSystem::harmonic({1.0, std::sqrt(2.0)}, {1.0, 1.0, 2});
    const auto l2 = lyapunov_exponent(ho2, s, 2000 * M_PI);
    CHECK(std::abs(l2.lyapunov_estimate) < 0.01);
    CHECK(l2.running_estimate.size() == static_cast<std::size_t>(2000 * M_PI));

    PhaseState b;
    b.q = {0.3, 0.0};
    b.p = {0.9, 0.0};
    const auto box = SolvableSystem::box({1.0, 1.0}, {1.0, 1.0, 1});
    CHECK(std::abs(lyapunov_exponent(box, b, 1000.0).lyapunov_estimate) < 0.01);
}

TEST_CASE("Lyapunov estimate separates the diamagnetic regimes") {
    const auto chaotic = lyapunov_exponent(DiamagneticSystem::scaled(-0.15), launch_from_nucleus(0.4), 1000.0);
    const auto regular = lyapunov_exponent(DiamagneticSystem::scaled(-1.0), launch_from_nucleus(0.4), 1000.0);
    CHECK(chaotic.lyapunov_estimate > 0.02);
    CHECK(std::abs(regular.lyapunov_estimate) * 10.0 < chaotic.lyapunov_estimate);
    // Deterministic for fixed inputs.
    const auto again = lyapunov_exponent(DiamagneticSystem::scaled(-0.15), launch_from_nucleus(0.4), 1000.0);
    CHECK(again.lyapunov_estimate == chaotic.lyapunov_estimate);
    CHECK_THROWS_AS(lyapunov_exponent(DiamagneticSystem::scaled(-1.0), launch_from_nucleus(0.4), 0.0), DomainError);
}

TEST_CASE("section of a commensurate oscillator has finitely many points") {
    const auto ho = SolvableSystem::harmonic({1.0, 2.0}, {1.0, 1.0, 2});
    PhaseState s;
    s.q = {0.5, 0.0};
    s.p = {0.3, 0.8};
    IntegrationOptions io;
    io.sample_interval = 0.05;
    const auto tr = integrate_classical(ho, s, 200 * M_PI, io);
    const auto pts = poincare_section(ho, tr, SectionPlane{});
    CHECK(pts.size() > 150);
    std::set<std::pair<long, long>> distinct;
    for (const auto& p : pts) distinct.insert({std::lround(p[0] * 1e6), std::lround(p[1] * 1e6)});
    CHECK(distinct.size() <= 2);
}

TEST_CASE("section orientation and empty sections") {
    const auto ho = SolvableSystem::harmonic({1.0, 1.0}, {1.0, 1.0, 1});
    PhaseState s;
    s.q = {1.0, 0.0};
    IntegrationOptions io;
    io.sample_interval = 0.1;
    const auto tr = integrate_classical(ho, s, 10 * M_PI + 0.1, io);
    SectionPlane plane;
    plane.normal = {1.0, 0.0, 0.0, 0.0};
    plane.report = {0, 2};
    const auto up = poincare_section(ho, tr, plane);
    REQUIRE(up.size() == 5);
    for (const auto& p : up) {
        CHECK(std::abs(p[0]) < 1e-9);
        CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    plane.orientation = -1;
    for (const auto& p : poincare_section(ho, tr, plane)) CHECK(p[1] == doctest::Approx(-1.0).epsilon(1e-9));
    plane.offset = 5.0;
    CHECK(poincare_section(ho, tr, plane).empty());
}

TEST_CASE("regular and chaotic sections differ in geometry") {
    SectionPlane nu_zero;
    IntegrationOptions io;
    io.sample_interval = 0.05;
    const auto reg_sys = DiamagneticSystem::scaled(-1.0);
    const auto reg = poincare_section(reg_sys, integrate_classical(reg_sys, launch_from_nucleus(0.6), 20000.0, io), nu_zero);
    REQUIRE(reg.size() > 2000);
    CHECK(median_local_thickness(reg, 12) < 0.01);
    CHECK(box_dimension(reg, 4) < 1.3);

    const auto cha_sys = DiamagneticSystem::scaled(-0.15);
    const auto cha = poincare_section(cha_sys, integrate_classical(cha_sys, launch_from_nucleus(0.6), 60000.0, io), nu_zero);
    REQUIRE(cha.size() > 2000);
    CHECK(median_local_thickness(cha, 12) > 0.3);
    CHECK(std::abs(box_dimension(cha, 4) - 2.0) < 0.2);
}

}
