#include "pilotwave/systems.hpp"

#include <cmath>
#include <sstream>

#include "pilotwave/errors.hpp"

namespace pilotwave {

void SystemConstants::validate() const {
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw DomainError("hbar must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("mass must be positive");
    if (dimension != 1 && dimension != 2) throw DomainError("dimension must be 1 or 2");
}

DiamagneticSystem::DiamagneticSystem(Representation r, double e, double b)
    : representation_(r), energy_(e), field_(b) {
    if (!std::isfinite(e)) throw DomainError("diamagnetic energy must be finite");
    if (!(b > 0.0) || !std::isfinite(b)) throw DomainError("magnetic field must be positive");
}

DiamagneticSystem DiamagneticSystem::scaled(double epsilon) {
    return DiamagneticSystem(Representation::scaled, epsilon, 1.0);
}

DiamagneticSystem DiamagneticSystem::physical(double energy, double field) {
    return DiamagneticSystem(Representation::physical, energy, field);
}

double DiamagneticSystem::epsilon() const {
    return representation_ == Representation::scaled ? energy_
                                                     : energy_ * std::pow(field_, -2.0 / 3.0);
}

double DiamagneticSystem::physical_potential(double rho, double z) const {
    const double r = std::hypot(rho, z);
    return -1.0 / r + field_ * field_ * rho * rho / 8.0;
}

SolvableSystem::SolvableSystem(Kind k, Vec2 lengths, Vec2 omegas, SystemConstants c)
    : kind_(k), lengths_(lengths), omegas_(omegas), constants_(c) {
    constants_.validate();
    const int d = constants_.dimension;
    if (kind_ == Kind::harmonic) {
        for (int i = 0; i < d; ++i)
            if (!(omegas_[i] > 0.0) || !std::isfinite(omegas_[i]))
                throw DomainError("oscillator frequencies must be positive");
    } else {
        for (int i = 0; i < d; ++i)
            if (!(lengths_[i] > 0.0) || !std::isfinite(lengths_[i]))
                throw DomainError("box/cell lengths must be positive");
    }
    if (d == 1) {
        lengths_[1] = 0.0;
        omegas_[1] = 0.0;
    }
}

SolvableSystem SolvableSystem::free_particle(Vec2 cell, SystemConstants c) {
    return SolvableSystem(Kind::free, cell, {0.0, 0.0}, c);
}

SolvableSystem SolvableSystem::box(Vec2 lengths, SystemConstants c) {
    return SolvableSystem(Kind::box, lengths, {0.0, 0.0}, c);
}

SolvableSystem SolvableSystem::harmonic(Vec2 omegas, SystemConstants c) {
    return SolvableSystem(Kind::harmonic, {0.0, 0.0}, omegas, c);
}

double SolvableSystem::potential(const Vec2& x) const {
    if (kind_ != Kind::harmonic) return 0.0;
    double v = 0.0;
    for (int i = 0; i < dimension(); ++i) v += omegas_[i] * omegas_[i] * x[i] * x[i];
    return 0.5 * mass() * v;
}

Vec2 SolvableSystem::potential_gradient(const Vec2& x) const {
    Vec2 g{0.0, 0.0};
    if (kind_ != Kind::harmonic) return g;
    for (int i = 0; i < dimension(); ++i) g[i] = mass() * omegas_[i] * omegas_[i] * x[i];
    return g;
}

bool SolvableSystem::inside(const Vec2& x) const {
    if (kind_ != Kind::box) return true;
    for (int i = 0; i < dimension(); ++i)
        if (x[i] < 0.0 || x[i] > lengths_[i]) return false;
    return true;
}

std::string SolvableSystem::name() const {
    std::ostringstream os;
    os << dimension() << "D ";
    switch (kind_) {
        case Kind::free: os << "free particle"; break;
        case Kind::box: os << "box"; break;
        case Kind::harmonic: os << "harmonic oscillator"; break;
    }
    return os.str();
}

}  // namespace pilotwave
