#pragma once

// Physical systems shared by the classical, quantum and semiclassical layers.
// Units: atomic (hbar = m = 1 by default); the diamagnetic problem is in
// scaled units when built from a scaled energy.

#include <array>
#include <string>

namespace pilotwave {

using Vec2 = std::array<double, 2>;

struct SystemConstants {
    double hbar = 1.0;
    double mass = 1.0;
    int dimension = 1;

    void validate() const;
};

// Hydrogen in a uniform magnetic field along z, azimuthal quantum number 0.
// Either scaled (B = 1, E = epsilon) or physical (E, B); the scaled energy is
// always derived as E * B^(-2/3), never stored separately.
class DiamagneticSystem {
public:
    enum class Representation { scaled, physical };

    static DiamagneticSystem scaled(double epsilon);
    static DiamagneticSystem physical(double energy, double field);

    Representation representation() const { return representation_; }
    double energy() const { return energy_; }
    double field() const { return field_; }
    double epsilon() const;

    // Coulomb + diamagnetic potential in cylindrical coordinates (rho, z).
    double physical_potential(double rho, double z) const;

private:
    DiamagneticSystem(Representation r, double e, double b);
    Representation representation_;
    double energy_;
    double field_;
};

// Systems with closed-form classical flow and eigenbasis.
//
//   free      periodic cell of size lengths (quantum states are plane waves on
//             the cell; classical/semiclassical routines treat space as unbounded)
//   box       hard walls on [0, Lx] (x [0, Ly])
//   harmonic  V = m/2 (wx^2 x^2 + wy^2 y^2)
class SolvableSystem {
public:
    enum class Kind { free, box, harmonic };

    static SolvableSystem free_particle(Vec2 cell, SystemConstants c = {});
    static SolvableSystem box(Vec2 lengths, SystemConstants c = {});
    static SolvableSystem harmonic(Vec2 omegas, SystemConstants c = {});

    Kind kind() const { return kind_; }
    int dimension() const { return constants_.dimension; }
    const SystemConstants& constants() const { return constants_; }
    double hbar() const { return constants_.hbar; }
    double mass() const { return constants_.mass; }
    const Vec2& lengths() const { return lengths_; }
    const Vec2& omegas() const { return omegas_; }

    double potential(const Vec2& x) const;
    Vec2 potential_gradient(const Vec2& x) const;

    bool inside(const Vec2& x) const;

    std::string name() const;

private:
    SolvableSystem(Kind k, Vec2 lengths, Vec2 omegas, SystemConstants c);
    Kind kind_;
    Vec2 lengths_{};
    Vec2 omegas_{};
    SystemConstants constants_;
};

}  // namespace pilotwave
