#pragma once

#include <array>
#include <stdexcept>
#include <string>

namespace pilotwave {

// Precondition on a physical argument violated (outside a box, non-finite state...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Polar fields requested where the wavefunction vanishes or is within the
// node guard band; sigma, v and Q are undefined there.
class NodeSingularity : public std::runtime_error {
public:
    NodeSingularity(const std::string& what, std::array<double, 2> where, double rho)
        : std::runtime_error(what), position(where), amplitude(rho) {}
    std::array<double, 2> position;
    double amplitude;
};

// A numerical procedure could not deliver its contract (quantization residual,
// failed root refinement, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file or scenario; field names the offending entry
// ("system.omegas", "line 4", ...).
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field_name, const std::string& what)
        : std::invalid_argument(field_name.empty() ? what : field_name + ": " + what),
          field(field_name) {}
    std::string field;
};

}  // namespace pilotwave
