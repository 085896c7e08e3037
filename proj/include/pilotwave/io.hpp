#pragma once

// File formats: CSV tables and JSON documents exchanged by the CLI, the Python
// module and the tests. Numbers are written with 17 significant digits so a
// re-run reproduces the bytes exactly.

#include <algorithm>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pilotwave/errors.hpp"
#include "pilotwave/bohmian.hpp"
#include "pilotwave/classical.hpp"
#include "pilotwave/quantum.hpp"
#include "pilotwave/semiclassical.hpp"
#include "pilotwave/systems.hpp"

namespace pilotwave::io {

using nlohmann::json;

std::string format_number(double v);

// ---- strict JSON objects ------------------------------------------------------

// Strict reader: every key must be consumed, unknown keys are an error.
class Fields {
public:
    Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
        if (!obj_.is_object()) throw ConfigError(where_, "expected an object");
    }
    std::string path(const std::string& key) const { return where_ + "." + key; }
    bool has(const std::string& key) const { return obj_.contains(key); }
    const json& get(const std::string& key) {
        if (!obj_.contains(key)) throw ConfigError(path(key), "missing required field");
        used_.push_back(key);
        return obj_.at(key);
    }
    double number(const std::string& key) {
        const auto& v = get(key);
        if (!v.is_number()) throw ConfigError(path(key), "expected a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
    int integer(const std::string& key, int fallback) {
        if (!has(key)) return fallback;
        const auto& v = get(key);
        if (!v.is_number_integer()) throw ConfigError(path(key), "expected an integer");
        return v.get<int>();
    }
    std::string string(const std::string& key) {
        const auto& v = get(key);
        if (!v.is_string()) throw ConfigError(path(key), "expected a string");
        return v.get<std::string>();
    }
    Vec2 pair(const std::string& key, int dimension) {
        const auto& v = get(key);
        if (!v.is_array() || static_cast<int>(v.size()) != dimension)
            throw ConfigError(path(key), "expected " + std::to_string(dimension) + " numbers");
        Vec2 out{0.0, 0.0};
        for (int i = 0; i < dimension; ++i) {
            if (!v[i].is_number()) throw ConfigError(path(key), "expected numbers");
            out[i] = v[i].get<double>();
        }
        return out;
    }
    void finish() const {
        for (const auto& [key, _] : obj_.items())
            if (std::find(used_.begin(), used_.end(), key) == used_.end())
                throw ConfigError(path(key), "unknown field");
    }

private:
    const json& obj_;
    std::string where_;
    std::vector<std::string> used_;
};

// ---- generic tables ----------------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    // Throws ConfigError naming the column when it is absent.
    std::size_t column(const std::string& name) const;
    std::vector<double> values(const std::string& name) const;
};

void write_table(std::ostream& out, const Table& table);
// Throws ConfigError with the line number on ragged or non-numeric rows.
Table read_table(std::istream& in);
Table read_table(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

// Throws ConfigError carrying the line of a syntax error.
json parse_json(const std::string& text, const std::string& source = "");
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);

// ---- systems and states --------------------------------------------------------

// {"type": "free"|"box"|"harmonic", "dimension", "hbar", "mass",
//  "cell"|"lengths"|"omegas": [..]}
SolvableSystem solvable_system_from_json(const json& spec, const std::string& where = "system");
json to_json(const SolvableSystem& system);

// {"type": "diamagnetic", "epsilon"} or {"type": "diamagnetic", "energy", "field"}
DiamagneticSystem diamagnetic_system_from_json(const json& spec, const std::string& where = "system");

struct LoadedSuperposition {
    quantum::Superposition state;
    // Set when the input norm differs from 1 by more than 1e-6.
    std::optional<std::string> warning;
};

// {"system": {...}, "terms": [{"c_re", "c_im", "n": [..]}]}
LoadedSuperposition superposition_from_json(const json& spec, const std::string& where = "state");
json to_json(const quantum::Superposition& state);

// ---- classical --------------------------------------------------------------------

// t,q1,q2,p1,p2,invariant_drift
Table trajectory_table(const classical::Trajectory& trajectory);
// rho,z
Table boundary_table(const classical::AccessibleRegion& region, int points = 200);
json orbit_catalog(const std::vector<classical::ClosedOrbit>& orbits);

// ---- Bohmian ---------------------------------------------------------------------

// t,x1[,x2],v1[,v2],Q,rho
Table bohmian_table(const bohmian::BohmianTrajectory& trajectory);
// member_id,x1[,x2]
Table ensemble_table(const bohmian::Ensemble& ensemble, int dimension);
// [{member_id, t, x, rho}]
json node_report(const std::vector<bohmian::MemberFailure>& failures, int dimension);

// ---- semiclassical ---------------------------------------------------------------

// E,mean,oscillatory,total
Table level_density_table(const semiclassical::LevelDensity& density);
// t,abs_C
Table recurrence_table(const semiclassical::RecurrenceSpectrum& spectrum);
// [{peak_t, peak_height, orbit_id, repetition, delta_t}]
json associations(const std::vector<semiclassical::Association>& matches);

}  // namespace pilotwave::io
