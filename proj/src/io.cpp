#include "pilotwave/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pilotwave::io {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

std::size_t line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

std::size_t Table::column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError(name, "column not present in the dataset");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> Table::values(const std::string& name) const {
    const auto c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c]);
    return out;
}

void write_table(std::ostream& out, const Table& table) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
        out << '\n';
    }
}

Table read_table(std::istream& in) {
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        auto cells = split(line, ',');
        if (t.columns.empty()) {
            for (auto& c : cells) t.columns.push_back(trim(c));
            continue;
        }
        if (cells.size() != t.columns.size())
            throw ConfigError("line " + std::to_string(lineno), "expected " + std::to_string(t.columns.size()) + " values");
        std::vector<double> row;
        for (auto& c : cells) {
            c = trim(c);
            if (c == "nan" || c == "inf" || c == "-inf") {
                row.push_back(c == "nan" ? NAN : (c == "inf" ? INFINITY : -INFINITY));
                continue;
            }
            double v = 0.0;
            auto r = std::from_chars(c.data(), c.data() + c.size(), v);
            if (r.ec != std::errc() || r.ptr != c.data() + c.size())
                throw ConfigError("line " + std::to_string(lineno), "non-numeric value '" + c + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open file");
    return read_table(in);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string(), "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const std::string where = (source.empty() ? "" : source + ":") + "line " +
                                  std::to_string(line_of(text, e.byte ? e.byte - 1 : 0));
        throw ConfigError(where, "invalid JSON");
    }
}

json read_json(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const std::filesystem::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

SolvableSystem solvable_system_from_json(const json& spec, const std::string& where) {
    Fields f(spec, where);
    const auto type = f.string("type");
    SystemConstants c;
    c.dimension = f.integer("dimension", 1);
    c.hbar = f.number("hbar", 1.0);
    c.mass = f.number("mass", 1.0);
    if (c.dimension != 1 && c.dimension != 2) throw ConfigError(f.path("dimension"), "must be 1 or 2");
    if (!(c.hbar > 0)) throw ConfigError(f.path("hbar"), "must be positive");
    if (!(c.mass > 0)) throw ConfigError(f.path("mass"), "must be positive");
    auto pad = [&](const std::string& key, double fill) {
        Vec2 v = f.pair(key, c.dimension);
        if (c.dimension == 1) v[1] = fill;
        for (int i = 0; i < c.dimension; ++i)
            if (!(v[i] > 0)) throw ConfigError(f.path(key), "entries must be positive");
        return v;
    };
    std::optional<SolvableSystem> s;
    if (type == "free") s = SolvableSystem::free_particle(pad("cell", 1.0), c);
    else if (type == "box") s = SolvableSystem::box(pad("lengths", 1.0), c);
    else if (type == "harmonic") s = SolvableSystem::harmonic(pad("omegas", 1.0), c);
    else throw ConfigError(f.path("type"), "unknown system type '" + type + "'");
    f.finish();
    return *s;
}

json to_json(const SolvableSystem& system) {
    json j;
    const int d = system.dimension();
    const char* type = system.kind() == SolvableSystem::Kind::free ? "free"
                       : system.kind() == SolvableSystem::Kind::box ? "box" : "harmonic";
    j["type"] = type;
    j["dimension"] = d;
    j["hbar"] = system.hbar();
    j["mass"] = system.mass();
    const Vec2& v = system.kind() == SolvableSystem::Kind::harmonic ? system.omegas() : system.lengths();
    json arr = json::array();
    for (int i = 0; i < d; ++i) arr.push_back(v[i]);
    j[system.kind() == SolvableSystem::Kind::free ? "cell"
      : system.kind() == SolvableSystem::Kind::box ? "lengths" : "omegas"] = arr;
    return j;
}

DiamagneticSystem diamagnetic_system_from_json(const json& spec, const std::string& where) {
    Fields f(spec, where);
    if (f.string("type") != "diamagnetic") throw ConfigError(f.path("type"), "expected 'diamagnetic'");
    std::optional<DiamagneticSystem> s;
    try {
        if (f.has("epsilon")) s = DiamagneticSystem::scaled(f.number("epsilon"));
        else s = DiamagneticSystem::physical(f.number("energy"), f.number("field"));
    } catch (const DomainError& e) {
        throw ConfigError(where, e.what());
    }
    f.finish();
    return *s;
}

LoadedSuperposition superposition_from_json(const json& spec, const std::string& where) {
    Fields f(spec, where);
    const auto system = solvable_system_from_json(f.get("system"), f.path("system"));
    const auto& terms = f.get("terms");
    if (!terms.is_array() || terms.empty()) throw ConfigError(f.path("terms"), "expected a non-empty array");
    std::vector<quantum::Term> out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        Fields t(terms[i], f.path("terms") + "[" + std::to_string(i) + "]");
        quantum::Term term;
        term.coefficient = {t.number("c_re"), t.number("c_im", 0.0)};
        const auto& n = t.get("n");
        if (!n.is_array() || static_cast<int>(n.size()) != system.dimension())
            throw ConfigError(t.path("n"), "expected " + std::to_string(system.dimension()) + " quantum numbers");
        for (int k = 0; k < system.dimension(); ++k) {
            if (!n[k].is_number_integer()) throw ConfigError(t.path("n"), "quantum numbers must be integers");
            term.n[k] = n[k].get<int>();
        }
        t.finish();
        out.push_back(term);
    }
    f.finish();
    try {
        LoadedSuperposition loaded{quantum::Superposition(system, std::move(out)), std::nullopt};
        const double norm = loaded.state.input_norm();
        if (std::abs(norm - 1.0) > 1e-6)
            loaded.warning = "input norm " + format_number(norm) + " renormalized to 1";
        return loaded;
    } catch (const DomainError& e) {
        throw ConfigError(f.path("terms"), e.what());
    }
}

json to_json(const quantum::Superposition& state) {
    json j;
    j["system"] = to_json(state.system());
    json terms = json::array();
    for (const auto& t : state.terms()) {
        json n = json::array();
        for (int k = 0; k < state.dimension(); ++k) n.push_back(t.n[k]);
        terms.push_back({{"c_re", t.coefficient.real()}, {"c_im", t.coefficient.imag()}, {"n", n}});
    }
    j["terms"] = terms;
    return j;
}

Table trajectory_table(const classical::Trajectory& trajectory) {
    Table t{{"t", "q1", "q2", "p1", "p2", "invariant_drift"}, {}};
    t.rows.reserve(trajectory.size());
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        const auto& s = trajectory.samples[i];
        const double drift = i < trajectory.invariant_drift.size() ? trajectory.invariant_drift[i] : 0.0;
        t.rows.push_back({s.t, s.q[0], s.q[1], s.p[0], s.p[1], drift});
    }
    return t;
}

Table boundary_table(const classical::AccessibleRegion& region, int points) {
    Table t{{"rho", "z"}, {}};
    for (const auto& p : region.boundary(points)) t.rows.push_back({p[0], p[1]});
    return t;
}

json orbit_catalog(const std::vector<classical::ClosedOrbit>& orbits) {
    json arr = json::array();
    for (const auto& o : orbits) {
        arr.push_back({{"launch_angle", o.launch_angle},
                       {"period", o.period},
                       {"action", o.action},
                       {"monodromy_trace", o.monodromy_trace},
                       {"phase_index", o.phase_index},
                       {"closure_residual", o.closure_residual}});
    }
    return arr;
}

Table bohmian_table(const bohmian::BohmianTrajectory& trajectory) {
    Table t;
    if (trajectory.dimension == 1) t.columns = {"t", "x1", "v1", "Q", "rho"};
    else t.columns = {"t", "x1", "x2", "v1", "v2", "Q", "rho"};
    for (const auto& s : trajectory.samples) {
        if (trajectory.dimension == 1) t.rows.push_back({s.t, s.x[0], s.v[0], s.Q, s.rho});
        else t.rows.push_back({s.t, s.x[0], s.x[1], s.v[0], s.v[1], s.Q, s.rho});
    }
    return t;
}

Table ensemble_table(const bohmian::Ensemble& ensemble, int dimension) {
    Table t;
    t.columns = dimension == 1 ? std::vector<std::string>{"member_id", "x1"}
                               : std::vector<std::string>{"member_id", "x1", "x2"};
    t.rows.reserve(ensemble.size());
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const auto& x = ensemble.positions[i];
        if (dimension == 1) t.rows.push_back({double(i), x[0]});
        else t.rows.push_back({double(i), x[0], x[1]});
    }
    return t;
}

json node_report(const std::vector<bohmian::MemberFailure>& failures, int dimension) {
    json arr = json::array();
    for (const auto& f : failures) {
        json x = json::array();
        for (int i = 0; i < dimension; ++i) x.push_back(f.where.x[i]);
        arr.push_back({{"member_id", f.member_id},
                       {"t", f.where.t},
                       {"x", x},
                       {"rho", f.where.rho},
                       {"status", f.status == bohmian::TrajectoryStatus::node_halt ? "node_halt" : "domain_breach"}});
    }
    return arr;
}

Table level_density_table(const semiclassical::LevelDensity& density) {
    Table t{{"E", "mean", "oscillatory", "total"}, {}};
    for (std::size_t i = 0; i < density.energies.size(); ++i)
        t.rows.push_back({density.energies[i], density.mean[i], density.oscillatory[i], density.total[i]});
    return t;
}

Table recurrence_table(const semiclassical::RecurrenceSpectrum& spectrum) {
    Table t{{"t", "abs_C"}, {}};
    for (std::size_t i = 0; i < spectrum.times.size(); ++i) t.rows.push_back({spectrum.times[i], spectrum.abs_c[i]});
    return t;
}

json associations(const std::vector<semiclassical::Association>& matches) {
    json arr = json::array();
    for (const auto& a : matches) {
        json orbit = a.matched ? json(a.orbit_id) : json(nullptr);
        arr.push_back({{"peak_t", a.peak_t},
                       {"peak_height", a.peak_height},
                       {"orbit_id", orbit},
                       {"repetition", a.repetition},
                       {"delta_t", a.delta_t}});
    }
    return arr;
}

}  // namespace pilotwave::io
