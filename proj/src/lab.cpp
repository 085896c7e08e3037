#include "pilotwave/lab.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <variant>

#include "pilotwave/catalog.hpp"

namespace pilotwave::lab {

namespace fs = std::filesystem;
using io::Fields;
using io::Table;

namespace {

// ---- scenario plans --------------------------------------------------------------

struct LyapunovBlock {
    double horizon = 0.0;
    double offset = 0.0;
    double interval = 1.0;
    double tol = 1e-10;
};

struct ClassicalPlan {
    std::optional<DiamagneticSystem> diamagnetic;
    std::optional<SolvableSystem> solvable;
    classical::PhaseState initial;
    double duration = 0.0;
    classical::IntegrationOptions integration;
    std::optional<LyapunovBlock> lyapunov;
    int coverage_grid = 100;
    std::optional<classical::OrbitSearchOptions> orbits;
};

struct BohmianPlan {
    quantum::Superposition state;
    std::vector<Vec2> x0;
    double t0 = 0.0, t1 = 0.0;
    bohmian::BohmianOptions options;
    std::optional<LyapunovBlock> lyapunov;
    int coverage_grid = 100;
};

struct EnsemblePlan {
    quantum::Superposition state;
    std::size_t count = 0;
    std::uint64_t seed = 0;
    double t0 = 0.0, t1 = 0.0;
    bohmian::BohmianOptions options;
    int bins = 50;
};

struct RecurrencePlan {
    quantum::Superposition state;
    double t_max = 0.0;
    std::size_t points = 0;
    std::vector<semiclassical::OrbitPeriod> orbits;
    std::optional<double> tol;
};

struct TracePlan {
    SolvableSystem system;
    double e_min = 0.0, e_max = 0.0;
    std::size_t points = 0;
    int repetitions = 0;
    double gamma = 0.0;
};

struct Scenario;

struct ComparePlan {
    std::vector<Scenario> members;
};

using Body = std::variant<ClassicalPlan, BohmianPlan, EnsemblePlan, RecurrencePlan, TracePlan, ComparePlan>;

struct Scenario {
    json raw;
    std::string name;
    std::string kind;
    fs::path output;
    std::vector<std::string> warnings;
    std::shared_ptr<Body> body;
};

double positive(Fields& f, const std::string& key) {
    const double v = f.number(key);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(f.path(key), "must be positive");
    return v;
}

double positive(Fields& f, const std::string& key, double fallback) {
    return f.has(key) ? positive(f, key) : fallback;
}

std::size_t count_field(Fields& f, const std::string& key, std::size_t min) {
    const auto& v = f.get(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError(f.path(key), "expected a non-negative integer");
    const auto n = v.get<std::uint64_t>();
    if (n < min) throw ConfigError(f.path(key), "must be at least " + std::to_string(min));
    return static_cast<std::size_t>(n);
}

LyapunovBlock parse_lyapunov(const json& j, const std::string& where, double default_offset) {
    Fields f(j, where);
    LyapunovBlock b;
    b.horizon = positive(f, "horizon");
    b.offset = positive(f, "offset", default_offset);
    b.interval = positive(f, "renormalization_interval", 1.0);
    b.tol = positive(f, "tol", 1e-10);
    f.finish();
    return b;
}

quantum::Superposition parse_state(const json& j, const std::string& where, const fs::path& base,
                                   std::vector<std::string>& warnings) {
    if (j.is_object() && j.contains("catalog")) {
        Fields f(j, where);
        const auto name = f.string("catalog");
        f.finish();
        for (auto& s : catalog::reference_states())
            if (s.name == name) return s.state;
        throw ConfigError(f.path("catalog"), "unknown catalog state '" + name + "'");
    }
    if (j.is_object() && j.contains("file")) {
        Fields f(j, where);
        const fs::path p = base / f.string("file");
        f.finish();
        auto loaded = io::superposition_from_json(io::read_json(p), p.string());
        if (loaded.warning) warnings.push_back(p.string() + ": " + *loaded.warning);
        return loaded.state;
    }
    auto loaded = io::superposition_from_json(j, where);
    if (loaded.warning) warnings.push_back(where + ": " + *loaded.warning);
    return loaded.state;
}

Vec2 parse_point(const json& j, const std::string& where, int dimension) {
    if (!j.is_array() || static_cast<int>(j.size()) != dimension)
        throw ConfigError(where, "expected " + std::to_string(dimension) + " coordinates");
    Vec2 x{0.0, 0.0};
    for (int i = 0; i < dimension; ++i) {
        if (!j[i].is_number()) throw ConfigError(where, "coordinates must be numbers");
        x[i] = j[i].get<double>();
    }
    return x;
}

// Constructors of the physics layer throw DomainError; in a scenario that is a
// configuration problem of the enclosing field.
template <class F>
auto guarded(const std::string& where, F f) {
    try {
        return f();
    } catch (const DomainError& e) {
        throw ConfigError(where, e.what());
    }
}

ClassicalPlan parse_classical(Fields& f) {
    ClassicalPlan p;
    const auto& sys = f.get("system");
    if (sys.is_object() && sys.value("type", "") == "diamagnetic")
        p.diamagnetic = io::diamagnetic_system_from_json(sys, f.path("system"));
    else
        p.solvable = guarded(f.path("system"), [&] { return io::solvable_system_from_json(sys, f.path("system")); });

    Fields init(f.get("initial"), f.path("initial"));
    if (p.diamagnetic) {
        if (init.has("launch_angle")) {
            p.initial = classical::launch_from_nucleus(init.number("launch_angle"));
        } else {
            const double rho = init.number("rho"), z = init.number("z");
            const double pr = init.number("p_rho"), pz = init.number("p_z");
            p.initial = guarded(f.path("initial"), [&] { return classical::regularize(rho, z, pr, pz); });
            if (p.diamagnetic->representation() == DiamagneticSystem::Representation::physical)
                p.initial = classical::to_scaled(*p.diamagnetic, p.initial);
        }
    } else {
        const int d = p.solvable->dimension();
        p.initial.q = init.pair("q", d);
        p.initial.p = init.pair("p", d);
    }
    init.finish();

    p.duration = positive(f, "duration");
    p.integration.tol = positive(f, "tol", 1e-10);
    p.integration.sample_interval = f.has("sample_interval") ? positive(f, "sample_interval") : 0.01;
    if (f.has("lyapunov"))
        p.lyapunov = parse_lyapunov(f.get("lyapunov"), f.path("lyapunov"), 1e-8);
    p.coverage_grid = f.integer("coverage_grid", 100);
    if (p.coverage_grid < 1) throw ConfigError(f.path("coverage_grid"), "must be positive");
    if (f.has("closed_orbits")) {
        if (!p.diamagnetic) throw ConfigError(f.path("closed_orbits"), "closed-orbit search needs the diamagnetic system");
        Fields o(f.get("closed_orbits"), f.path("closed_orbits"));
        classical::OrbitSearchOptions opts;
        opts.max_period = positive(o, "max_period", opts.max_period);
        opts.angle_grid = o.integer("angle_grid", opts.angle_grid);
        opts.closure_tol = positive(o, "closure_tol", opts.closure_tol);
        opts.tol = positive(o, "tol", opts.tol);
        if (opts.angle_grid < 3) throw ConfigError(o.path("angle_grid"), "must be at least 3");
        o.finish();
        p.orbits = opts;
    }
    return p;
}

Scenario parse(const json& j, const fs::path& base, const std::string& where);

Body parse_body(const std::string& kind, Fields& f, const fs::path& base, std::vector<std::string>& warnings) {
    if (kind == "classical") return parse_classical(f);
    if (kind == "bohmian") {
        auto state = parse_state(f.get("state"), f.path("state"), base, warnings);
        BohmianPlan p{state, {}, 0.0, 0.0, {}, std::nullopt, 100};
        const auto& xs = f.get("x0");
        const int d = state.dimension();
        if (!xs.is_array() || xs.empty()) throw ConfigError(f.path("x0"), "expected a list of positions");
        if (xs[0].is_number()) p.x0.push_back(parse_point(xs, f.path("x0"), d));
        else
            for (std::size_t i = 0; i < xs.size(); ++i)
                p.x0.push_back(parse_point(xs[i], f.path("x0") + "[" + std::to_string(i) + "]", d));
        for (std::size_t i = 0; i < p.x0.size(); ++i)
            if (!state.system().inside(p.x0[i]))
                throw ConfigError(f.path("x0") + "[" + std::to_string(i) + "]", "position outside the box");
        p.t0 = f.number("t0", 0.0);
        p.t1 = f.number("t1");
        if (p.t1 == p.t0) throw ConfigError(f.path("t1"), "must differ from t0");
        p.options.tol = positive(f, "tol", 1e-10);
        p.options.sample_interval = f.has("sample_interval") ? positive(f, "sample_interval") : 0.01;
        if (f.has("lyapunov"))
            p.lyapunov = parse_lyapunov(f.get("lyapunov"), f.path("lyapunov"), 1e-9);
        p.coverage_grid = f.integer("coverage_grid", 100);
        if (p.coverage_grid < 1) throw ConfigError(f.path("coverage_grid"), "must be positive");
        return p;
    }
    if (kind == "ensemble") {
        auto state = parse_state(f.get("state"), f.path("state"), base, warnings);
        EnsemblePlan p{state, 0, 0, 0.0, 0.0, {}, 50};
        p.count = count_field(f, "count", 0);
        if (!f.has("seed")) throw ConfigError(f.path("seed"), "missing required field (ensemble sampling is seeded)");
        const auto& seed = f.get("seed");
        if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<long long>() < 0))
            throw ConfigError(f.path("seed"), "expected a non-negative integer");
        p.seed = seed.get<std::uint64_t>();
        p.t0 = f.number("t0", 0.0);
        p.t1 = f.number("t1");
        p.options.tol = positive(f, "tol", 1e-6);
        p.options.record_path = false;
        p.bins = f.integer("bins", 50);
        if (p.bins < 1) throw ConfigError(f.path("bins"), "must be positive");
        return p;
    }
    if (kind == "recurrence") {
        auto state = parse_state(f.get("state"), f.path("state"), base, warnings);
        RecurrencePlan p{state, 0.0, 0, {}, std::nullopt};
        p.t_max = positive(f, "t_max");
        p.points = count_field(f, "points", 2);
        if (f.has("orbits")) {
            const auto& orbits = f.get("orbits");
            if (!orbits.is_array()) throw ConfigError(f.path("orbits"), "expected an array");
            for (std::size_t i = 0; i < orbits.size(); ++i) {
                Fields o(orbits[i], f.path("orbits") + "[" + std::to_string(i) + "]");
                semiclassical::OrbitPeriod op{o.string("id"), positive(o, "period")};
                o.finish();
                p.orbits.push_back(op);
            }
        } else if (state.system().kind() == SolvableSystem::Kind::harmonic) {
            const char* axis[] = {"oscillator_x", "oscillator_y"};
            for (int i = 0; i < state.dimension(); ++i)
                p.orbits.push_back({state.dimension() == 1 ? "oscillator" : axis[i],
                                    2 * M_PI / state.system().omegas()[i]});
        }
        if (f.has("tol")) p.tol = positive(f, "tol");
        return p;
    }
    if (kind == "trace") {
        auto system = guarded(f.path("system"), [&] { return io::solvable_system_from_json(f.get("system"), f.path("system")); });
        if (system.kind() != SolvableSystem::Kind::harmonic || system.dimension() != 1)
            throw ConfigError(f.path("system"), "trace scenarios support the 1D oscillator");
        TracePlan p{system, 0.0, 0.0, 0, 0, 0.0};
        Fields e(f.get("energies"), f.path("energies"));
        p.e_min = e.number("min");
        p.e_max = e.number("max");
        p.points = count_field(e, "points", 2);
        e.finish();
        if (!(p.e_max > p.e_min)) throw ConfigError(f.path("energies"), "max must exceed min");
        p.repetitions = f.integer("repetitions", 50);
        if (p.repetitions < 0) throw ConfigError(f.path("repetitions"), "must be non-negative");
        p.gamma = positive(f, "gamma");
        return p;
    }
    if (kind == "compare") {
        ComparePlan p;
        const auto& list = f.get("scenarios");
        if (!list.is_array() || list.empty()) throw ConfigError(f.path("scenarios"), "expected a non-empty array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const std::string where = f.path("scenarios") + "[" + std::to_string(i) + "]";
            if (list[i].is_string()) {
                const fs::path path = base / list[i].get<std::string>();
                p.members.push_back(parse(io::read_json(path), path.parent_path(), path.string()));
            } else {
                p.members.push_back(parse(list[i], base, where));
            }
            if (p.members.back().kind == "compare") throw ConfigError(where, "compare scenarios cannot nest");
        }
        return p;
    }
    throw ConfigError(f.path("kind"), "unknown kind '" + kind + "'");
}

Scenario parse(const json& j, const fs::path& base, const std::string& where) {
    Fields f(j, where);
    const auto& schema = f.get("schema");
    if (!schema.is_number_integer() || schema.get<int>() != schema_version)
        throw ConfigError(f.path("schema"), "unsupported schema (expected " + std::to_string(schema_version) + ")");
    Scenario s;
    s.raw = j;
    s.name = f.string("name");
    if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError(f.path("name"), "must be a non-empty file-name-safe string");
    s.kind = f.string("kind");
    s.output = f.has("output") ? base / f.string("output") : fs::path("pilotwave-out") / s.name;
    s.body = std::make_shared<Body>(parse_body(s.kind, f, base, s.warnings));
    f.finish();
    return s;
}

// ---- outputs ---------------------------------------------------------------------

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
    const fs::path& dir() const { return dir_; }

    void table(const std::string& name, const Table& t) {
        std::ostringstream ss;
        io::write_table(ss, t);
        text(name, ss.str(), "data");
    }
    void document(const std::string& name, const json& j, const std::string& role = "data") {
        text(name, j.dump(2) + "\n", role);
    }
    void text(const std::string& name, const std::string& content, const std::string& role) {
        io::write_text(dir_ / name, content);
        files_.push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}, {"role", role}});
    }
    void adopt(const json& entry) { files_.push_back(entry); }
    const json& files() const { return files_; }

private:
    fs::path dir_;
    json files_ = json::array();
};

// ---- plots -----------------------------------------------------------------------

struct Series {
    std::vector<double> x, y;
    enum class Style { line, scatter, dashed } style = Style::line;
};

struct Figure {
    std::string title, xlabel, ylabel;
    int width = 640, height = 480;
    std::vector<Series> series;
    std::vector<Vec2> markers;
    std::vector<double> ticks;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else if (c == '"') out += "&quot;";
        else out += c;
    }
    return out;
}

std::string render(const Figure& fig) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : fig.series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
                x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, s.y[i]), y1 = std::max(y1, s.y[i]);
            }
    if (!(x1 >= x0)) x0 = 0, x1 = 1;
    if (!(y1 >= y0)) y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad_y = 0.05 * (y1 - y0);
    y0 -= pad_y, y1 += pad_y;

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double w = fig.width - left - right, h = fig.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
    auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * h; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width << "\" height=\"" << fig.height
      << "\" viewBox=\"0 0 " << fig.width << ' ' << fig.height << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n";
    o << "<rect x=\"" << fmt("%.2f", left) << "\" y=\"" << fmt("%.2f", top) << "\" width=\"" << fmt("%.2f", w)
      << "\" height=\"" << fmt("%.2f", h) << "\"/>\n";
    o << "</g>\n<g id=\"tick-labels\" font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
        o << "<line x1=\"" << fmt("%.2f", px(xv)) << "\" y1=\"" << fmt("%.2f", top + h) << "\" x2=\""
          << fmt("%.2f", px(xv)) << "\" y2=\"" << fmt("%.2f", top + h + 5) << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << fmt("%.2f", px(xv)) << "\" y=\"" << fmt("%.2f", top + h + 18)
          << "\" text-anchor=\"middle\">" << fmt("%.4g", xv) << "</text>\n";
        o << "<line x1=\"" << fmt("%.2f", left - 5) << "\" y1=\"" << fmt("%.2f", py(yv)) << "\" x2=\""
          << fmt("%.2f", left) << "\" y2=\"" << fmt("%.2f", py(yv)) << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << fmt("%.2f", left - 8) << "\" y=\"" << fmt("%.2f", py(yv) + 4)
          << "\" text-anchor=\"end\">" << fmt("%.4g", yv) << "</text>\n";
    }
    o << "<text x=\"" << fmt("%.2f", left + w / 2) << "\" y=\"" << fig.height - 10 << "\" text-anchor=\"middle\">"
      << escape(fig.xlabel) << "</text>\n";
    o << "<text x=\"15\" y=\"" << fmt("%.2f", top + h / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << fmt("%.2f", top + h / 2) << ")\">" << escape(fig.ylabel) << "</text>\n";
    if (!fig.title.empty())
        o << "<text x=\"" << fmt("%.2f", left + w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
          << escape(fig.title) << "</text>\n";
    o << "</g>\n";

    int layer = 0;
    for (const auto& s : fig.series) {
        o << "<g id=\"data-" << layer++ << "\">\n";
        if (s.style == Series::Style::scatter) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    o << "<circle cx=\"" << fmt("%.2f", px(s.x[i])) << "\" cy=\"" << fmt("%.2f", py(s.y[i]))
                      << "\" r=\"1.2\" fill=\"#1f4e9c\"/>\n";
        } else {
            const char* stroke = s.style == Series::Style::dashed ? "#888888" : "#1f4e9c";
            const char* dash = s.style == Series::Style::dashed ? " stroke-dasharray=\"6 4\"" : "";
            std::string pts;
            auto flush = [&] {
                if (!pts.empty())
                    o << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1\"" << dash
                      << " points=\"" << pts << "\"/>\n";
                pts.clear();
            };
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                    flush();
                    continue;
                }
                if (!pts.empty()) pts += ' ';
                pts += fmt("%.2f", px(s.x[i])) + "," + fmt("%.2f", py(s.y[i]));
            }
            flush();
        }
        o << "</g>\n";
    }
    if (!fig.markers.empty()) {
        o << "<g id=\"peaks\" fill=\"none\" stroke=\"#c0392b\">\n";
        for (const auto& m : fig.markers)
            o << "<circle cx=\"" << fmt("%.2f", px(m[0])) << "\" cy=\"" << fmt("%.2f", py(m[1])) << "\" r=\"4\"/>\n";
        o << "</g>\n";
    }
    if (!fig.ticks.empty()) {
        o << "<g id=\"orbit-ticks\" stroke=\"#27ae60\">\n";
        for (double t : fig.ticks)
            if (t >= x0 && t <= x1)
                o << "<line x1=\"" << fmt("%.2f", px(t)) << "\" y1=\"" << fmt("%.2f", top) << "\" x2=\""
                  << fmt("%.2f", px(t)) << "\" y2=\"" << fmt("%.2f", top + 12) << "\"/>\n";
        o << "</g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

Series series_of(const Table& t, const std::string& x, const std::string& y, Series::Style style) {
    return {t.values(x), t.values(y), style};
}

// ---- coverage of the solvable systems -------------------------------------------

// Fraction of the cells flagged by `allowed` visited by the points; 1D uses a
// single row.
double raster_coverage(const std::vector<Vec2>& points, Vec2 lo, Vec2 hi, int dimension, int grid,
                       const std::function<bool(const Vec2&)>& allowed) {
    const int ny = dimension == 2 ? grid : 1;
    std::vector<char> ok(static_cast<std::size_t>(grid) * ny), hit(ok.size(), 0);
    std::size_t total = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < ny; ++j) {
            Vec2 c{lo[0] + (i + 0.5) * (hi[0] - lo[0]) / grid, dimension == 2 ? lo[1] + (j + 0.5) * (hi[1] - lo[1]) / ny : 0.0};
            ok[i * ny + j] = allowed(c);
            total += ok[i * ny + j];
        }
    if (total == 0) return 0.0;
    std::size_t visited = 0;
    for (const auto& p : points) {
        const int i = static_cast<int>(std::floor((p[0] - lo[0]) / (hi[0] - lo[0]) * grid));
        const int j = dimension == 2 ? static_cast<int>(std::floor((p[1] - lo[1]) / (hi[1] - lo[1]) * ny)) : 0;
        if (i < 0 || i >= grid || j < 0 || j >= ny) continue;
        const std::size_t k = static_cast<std::size_t>(i) * ny + j;
        if (ok[k] && !hit[k]) {
            hit[k] = 1;
            ++visited;
        }
    }
    return static_cast<double>(visited) / static_cast<double>(total);
}

double solvable_coverage(const SolvableSystem& s, const classical::Trajectory& traj, double energy, int grid) {
    Vec2 lo{0, 0}, hi{1, 1};
    for (int i = 0; i < s.dimension(); ++i) {
        if (s.kind() == SolvableSystem::Kind::harmonic) {
            const double a = std::sqrt(2 * energy / (s.mass() * s.omegas()[i] * s.omegas()[i]));
            lo[i] = -a, hi[i] = a;
        } else {
            lo[i] = 0, hi[i] = s.lengths()[i];
        }
    }
    std::vector<Vec2> pts;
    for (const auto& p : traj.samples) pts.push_back(p.q);
    return raster_coverage(pts, lo, hi, s.dimension(), grid, [&](const Vec2& c) { return s.potential(c) <= energy; });
}

// Cells of the characteristic domain where rho^2 at t0 exceeds 1e-3 of its maximum.
double bohmian_coverage(const quantum::Superposition& sup, const std::vector<Vec2>& pts, double t0, int grid) {
    const auto dom = sup.characteristic_domain();
    const int d = sup.dimension();
    const int ny = d == 2 ? grid : 1;
    std::vector<double> dens;
    double peak = 0.0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < ny; ++j) {
            Vec2 c{dom[0][0] + (i + 0.5) * (dom[1][0] - dom[0][0]) / grid,
                   d == 2 ? dom[0][1] + (j + 0.5) * (dom[1][1] - dom[0][1]) / ny : 0.0};
            const double r = std::norm(quantum::evaluate_wavefunction(sup, c, t0).psi);
            dens.push_back(r);
            peak = std::max(peak, r);
        }
    std::size_t k = 0;
    return raster_coverage(pts, dom[0], dom[1], d, grid, [&](const Vec2&) { return dens[k++] >= 1e-3 * peak; });
}

// ---- runners -----------------------------------------------------------------------

struct RunState {
    Outputs out;
    json metrics = json::object();
    std::optional<std::string> failure;
    json failure_detail = json::object();
    unsigned threads = 0;
    bool plots = true;
};

void run(const ClassicalPlan& p, const Scenario& sc, RunState& rs) {
    const classical::ClassicalSystem system = p.diamagnetic ? classical::ClassicalSystem(*p.diamagnetic)
                                                            : classical::ClassicalSystem(*p.solvable);
    classical::Trajectory traj;
    try {
        traj = classical::integrate_classical(system, p.initial, p.duration, p.integration);
    } catch (const classical::IntegrationError& e) {
        traj = e.partial;
        rs.failure = e.what();
    } catch (const DomainError& e) {
        throw ConfigError("initial", e.what());
    }
    rs.out.table("trajectory.csv", io::trajectory_table(traj));
    rs.metrics["samples"] = traj.size();
    rs.metrics["max_invariant_drift"] = traj.max_drift();

    Figure fig;
    fig.title = sc.name;
    if (p.diamagnetic) {
        Table phys{{"t", "rho", "z", "p_rho", "p_z"}, {}};
        for (const auto& c : classical::to_physical(traj)) phys.rows.push_back({c.t, c.rho, c.z, c.p_rho, c.p_z});
        rs.out.table("trajectory_physical.csv", phys);
        const classical::AccessibleRegion region(*p.diamagnetic);
        const auto boundary = io::boundary_table(region);
        rs.out.table("boundary.csv", boundary);
        rs.metrics["coverage"] = classical::coverage_fraction(*p.diamagnetic, traj, p.coverage_grid);
        rs.metrics["epsilon"] = p.diamagnetic->epsilon();
        fig.xlabel = "rho", fig.ylabel = "z";
        fig.series.push_back(series_of(phys, "rho", "z", Series::Style::line));
        fig.series.push_back(series_of(boundary, "rho", "z", Series::Style::dashed));
    } else {
        const double energy = classical::conserved_quantity(system, p.initial);
        rs.metrics["coverage"] = solvable_coverage(*p.solvable, traj, energy, p.coverage_grid);
        rs.metrics["energy"] = energy;
        const auto t = io::trajectory_table(traj);
        if (p.solvable->dimension() == 2) {
            fig.xlabel = "q1", fig.ylabel = "q2";
            fig.series.push_back(series_of(t, "q1", "q2", Series::Style::line));
        } else {
            fig.xlabel = "t", fig.ylabel = "q1";
            fig.series.push_back(series_of(t, "t", "q1", Series::Style::line));
        }
    }
    if (rs.plots) rs.out.text("trajectory.svg", render(fig), "plot");
    if (rs.failure) return;

    if (p.lyapunov) {
        classical::LyapunovOptions lo;
        lo.offset = p.lyapunov->offset;
        lo.renormalization_interval = p.lyapunov->interval;
        lo.tol = p.lyapunov->tol;
        try {
            const auto diag = classical::lyapunov_exponent(system, p.initial, p.lyapunov->horizon, lo);
            Table lt{{"t", "lambda"}, {}};
            for (std::size_t i = 0; i < diag.running_estimate.size(); ++i)
                lt.rows.push_back({(i + 1) * lo.renormalization_interval, diag.running_estimate[i]});
            rs.out.table("lyapunov.csv", lt);
            rs.metrics["lyapunov"] = diag.lyapunov_estimate;
            rs.metrics["lyapunov_horizon"] = diag.horizon;
            rs.metrics["regime"] = diag.lyapunov_estimate >= chaos_threshold ? "chaotic" : "regular";
        } catch (const NumericalError& e) {
            rs.failure = std::string("lyapunov: ") + e.what();
            return;
        }
    }
    if (p.orbits) {
        const auto found = classical::find_closed_orbits(*p.diamagnetic, *p.orbits);
        rs.out.document("orbits.json", io::orbit_catalog(found.orbits));
        json excluded = json::array();
        for (const auto& e : found.excluded)
            excluded.push_back({{"launch_angle", e.launch_angle}, {"residual", e.residual}, {"reason", e.reason}});
        rs.out.document("orbits_excluded.json", excluded);
        rs.metrics["closed_orbits"] = found.orbits.size();
    }
}

void run(const BohmianPlan& p, const Scenario& sc, RunState& rs) {
    const int d = p.state.dimension();
    std::vector<Vec2> visited;
    json nodes = json::array();
    Figure fig;
    fig.title = sc.name;
    fig.xlabel = d == 2 ? "x1" : "t";
    fig.ylabel = d == 2 ? "x2" : "x1";
    std::optional<bohmian::BohmianTrajectory> first;
    for (std::size_t i = 0; i < p.x0.size(); ++i) {
        bohmian::BohmianTrajectory traj;
        try {
            traj = bohmian::integrate_bohmian(p.state, p.x0[i], p.t0, p.t1, p.options);
        } catch (const NodeSingularity& e) {
            rs.failure = "trajectory " + std::to_string(i) + " starts inside the node guard band";
            nodes.push_back({{"member_id", i}, {"t", p.t0}, {"x", json(std::vector<double>(p.x0[i].begin(), p.x0[i].begin() + d))},
                             {"rho", e.amplitude}, {"status", "node_halt"}});
            continue;
        }
        const auto table = io::bohmian_table(traj);
        rs.out.table("trajectory_" + std::to_string(i) + ".csv", table);
        for (const auto& s : traj.samples) visited.push_back(s.x);
        if (traj.status != bohmian::TrajectoryStatus::completed) {
            bohmian::MemberFailure mf{i, traj.status, *traj.halt};
            nodes.push_back(io::node_report({mf}, d)[0]);
            rs.failure = "trajectory " + std::to_string(i) + " halted at t = " + io::format_number(traj.halt->t);
        }
        fig.series.push_back(series_of(table, d == 2 ? "x1" : "t", d == 2 ? "x2" : "x1", Series::Style::line));
        if (!first) first = std::move(traj);
    }
    if (!nodes.empty()) rs.out.document("nodes.json", nodes);
    rs.metrics["trajectories"] = p.x0.size();
    rs.metrics["coverage"] = bohmian_coverage(p.state, visited, p.t0, p.coverage_grid);
    if (first && first->samples.size() >= 3 && first->status == bohmian::TrajectoryStatus::completed)
        rs.metrics["newtonian_residual"] = bohmian::newtonian_residual(*first, p.state);
    if (rs.plots) rs.out.text("trajectory.svg", render(fig), "plot");
    if (rs.failure) return;

    if (p.lyapunov) {
        bohmian::LyapunovOptions lo;
        lo.offset = p.lyapunov->offset;
        lo.renormalization_interval = p.lyapunov->interval;
        lo.tol = p.lyapunov->tol;
        const auto l = bohmian::bohmian_lyapunov(p.state, p.x0[0], p.t0, p.lyapunov->horizon, lo);
        Table lt{{"t", "lambda"}, {}};
        for (std::size_t i = 0; i < l.running_estimate.size(); ++i)
            lt.rows.push_back({(i + 1) * lo.renormalization_interval, l.running_estimate[i]});
        rs.out.table("lyapunov.csv", lt);
        if (l.halted) {
            rs.failure = "lyapunov trajectory pair halted at a node";
            return;
        }
        rs.metrics["lyapunov"] = l.estimate;
        rs.metrics["lyapunov_horizon"] = l.horizon_reached;
        rs.metrics["regime"] = l.estimate >= chaos_threshold ? "chaotic" : "regular";
    }
}

void run(const EnsemblePlan& p, const Scenario& sc, RunState& rs) {
    const int d = p.state.dimension();
    const auto initial = bohmian::sample_quantum_equilibrium(p.state, p.t0, p.count, p.seed);
    rs.out.table("ensemble_t0.csv", io::ensemble_table(initial, d));
    const auto evo = bohmian::evolve_ensemble(initial, p.state, p.t1, p.options, rs.threads);
    rs.out.table("ensemble_t1.csv", io::ensemble_table(evo.ensemble, d));
    rs.out.document("nodes.json", io::node_report(evo.failures, d));
    rs.metrics["members"] = p.count;
    rs.metrics["node_halts"] = evo.failures.size();
    if (p.count == 0) return;
    const auto h = bohmian::ensemble_histogram(evo.ensemble, p.state, p.bins);
    const auto rho = bohmian::density_histogram(p.state, p.t1, p.bins);
    rs.metrics["l1_to_density"] = bohmian::l1_distance(h, rho);
    if (d != 1) return;
    const auto dom = p.state.characteristic_domain();
    Table ht{{"x", "ensemble", "density"}, {}};
    const double width = (dom[1][0] - dom[0][0]) / p.bins;
    for (int i = 0; i < p.bins; ++i) ht.rows.push_back({dom[0][0] + (i + 0.5) * width, h[i] / width, rho[i] / width});
    rs.out.table("histogram.csv", ht);
    if (rs.plots) {
        Figure fig;
        fig.title = sc.name;
        fig.xlabel = "x", fig.ylabel = "density";
        fig.series.push_back(series_of(ht, "x", "ensemble", Series::Style::line));
        fig.series.push_back(series_of(ht, "x", "density", Series::Style::dashed));
        rs.out.text("histogram.svg", render(fig), "plot");
    }
}

void run(const RecurrencePlan& p, const Scenario& sc, RunState& rs) {
    const auto grid = semiclassical::uniform_grid(0.0, p.t_max, p.points);
    auto spec = semiclassical::recurrence_spectrum(p.state, grid);
    const double tol = p.tol.value_or(grid[1] - grid[0]);
    spec.associations = semiclassical::match_peaks_to_orbits(spec.peaks, p.orbits, tol);
    const auto table = io::recurrence_table(spec);
    rs.out.table("recurrence.csv", table);
    rs.out.document("associations.json", io::associations(spec.associations));
    std::size_t matched = 0;
    for (const auto& a : spec.associations) matched += a.matched;
    rs.metrics["peaks"] = spec.peaks.size();
    rs.metrics["matched"] = matched;
    rs.metrics["match_tolerance"] = tol;
    if (rs.plots) {
        Figure fig;
        fig.title = sc.name;
        fig.xlabel = "t", fig.ylabel = "|C(t)|";
        fig.series.push_back(series_of(table, "t", "abs_C", Series::Style::line));
        for (const auto& pk : spec.peaks) fig.markers.push_back({pk.t, pk.height});
        for (const auto& o : p.orbits)
            for (int k = 1; k * o.period <= p.t_max; ++k) fig.ticks.push_back(k * o.period);
        rs.out.text("recurrence.svg", render(fig), "plot");
    }
}

void run(const TracePlan& p, const Scenario& sc, RunState& rs) {
    const auto grid = semiclassical::uniform_grid(p.e_min, p.e_max, p.points);
    const auto d = semiclassical::trace_formula_density(p.system, {semiclassical::oscillator_trace_orbit(p.system)},
                                                        grid, p.repetitions, p.gamma);
    const auto table = io::level_density_table(d);
    rs.out.table("level_density.csv", table);
    const auto exact = semiclassical::smoothed_spectrum_density(
        semiclassical::spectrum(p.system, p.e_max + 10 * p.gamma), grid, p.gamma);
    Table et{{"E", "exact"}, {}};
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        et.rows.push_back({grid[i], exact[i]});
        worst = std::max(worst, std::abs(exact[i] - d.total[i]));
    }
    rs.out.table("exact_density.csv", et);
    rs.metrics["max_abs_difference_to_exact"] = worst;
    rs.metrics["maxima"] = semiclassical::find_peaks(grid, d.total, 1e-6).size();
    if (rs.plots) {
        Figure fig;
        fig.title = sc.name;
        fig.xlabel = "E", fig.ylabel = "d(E)";
        fig.series.push_back(series_of(table, "E", "total", Series::Style::line));
        fig.series.push_back(series_of(et, "E", "exact", Series::Style::dashed));
        rs.out.text("level_density.svg", render(fig), "plot");
    }
}

json execute(const Scenario& sc, const RunOptions& options, const fs::path& out_dir);

void run(const ComparePlan& p, const Scenario&, RunState& rs) {
    std::vector<json> manifests;
    for (const auto& m : p.members) {
        const fs::path sub = rs.out.dir() / m.name;
        RunOptions o;
        o.threads = rs.threads;
        o.plots = rs.plots;
        manifests.push_back(execute(m, o, sub));
        const auto& man = manifests.back();
        if (man.value("status", "") != "ok") {
            rs.failure = "member scenario '" + m.name + "' failed";
            return;
        }
        const auto rel = (fs::path(m.name) / "manifest.json").generic_string();
        const auto content = io::read_text(sub / "manifest.json");
        rs.out.adopt({{"path", rel}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}, {"role", "manifest"}});
    }
    const auto report = compare_report(manifests);
    rs.out.document("report.json", report.doc);
    rs.out.text("report.txt", report.text, "data");
    rs.metrics["flags"] = report.doc["flags"];
}

json execute(const Scenario& sc, const RunOptions& options, const fs::path& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    RunState rs{Outputs(out_dir), json::object(), std::nullopt, json::object(), options.threads, options.plots};
    std::visit([&](const auto& plan) { run(plan, sc, rs); }, *sc.body);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (rs.failure) rs.out.document("failure.json", {{"error", *rs.failure}, {"metrics", rs.metrics}}, "report");
    json manifest = {{"schema", schema_version},
                     {"tool", "pilotwave"},
                     {"tool_version", tool_version},
                     {"scenario", sc.name},
                     {"kind", sc.kind},
                     {"scenario_hash", scenario_hash(sc.raw)},
                     {"status", rs.failure ? "failed" : "ok"},
                     {"wall_time_s", wall},
                     {"files", rs.out.files()},
                     {"metrics", rs.metrics},
                     {"warnings", sc.warnings}};
    if (rs.failure) manifest["error"] = *rs.failure;
    io::write_json(out_dir / "manifest.json", manifest);
    return manifest;
}

}  // namespace

void validate_scenario(const json& scenario, const fs::path& base_dir) { parse(scenario, base_dir, "scenario"); }

json run_scenario(const json& scenario, const fs::path& base_dir, const RunOptions& options) {
    const auto sc = parse(scenario, base_dir, "scenario");
    const fs::path out = options.out.value_or(sc.output);
    auto manifest = execute(sc, options, out);
    if (manifest["status"] != "ok") throw ScenarioFailure(manifest.value("error", "numerical failure"), manifest);
    return manifest;
}

json run_scenario_file(const fs::path& config, const RunOptions& options) {
    const auto doc = io::read_json(config);
    return run_scenario(doc, config.parent_path(), options);
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(io::read_text(path)); }

std::string scenario_hash(const json& scenario) { return sha256_hex(scenario.dump()); }

std::string render_plot(const Table& data, const json& spec, const fs::path& base_dir) {
    Fields f(spec, "spec");
    if (f.has("schema")) {
        const auto& s = f.get("schema");
        if (!s.is_number_integer() || s.get<int>() != schema_version) throw ConfigError("spec.schema", "unsupported schema");
    }
    Figure fig;
    const auto type = f.has("type") ? f.string("type") : std::string("line");
    if (type != "line" && type != "scatter") throw ConfigError("spec.type", "expected 'line' or 'scatter'");
    const auto x = f.string("x"), y = f.string("y");
    fig.xlabel = x, fig.ylabel = y;
    if (f.has("title")) fig.title = f.string("title");
    fig.width = f.integer("width", 640);
    fig.height = f.integer("height", 480);
    if (fig.width < 200 || fig.height < 150) throw ConfigError("spec.width", "plot is too small");
    auto checked = [](const Table& t, const std::string& col, const std::string& field) {
        if (std::find(t.columns.begin(), t.columns.end(), col) == t.columns.end())
            throw ConfigError(field, "column '" + col + "' not in dataset");
    };
    checked(data, x, "spec.x");
    checked(data, y, "spec.y");
    fig.series.push_back(series_of(data, x, y, type == "line" ? Series::Style::line : Series::Style::scatter));
    if (f.has("overlay")) {
        Fields o(f.get("overlay"), "spec.overlay");
        const Table overlay = o.has("file") ? io::read_table(base_dir / o.string("file")) : data;
        const auto ox = o.string("x"), oy = o.string("y");
        o.finish();
        checked(overlay, ox, "spec.overlay.x");
        checked(overlay, oy, "spec.overlay.y");
        fig.series.push_back(series_of(overlay, ox, oy, Series::Style::dashed));
    }
    if (f.has("peaks")) {
        const double floor = f.number("peaks");
        for (const auto& p : semiclassical::find_peaks(fig.series[0].x, fig.series[0].y, floor))
            fig.markers.push_back({p.t, p.height});
    }
    if (f.has("ticks")) {
        const auto& t = f.get("ticks");
        if (!t.is_array()) throw ConfigError("spec.ticks", "expected an array of numbers");
        for (const auto& v : t) {
            if (!v.is_number()) throw ConfigError("spec.ticks", "expected numbers");
            fig.ticks.push_back(v.get<double>());
        }
    }
    f.finish();
    return render(fig);
}

Report compare_report(const std::vector<json>& manifests) {
    if (manifests.empty()) throw ConfigError("manifests", "nothing to compare");
    struct Row {
        std::string name, kind, regime;
        double lambda, coverage;
        json files;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < manifests.size(); ++i) {
        const auto& m = manifests[i];
        const std::string where = "manifest[" + std::to_string(i) + "]";
        if (!m.is_object() || !m.contains("metrics") || !m.contains("scenario"))
            throw ConfigError(where, "not a run manifest");
        if (m.value("status", "") != "ok") throw ConfigError(where, "run did not complete");
        const auto& met = m["metrics"];
        if (!met.contains("lyapunov") || !met.contains("coverage"))
            throw ConfigError(where + ".metrics", "lyapunov and coverage outputs missing (run with a lyapunov block)");
        rows.push_back({m["scenario"].get<std::string>(), m.value("kind", ""), met.value("regime", ""),
                        met["lyapunov"].get<double>(), met["coverage"].get<double>(), m.value("files", json::array())});
    }

    Report r;
    json columns = json::array();
    for (const auto& row : rows)
        columns.push_back({{"scenario", row.name}, {"kind", row.kind}, {"lyapunov", row.lambda},
                           {"coverage", row.coverage}, {"regime", row.regime}});
    json flags = json::array();
    for (const auto& c : rows)
        for (const auto& b : rows) {
            if (c.kind != "classical" || b.kind != "bohmian") continue;
            std::string flag;
            if (c.regime == b.regime) flag = "agreement: both " + c.regime;
            else flag = "mismatch: classical " + c.regime + ", Bohmian " + b.regime;
            flags.push_back({{"classical", c.name}, {"bohmian", b.name}, {"flag", flag}});
        }
    json diffs = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            int differing = 0;
            for (const auto& fa : rows[i].files) {
                if (fa.value("role", "") != "data") continue;
                bool same = false;
                for (const auto& fb : rows[j].files)
                    if (fb.value("path", "") == fa.value("path", "") && fb.value("sha256", "") == fa.value("sha256", ""))
                        same = true;
                differing += !same;
            }
            diffs.push_back({{"a", rows[i].name}, {"b", rows[j].name},
                             {"lyapunov", rows[j].lambda - rows[i].lambda},
                             {"coverage", rows[j].coverage - rows[i].coverage},
                             {"differing_data_files", differing}});
        }
    r.doc = {{"schema", schema_version}, {"chaos_threshold", chaos_threshold}, {"columns", columns},
             {"flags", flags}, {"differences", diffs}, {"layout", rows.size() == 1 ? "single" : "side_by_side"}};

    std::ostringstream t;
    t << "scenario comparison (chaotic when lambda >= " << chaos_threshold << ")\n\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-28s %-10s %14s %10s  %s\n", "scenario", "kind", "lambda", "coverage", "regime");
    t << buf;
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof buf, "%-28s %-10s %14.6g %10.4f  %s\n", row.name.c_str(), row.kind.c_str(),
                      row.lambda, row.coverage, row.regime.c_str());
        t << buf;
    }
    if (!flags.empty()) {
        t << '\n';
        for (const auto& f : flags)
            t << f["classical"].get<std::string>() << " vs " << f["bohmian"].get<std::string>() << ": "
              << f["flag"].get<std::string>() << '\n';
    }
    if (!diffs.empty()) {
        t << '\n';
        for (const auto& d : diffs) {
            std::snprintf(buf, sizeof buf, "%s -> %s: d_lambda %.6g, d_coverage %.4f, %d data files differ\n",
                          d["a"].get<std::string>().c_str(), d["b"].get<std::string>().c_str(),
                          d["lyapunov"].get<double>(), d["coverage"].get<double>(),
                          d["differing_data_files"].get<int>());
            t << buf;
        }
    }
    r.text = t.str();
    return r;
}

unsigned threads_from_environment(std::optional<unsigned> cli) {
    if (cli) return *cli;
    const char* env = std::getenv("PILOTWAVE_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 0 || v > 4096) throw ConfigError("PILOTWAVE_THREADS", "expected a non-negative integer");
    return static_cast<unsigned>(v);
}

}  // namespace pilotwave::lab
