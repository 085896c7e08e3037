#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pilotwave/bohmian.hpp"
#include "pilotwave/catalog.hpp"
#include "pilotwave/classical.hpp"
#include "pilotwave/io.hpp"
#include "pilotwave/lab.hpp"
#include "pilotwave/semiclassical.hpp"

namespace py = pybind11;
using namespace pilotwave;

namespace {

using Array = py::array_t<double>;

Array column_array(const io::Table& table, const std::string& name) {
    const auto v = table.values(name);
    return Array(static_cast<py::ssize_t>(v.size()), v.data());
}

// Table -> {column: ndarray}
py::dict table_dict(const io::Table& table) {
    py::dict out;
    for (const auto& c : table.columns) out[py::str(c)] = column_array(table, c);
    return out;
}

py::object to_python(const io::json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump());
}

io::json from_python(const py::object& obj) {
    return io::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

const char* status_name(bohmian::TrajectoryStatus s) {
    switch (s) {
    case bohmian::TrajectoryStatus::completed: return "completed";
    case bohmian::TrajectoryStatus::node_halt: return "node_halt";
    case bohmian::TrajectoryStatus::domain_breach: return "domain_breach";
    }
    return "unknown";
}

quantum::Superposition named_state(const std::string& name) {
    for (auto& s : catalog::reference_states())
        if (s.name == name) return s.state;
    throw ConfigError("catalog", "unknown catalog state '" + name + "'");
}

template <class System>
void def_classical(py::module_& m) {
    m.def("integrate_classical",
          [](const System& system, Vec2 q, Vec2 p, double duration, double tol, double sample_interval) {
              classical::IntegrationOptions o;
              o.tol = tol;
              o.sample_interval = sample_interval;
              const auto traj = classical::integrate_classical(system, classical::PhaseState{q, p, 0.0}, duration, o);
              return table_dict(io::trajectory_table(traj));
          },
          py::arg("system"), py::arg("q"), py::arg("p"), py::arg("duration"), py::arg("tol") = 1e-10,
          py::arg("sample_interval") = 0.0, "Returns {t, q1, q2, p1, p2, invariant_drift} arrays.");

    m.def("lyapunov_exponent",
          [](const System& system, Vec2 q, Vec2 p, double horizon) {
              return classical::lyapunov_exponent(system, classical::PhaseState{q, p, 0.0}, horizon).lyapunov_estimate;
          },
          py::arg("system"), py::arg("q"), py::arg("p"), py::arg("horizon"));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "classical, Bohmian and semiclassical trajectories";
    m.attr("__version__") = lab::tool_version;

    auto base = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NodeSingularity>(m, "NodeSingularity", PyExc_RuntimeError);
    py::register_exception<lab::ScenarioFailure>(m, "ScenarioFailure", base.ptr());

    py::class_<SystemConstants>(m, "SystemConstants")
        .def(py::init([](double hbar, double mass, int dimension) {
                 SystemConstants c{hbar, mass, dimension};
                 c.validate();
                 return c;
             }),
             py::arg("hbar") = 1.0, py::arg("mass") = 1.0, py::arg("dimension") = 1)
        .def_readonly("hbar", &SystemConstants::hbar)
        .def_readonly("mass", &SystemConstants::mass)
        .def_readonly("dimension", &SystemConstants::dimension);

    py::class_<DiamagneticSystem>(m, "DiamagneticSystem")
        .def_static("scaled", &DiamagneticSystem::scaled, py::arg("epsilon"))
        .def_static("physical", &DiamagneticSystem::physical, py::arg("energy"), py::arg("field"))
        .def_property_readonly("energy", &DiamagneticSystem::energy)
        .def_property_readonly("field", &DiamagneticSystem::field)
        .def_property_readonly("epsilon", &DiamagneticSystem::epsilon)
        .def("physical_potential", &DiamagneticSystem::physical_potential, py::arg("rho"), py::arg("z"));

    py::class_<SolvableSystem>(m, "SolvableSystem")
        .def_static("free_particle", &SolvableSystem::free_particle, py::arg("cell"),
                    py::arg("constants") = SystemConstants{})
        .def_static("box", &SolvableSystem::box, py::arg("lengths"), py::arg("constants") = SystemConstants{})
        .def_static("harmonic", &SolvableSystem::harmonic, py::arg("omegas"),
                    py::arg("constants") = SystemConstants{})
        .def_property_readonly("name", &SolvableSystem::name)
        .def_property_readonly("dimension", &SolvableSystem::dimension)
        .def_property_readonly("hbar", &SolvableSystem::hbar);

    py::class_<quantum::Superposition>(m, "Superposition")
        .def_static("from_catalog", &named_state, py::arg("name"))
        .def_static("from_dict",
                    [](const py::object& spec) { return io::superposition_from_json(from_python(spec)).state; },
                    py::arg("spec"))
        .def("to_dict", [](const quantum::Superposition& s) { return to_python(io::to_json(s)); })
        .def_property_readonly("system", &quantum::Superposition::system)
        .def_property_readonly("dimension", &quantum::Superposition::dimension)
        .def_property_readonly("input_norm", &quantum::Superposition::input_norm)
        .def("__len__", &quantum::Superposition::size)
        .def("psi", [](const quantum::Superposition& s, Vec2 x, double t) { return quantum::wavefield(s, x, t).psi; },
             py::arg("x"), py::arg("t") = 0.0)
        .def("rho",
             [](const quantum::Superposition& s, Vec2 x, double t) { return quantum::wavefield(s, x, t).rho; },
             py::arg("x"), py::arg("t") = 0.0)
        .def("quantum_potential",
             [](const quantum::Superposition& s, Vec2 x, double t) { return quantum::wavefield(s, x, t).Q; },
             py::arg("x"), py::arg("t") = 0.0)
        .def("velocity", &bohmian::velocity_field, py::arg("x"), py::arg("t") = 0.0);

    m.def("catalog_names", [] {
        std::vector<std::string> names;
        for (const auto& s : catalog::reference_states()) names.push_back(s.name);
        return names;
    });

    // classical
    m.def("launch_from_nucleus",
          [](double alpha) {
              const auto s = classical::launch_from_nucleus(alpha);
              return py::make_tuple(s.q, s.p);
          },
          py::arg("alpha"));

    auto initial = [](Vec2 q, Vec2 p) { return classical::PhaseState{q, p, 0.0}; };
    def_classical<DiamagneticSystem>(m);
    def_classical<SolvableSystem>(m);

    m.def("coverage_fraction",
          [initial](const DiamagneticSystem& system, Vec2 q, Vec2 p, double duration, int grid) {
              classical::IntegrationOptions o;
              o.sample_interval = 0.05;
              const auto traj = classical::integrate_classical(system, initial(q, p), duration, o);
              return classical::coverage_fraction(system, traj, grid);
          },
          py::arg("system"), py::arg("q"), py::arg("p"), py::arg("duration"), py::arg("grid") = 100);

    // Bohmian
    m.def("integrate_bohmian",
          [](const quantum::Superposition& sup, Vec2 x0, double t0, double t1, double tol, double sample_interval) {
              bohmian::BohmianOptions o;
              o.tol = tol;
              o.sample_interval = sample_interval;
              const auto traj = bohmian::integrate_bohmian(sup, x0, t0, t1, o);
              auto out = table_dict(io::bohmian_table(traj));
              out["status"] = status_name(traj.status);
              return out;
          },
          py::arg("state"), py::arg("x0"), py::arg("t0"), py::arg("t1"), py::arg("tol") = 1e-10,
          py::arg("sample_interval") = 0.0);

    m.def("bohmian_lyapunov",
          [](const quantum::Superposition& sup, Vec2 x0, double horizon) {
              return bohmian::bohmian_lyapunov(sup, x0, 0.0, horizon).estimate;
          },
          py::arg("state"), py::arg("x0"), py::arg("horizon"));

    m.def("equilibrium_l1",
          [](const quantum::Superposition& sup, std::size_t count, std::uint64_t seed, double t1, double tol,
             unsigned threads) {
              bohmian::BohmianOptions o;
              o.tol = tol;
              const auto ens = bohmian::sample_quantum_equilibrium(sup, 0.0, count, seed);
              const auto evolved = bohmian::evolve_ensemble(ens, sup, t1, o, threads);
              return bohmian::l1_distance(bohmian::ensemble_histogram(evolved.ensemble, sup),
                                          bohmian::density_histogram(sup, t1));
          },
          py::arg("state"), py::arg("count"), py::arg("seed"), py::arg("t1"), py::arg("tol") = 1e-6,
          py::arg("threads") = 0u,
          "L1 distance between the evolved ensemble histogram and |psi(t1)|^2.");

    m.def("circulation",
          [](const quantum::Superposition& sup, Vec2 center, double half_width, double t) {
              const auto r = bohmian::circulation(sup, bohmian::square_loop(center, half_width), t);
              return py::make_tuple(r.raw_integral, r.winding);
          },
          py::arg("state"), py::arg("center"), py::arg("half_width"), py::arg("t") = 0.0);

    // semiclassical
    m.def("van_vleck_1d",
          [](const SolvableSystem& system, double x1, double x2, double dt) {
              const auto v = semiclassical::van_vleck_1d(system, x1, x2, dt);
              return v.no_path ? py::object(py::none()) : py::object(py::cast(v.value));
          },
          py::arg("system"), py::arg("x1"), py::arg("x2"), py::arg("dt"));

    m.def("semiclassical_green_1d",
          [](const SolvableSystem& system, double x1, double x2, std::complex<double> energy) {
              return semiclassical::semiclassical_green_1d(system, x1, x2, energy).value;
          },
          py::arg("system"), py::arg("x1"), py::arg("x2"), py::arg("energy"));

    m.def("mean_level_density", &semiclassical::mean_level_density, py::arg("system"), py::arg("energy"));
    m.def("spectrum", &semiclassical::spectrum, py::arg("system"), py::arg("e_max"));

    m.def("recurrence_spectrum",
          [](const quantum::Superposition& sup, const std::vector<double>& times) {
              const auto r = semiclassical::recurrence_spectrum(sup, times);
              std::vector<std::pair<double, double>> peaks;
              for (const auto& p : r.peaks) peaks.emplace_back(p.t, p.height);
              return py::make_tuple(Array(static_cast<py::ssize_t>(r.abs_c.size()), r.abs_c.data()), peaks);
          },
          py::arg("state"), py::arg("times"), "Returns (|C(t)| array, [(t, height) peaks]).");

    // scenarios
    m.def("validate_scenario",
          [](const py::object& scenario, const std::filesystem::path& base_dir) {
              lab::validate_scenario(from_python(scenario), base_dir);
          },
          py::arg("scenario"), py::arg("base_dir") = std::filesystem::path{});

    m.def("run_scenario",
          [](const py::object& scenario, const std::filesystem::path& out, const std::filesystem::path& base_dir,
             unsigned threads, bool plots) {
              lab::RunOptions o;
              o.out = out;
              o.threads = threads;
              o.plots = plots;
              const auto doc = from_python(scenario);
              io::json manifest;
              {
                  py::gil_scoped_release release;
                  manifest = lab::run_scenario(doc, base_dir, o);
              }
              return to_python(manifest);
          },
          py::arg("scenario"), py::arg("out"), py::arg("base_dir") = std::filesystem::path{},
          py::arg("threads") = 0u, py::arg("plots") = true, "Runs a scenario dict and returns its manifest.");

    m.def("read_table", [](const std::filesystem::path& p) { return table_dict(io::read_table(p)); },
          py::arg("path"));
}
