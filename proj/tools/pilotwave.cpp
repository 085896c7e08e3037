#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "pilotwave/lab.hpp"

namespace fs = std::filesystem;
using namespace pilotwave;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int run_command(const std::string& config, const std::string& out, std::optional<unsigned> threads,
                bool no_plots) {
    lab::RunOptions opts;
    if (!out.empty()) opts.out = out;
    opts.threads = lab::threads_from_environment(threads);
    opts.plots = !no_plots;
    const auto manifest = lab::run_scenario_file(config, opts);
    std::cout << manifest["scenario"].get<std::string>() << ": " << manifest["files"].size()
              << " files, " << manifest["wall_time_s"].get<double>() << " s\n";
    for (const auto& w : manifest["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
    return exit_ok;
}

int plot_command(const std::string& data, const std::string& spec, std::string out) {
    const auto table = io::read_table(fs::path(data));
    const fs::path spec_path(spec);
    const auto svg = lab::render_plot(table, io::read_json(spec_path), spec_path.parent_path());
    if (out.empty()) out = fs::path(data).replace_extension(".svg").string();
    io::write_text(out, svg);
    std::cout << out << '\n';
    return exit_ok;
}

int compare_command(const std::vector<std::string>& manifests, const std::string& out) {
    std::vector<io::json> docs;
    for (const auto& m : manifests) {
        fs::path p(m);
        if (fs::is_directory(p)) p /= "manifest.json";
        docs.push_back(io::read_json(p));
    }
    const auto report = lab::compare_report(docs);
    if (!out.empty()) {
        io::write_json(fs::path(out) / "report.json", report.doc);
        io::write_text(fs::path(out) / "report.txt", report.text);
    }
    std::cout << report.text;
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pilotwave: classical, Bohmian and semiclassical trajectory laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", lab::tool_version);

    std::string config, out, data, spec, compare_out;
    std::optional<unsigned> threads;
    bool no_plots = false;
    std::vector<std::string> manifests;

    auto* run = app.add_subcommand("run", "run a scenario and write data files plus manifest.json");
    run->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory (overrides the scenario)");
    run->add_option("--threads", threads, "worker threads (default: PILOTWAVE_THREADS or all cores)");
    run->add_flag("--no-plots", no_plots, "skip SVG output");

    auto* validate = app.add_subcommand("validate", "check a scenario without running it");
    validate->add_option("config", config, "scenario JSON")->required()->check(CLI::ExistingFile);

    auto* plot = app.add_subcommand("plot", "render a CSV dataset to SVG");
    plot->add_option("data", data, "CSV file")->required()->check(CLI::ExistingFile);
    plot->add_option("--spec", spec, "plot spec JSON")->required()->check(CLI::ExistingFile);
    plot->add_option("--out", out, "SVG path (default: next to the data)");

    auto* compare = app.add_subcommand("compare", "compare completed runs");
    compare->add_option("manifests", manifests, "manifest.json files or run directories")->required();
    compare->add_option("--out", compare_out, "directory for report.json and report.txt");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        if (*run) return run_command(config, out, threads, no_plots);
        if (*validate) {
            const fs::path p(config);
            lab::validate_scenario(io::read_json(p), p.parent_path());
            std::cout << "ok\n";
            return exit_ok;
        }
        if (*plot) return plot_command(data, spec, out);
        if (*compare) return compare_command(manifests, compare_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const lab::ScenarioFailure& e) {
        std::cerr << "numerical failure: " << e.what() << " (see failure.json)\n";
        return exit_numerical;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_config;
}
