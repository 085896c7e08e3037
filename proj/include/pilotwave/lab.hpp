#pragma once

// Scenario runner behind the pilotwave command-line tool: validated JSON
// scenarios, data files with a checksummed manifest, SVG plots and
// classical-vs-Bohmian comparison reports.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pilotwave/io.hpp"

namespace pilotwave::lab {

using io::json;

inline constexpr int schema_version = 1;
inline constexpr const char* tool_version = "0.1.0";

// lambda at or above this is reported as chaotic, below it as regular.
inline constexpr double chaos_threshold = 0.01;

// A run that hit a numerical failure after writing its partial outputs and
// failure.json; the manifest is already on disk.
class ScenarioFailure : public NumericalError {
public:
    ScenarioFailure(const std::string& what, json manifest_doc)
        : NumericalError(what), manifest(std::move(manifest_doc)) {}
    json manifest;
};

struct RunOptions {
    std::optional<std::filesystem::path> out; // overrides the scenario "output"
    unsigned threads = 0;                     // 0: hardware concurrency
    bool plots = true;
};

// Parses and fully validates a scenario without running it. Relative paths
// inside the scenario resolve against base_dir. Throws ConfigError.
void validate_scenario(const json& scenario, const std::filesystem::path& base_dir = {});

// Runs one scenario and writes <out>/manifest.json plus the data files.
// ConfigError for invalid scenarios, ScenarioFailure for numerical failures.
json run_scenario(const json& scenario, const std::filesystem::path& base_dir,
                  const RunOptions& options = {});
json run_scenario_file(const std::filesystem::path& config, const RunOptions& options = {});

// Hex SHA-256 of a byte string / file.
std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

// Canonical hash of a scenario (sorted keys, compact dump).
std::string scenario_hash(const json& scenario);

// {"schema", "type": "line"|"scatter", "x", "y", "title", "width", "height",
//  "overlay": {"file", "x", "y"}, "peaks": floor, "ticks": [..]}
// Column mismatches throw ConfigError. An empty table gives axes only.
std::string render_plot(const io::Table& data, const json& spec,
                        const std::filesystem::path& base_dir = {});

struct Report {
    json doc;
    std::string text;
};

// Side-by-side lambda / coverage table of completed runs. Manifests without
// metrics throw ConfigError.
Report compare_report(const std::vector<json>& manifests);

unsigned threads_from_environment(std::optional<unsigned> cli);

}  // namespace pilotwave::lab
