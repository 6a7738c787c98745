#pragma once

#include "afcsim/afc.hpp"
#include "afcsim/lifetime.hpp"
#include "afcsim/noise.hpp"
#include "afcsim/population.hpp"
#include "afcsim/protocol.hpp"
#include "afcsim/relaxation.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afcsim {

inline constexpr std::uint64_t kDefaultSeed = 20190611;

enum class Stage { prepare, spectrum, lifetime, afc, noise, optimize, cavity };
inline constexpr Stage kStageOrder[] = {Stage::prepare, Stage::spectrum, Stage::afc,
                                        Stage::lifetime, Stage::noise,   Stage::optimize,
                                        Stage::cavity};

const char* to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);
bool needs_grid(Stage stage);

struct LifetimeStage {
    enum class Mode { feature, hole } mode = Mode::feature;
    DecayProbe probe;
    bool compare_ladder_only = false;
};

struct AfcStage {
    std::vector<double> teeth_mhz{-3.0, -1.5, 0.0, 1.5, 3.0};
    SpectrumWindow window{-25.0, 25.0, 0.01};
    PulseSpec pulse;
    EchoOptions echo;
    int ideal_teeth = 51;
};

struct NoiseStage {
    StorageRun run;
    double added_noise = 0.0;
    int phase_bins = 16;
    int bootstrap_rounds = 400;
    bool write_samples = false;
};

struct OptimizeStage {
    std::vector<double> peak_od_db{18.0};
    std::vector<double> background_db{1.0};
};

struct ProjectionRow {
    std::string label;
    bool cavity = false;
    double peak_od_db = 0.0;
    double finesse = 0.0;
    double background_db = 0.0;
    CavityDesign design;  // used when `cavity`
};

struct ScenarioConfig {
    std::string name;
    std::string source;    // config path, empty for in-memory text
    std::string base_dir;  // relative paths resolve against this
    std::vector<std::string> input_files;

    std::vector<Stage> stages;
    std::uint64_t rng_seed = kDefaultSeed;
    bool seed_given = false;

    std::string scheme_path;  // empty: built-in defaults
    LevelScheme scheme = LevelScheme::defaults();
    double temperature_k = 1.5;
    GridSpec grid;
    ProtocolContext context;
    std::vector<std::string> script_paths;
    std::vector<ProtocolScript> scripts;
    bool write_snapshot = false;

    SpectrumWindow spectrum_window{-10.0, 10.0, 0.01};
    LifetimeStage lifetime;
    AfcStage afc;
    NoiseStage noise;
    OptimizeStage optimize;
    std::vector<ProjectionRow> projections;

    bool has_stage(Stage stage) const;
};

/// Parses and validates a scenario. Relative file references resolve against
/// `base_dir`. Unknown keys and sections are rejected.
ScenarioConfig parse_config(std::string_view text, const std::string& source = {},
                            const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

struct ScenarioOptions {
    std::string output_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<std::vector<Stage>> only_stages;  // restricts the configured stages
    std::function<void(const std::string&)> log;
};

struct StageReport {
    Stage stage = Stage::prepare;
    bool ok = false;
    std::string error;
    std::vector<std::string> outputs;
};

struct ScenarioResult {
    std::string output_dir;
    bool complete = false;
    std::vector<StageReport> stages;
    nlohmann::json results;
    nlohmann::json manifest;
};

/// Runs the requested stages in dependency order and writes one artifact per
/// stage plus manifest.json. A failing stage stops the run; the manifest is
/// still written with "complete": false and the failing stage's error.
ScenarioResult run_scenario(const ScenarioConfig& config, const ScenarioOptions& options);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_hex(std::string_view bytes);

/// Project version string baked in at build time.
const char* version();

}  // namespace afcsim
