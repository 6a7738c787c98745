#pragma once

// Preparation scripts: ordered burn / sweep / wait steps, optionally grouped
// in repeated cycles.
//
//   name = anti_polarize
//   [cycle]
//   repeat = 250
//   offsets = -3, 0, 3 MHz      # optional: run the body once per class offset
//   [burn]
//   transition = +7/2 -> +3/2
//   offset = 0 MHz              # laser at f(transition) + offset (or: center = ...)
//   width = 500 kHz
//   duration = 100 us
//   rabi = 500 kHz
//   [end]
//   [sweep]
//   band = +1
//   span = 1000 MHz
//   duration = 10 s
//   sweep_rate = 25 Hz
//   [wait]
//   duration = 60 s
//
// Steps outside a cycle run once. Every step also accepts `repeat`.

#include "afcsim/hyperfine.hpp"
#include "afcsim/population.hpp"
#include "afcsim/relaxation.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace afcsim {

struct ProtocolStep {
    enum class Kind { burn, sweep, wait };

    Kind kind = Kind::wait;
    std::optional<Transition> transition;  // burn
    double offset_mhz = 0.0;               // burn: laser detuning from f(transition)
    std::optional<double> center_mhz;      // burn: absolute laser frequency instead
    double width_khz = 0.0;                // burn
    int band = 0;                          // sweep
    double span_mhz = 0.0;                 // sweep
    double sweep_rate_hz = 0.0;            // sweep
    double duration_s = 0.0;
    double rabi_khz = 500.0;
    long repeat = 1;
    int line = 0;  // source line, for diagnostics

    /// Laser frequency for a class offset applied by the enclosing cycle.
    double laser_mhz(double cycle_offset_mhz) const;
};

const char* to_string(ProtocolStep::Kind kind);

struct ProtocolBlock {
    long repeat = 1;
    std::vector<double> offsets_mhz{0.0};
    std::vector<ProtocolStep> steps;
};

struct ProtocolScript {
    std::string name;
    std::string source;
    std::vector<ProtocolBlock> blocks;

    std::size_t step_count() const;
};

/// Parses and validates a script against the scheme. Throws ConfigError with
/// line/column for syntax and semantic problems.
ProtocolScript parse_protocol(std::string_view text, const LevelScheme& scheme,
                              const std::string& source = {});
ProtocolScript load_protocol(const std::string& path, const LevelScheme& scheme);

/// Wall-clock protocol time: sum of durations times all repeats and offsets.
double protocol_time(const ProtocolScript& script);

struct ProtocolContext {
    PumpCalibration pump;
    RelaxationRates relaxation = default_relaxation_rates();
};

struct StepLogEntry {
    std::size_t step_index = 0;  // running index over the script's steps
    ProtocolStep::Kind kind = ProtocolStep::Kind::wait;
    std::string label;
    std::size_t executions = 0;
    double cumulative_time_s = 0.0;
    LevelVector level_totals{};
};

struct ProtocolLog {
    std::vector<StepLogEntry> entries;
    double total_time_s = 0.0;
};

/// Applies every step in order. Entries are recorded once per script step,
/// after its final execution. Step failures are rethrown with the step index.
ProtocolLog run_protocol(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                         const ProtocolScript& script, const ProtocolContext& context = {});

}  // namespace afcsim
