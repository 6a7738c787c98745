#include "afcsim/protocol.hpp"

#include "afcsim/error.hpp"
#include "afcsim/keyvalue.hpp"

#include <cmath>

namespace afcsim {

namespace {

using kv::Dimension;

void require_positive(const kv::Section& s, std::string_view key, double value) {
    if (!(value > 0.0)) s.fail(key, "must be positive");
}

long read_repeat(const kv::Section& s) {
    const long long r = s.get_integer_or("repeat", 1);
    if (r < 1) s.fail("repeat", "must be a positive integer");
    return static_cast<long>(r);
}

ProtocolStep parse_step(const kv::Section& s, const LevelScheme& scheme) {
    ProtocolStep step;
    step.line = s.line();
    if (s.name() == "burn") {
        step.kind = ProtocolStep::Kind::burn;
        const std::string text = s.get_string("transition");
        try {
            const Transition t = parse_transition(scheme, text);
            if (!is_supported_band(t.delta_mi)) {
                throw DomainError("DmI = " + std::to_string(t.delta_mi) + " is not a supported band");
            }
            if (t.strength <= 0.0) throw DomainError("transition has zero oscillator strength");
            step.transition = t;
        } catch (const DomainError& e) {
            s.fail("transition", e.what());
        }
        if (s.has("center") && s.has("offset")) s.fail("center", "give either center or offset");
        if (s.has("center")) step.center_mhz = s.get_number("center", Dimension::frequency);
        step.offset_mhz = s.get_number_or("offset", 0.0, Dimension::frequency);
        step.width_khz = s.get_number("width", Dimension::frequency) * 1e3;
        require_positive(s, "width", step.width_khz);
    } else if (s.name() == "sweep") {
        step.kind = ProtocolStep::Kind::sweep;
        const long long band = s.get_integer("band");
        if (band < -2 || band > 1) s.fail("band", "supported bands are -2, -1, 0, +1");
        step.band = static_cast<int>(band);
        step.span_mhz = s.get_number("span", Dimension::frequency);
        require_positive(s, "span", step.span_mhz);
        step.sweep_rate_hz = s.get_number("sweep_rate", Dimension::frequency) * 1e6;
        require_positive(s, "sweep_rate", step.sweep_rate_hz);
    } else {
        step.kind = ProtocolStep::Kind::wait;
    }
    step.duration_s = s.get_number("duration", Dimension::time);
    require_positive(s, "duration", step.duration_s);
    if (step.kind != ProtocolStep::Kind::wait) {
        step.rabi_khz = s.get_number_or("rabi", 0.5, Dimension::frequency) * 1e3;
        if (!(step.rabi_khz >= 0.0)) s.fail("rabi", "must be non-negative");
    }
    step.repeat = read_repeat(s);
    s.reject_unknown();
    return step;
}

std::string step_label(const ProtocolStep& step) {
    switch (step.kind) {
        case ProtocolStep::Kind::burn:
            return "burn " + step.transition->g_level.to_string() + " -> " +
                   step.transition->e_level.to_string();
        case ProtocolStep::Kind::sweep:
            return "sweep DmI=" + std::to_string(step.band);
        case ProtocolStep::Kind::wait:
            return "wait";
    }
    return {};
}

}  // namespace

const char* to_string(ProtocolStep::Kind kind) {
    switch (kind) {
        case ProtocolStep::Kind::burn: return "burn";
        case ProtocolStep::Kind::sweep: return "sweep";
        case ProtocolStep::Kind::wait: return "wait";
    }
    return "?";
}

double ProtocolStep::laser_mhz(double cycle_offset_mhz) const {
    if (center_mhz) return *center_mhz + cycle_offset_mhz;
    return transition->center_frequency_mhz + offset_mhz + cycle_offset_mhz;
}

std::size_t ProtocolScript::step_count() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += b.steps.size();
    return n;
}

ProtocolScript parse_protocol(std::string_view text, const LevelScheme& scheme,
                              const std::string& source) {
    const kv::Document doc = kv::parse(text, source);
    ProtocolScript script;
    script.source = source;
    script.name = doc.root.find_string("name").value_or("");
    doc.root.reject_unknown();

    ProtocolBlock* open_cycle = nullptr;
    int cycle_line = 0;
    for (const auto& s : doc.sections) {
        const std::string& kind = s.name();
        if (kind == "cycle") {
            if (open_cycle) {
                throw ConfigError("nested [cycle] (previous opened on line " +
                                      std::to_string(cycle_line) + ")",
                                  s.line(), 1, source);
            }
            ProtocolBlock block;
            block.repeat = read_repeat(s);
            if (s.has("offsets")) {
                block.offsets_mhz = s.get_numbers("offsets", Dimension::frequency);
                if (block.offsets_mhz.empty()) s.fail("offsets", "list is empty");
            }
            s.reject_unknown();
            script.blocks.push_back(std::move(block));
            open_cycle = &script.blocks.back();
            cycle_line = s.line();
        } else if (kind == "end") {
            if (!open_cycle) throw ConfigError("[end] without [cycle]", s.line(), 1, source);
            s.reject_unknown();
            if (open_cycle->steps.empty()) {
                throw ConfigError("empty [cycle] block", cycle_line, 1, source);
            }
            open_cycle = nullptr;
        } else if (kind == "burn" || kind == "sweep" || kind == "wait") {
            ProtocolStep step = parse_step(s, scheme);
            if (open_cycle) {
                open_cycle->steps.push_back(std::move(step));
            } else {
                ProtocolBlock block;
                block.steps.push_back(std::move(step));
                script.blocks.push_back(std::move(block));
            }
        } else {
            throw ConfigError("unknown step [" + kind + "] (expected burn, sweep, wait, cycle, end)",
                              s.line(), 1, source);
        }
    }
    if (open_cycle) throw ConfigError("[cycle] is missing its [end]", cycle_line, 1, source);
    if (script.blocks.empty()) throw ConfigError("script has no steps", 0, 0, source);
    return script;
}

ProtocolScript load_protocol(const std::string& path, const LevelScheme& scheme) {
    return parse_protocol(kv::read_file(path), scheme, path);
}

double protocol_time(const ProtocolScript& script) {
    double total = 0.0;
    for (const auto& block : script.blocks) {
        double body = 0.0;
        for (const auto& step : block.steps) body += step.duration_s * static_cast<double>(step.repeat);
        total += body * static_cast<double>(block.repeat) * static_cast<double>(block.offsets_mhz.size());
    }
    return total;
}

ProtocolLog run_protocol(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                         const ProtocolScript& script, const ProtocolContext& context) {
    context.pump.validate();
    context.relaxation.validate();
    ProtocolLog log;
    double elapsed = 0.0;
    std::size_t index = 0;
    for (const auto& block : script.blocks) {
        std::vector<std::size_t> executions(block.steps.size(), 0);
        for (long r = 0; r < block.repeat; ++r) {
            for (double offset : block.offsets_mhz) {
                for (std::size_t k = 0; k < block.steps.size(); ++k) {
                    const ProtocolStep& step = block.steps[k];
                    try {
                        for (long n = 0; n < step.repeat; ++n) {
                            switch (step.kind) {
                                case ProtocolStep::Kind::burn:
                                    apply_burn(grid, scheme, *step.transition, step.laser_mhz(offset),
                                               step.width_khz, step.duration_s, step.rabi_khz,
                                               context.pump);
                                    break;
                                case ProtocolStep::Kind::sweep:
                                    apply_sweep(grid, scheme, step.band, step.span_mhz,
                                                step.duration_s, step.sweep_rate_hz, step.rabi_khz,
                                                context.pump);
                                    break;
                                case ProtocolStep::Kind::wait:
                                    relax(grid, scheme, step.duration_s, context.relaxation);
                                    break;
                            }
                            elapsed += step.duration_s;
                        }
                    } catch (const Error& e) {
                        throw DomainError("step " + std::to_string(index + k + 1) + " (" +
                                          to_string(step.kind) + ", line " +
                                          std::to_string(step.line) + "): " + e.what());
                    }
                    ++executions[k];
                }
            }
        }
        for (std::size_t k = 0; k < block.steps.size(); ++k) {
            StepLogEntry entry;
            entry.step_index = index + k;
            entry.kind = block.steps[k].kind;
            entry.label = step_label(block.steps[k]);
            entry.executions = executions[k] * static_cast<std::size_t>(block.steps[k].repeat);
            entry.cumulative_time_s = elapsed;
            entry.level_totals = grid.level_totals();
            log.entries.push_back(std::move(entry));
        }
        index += block.steps.size();
    }
    log.total_time_s = elapsed;
    return log;
}

}  // namespace afcsim
