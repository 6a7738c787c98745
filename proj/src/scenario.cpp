#include "afcsim/scenario.hpp"

#include "afcsim/csv.hpp"
#include "afcsim/error.hpp"
#include "afcsim/keyvalue.hpp"
#include "afcsim/spectrum.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#ifndef AFCSIM_VERSION
#define AFCSIM_VERSION "0.0.0"
#endif

namespace afcsim {

namespace fs = std::filesystem;
using kv::Dimension;
using nlohmann::json;

namespace {

struct StageName {
    Stage stage;
    const char* name;
};
constexpr StageName kStageNames[] = {
    {Stage::prepare, "prepare"}, {Stage::spectrum, "spectrum"}, {Stage::lifetime, "lifetime"},
    {Stage::afc, "afc"},         {Stage::noise, "noise"},       {Stage::optimize, "optimize"},
    {Stage::cavity, "cavity"}};

std::string resolve(const std::string& base_dir, const std::string& path) {
    fs::path p(path);
    if (p.is_absolute()) return p.lexically_normal().string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

double positive(const kv::Section& s, std::string_view key, double fallback, Dimension dim) {
    const double v = s.get_number_or(key, fallback, dim);
    if (!(v > 0.0)) s.fail(key, "must be positive");
    return v;
}

double non_negative(const kv::Section& s, std::string_view key, double fallback, Dimension dim) {
    const double v = s.get_number_or(key, fallback, dim);
    if (!(v >= 0.0)) s.fail(key, "must be non-negative");
    return v;
}

SpectrumWindow read_window(const kv::Section& s, SpectrumWindow w) {
    w.lo_mhz = s.get_number_or("lo", w.lo_mhz, Dimension::frequency);
    w.hi_mhz = s.get_number_or("hi", w.hi_mhz, Dimension::frequency);
    w.step_mhz = positive(s, "step", w.step_mhz, Dimension::frequency);
    if (!(w.hi_mhz > w.lo_mhz)) s.fail("hi", "must exceed lo");
    return w;
}

void read_grid(const kv::Section& s, ScenarioConfig& c) {
    c.temperature_k = positive(s, "temperature", c.temperature_k, Dimension::temperature);
    GridSpec& g = c.grid;
    g.span_mhz = positive(s, "span", g.span_mhz, Dimension::frequency);
    g.coarse_step_mhz = positive(s, "coarse_step", g.coarse_step_mhz, Dimension::frequency);
    g.fine_center_mhz = s.get_number_or("fine_center", g.fine_center_mhz, Dimension::frequency);
    g.fine_half_width_mhz =
        non_negative(s, "fine_half_width", g.fine_half_width_mhz, Dimension::frequency);
    g.fine_step_mhz = positive(s, "fine_step", g.fine_step_mhz, Dimension::frequency);
    try {
        g.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("[grid]: ") + e.what(), s.line(), 1, s.source());
    }
}

void read_pump(const kv::Section& s, PumpCalibration& p) {
    p.rate_per_s = positive(s, "rate", p.rate_per_s, Dimension::none);
    p.reference_rabi_khz =
        positive(s, "reference_rabi", p.reference_rabi_khz * 1e-3, Dimension::frequency) * 1e3;
    p.saturation_cap = positive(s, "saturation_cap", p.saturation_cap, Dimension::none);
    p.jitter_fwhm_khz =
        non_negative(s, "jitter", p.jitter_fwhm_khz * 1e-3, Dimension::frequency) * 1e3;
    p.jump_fraction = non_negative(s, "jump_fraction", p.jump_fraction, Dimension::none);
    p.jump_fwhm_khz = non_negative(s, "jump_width", p.jump_fwhm_khz * 1e-3, Dimension::frequency) * 1e3;
    p.repump_overlap = non_negative(s, "repump_overlap", p.repump_overlap, Dimension::none);
    p.sweep_efficiency = positive(s, "sweep_efficiency", p.sweep_efficiency, Dimension::none);
    p.depolarization_rate_per_s =
        non_negative(s, "depolarization_rate", p.depolarization_rate_per_s, Dimension::none);
    try {
        p.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("[pump]: ") + e.what(), s.line(), 1, s.source());
    }
}

void read_relaxation(const kv::Section& s, RelaxationRates& r) {
    r.ladder_rate_per_s = non_negative(s, "ladder_rate", r.ladder_rate_per_s, Dimension::none);
    r.cross_coefficient_per_s =
        non_negative(s, "cross_coefficient", r.cross_coefficient_per_s, Dimension::none);
    r.temperature_k = positive(s, "temperature", r.temperature_k, Dimension::temperature);
}

void read_lifetime(const kv::Section& s, LifetimeStage& l) {
    if (auto mode = s.find_string("mode")) {
        if (*mode == "feature") {
            l.mode = LifetimeStage::Mode::feature;
        } else if (*mode == "hole") {
            l.mode = LifetimeStage::Mode::hole;
        } else {
            s.fail("mode", "expected 'feature' or 'hole', got '" + *mode + "'");
        }
    }
    DecayProbe& p = l.probe;
    p.feature_center_mhz = s.get_number_or("feature_center", p.feature_center_mhz, Dimension::frequency);
    p.reference_offset_mhz =
        positive(s, "reference_offset", p.reference_offset_mhz, Dimension::frequency);
    p.antihole_center_mhz =
        s.get_number_or("antihole_center", p.antihole_center_mhz, Dimension::frequency);
    p.interval_s = positive(s, "interval", p.interval_s, Dimension::time);
    const long long samples = s.get_integer_or("samples", p.samples);
    if (samples < 3 || samples > 100000) s.fail("samples", "must be between 3 and 100000");
    p.samples = static_cast<int>(samples);
    p.window = read_window(s, p.window);
    l.compare_ladder_only = s.get_bool_or("compare_ladder_only", l.compare_ladder_only);
}

void read_afc(const kv::Section& s, AfcStage& a) {
    if (s.has("teeth")) {
        a.teeth_mhz = s.get_numbers("teeth", Dimension::frequency);
        if (a.teeth_mhz.size() < 2) s.fail("teeth", "need at least two tooth centres");
        if (!std::is_sorted(a.teeth_mhz.begin(), a.teeth_mhz.end()) ||
            std::adjacent_find(a.teeth_mhz.begin(), a.teeth_mhz.end()) != a.teeth_mhz.end()) {
            s.fail("teeth", "tooth centres must be strictly increasing");
        }
    }
    a.window = read_window(s, a.window);
    a.pulse.fwhm_ns = positive(s, "pulse_fwhm", a.pulse.fwhm_ns * 1e-9, Dimension::time) * 1e9;
    a.pulse.center_mhz = s.get_number_or("pulse_center", a.pulse.center_mhz, Dimension::frequency);
    if (auto shape = s.find_string("pulse_shape")) {
        if (*shape == "gaussian") {
            a.pulse.shape = PulseShape::gaussian;
        } else if (*shape == "square") {
            a.pulse.shape = PulseShape::square;
        } else {
            s.fail("pulse_shape", "expected 'gaussian' or 'square'");
        }
    }
    if (s.has("reference_background")) {
        a.echo.reference_background_db =
            non_negative(s, "reference_background", 0.0, Dimension::attenuation);
    }
    a.echo.edge_tolerance = positive(s, "edge_tolerance", a.echo.edge_tolerance, Dimension::none);
    const long long ideal = s.get_integer_or("ideal_teeth", a.ideal_teeth);
    if (ideal < 0 || ideal > 1000) s.fail("ideal_teeth", "must be between 0 and 1000");
    a.ideal_teeth = static_cast<int>(ideal);
}

void read_noise(const kv::Section& s, NoiseStage& n) {
    StorageRun& r = n.run;
    const long long events = s.get_integer_or("events", r.n_events);
    if (events < 100) s.fail("events", "need at least 100 events");
    r.n_events = static_cast<long>(events);
    r.mean_photons_at_crystal = non_negative(s, "mean_photons", r.mean_photons_at_crystal, Dimension::none);
    r.efficiency = non_negative(s, "efficiency", r.efficiency, Dimension::none);
    if (r.efficiency > 1.0) s.fail("efficiency", "must not exceed 1");
    r.collection_loss_db = non_negative(s, "loss", r.collection_loss_db, Dimension::attenuation);
    r.phase_jitter_rad = non_negative(s, "phase_jitter", r.phase_jitter_rad, Dimension::none);
    n.added_noise = non_negative(s, "added_noise", n.added_noise, Dimension::none);
    const long long bins = s.get_integer_or("phase_bins", n.phase_bins);
    if (bins < 1 || bins > 4096) s.fail("phase_bins", "must be between 1 and 4096");
    n.phase_bins = static_cast<int>(bins);
    const long long rounds = s.get_integer_or("bootstrap_rounds", n.bootstrap_rounds);
    if (rounds < 20 || rounds > 100000) s.fail("bootstrap_rounds", "must be between 20 and 100000");
    n.bootstrap_rounds = static_cast<int>(rounds);
    n.write_samples = s.get_bool_or("write_samples", n.write_samples);
}

void read_optimize(const kv::Section& s, OptimizeStage& o) {
    if (s.has("peak_od")) o.peak_od_db = s.get_numbers("peak_od", Dimension::attenuation);
    if (s.has("background")) o.background_db = s.get_numbers("background", Dimension::attenuation);
    if (o.peak_od_db.empty()) s.fail("peak_od", "list is empty");
    if (o.background_db.empty()) s.fail("background", "list is empty");
    for (double d : o.peak_od_db) {
        if (!(d > 0.0)) s.fail("peak_od", "values must be positive");
    }
    for (double d : o.background_db) {
        if (!(d >= 0.0)) s.fail("background", "values must be non-negative");
    }
}

ProjectionRow read_projection(const kv::Section& s) {
    ProjectionRow row;
    row.label = s.get_string("label");
    const std::string kind = s.find_string("kind").value_or("free_space");
    if (kind == "cavity") {
        row.cavity = true;
    } else if (kind != "free_space") {
        s.fail("kind", "expected 'free_space' or 'cavity', got '" + kind + "'");
    }
    row.peak_od_db = positive(s, "peak_od", 0.0, Dimension::attenuation);
    row.finesse = s.get_number("finesse");
    if (!(row.finesse > 1.0)) s.fail("finesse", "must exceed 1");
    row.background_db = non_negative(s, "background", 0.0, Dimension::attenuation);
    if (s.has("isotopic_purity")) {
        // background scales with the impurity fraction relative to the 92% crystal
        const double purity = s.get_number("isotopic_purity");
        if (!(purity > 0.0 && purity <= 1.0)) s.fail("isotopic_purity", "must be in (0, 1]");
        const double reference = s.get_number_or("reference_purity", 0.92);
        if (!(reference > 0.0 && reference < 1.0)) s.fail("reference_purity", "must be in (0, 1)");
        row.background_db *= (1.0 - purity) / (1.0 - reference);
    }
    if (row.cavity) {
        CavityDesign& d = row.design;
        d.cavity_length_cm = positive(s, "cavity_length", d.cavity_length_cm, Dimension::length);
        d.cavity_finesse = positive(s, "cavity_finesse", d.cavity_finesse, Dimension::none);
        d.bandwidth_mhz = positive(s, "bandwidth", d.bandwidth_mhz, Dimension::frequency);
        d.comb_finesse = row.finesse;
        d.peak_od_db = row.peak_od_db;
        d.background_db = row.background_db;
    }
    return row;
}

}  // namespace

const char* to_string(Stage stage) {
    for (const auto& s : kStageNames) {
        if (s.stage == stage) return s.name;
    }
    return "unknown";
}

std::optional<Stage> parse_stage(std::string_view text) {
    for (const auto& s : kStageNames) {
        if (text == s.name) return s.stage;
    }
    return std::nullopt;
}

bool needs_grid(Stage stage) {
    return stage == Stage::prepare || stage == Stage::spectrum || stage == Stage::lifetime ||
           stage == Stage::afc;
}

bool ScenarioConfig::has_stage(Stage stage) const {
    return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

ScenarioConfig parse_config(std::string_view text, const std::string& source,
                            const std::string& base_dir) {
    const kv::Document doc = kv::parse(text, source);
    ScenarioConfig c;
    c.source = source;
    c.base_dir = base_dir;
    if (!source.empty()) c.input_files.push_back(source);

    const kv::Section& root = doc.root;
    c.name = root.get_string("name");
    if (root.has("rng_seed")) {
        const long long v = root.get_integer("rng_seed");
        if (v < 0) root.fail("rng_seed", "must be non-negative");
        c.rng_seed = static_cast<std::uint64_t>(v);
        c.seed_given = true;
    }
    for (const auto& item : root.get_list("stages")) {
        const auto stage = parse_stage(item);
        if (!stage) root.fail("stages", "unknown stage '" + item + "'");
        if (!c.has_stage(*stage)) c.stages.push_back(*stage);
    }
    if (c.stages.empty()) root.fail("stages", "at least one stage is required");
    if (auto scheme = root.find_string("scheme")) {
        c.scheme_path = resolve(base_dir, *scheme);
        try {
            c.scheme = load_level_scheme(c.scheme_path);
        } catch (const DomainError& e) {
            root.fail("scheme", e.what());
        }
        c.input_files.push_back(c.scheme_path);
    }
    root.reject_unknown();

    const kv::Section* prepare = nullptr;
    bool seen_projection = false;
    for (const auto& s : doc.sections) {
        const std::string& n = s.name();
        auto once = [&](const char* what) {
            for (const auto& other : doc.sections) {
                if (&other == &s) break;
                if (other.name() == what) {
                    throw ConfigError("duplicate section [" + n + "]", s.line(), 1, source);
                }
            }
        };
        if (n == "grid") {
            once("grid");
            read_grid(s, c);
        } else if (n == "pump") {
            once("pump");
            read_pump(s, c.context.pump);
        } else if (n == "relaxation") {
            once("relaxation");
            read_relaxation(s, c.context.relaxation);
        } else if (n == "prepare") {
            once("prepare");
            prepare = &s;
            for (const auto& item : s.get_list("scripts")) {
                c.script_paths.push_back(resolve(base_dir, item));
            }
            c.write_snapshot = s.get_bool_or("snapshot", false);
        } else if (n == "spectrum") {
            once("spectrum");
            c.spectrum_window = read_window(s, c.spectrum_window);
        } else if (n == "lifetime") {
            once("lifetime");
            read_lifetime(s, c.lifetime);
        } else if (n == "afc") {
            once("afc");
            read_afc(s, c.afc);
        } else if (n == "noise") {
            once("noise");
            read_noise(s, c.noise);
        } else if (n == "optimize") {
            once("optimize");
            read_optimize(s, c.optimize);
        } else if (n == "projection") {
            seen_projection = true;
            c.projections.push_back(read_projection(s));
        } else {
            throw ConfigError("unknown section [" + n + "]", s.line(), 1, source);
        }
        s.reject_unknown();
    }

    const bool grid_needed = std::any_of(c.stages.begin(), c.stages.end(), needs_grid);
    if (grid_needed && !c.has_stage(Stage::prepare)) {
        c.stages.insert(c.stages.begin(), Stage::prepare);
    }
    if (c.has_stage(Stage::cavity) && !seen_projection) {
        throw ConfigError("stage 'cavity' needs at least one [projection] section", 0, 0, source);
    }
    if (grid_needed) {
        for (const auto& path : c.script_paths) {
            c.scripts.push_back(load_protocol(path, c.scheme));
            c.input_files.push_back(path);
        }
    } else if (prepare && !c.script_paths.empty()) {
        for (const auto& path : c.script_paths) c.input_files.push_back(path);
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    const std::string text = kv::read_file(path);
    std::string base = fs::path(path).parent_path().string();
    if (base.empty()) base = ".";
    return parse_config(text, path, base);
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw NumericError("SHA-256 computation failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::string& path) { return sha256_hex(kv::read_file(path)); }

const char* version() { return AFCSIM_VERSION; }

namespace {

json spectrum_summary(const AbsorptionSpectrum& sp) {
    const auto it = std::max_element(sp.absorption_db.begin(), sp.absorption_db.end());
    const auto lo = std::min_element(sp.absorption_db.begin(), sp.absorption_db.end());
    return {{"points", sp.size()},
            {"max_db", *it},
            {"max_at_mhz", sp.frequencies_mhz[static_cast<std::size_t>(it - sp.absorption_db.begin())]},
            {"min_db", *lo}};
}

void write_spectrum(const AbsorptionSpectrum& sp, const std::string& path) {
    CsvTable t({"frequency_mhz", "absorption_db", "i0_tail_db", "bulk_tail_db",
                "residual_polarization_db"});
    for (std::size_t i = 0; i < sp.size(); ++i) {
        t.add_row({sp.frequencies_mhz[i], sp.absorption_db[i], sp.i0_db[i], sp.bulk_db[i],
                   sp.residual_db[i]});
    }
    t.write(path);
}

class Runner {
public:
    Runner(const ScenarioConfig& config, const ScenarioOptions& options)
        : c_(config), o_(options), seed_(options.seed_override.value_or(config.rng_seed)) {}

    ScenarioResult run();

private:
    void log(const std::string& msg) const {
        if (o_.log) o_.log(msg);
    }
    std::string out(const std::string& file, StageReport& report) const {
        report.outputs.push_back(file);
        return (fs::path(result_.output_dir) / file).string();
    }
    void run_stage(Stage stage, StageReport& report);
    void prepare(StageReport& report);
    void spectrum(StageReport& report);
    void lifetime(StageReport& report);
    void afc(StageReport& report);
    void noise(StageReport& report);
    void optimize(StageReport& report);
    void cavity(StageReport& report);
    json manifest() const;

    const ScenarioConfig& c_;
    const ScenarioOptions& o_;
    std::uint64_t seed_;
    ScenarioResult result_;
    std::optional<SpectralPopulationGrid> thermal_;
    std::optional<SpectralPopulationGrid> grid_;
};

void Runner::run_stage(Stage stage, StageReport& report) {
    switch (stage) {
        case Stage::prepare: prepare(report); break;
        case Stage::spectrum: spectrum(report); break;
        case Stage::lifetime: lifetime(report); break;
        case Stage::afc: afc(report); break;
        case Stage::noise: noise(report); break;
        case Stage::optimize: optimize(report); break;
        case Stage::cavity: cavity(report); break;
    }
}

void Runner::prepare(StageReport& report) {
    thermal_ = init_thermal(c_.scheme, c_.temperature_k, c_.grid);
    grid_ = *thermal_;
    json scripts = json::array();
    CsvTable steps({"script", "kind", "step", "executions", "cumulative_time_s", "p_m7_2",
                    "p_m5_2", "p_m3_2", "p_m1_2", "p_p1_2", "p_p3_2", "p_p5_2", "p_p7_2"});
    for (std::size_t k = 0; k < c_.scripts.size(); ++k) {
        const ProtocolScript& script = c_.scripts[k];
        log("running script " + script.name);
        const ProtocolLog plog = run_protocol(*grid_, c_.scheme, script, c_.context);
        for (const auto& e : plog.entries) {
            std::vector<double> row{static_cast<double>(e.step_index),
                                    static_cast<double>(e.executions), e.cumulative_time_s};
            const double total = std::accumulate(e.level_totals.begin(), e.level_totals.end(), 0.0);
            for (double p : e.level_totals) row.push_back(total > 0.0 ? p / total : 0.0);
            steps.add_row({script.name, to_string(e.kind)}, row);
        }
        scripts.push_back({{"name", script.name},
                           {"protocol_time_s", plog.total_time_s},
                           {"steps", script.step_count()}});
    }
    const LevelVector totals = grid_->level_totals();
    const double total = grid_->total();
    json levels = json::array();
    for (double p : totals) levels.push_back(p / total);
    result_.results["prepare"] = {{"scripts", scripts},
                                  {"level_fractions", levels},
                                  {"total_population", total}};
    steps.write(out("protocol_log.csv", report));
    if (c_.write_snapshot) {
        CsvTable snap({"detuning_mhz", "level", "density"});
        const auto centers = grid_->centers();
        const auto widths = grid_->widths();
        const double lo = c_.grid.fine_center_mhz - c_.grid.fine_half_width_mhz;
        const double hi = c_.grid.fine_center_mhz + c_.grid.fine_half_width_mhz;
        for (std::size_t b = 0; b < grid_->size(); ++b) {
            if (centers[b] < lo || centers[b] > hi) continue;
            for (int l = 0; l < kLevelCount; ++l) {
                snap.add_row({centers[b], SpinProjection::from_index(l).value(),
                              grid_->at(b)[static_cast<std::size_t>(l)] / widths[b]});
            }
        }
        snap.write(out("grid_snapshot.csv", report));
    }
}

void Runner::spectrum(StageReport& report) {
    const AbsorptionSpectrum sp = synthesize(*grid_, c_.scheme, c_.spectrum_window);
    write_spectrum(sp, out("spectrum.csv", report));
    json j = spectrum_summary(sp);
    const double mid = 0.5 * (c_.spectrum_window.lo_mhz + c_.spectrum_window.hi_mhz);
    const BackgroundDecomposition bg = sp.background_at(mid);
    j["background_at_center"] = {{"frequency_mhz", mid},
                                 {"i0_tail_db", bg.i0_tail_db},
                                 {"bulk_tail_db", bg.bulk_tail_db},
                                 {"residual_polarization_db", bg.residual_polarization_db},
                                 {"total_db", bg.total_db()}};
    result_.results["spectrum"] = j;
}

void Runner::lifetime(StageReport& report) {
    const LifetimeStage& l = c_.lifetime;
    auto track = [&](const RelaxationRates& rates) {
        SpectralPopulationGrid g = *grid_;
        if (l.mode == LifetimeStage::Mode::hole) {
            const AbsorptionSpectrum ref = synthesize(*thermal_, c_.scheme, l.probe.window);
            return track_hole_decay(g, c_.scheme, rates, ref, l.probe);
        }
        return track_decay(g, c_.scheme, rates, l.probe);
    };
    const DecayTrace trace = track(c_.context.relaxation);
    std::optional<DecayTrace> ladder;
    if (l.compare_ladder_only) {
        RelaxationRates r = c_.context.relaxation;
        r.cross_coefficient_per_s = 0.0;
        ladder = track(r);
    }
    std::vector<std::string> header{"t_s", "feature_db", "antihole_db"};
    if (ladder) header.push_back("ladder_only_feature_db");
    CsvTable t(header);
    for (std::size_t i = 0; i < trace.t_s.size(); ++i) {
        std::vector<double> row{trace.t_s[i], trace.feature_db[i], trace.antihole_db[i]};
        if (ladder) row.push_back(ladder->feature_db[i]);
        t.add_row(row);
    }
    t.write(out("decay.csv", report));
    json j = {{"mode", l.mode == LifetimeStage::Mode::hole ? "hole" : "feature"},
              {"lifetime_s", trace.fit.lifetime_s},
              {"lifetime_stderr_s", trace.fit.lifetime_stderr_s},
              {"amplitude_db", trace.fit.amplitude},
              {"antihole_rises_then_falls", trace.antihole_rises_then_falls()}};
    if (ladder) {
        j["ladder_only_lifetime_s"] = ladder->fit.lifetime_s;
        j["ladder_only_lifetime_stderr_s"] = ladder->fit.lifetime_stderr_s;
    }
    result_.results["lifetime"] = j;
}

void Runner::afc(StageReport& report) {
    const AfcStage& a = c_.afc;
    const AbsorptionSpectrum sp = synthesize(*grid_, c_.scheme, a.window);
    write_spectrum(sp, out("afc_spectrum.csv", report));
    const CombFit fit = fit_comb(sp, a.teeth_mhz);
    CsvTable teeth({"center_mhz", "peak_db", "fwhm_khz", "background_db", "residual_rms_db"});
    for (const auto& m : fit.teeth) {
        teeth.add_row({m.center_mhz, m.peak_db, m.fwhm_khz, m.background_db, m.residual_rms_db});
    }
    teeth.write(out("afc_teeth.csv", report));

    const EchoResult echo = echo_simulate(sp, a.pulse, a.echo);
    CsvTable trace({"t_ns", "intensity", "input_intensity"});
    for (std::size_t i = 0; i < echo.t_ns.size(); ++i) {
        trace.add_row({echo.t_ns[i], echo.intensity[i], echo.input_intensity[i]});
    }
    trace.write(out("echo.csv", report));

    const CombParams& p = fit.params;
    const double analytic = efficiency_analytic(p.peak_od_db, p.finesse(), p.background_db);
    json j = {{"tooth_peak_db", p.peak_od_db},
              {"tooth_fwhm_khz", p.tooth_fwhm_khz},
              {"spacing_mhz", p.spacing_mhz},
              {"finesse", p.finesse()},
              {"inter_tooth_background_db", fit.inter_tooth_background_db},
              {"efficiency", echo.efficiency},
              {"echo_delay_ns", echo.echo_delay_ns},
              {"transmitted_fraction", echo.transmitted_fraction},
              {"reference_background_db", echo.reference_background_db},
              {"causality_leakage", echo.causality_leakage},
              {"analytic_efficiency", analytic},
              {"finite_comb_deficit", analytic - echo.efficiency}};
    if (a.ideal_teeth >= 2) {
        CombParams ideal = p;
        ideal.n_teeth = a.ideal_teeth;
        const double half = 0.5 * (ideal.n_teeth - 1) * ideal.spacing_mhz + 20.0 * ideal.spacing_mhz;
        const SpectrumWindow w{-half, half, a.window.step_mhz};
        const EchoResult ie = echo_simulate(ideal_comb_spectrum(ideal, w), a.pulse, a.echo);
        j["ideal_comb_teeth"] = a.ideal_teeth;
        j["ideal_comb_efficiency"] = ie.efficiency;
    }
    result_.results["afc"] = j;
}

void Runner::noise(StageReport& report) {
    const NoiseStage& n = c_.noise;
    StorageRun run = n.run;
    run.rng_seed = seed_;
    const auto [input, echo] = simulate_storage_events(run, n.added_noise);
    const AddedVariance added = added_variance(echo, n.phase_bins, n.bootstrap_rounds, seed_ + 1);
    const AddedVariance input_added = added_variance(input, n.phase_bins, n.bootstrap_rounds, seed_ + 2);
    CsvTable bins({"bin", "phase_center_rad", "echo_variance_minus_vacuum"});
    const double two_pi = 2.0 * std::acos(-1.0);
    for (std::size_t b = 0; b < added.bin_variance.size(); ++b) {
        const double center = (static_cast<double>(b) + 0.5) * two_pi / added.bin_variance.size();
        bins.add_row({static_cast<double>(b), center, added.bin_variance[b] - 1.0});
    }
    bins.write(out("noise_bins.csv", report));
    if (n.write_samples) {
        CsvTable s({"phase_rad", "input_quadrature", "echo_quadrature"});
        for (std::size_t i = 0; i < echo.size(); ++i) {
            s.add_row({echo.phases[i], input.values[i], echo.values[i]});
        }
        s.write(out("noise_samples.csv", report));
    }
    const double bound = classical_bound(run.efficiency);
    result_.results["noise"] = {{"events", run.n_events},
                                {"added_variance", added.estimate},
                                {"ci95_low", added.ci_low},
                                {"ci95_high", added.ci_high},
                                {"echo_amplitude", added.amplitude},
                                {"input_added_variance", input_added.estimate},
                                {"input_amplitude", input_added.amplitude},
                                {"classical_bound", bound},
                                {"beats_classical_bound", beats_classical_bound(added.ci_high, run.efficiency)}};
}

void Runner::optimize(StageReport& report) {
    CsvTable t({"peak_od_db", "background_db", "optimal_finesse", "optimal_efficiency"});
    json rows = json::array();
    for (double d : c_.optimize.peak_od_db) {
        for (double d0 : c_.optimize.background_db) {
            const FinesseOptimum opt = optimize_finesse(d, d0);
            t.add_row({d, d0, opt.finesse, opt.efficiency});
            rows.push_back({{"peak_od_db", d},
                            {"background_db", d0},
                            {"finesse", opt.finesse},
                            {"efficiency", opt.efficiency}});
        }
    }
    t.write(out("optimize.csv", report));
    result_.results["optimize"] = rows;
}

void Runner::cavity(StageReport& report) {
    CsvTable t({"label", "kind", "peak_od_db", "finesse", "background_db", "efficiency"});
    json rows = json::array();
    for (const auto& row : c_.projections) {
        const double eta = row.cavity
                               ? cavity_projection(row.design)
                               : efficiency_analytic(row.peak_od_db, row.finesse, row.background_db);
        const std::vector<double> values{row.peak_od_db, row.finesse, row.background_db, eta};
        t.add_row({row.label, row.cavity ? "cavity" : "free_space"}, values);
        rows.push_back({{"label", row.label},
                        {"kind", row.cavity ? "cavity" : "free_space"},
                        {"background_db", row.background_db},
                        {"efficiency", eta}});
    }
    t.write(out("projection.csv", report));
    result_.results["cavity"] = rows;
}

json Runner::manifest() const {
    json inputs = json::array();
    for (const auto& path : c_.input_files) {
        json entry = {{"path", path}};
        try {
            entry["sha256"] = sha256_file(path);
        } catch (const Error&) {
            entry["sha256"] = nullptr;
        }
        inputs.push_back(entry);
    }
    json stages = json::array();
    for (const auto& r : result_.stages) {
        json s = {{"stage", to_string(r.stage)},
                  {"status", r.ok ? "ok" : "failed"},
                  {"outputs", r.outputs}};
        if (!r.ok) s["error"] = r.error;
        stages.push_back(s);
    }
    return {{"name", c_.name},
            {"version", version()},
            {"rng_seed", seed_},
            {"complete", result_.complete},
            {"inputs", inputs},
            {"stages", stages},
            {"results", result_.results}};
}

ScenarioResult Runner::run() {
    result_.output_dir = o_.output_dir;
    result_.results = json::object();
    fs::create_directories(result_.output_dir);

    std::vector<Stage> wanted;
    for (Stage s : kStageOrder) {
        if (!c_.has_stage(s)) continue;
        if (o_.only_stages) {
            const auto& only = *o_.only_stages;
            const bool listed = std::find(only.begin(), only.end(), s) != only.end();
            const bool dependency = s == Stage::prepare &&
                                    std::any_of(only.begin(), only.end(), needs_grid);
            if (!listed && !dependency) continue;
        }
        wanted.push_back(s);
    }
    if (wanted.empty()) throw ConfigError("no configured stage matches the request", 0, 0, c_.source);

    result_.complete = true;
    std::string failure;
    for (Stage s : wanted) {
        StageReport report;
        report.stage = s;
        log(std::string("stage ") + to_string(s));
        try {
            run_stage(s, report);
            report.ok = true;
        } catch (const Error& e) {
            report.error = e.what();
            failure = std::string("stage '") + to_string(s) + "': " + e.what();
        }
        result_.stages.push_back(report);
        if (!report.ok) {
            result_.complete = false;
            break;
        }
    }
    result_.manifest = manifest();
    std::ofstream m(fs::path(result_.output_dir) / "manifest.json", std::ios::binary);
    m << result_.manifest.dump(2) << '\n';
    if (!m) throw NumericError("cannot write manifest in " + result_.output_dir);
    if (!result_.complete) {
        throw NumericError(failure + " (partial outputs marked incomplete in manifest.json)");
    }
    return result_;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config, const ScenarioOptions& options) {
    if (options.output_dir.empty()) throw DomainError("output directory is required");
    Runner runner(config, options);
    return runner.run();
}

}  // namespace afcsim
