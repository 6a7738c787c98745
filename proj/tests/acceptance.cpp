// Runs the seven acceptance checks and prints one PASS/FAIL line for each.

#include "afcsim/afc.hpp"
#include "afcsim/error.hpp"
#include "afcsim/noise.hpp"
#include "afcsim/population.hpp"
#include "afcsim/protocol.hpp"
#include "afcsim/relaxation.hpp"
#include "afcsim/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace afcsim;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::vector<std::string> failures;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

const fs::path kData = AFCSIM_DATA_DIR;
const fs::path kWork = fs::temp_directory_path() / "afcsim_acceptance";

ScenarioResult run_bundled(const std::string& name, const std::string& tag = {}) {
    ScenarioOptions o;
    o.output_dir = (kWork / (name + tag)).string();
    fs::remove_all(o.output_dir);
    return run_scenario(load_config((kData / "scenarios" / (name + ".conf")).string()), o);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void criterion_1(Check& c) {
    const double a = efficiency_analytic(18.0, 3.94, 1.0);
    const double b = efficiency_analytic(18.0, 3.94, 0.08);
    c.detail << "eta(18,3.94,1)=" << fmt(a) << " eta(18,3.94,0.08)=" << fmt(b);
    c.expect(std::abs(a - 0.244) <= 0.001, "eta(18 dB, 3.94, 1 dB) not 0.244 +- 0.001");
    c.expect(std::abs(b - 0.302) <= 0.002, "eta(18 dB, 3.94, 0.08 dB) not 0.302 +- 0.002");
}

void criterion_2(Check& c) {
    const ScenarioConfig cfg = load_config((kData / "scenarios/projection.conf").string());
    double natural = -1.0;
    double enriched = -1.0;
    for (const auto& row : cfg.projections) {
        if (!row.cavity) continue;
        const double eta = cavity_projection(row.design);
        if (row.label == "cavity") natural = eta;
        if (row.label == "cavity_enriched") enriched = eta;
    }
    c.detail << "cavity=" << fmt(natural) << " enriched=" << fmt(enriched);
    c.expect(std::abs(natural - 0.89) <= 0.01, "cavity projection not 0.89 +- 0.01");
    c.expect(std::abs(enriched - 0.93) <= 0.01, "enriched cavity projection not 0.93 +- 0.01");
}

void criterion_3(Check& c) {
    CombParams comb;
    comb.peak_od_db = 18.0;
    comb.spacing_mhz = 1.5;
    comb.tooth_fwhm_khz = 1500.0 / 3.94;
    comb.background_db = 1.0;
    comb.n_teeth = 51;
    const double half = 0.5 * (comb.n_teeth - 1) * comb.spacing_mhz + 20.0 * comb.spacing_mhz;
    const EchoResult r = echo_simulate(ideal_comb_spectrum(comb, {-half, half, 0.01}), {200.0, 0.0});
    const double target = efficiency_analytic(18.0, 3.94, 1.0);
    const double delay = 1e3 / comb.spacing_mhz;
    c.detail << "echo eta=" << fmt(r.efficiency) << " analytic=" << fmt(target)
             << " delay=" << fmt(r.echo_delay_ns) << " ns (1/spacing " << fmt(delay)
             << " ns, bin " << fmt(r.time_step_ns, 3) << " ns)";
    c.expect(std::abs(r.efficiency - target) <= 0.02, "echo efficiency off the analytic value");
    c.expect(std::abs(r.echo_delay_ns - delay) <= r.time_step_ns, "echo delay not 1/spacing");
}

void criterion_4(Check& c) {
    const ScenarioResult r = run_bundled("five_tooth_afc");
    const auto& a = r.results.at("afc");
    const double peak = a.at("tooth_peak_db");
    const double fwhm = a.at("tooth_fwhm_khz");
    const double bg = a.at("inter_tooth_background_db");
    const double eta = a.at("efficiency");
    const double analytic = a.at("analytic_efficiency");
    const double deficit = analytic - eta;
    c.detail << "peak=" << fmt(peak) << " dB fwhm=" << fmt(fwhm) << " kHz background=" << fmt(bg)
             << " dB eta=" << fmt(eta) << " infinite-comb eta=" << fmt(analytic)
             << " deficit=" << fmt(100.0 * deficit, 3) << " pp";
    c.expect(r.complete, "scenario incomplete");
    c.expect(std::abs(peak - 18.0) <= 2.0, "tooth peak outside 18 +- 2 dB");
    c.expect(std::abs(fwhm - 380.0) <= 50.0, "tooth FWHM outside 380 +- 50 kHz");
    c.expect(std::abs(bg - 0.5) <= 0.1, "inter-tooth background outside 0.5 +- 0.1 dB");
    c.expect(eta >= 0.19 && eta <= 0.27, "efficiency outside [0.19, 0.27]");
    c.expect(deficit >= 0.01, "finite-comb deficit below 1 percentage point");
}

void criterion_5(Check& c) {
    const ScenarioResult feature = run_bundled("feature_lifetime");
    const ScenarioResult hole = run_bundled("thermal_hole");
    const auto& f = feature.results.at("lifetime");
    const double t = f.at("lifetime_s");
    const double ladder = f.at("ladder_only_lifetime_s");
    const bool rises_falls = f.at("antihole_rises_then_falls");
    const double th = hole.results.at("lifetime").at("lifetime_s");
    c.detail << "T=" << fmt(t) << " s ladder-only=" << fmt(ladder) << " s thermal hole=" << fmt(th)
             << " s anti-hole rise/fall=" << (rises_falls ? "yes" : "no");
    c.expect(std::abs(t - 188.0) <= 15.0, "feature lifetime outside 188 +- 15 s");
    c.expect(rises_falls, "anti-hole is not non-monotonic");
    c.expect(ladder > t && std::abs(ladder - 600.0) <= 0.2 * 600.0,
             "ladder-only lifetime does not approach 600 s");
    c.expect(std::abs(th - 60.0) <= 0.2 * 60.0, "thermal hole lifetime outside 60 s +- 20%");
}

void criterion_6(Check& c) {
    const ScenarioResult r = run_bundled("noise");
    const auto& n = r.results.at("noise");
    const double hi = n.at("ci95_high");
    const double bound = n.at("classical_bound");
    c.detail << "added=" << fmt(n.at("added_variance").get<double>(), 3) << " CI95=["
             << fmt(n.at("ci95_low").get<double>(), 3) << ", " << fmt(hi, 3)
             << "] classical bound=" << fmt(bound, 3);
    c.expect(n.at("events").get<long>() == 100000, "not 1e5 events");
    c.expect(hi < 0.1, "95% upper bound not below 0.1");
    c.expect(std::abs(bound - 0.44) < 1e-12, "classical bound not 2 eta = 0.44");
    c.expect(n.at("beats_classical_bound").get<bool>(), "comparator does not report beating 2 eta");
}

void criterion_7(Check& c) {
    const LevelScheme scheme = load_level_scheme((kData / "level_scheme.conf").string());

    // per-class conservation through the full preparation
    GridSpec spec;
    spec.fine_half_width_mhz = 10.0;
    SpectralPopulationGrid grid = init_thermal(scheme, 1.5, spec);
    const SpectralPopulationGrid before = grid;
    for (const char* s : {"scripts/spin_polarize.proto", "scripts/afc_5tooth.proto"}) {
        run_protocol(grid, scheme, load_protocol((kData / s).string(), scheme));
    }
    double worst = 0.0;
    for (std::size_t b = 0; b < grid.size(); ++b) {
        double x = 0.0;
        double y = 0.0;
        for (int l = 0; l < kLevelCount; ++l) {
            x += before.at(b)[l];
            y += grid.at(b)[l];
        }
        worst = std::max(worst, std::abs(x - y) / std::max(std::abs(x), 1e-300));
    }
    c.expect(worst <= 1e-9, "population not conserved to 1e-9");

    // detailed-balance fixed point
    SpectralPopulationGrid thermal = init_thermal(scheme, 1.5, spec);
    const SpectralPopulationGrid thermal0 = thermal;
    relax(thermal, scheme, 600.0, default_relaxation_rates());
    double drift = 0.0;
    double scale = 0.0;
    for (std::size_t b = 0; b < thermal.size(); ++b) {
        for (int l = 0; l < kLevelCount; ++l) {
            drift = std::max(drift, std::abs(thermal.at(b)[l] - thermal0.at(b)[l]));
            scale = std::max(scale, std::abs(thermal0.at(b)[l]));
        }
    }
    c.expect(drift <= 1e-9 * scale, "thermal grid drifts under relaxation");

    // causality of the echo filter
    CombParams comb;
    comb.tooth_fwhm_khz = 1500.0 / 3.94;
    comb.n_teeth = 51;
    const double half = 0.5 * 50 * comb.spacing_mhz + 20.0 * comb.spacing_mhz;
    const double leak = echo_simulate(ideal_comb_spectrum(comb, {-half, half, 0.01}), {200.0, 0.0})
                            .causality_leakage;
    c.expect(leak < 1e-6, "pre-pulse leakage not below 1e-6");

    // byte-identical reruns
    const ScenarioResult a = run_bundled("noise", "_rerun_a");
    const ScenarioResult b = run_bundled("noise", "_rerun_b");
    bool identical = true;
    for (const auto& e : fs::directory_iterator(a.output_dir)) {
        const fs::path other = fs::path(b.output_dir) / e.path().filename();
        identical = identical && fs::exists(other) && slurp(e.path()) == slurp(other);
    }
    c.expect(identical, "reruns differ");

    // finesse optimiser
    double worst_df = 0.0;
    bool invariant = true;
    for (double d : {6.0, 12.0, 18.0, 30.0, 60.0}) {
        const double ref = optimize_finesse(d, 0.0).finesse;
        for (double d0 : {0.0, 0.08, 1.0, 3.0}) {
            const FinesseOptimum opt = optimize_finesse(d, d0);
            invariant = invariant && std::abs(opt.finesse - ref) < 1e-9;
            double best_f = 0.0;
            double best = -1.0;
            for (double f = 1.001; f <= 20.0; f += 0.0005) {
                const double e = efficiency_analytic(d, f, d0);
                if (e > best) {
                    best = e;
                    best_f = f;
                }
            }
            worst_df = std::max(worst_df, std::abs(best_f - opt.finesse));
        }
    }
    c.expect(invariant, "optimal finesse depends on d0");
    c.expect(worst_df < 0.01, "optimal finesse differs from the grid search by >= 0.01");

    c.detail << "conservation=" << fmt(worst, 2) << " thermal drift=" << fmt(drift / scale, 2)
             << " leakage=" << fmt(leak, 2) << " reruns " << (identical ? "identical" : "differ")
             << " max dF=" << fmt(worst_df, 2);
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<void(Check&)>>> criteria = {
        {"analytic efficiency", criterion_1}, {"cavity projection", criterion_2},
        {"echo physics", criterion_3},        {"end-to-end comb", criterion_4},
        {"lifetime dynamics", criterion_5},   {"noise statistics", criterion_6},
        {"property suites", criterion_7},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Check c;
        const auto start = std::chrono::steady_clock::now();
        try {
            criteria[i].second(c);
        } catch (const std::exception& e) {
            c.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool ok = c.failures.empty();
        if (!ok) ++failed;
        std::printf("%s criterion %zu (%s): %s [%.2f s]\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].first, c.detail.str().c_str(), secs);
        for (const auto& f : c.failures) std::printf("    %s\n", f.c_str());
    }
    std::fflush(stdout);
    return failed == 0 ? 0 : 1;
}
