#include "afcsim/afc.hpp"
#include "afcsim/csv.hpp"
#include "afcsim/error.hpp"
#include "afcsim/scenario.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
    auto* opt = cmd->add_option("--config", f.config, "scenario config file");
    if (config_required) opt->required();
    cmd->add_option("--seed", f.seed, "override the scenario rng_seed");
    cmd->add_option("--out", f.out,
                    "output directory (default: $AFCSIM_OUT_DIR/<name> or ./afcsim_out/<name>)");
    cmd->add_flag("--quiet", f.quiet, "print nothing on success");
}

std::string default_out(const std::string& name) {
    const char* env = std::getenv("AFCSIM_OUT_DIR");
    const std::filesystem::path base = (env && *env) ? env : "afcsim_out";
    return (base / name).string();
}

int run_config(const CommonFlags& f, std::optional<std::vector<afcsim::Stage>> only) {
    const afcsim::ScenarioConfig config = afcsim::load_config(f.config);
    afcsim::ScenarioOptions options;
    options.output_dir = f.out.empty() ? default_out(config.name) : f.out;
    options.seed_override = f.seed;
    options.only_stages = std::move(only);
    if (!f.quiet) options.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
    const afcsim::ScenarioResult result = afcsim::run_scenario(config, options);
    if (!f.quiet) {
        std::cout << result.results.dump(2) << '\n';
        std::cerr << "wrote " << result.output_dir << '\n';
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AFC quantum-memory spectral preparation simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", afcsim::version());

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "run every stage of a scenario");
    add_common(run, run_flags, true);

    struct StageCommand {
        const char* name;
        const char* help;
        afcsim::Stage stage;
        CommonFlags flags;
        CLI::App* cmd = nullptr;
    };
    StageCommand stage_cmds[] = {
        {"prepare", "initialise the grid and run the preparation scripts", afcsim::Stage::prepare, {}},
        {"spectrum", "synthesize the prepared absorption spectrum", afcsim::Stage::spectrum, {}},
        {"afc", "fit the comb and simulate the echo", afcsim::Stage::afc, {}},
        {"noise", "storage-event Monte Carlo and added-variance estimate", afcsim::Stage::noise, {}},
    };
    for (auto& sc : stage_cmds) {
        sc.cmd = app.add_subcommand(sc.name, sc.help);
        add_common(sc.cmd, sc.flags, true);
    }

    CommonFlags opt_flags;
    std::vector<double> opt_d{18.0};
    std::vector<double> opt_d0{1.0};
    auto* optimize = app.add_subcommand("optimize", "optimal comb finesse for given optical depths");
    add_common(optimize, opt_flags, false);
    optimize->add_option("--peak-od", opt_d, "peak optical depth(s), dB")->delimiter(',');
    optimize->add_option("--background", opt_d0, "background absorption(s), dB")->delimiter(',');

    CommonFlags proj_flags;
    double proj_d = 20.0;
    double proj_f = 9.0;
    double proj_d0 = 0.08;
    bool proj_cavity = false;
    auto* project = app.add_subcommand("project", "efficiency projections (free space or cavity)");
    add_common(project, proj_flags, false);
    project->add_option("--peak-od", proj_d, "peak optical depth, dB");
    project->add_option("--finesse", proj_f, "comb finesse");
    project->add_option("--background", proj_d0, "background absorption, dB");
    project->add_flag("--cavity", proj_cavity, "impedance-matched cavity instead of free space");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*run) return run_config(run_flags, std::nullopt);
        for (auto& sc : stage_cmds) {
            if (*sc.cmd) return run_config(sc.flags, std::vector<afcsim::Stage>{sc.stage});
        }
        if (*optimize) {
            if (!opt_flags.config.empty()) {
                return run_config(opt_flags, std::vector<afcsim::Stage>{afcsim::Stage::optimize});
            }
            afcsim::CsvTable t({"peak_od_db", "background_db", "optimal_finesse", "optimal_efficiency"});
            for (double d : opt_d) {
                for (double d0 : opt_d0) {
                    const auto best = afcsim::optimize_finesse(d, d0);
                    t.add_row({d, d0, best.finesse, best.efficiency});
                }
            }
            if (!opt_flags.quiet) std::cout << t.str();
            return kOk;
        }
        if (*project) {
            if (!proj_flags.config.empty()) {
                return run_config(proj_flags, std::vector<afcsim::Stage>{afcsim::Stage::cavity});
            }
            double eta = 0.0;
            if (proj_cavity) {
                afcsim::CavityDesign design;
                design.peak_od_db = proj_d;
                design.comb_finesse = proj_f;
                design.background_db = proj_d0;
                eta = afcsim::cavity_projection(design);
            } else {
                if (!(proj_f > 1.0) || proj_d < 0.0 || proj_d0 < 0.0) {
                    throw afcsim::DomainError("need finesse > 1 and non-negative depths");
                }
                eta = afcsim::efficiency_analytic(proj_d, proj_f, proj_d0);
            }
            if (!proj_flags.quiet) std::cout << afcsim::format_number(eta) << '\n';
            return kOk;
        }
    } catch (const afcsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const afcsim::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
    return kUsage;
}
