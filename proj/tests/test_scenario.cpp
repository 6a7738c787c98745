#include "afcsim/error.hpp"
#include "afcsim/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace afcsim;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("scenario");

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("afcsim_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

const char* kQuick = R"(name = quick
rng_seed = 99
stages = noise, optimize

[noise]
events = 2000
bootstrap_rounds = 50

[optimize]
peak_od = 18, 20
background = 1, 0.08
)";

const char* kNoComb = R"(name = f
stages = optimize, afc

[grid]
fine_half_width = 10 MHz
)";

int run_cli(const std::string& args) {
    const std::string cmd = std::string(AFCSIM_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
#ifdef WEXITSTATUS
    return WEXITSTATUS(status);
#else
    return status;
#endif
}

}  // namespace

TEST_CASE("bundled AFC scenario parses") {
    const ScenarioConfig c = load_config(std::string(AFCSIM_DATA_DIR) + "/scenarios/five_tooth_afc.conf");
    CHECK(c.name == "five_tooth_afc");
    CHECK(c.has_stage(Stage::prepare));
    CHECK(c.has_stage(Stage::afc));
    CHECK_FALSE(c.has_stage(Stage::noise));
    REQUIRE(c.script_paths.size() == 2);
    CHECK(c.script_paths[1].find("afc_5tooth.proto") != std::string::npos);
    CHECK(c.afc.teeth_mhz.size() == 5);
    CHECK(c.afc.pulse.fwhm_ns == doctest::Approx(200.0));
    CHECK_FALSE(c.seed_given);
    CHECK(c.rng_seed == kDefaultSeed);
}

TEST_CASE("every bundled scenario parses") {
    for (const auto& e : fs::directory_iterator(fs::path(AFCSIM_DATA_DIR) / "scenarios")) {
        CAPTURE(e.path().string());
        CHECK_NOTHROW(load_config(e.path().string()));
    }
}

TEST_CASE("stage lists") {
    CHECK(parse_stage("afc") == Stage::afc);
    CHECK_FALSE(parse_stage("echo").has_value());
    const ScenarioConfig c = parse_config("name = x\nstages = afc\n");
    // the grid-dependent stage pulls in preparation
    CHECK(c.has_stage(Stage::prepare));
    CHECK_FALSE(parse_config("name = x\nstages = optimize\n").has_stage(Stage::prepare));
    CHECK_THROWS_AS(parse_config("name = x\nstages = afc, bogus\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("name = x\nstages = cavity\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("stages = optimize\n"), ConfigError);
}

TEST_CASE("bad values name the offending key and line") {
    try {
        parse_config("name = x\nstages = lifetime\n\n[lifetime]\ninterval = -1 s\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("interval") != std::string::npos);
        CHECK(e.line() == 5);
    }
    try {
        parse_config("name = x\nstages = optimize\n[optimize]\npeak_od = 18\nfinesse = 3\n");
        FAIL("expected a ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("finesse") != std::string::npos);
        CHECK(e.line() == 5);
    }
    CHECK_THROWS_AS(parse_config("name = x\nstages = optimize\n[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("name = x\nstages = afc\n[afc]\npulse_fwhm = 200 MHz\n"), ConfigError);
}

TEST_CASE("reruns are byte-identical") {
    const ScenarioConfig c = parse_config(kQuick);
    const fs::path a = scratch("rerun_a");
    const fs::path b = scratch("rerun_b");
    ScenarioOptions oa;
    oa.output_dir = a.string();
    ScenarioOptions ob;
    ob.output_dir = b.string();
    const ScenarioResult ra = run_scenario(c, oa);
    run_scenario(c, ob);
    CHECK(ra.complete);
    for (const char* f : {"manifest.json", "noise_bins.csv", "optimize.csv"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    ScenarioOptions oc;
    oc.output_dir = scratch("rerun_c").string();
    oc.seed_override = 100;
    run_scenario(c, oc);
    CHECK(slurp(a / "noise_bins.csv") != slurp(fs::path(oc.output_dir) / "noise_bins.csv"));
}

TEST_CASE("manifest records input hashes") {
    const fs::path dir = scratch("hash");
    const fs::path scheme_src = fs::path(AFCSIM_DATA_DIR) / "level_scheme.conf";
    fs::copy_file(scheme_src, dir / "scheme.conf");
    write(dir / "s.conf", "name = h\nscheme = scheme.conf\nstages = optimize\n");

    ScenarioOptions o;
    o.output_dir = (dir / "out1").string();
    const ScenarioResult r1 = run_scenario(load_config((dir / "s.conf").string()), o);
    const auto& inputs = r1.manifest.at("inputs");
    REQUIRE(inputs.size() == 2);
    bool found = false;
    std::string before;
    for (const auto& in : inputs) {
        CHECK(in.at("sha256").get<std::string>().size() == 64);
        if (in.at("path").get<std::string>().find("scheme.conf") != std::string::npos) {
            found = true;
            before = in.at("sha256").get<std::string>();
            CHECK(before == sha256_file((dir / "scheme.conf").string()));
        }
    }
    CHECK(found);

    std::string text = slurp(dir / "scheme.conf");
    write(dir / "scheme.conf", text + "\n# edited\n");
    o.output_dir = (dir / "out2").string();
    const ScenarioResult r2 = run_scenario(load_config((dir / "s.conf").string()), o);
    for (const auto& in : r2.manifest.at("inputs")) {
        if (in.at("path").get<std::string>().find("scheme.conf") != std::string::npos) {
            CHECK(in.at("sha256").get<std::string>() != before);
        }
    }
}

TEST_CASE("sha256 of known strings") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("a failing stage leaves an incomplete manifest") {
    // no comb was prepared, so the tooth fit has nothing to find
    const ScenarioConfig c = parse_config(kNoComb);
    const fs::path dir = scratch("fail");
    ScenarioOptions o;
    o.output_dir = dir.string();
    CHECK_THROWS_AS(run_scenario(c, o), Error);
    REQUIRE(fs::exists(dir / "manifest.json"));
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m.at("complete") == false);
    bool saw_failure = false;
    for (const auto& s : m.at("stages")) {
        if (s.at("stage") == "afc") {
            CHECK(s.at("status") != "ok");
            CHECK_FALSE(s.at("error").get<std::string>().empty());
            saw_failure = true;
        }
    }
    CHECK(saw_failure);
}

TEST_CASE("command-line exit codes") {
    const fs::path dir = scratch("cli");
    write(dir / "ok.conf", kQuick);
    write(dir / "bad.conf", "name = b\nstages = optimize\n[optimize]\nwhatever = 1\n");
    write(dir / "fails.conf", kNoComb);
    const std::string out = " --quiet --out " + (dir / "out").string();
    CHECK(run_cli("run --config " + (dir / "ok.conf").string() + out) == 0);
    CHECK(run_cli("run") == 1);
    CHECK(run_cli("frobnicate") == 1);
    CHECK(run_cli("run --config " + (dir / "bad.conf").string() + out) == 2);
    CHECK(run_cli("run --config " + (dir / "missing.conf").string() + out) == 2);
    CHECK(run_cli("run --config " + (dir / "fails.conf").string() + out) == 3);
    CHECK(run_cli("project --peak-od 18 --finesse 0.5") == 3);
}

TEST_SUITE_END();
