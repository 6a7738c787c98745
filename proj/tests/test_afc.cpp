#include "afcsim/afc.hpp"
#include "afcsim/error.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace afcsim;

TEST_SUITE_BEGIN("afc");

namespace {

double eq1(double d_db, double f, double d0_db) {
    const double k = std::log(10.0) / 10.0;
    const double d = d_db * k;
    const double d0 = d0_db * k;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    return std::pow(d / f, 2) * std::exp(-d / f) * std::exp(-pi2 / (4.0 * std::log(2.0) * f * f)) *
           std::exp(-d0);
}

CombParams comb(int teeth, double spacing = 1.5) {
    CombParams c;
    c.peak_od_db = 18.0;
    c.spacing_mhz = spacing;
    c.tooth_fwhm_khz = spacing * 1e3 / 3.94;
    c.background_db = 1.0;
    c.n_teeth = teeth;
    return c;
}

SpectrumWindow window_for(const CombParams& c, double step = 0.01) {
    const double half = 0.5 * (c.n_teeth - 1) * c.spacing_mhz + 20.0 * c.spacing_mhz;
    return {-half, half, step};
}

}  // namespace

TEST_CASE("analytic efficiency at the quoted operating points") {
    CHECK(efficiency_analytic(18.0, 3.94, 1.0) == doctest::Approx(0.244).epsilon(0.001 / 0.244));
    CHECK(efficiency_analytic(18.0, 3.94, 0.08) == doctest::Approx(0.302).epsilon(0.002 / 0.302));
    CHECK(efficiency_analytic(0.0, 3.94, 1.0) == 0.0);
    for (double d : {5.0, 18.0, 40.0}) {
        for (double f : {1.5, 3.94, 9.0}) {
            CHECK(efficiency_analytic(d, f, 0.3) == doctest::Approx(eq1(d, f, 0.3)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(efficiency_analytic(18.0, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(efficiency_analytic(-1.0, 3.0, 1.0), DomainError);
    CHECK_THROWS_AS(efficiency_analytic(18.0, 3.0, -1.0), DomainError);
}

TEST_CASE("efficiency decreases with background") {
    double previous = 1.0;
    for (double d0 = 0.0; d0 <= 5.0; d0 += 0.25) {
        const double e = efficiency_analytic(18.0, 3.94, d0);
        CHECK(e < previous);
        previous = e;
    }
}

TEST_CASE("single interior maximum in d/F at fixed F") {
    const double f = 3.94;
    int turns = 0;
    double argmax = 0.0;
    double best = 0.0;
    double prev = efficiency_analytic(0.0, f, 0.5);
    bool rising = true;
    for (double d = 0.1; d <= 200.0; d += 0.1) {
        const double e = efficiency_analytic(d, f, 0.5);
        if (e > best) {
            best = e;
            argmax = d;
        }
        if (rising && e < prev) {
            rising = false;
            ++turns;
        } else if (!rising && e > prev) {
            ++turns;
        }
        prev = e;
    }
    CHECK(turns == 1);
    // x^2 e^-x peaks at x = d / F = 2 in natural units
    CHECK(argmax * std::log(10.0) / 10.0 / f == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("uncertainty interval brackets the central value") {
    const EfficiencyInterval i = efficiency_interval(18.0, 4.0, 3.94, 1.0, 0.2);
    CHECK(i.central == doctest::Approx(efficiency_analytic(18.0, 3.94, 1.0)));
    CHECK(i.low <= i.central);
    CHECK(i.high >= i.central);
    CHECK(i.low == doctest::Approx(efficiency_analytic(14.0, 3.94, 1.2)));
}

TEST_CASE("finesse optimum matches a dense grid search") {
    for (double d : {6.0, 12.0, 18.0, 30.0, 60.0}) {
        for (double d0 : {0.0, 0.08, 1.0, 3.0}) {
            CAPTURE(d);
            CAPTURE(d0);
            double best_f = 0.0;
            double best = -1.0;
            for (double f = 1.001; f <= 20.0; f += 0.0005) {
                const double e = eq1(d, f, d0);
                if (e > best) {
                    best = e;
                    best_f = f;
                }
            }
            const FinesseOptimum opt = optimize_finesse(d, d0);
            CHECK(std::abs(opt.finesse - best_f) < 0.01);
            CHECK(opt.efficiency == doctest::Approx(best).epsilon(1e-6));
        }
    }
}

TEST_CASE("finesse optimum for 18 dB and its d0 invariance") {
    const FinesseOptimum a = optimize_finesse(18.0, 1.0);
    CHECK(a.finesse == doctest::Approx(3.19).epsilon(0.005));
    CHECK(a.efficiency == doctest::Approx(0.258).epsilon(0.005));
    for (double d0 : {0.0, 0.08, 0.5, 2.0}) {
        CHECK(optimize_finesse(18.0, d0).finesse == doctest::Approx(a.finesse).epsilon(1e-12));
    }
    CHECK_THROWS_AS(optimize_finesse(0.0, 1.0), DomainError);
}

TEST_CASE("optimum finesse approaches d/2 for deep combs") {
    const double d_nat = 60.0 * std::log(10.0) / 10.0;
    const double f = optimize_finesse(60.0, 0.0).finesse;
    // dephasing pushes the optimum slightly above d/2
    CHECK(f > d_nat / 2.0);
    CHECK(f / (d_nat / 2.0) < 1.1);
    const double d_nat2 = 600.0 * std::log(10.0) / 10.0;
    CHECK(optimize_finesse(600.0, 0.0).finesse / (d_nat2 / 2.0) == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("ideal 51-tooth comb echo agrees with the analytic efficiency") {
    const CombParams c = comb(51);
    const EchoResult r = echo_simulate(ideal_comb_spectrum(c, window_for(c)), {200.0, 0.0});
    CHECK(std::abs(r.efficiency - efficiency_analytic(18.0, 3.94, 1.0)) <= 0.02);
    CHECK(std::abs(r.echo_delay_ns - 1e3 / 1.5) <= r.time_step_ns);
    CHECK(r.causality_leakage < 1e-6);
    CHECK(r.efficiency + r.transmitted_fraction <= 1.0);
}

TEST_CASE("the echo converges as the comb grows") {
    double eta[3];
    const int teeth[3] = {5, 51, 101};
    for (int i = 0; i < 3; ++i) {
        const CombParams c = comb(teeth[i]);
        eta[i] = echo_simulate(ideal_comb_spectrum(c, window_for(c)), {200.0, 0.0}).efficiency;
    }
    CHECK(std::abs(eta[2] - eta[1]) < 0.1 * std::abs(eta[1] - eta[0]));
    CHECK(std::abs(eta[2] - eta[1]) < 1e-3);
}

TEST_CASE("echo delay equals the inverse tooth spacing") {
    for (double spacing : {0.5, 1.0, 2.0, 3.5, 5.0}) {
        CAPTURE(spacing);
        const CombParams c = comb(41, spacing);
        const double pulse_ns = 300.0 / spacing;
        const EchoResult r = echo_simulate(ideal_comb_spectrum(c, window_for(c, spacing / 150.0)),
                                           {pulse_ns, 0.0});
        CHECK(std::abs(r.echo_delay_ns - 1e3 / spacing) <= r.time_step_ns);
    }
}

TEST_CASE("transparent medium passes the pulse untouched") {
    AbsorptionSpectrum flat;
    for (int i = -2000; i <= 2000; ++i) {
        flat.frequencies_mhz.push_back(i * 0.01);
        flat.absorption_db.push_back(0.0);
    }
    const EchoResult r = echo_simulate(flat, {200.0, 0.0});
    CHECK(r.efficiency == 0.0);
    CHECK(r.echo_delay_ns == 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < r.t_ns.size(); ++i) {
        worst = std::max(worst, std::abs(r.intensity[i] - r.input_intensity[i]));
    }
    CHECK(worst < 1e-9);
    // only the +-1.5 FWHM core of the pulse is counted
    const double core = std::erf(1.5 * 2.0 * std::sqrt(std::log(2.0)));
    CHECK(r.transmitted_fraction == doctest::Approx(core).epsilon(1e-3));
}

TEST_CASE("the filter is passive") {
    const CombParams c = comb(21);
    const EchoResult r = echo_simulate(ideal_comb_spectrum(c, window_for(c)), {200.0, 0.0});
    double out = 0.0;
    double in = 0.0;
    for (std::size_t i = 0; i < r.t_ns.size(); ++i) {
        out += r.intensity[i];
        in += r.input_intensity[i];
    }
    CHECK(out <= in);
}

TEST_CASE("echo preconditions") {
    const CombParams c = comb(5);
    // window too narrow for the pulse bandwidth
    CHECK_THROWS_AS(echo_simulate(ideal_comb_spectrum(c, {-3.0, 3.0, 0.01}), {200.0, 0.0}),
                    DomainError);
    // absorption does not return to the background at the edges
    AbsorptionSpectrum ramp;
    for (int i = -2000; i <= 2000; ++i) {
        ramp.frequencies_mhz.push_back(i * 0.01);
        ramp.absorption_db.push_back(5.0 + 0.2 * i * 0.01);
    }
    CHECK_THROWS_AS(echo_simulate(ramp, {200.0, 0.0}), NumericError);
}

TEST_CASE("cavity projections") {
    CavityDesign d;
    CHECK(cavity_projection(d) == doctest::Approx(0.892).epsilon(0.001));
    d.background_db = 0.08 * 3.7 / 8.0;
    CHECK(cavity_projection(d) == doctest::Approx(0.926).epsilon(0.001));
    d.background_db = 0.0;
    const double pi2 = std::numbers::pi * std::numbers::pi;
    CHECK(cavity_projection(d) == doctest::Approx(std::exp(-pi2 / (4.0 * std::log(2.0) * 81.0))));
    d.comb_finesse = 0.5;
    CHECK_THROWS_AS(cavity_projection(d), DomainError);
}

TEST_CASE("ideal comb spectrum geometry") {
    const CombParams c = comb(5);
    const auto sp = ideal_comb_spectrum(c, {-10.0, 10.0, 0.01});
    CHECK(sp.absorption_at(0.0) == doctest::Approx(19.0).epsilon(1e-3));
    CHECK(sp.absorption_at(3.0) == doctest::Approx(19.0).epsilon(1e-3));
    CHECK(sp.absorption_at(9.0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sp.absorption_at(0.0 + c.tooth_fwhm_khz / 2e3) == doctest::Approx(10.0).epsilon(1e-2));
}

TEST_SUITE_END();
