#include "afcsim/afc.hpp"
#include "afcsim/error.hpp"
#include "afcsim/protocol.hpp"
#include "afcsim/spectrum.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace afcsim;

TEST_SUITE_BEGIN("spectrum");

namespace {

const std::string kScripts = std::string(AFCSIM_DATA_DIR) + "/scripts/";

// Brute-force convolution of the square with the Gaussian on a 1 kHz lattice;
// the half-maximum crossings are located by linear interpolation.
double brute_force_fwhm(double square_khz, double kernel_khz) {
    const int half_range = 3000;
    const double sigma = kernel_khz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    std::vector<double> kernel(2 * half_range + 1);
    double norm = 0.0;
    for (int i = -half_range; i <= half_range; ++i) {
        kernel[i + half_range] = std::exp(-0.5 * (i / sigma) * (i / sigma));
        norm += kernel[i + half_range];
    }
    auto square = [&](int x) {
        const double a = std::abs(x);
        return a < square_khz / 2 ? 1.0 : (a == square_khz / 2 ? 0.5 : 0.0);
    };
    std::vector<double> conv(2 * half_range + 1, 0.0);
    for (int x = -half_range; x <= half_range; ++x) {
        double acc = 0.0;
        for (int u = -half_range; u <= half_range; ++u) {
            const int y = x - u;
            if (y < -half_range || y > half_range) continue;
            acc += square(y) * kernel[u + half_range];
        }
        conv[x + half_range] = acc / norm;
    }
    const double h = 0.5 * conv[half_range];
    int right = half_range;
    while (conv[right + 1] >= h) ++right;
    const double xr = (right - half_range) + (h - conv[right]) / (conv[right + 1] - conv[right]);
    return 2.0 * xr;
}

GridSpec small_grid() {
    GridSpec g;
    g.span_mhz = 1500.0;
    g.coarse_step_mhz = 0.5;
    g.fine_half_width_mhz = 12.0;
    g.fine_step_mhz = 0.02;
    return g;
}

}  // namespace

TEST_CASE("square convolved with Gaussian matches a 1 kHz brute-force convolution") {
    const ConvolvedProfile p = convolve_square_gaussian(1000.0, 400.0);
    const double oracle = brute_force_fwhm(1000.0, 400.0);
    CHECK(std::abs(p.fwhm_khz - oracle) < 1.0);
    // frozen oracle value
    CHECK(p.fwhm_khz == doctest::Approx(1001.38).epsilon(1e-5));
}

TEST_CASE("convolution limits") {
    CHECK(convolve_square_gaussian(0.0, 400.0).fwhm_khz == doctest::Approx(400.0).epsilon(1e-9));
    CHECK(convolve_square_gaussian(1000.0, 0.0).fwhm_khz == doctest::Approx(1000.0));
    CHECK_THROWS_AS(convolve_square_gaussian(0.0, 0.0), DomainError);
    CHECK_THROWS_AS(convolve_square_gaussian(-1.0, 10.0), DomainError);
}

TEST_CASE("convolution preserves area") {
    for (double w : {0.0, 300.0, 1000.0}) {
        const ConvolvedProfile p = convolve_square_gaussian(w, 400.0);
        double area = 0.0;
        for (std::size_t i = 1; i < p.x_khz.size(); ++i) {
            area += 0.5 * (p.profile[i] + p.profile[i - 1]) * (p.x_khz[i] - p.x_khz[i - 1]);
        }
        const double expected = w > 0.0 ? w : 1.0;
        CHECK(area == doctest::Approx(expected).epsilon(1e-6));
    }
}

TEST_CASE("convolved FWHM is monotone in both widths") {
    double previous = 0.0;
    for (double w = 0.0; w <= 2000.0; w += 100.0) {
        const double f = convolve_square_gaussian(w, 400.0).fwhm_khz;
        CHECK(f >= previous);
        previous = f;
    }
    previous = 0.0;
    for (double k = 0.0; k <= 2000.0; k += 100.0) {
        const double f = convolve_square_gaussian(500.0, k).fwhm_khz;
        CHECK(f >= previous - 1e-9);
        previous = f;
    }
}

TEST_CASE("an empty grid shows only the isotope background") {
    const LevelScheme s = LevelScheme::defaults();
    auto g = init_thermal(s, 1.5, small_grid());
    for (std::size_t b = 0; b < g.size(); ++b) g.at(b).fill(0.0);
    const auto sp = synthesize(g, s, {-10.0, 10.0, 0.1});
    for (std::size_t i = 0; i < sp.size(); ++i) {
        CHECK(sp.bulk_db[i] == 0.0);
        CHECK(sp.residual_db[i] == 0.0);
        CHECK(sp.absorption_db[i] == doctest::Approx(sp.i0_db[i]));
    }
}

TEST_CASE("absorption is additive over populations") {
    const LevelScheme s = LevelScheme::defaults();
    auto a = init_thermal(s, 1.5, small_grid());
    auto b = a;
    for (std::size_t k = 0; k < b.size(); ++k) {
        LevelVector v = b.at(k);
        std::rotate(v.begin(), v.begin() + 3, v.end());
        b.at(k) = v;
    }
    auto sum = a;
    for (std::size_t k = 0; k < sum.size(); ++k) {
        for (int l = 0; l < kLevelCount; ++l) sum.at(k)[l] += b.at(k)[l];
    }
    const SpectrumWindow w{-8.0, 8.0, 0.05};
    const auto sa = synthesize(a, s, w);
    const auto sb = synthesize(b, s, w);
    const auto ss = synthesize(sum, s, w);
    for (std::size_t i = 0; i < ss.size(); ++i) {
        CHECK(ss.absorption_db[i] ==
              doctest::Approx(sa.absorption_db[i] + sb.absorption_db[i] - sa.i0_db[i]).epsilon(1e-9));
    }
}

TEST_CASE("window outside the grid is rejected") {
    const LevelScheme s = LevelScheme::defaults();
    const auto g = init_thermal(s, 1.5, small_grid());
    CHECK_THROWS_AS(synthesize(g, s, {-2000.0, 0.0, 1.0}), DomainError);
    CHECK_THROWS_AS(synthesize(g, s, {1.0, 0.0, 0.1}), DomainError);
}

TEST_CASE("spin-polarized background at the memory line") {
    const LevelScheme s = LevelScheme::defaults();
    auto g = init_thermal(s, 1.5);
    run_protocol(g, s, load_protocol(kScripts + "spin_polarize.proto", s));
    const auto sp = synthesize(g, s, {-1.0, 1.0, 0.01});
    const BackgroundDecomposition bg = sp.background_at(0.0);
    CHECK(bg.i0_tail_db == doctest::Approx(0.08).epsilon(0.05));
    CHECK(bg.bulk_tail_db == doctest::Approx(0.30).epsilon(0.1));
    CHECK(bg.residual_polarization_db >= 0.0);
    CHECK(bg.residual_polarization_db < 0.1);
    CHECK(sp.bulk_level == 7);
    for (double v : sp.absorption_db) CHECK(v >= 0.0);
}

TEST_CASE("anti-polarized feature stays below the 20 dB maximum and shows the -5/2 residual") {
    const LevelScheme s = LevelScheme::defaults();
    GridSpec spec;
    spec.fine_half_width_mhz = 10.0;
    auto g = init_thermal(s, 1.5, spec);
    run_protocol(g, s, load_protocol(kScripts + "spin_polarize.proto", s));
    const auto before = synthesize(g, s, {-8.0, 8.0, 0.01});
    run_protocol(g, s, load_protocol(kScripts + "anti_polarize.proto", s));
    const auto after = synthesize(g, s, {-8.0, 8.0, 0.01});
    CHECK(after.absorption_at(0.0) <= 20.0);
    CHECK(after.absorption_at(0.0) > 15.0);
    // the -5/2 residual near -4.5 MHz stands above the residual far from it
    auto residual_at = [&](double nu) {
        return after.residual_db[static_cast<std::size_t>(std::lround((nu + 8.0) / 0.01))];
    };
    double near = 0.0;
    for (double nu = -5.5; nu <= -3.5; nu += 0.01) near = std::max(near, residual_at(nu));
    const double far = 0.5 * (residual_at(-7.5) + residual_at(-2.0));
    CHECK(near - far > 0.01);
    CHECK(before.absorption_at(0.0) < after.absorption_at(0.0));
}

TEST_CASE("measure_feature recovers a synthetic tooth") {
    AbsorptionSpectrum sp;
    for (int i = -400; i <= 400; ++i) {
        const double f = i * 0.0025;
        sp.frequencies_mhz.push_back(f);
        sp.absorption_db.push_back(0.51 + 18.0 * std::exp(-4.0 * std::log(2.0) * std::pow(f / 0.38, 2)));
    }
    const FeatureMeasurement m = measure_feature(sp, 0.0, 2.0);
    CHECK(m.peak_db == doctest::Approx(18.0).epsilon(0.01));
    CHECK(m.fwhm_khz == doctest::Approx(380.0).epsilon(0.01));
    CHECK(m.background_db == doctest::Approx(0.51).epsilon(0.01));
}

TEST_CASE("measure_feature rejects a flat spectrum") {
    AbsorptionSpectrum sp;
    for (int i = -100; i <= 100; ++i) {
        sp.frequencies_mhz.push_back(i * 0.01);
        sp.absorption_db.push_back(0.5 + 1e-4 * std::sin(i * 1.7));
    }
    CHECK_THROWS_AS(measure_feature(sp, 0.0, 2.0), NumericError);
}

TEST_CASE("teeth of the bundled comb script") {
    const LevelScheme s = LevelScheme::defaults();
    GridSpec spec;
    spec.fine_half_width_mhz = 30.0;
    auto g = init_thermal(s, 1.5, spec);
    run_protocol(g, s, load_protocol(kScripts + "spin_polarize.proto", s));
    run_protocol(g, s, load_protocol(kScripts + "afc_5tooth.proto", s));
    const auto sp = synthesize(g, s, {-10.0, 10.0, 0.01});
    const FeatureMeasurement centre = measure_feature(sp, 0.0, 1.5);
    CHECK(centre.peak_db >= 16.0);
    CHECK(centre.peak_db <= 20.0);
    for (double c : {-3.0, -1.5, 0.0, 1.5, 3.0}) {
        CAPTURE(c);
        const FeatureMeasurement m = measure_feature(sp, c, 1.5);
        CHECK(m.fwhm_khz >= 330.0);
        CHECK(m.fwhm_khz <= 430.0);
    }
    const CombFit fit = fit_comb(sp, {-3.0, -1.5, 0.0, 1.5, 3.0});
    CHECK(fit.params.peak_od_db >= 16.0);
    CHECK(fit.params.peak_od_db <= 20.0);
}

TEST_SUITE_END();
