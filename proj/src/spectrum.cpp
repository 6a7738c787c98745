#include "afcsim/spectrum.hpp"

#include "afcsim/error.hpp"
#include "afcsim/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace afcsim {

namespace {

constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493;

// Integral of a unit-area Gaussian (sigma) over [a, b].
double gaussian_mass(double a, double b, double sigma) {
    const double s = sigma * std::numbers::sqrt2;
    return 0.5 * (std::erf(b / s) - std::erf(a / s));
}

struct LineSource {
    int level;
    double frequency_mhz;
    double strength;
};

std::vector<LineSource> all_lines(const LevelScheme& scheme) {
    std::vector<LineSource> out;
    for (int l = 0; l < kLevelCount; ++l) {
        for (const auto& t : transitions_from(scheme, SpinProjection::from_index(l))) {
            out.push_back({l, t.center_frequency_mhz, t.strength});
        }
    }
    return out;
}

int most_populated_level(const SpectralPopulationGrid& grid) {
    const LevelVector totals = grid.level_totals();
    return static_cast<int>(std::max_element(totals.begin(), totals.end()) - totals.begin());
}

}  // namespace

std::size_t SpectrumWindow::size() const {
    return static_cast<std::size_t>(std::llround((hi_mhz - lo_mhz) / step_mhz)) + 1;
}

void SpectrumWindow::validate() const {
    if (!(step_mhz > 0.0) || !(hi_mhz > lo_mhz)) {
        throw DomainError("spectrum window needs hi > lo and a positive step");
    }
}

double AbsorptionSpectrum::step_mhz() const {
    if (size() < 2) return 0.0;
    const double step = (frequencies_mhz.back() - frequencies_mhz.front()) / static_cast<double>(size() - 1);
    for (std::size_t i = 1; i < size(); ++i) {
        if (std::abs(frequencies_mhz[i] - frequencies_mhz[i - 1] - step) > 1e-6 * step) return 0.0;
    }
    return step;
}

double AbsorptionSpectrum::absorption_at(double nu_mhz) const {
    if (size() == 0) throw DomainError("empty spectrum");
    if (nu_mhz <= frequencies_mhz.front()) return absorption_db.front();
    if (nu_mhz >= frequencies_mhz.back()) return absorption_db.back();
    const auto it = std::upper_bound(frequencies_mhz.begin(), frequencies_mhz.end(), nu_mhz);
    const std::size_t i = static_cast<std::size_t>(it - frequencies_mhz.begin());
    const double x0 = frequencies_mhz[i - 1];
    const double x1 = frequencies_mhz[i];
    const double w = (nu_mhz - x0) / (x1 - x0);
    return (1.0 - w) * absorption_db[i - 1] + w * absorption_db[i];
}

BackgroundDecomposition AbsorptionSpectrum::background_at(double nu_mhz) const {
    if (!decomposed()) throw DomainError("spectrum carries no background decomposition");
    const auto it = std::lower_bound(frequencies_mhz.begin(), frequencies_mhz.end(), nu_mhz);
    std::size_t i = static_cast<std::size_t>(it - frequencies_mhz.begin());
    if (i == size()) --i;
    if (i > 0 && std::abs(frequencies_mhz[i - 1] - nu_mhz) < std::abs(frequencies_mhz[i] - nu_mhz)) --i;
    return {i0_db[i], bulk_db[i], residual_db[i]};
}

double db_calibration(const SpectralPopulationGrid& grid, const LevelScheme& scheme) {
    const SpinProjection memory = SpinProjection::from_index(0);
    const double s = scheme.strength(memory, memory);
    const double peak = grid.profile_density(0.0);
    if (!(s > 0.0) || !(peak > 0.0)) throw DomainError("cannot calibrate dB scale");
    return scheme.peak_feature_db / (s * peak);
}

AbsorptionSpectrum synthesize_at(const SpectralPopulationGrid& grid, const LevelScheme& scheme,
                                 std::span<const double> frequencies_mhz) {
    const double c = db_calibration(grid, scheme);
    const auto lines = all_lines(scheme);
    const auto centers = grid.centers();
    const auto widths = grid.widths();
    const double sigma = scheme.hyperfine_inhomog_fwhm_khz * 1e-3 * kFwhmToSigma;
    const double reach = 6.0 * sigma;
    const double i0_density = i0_line_weight(scheme);

    AbsorptionSpectrum out;
    out.bulk_level = most_populated_level(grid);
    const std::size_t n = frequencies_mhz.size();
    out.frequencies_mhz.assign(frequencies_mhz.begin(), frequencies_mhz.end());
    out.absorption_db.assign(n, 0.0);
    out.i0_db.assign(n, 0.0);
    out.bulk_db.assign(n, 0.0);
    out.residual_db.assign(n, 0.0);

    for (std::size_t k = 0; k < n; ++k) {
        const double nu = frequencies_mhz[k];
        double bulk = 0.0;
        double residual = 0.0;
        for (const auto& line : lines) {
            // classes delta with f + delta near nu
            const double x = nu - line.frequency_mhz;
            double value = 0.0;
            if (sigma <= 0.0) {
                value = grid.density(line.level, x);
            } else {
                const auto [b, e] = grid.bins_overlapping(x - reach, x + reach);
                for (std::size_t bin = b; bin < e; ++bin) {
                    const double rho = grid.at(bin)[line.level];
                    if (rho == 0.0) continue;
                    const double lo = centers[bin] - 0.5 * widths[bin] - x;
                    value += rho * gaussian_mass(lo, lo + widths[bin], sigma);
                }
            }
            value *= c * line.strength;
            (line.level == out.bulk_level ? bulk : residual) += value;
        }
        // I=0 ions are not in the grid: fixed line with the ensemble's shape.
        const double i0 = c * i0_density * grid.profile_density(nu - scheme.i0_line_mhz);
        out.i0_db[k] = i0;
        out.bulk_db[k] = bulk;
        out.residual_db[k] = residual;
        out.absorption_db[k] = i0 + bulk + residual;
    }
    return out;
}

AbsorptionSpectrum synthesize(const SpectralPopulationGrid& grid, const LevelScheme& scheme,
                              const SpectrumWindow& window) {
    window.validate();
    const double span = grid.spec().span_mhz;
    if (window.lo_mhz < -span || window.hi_mhz > span) {
        throw DomainError("spectrum window lies outside the grid coverage");
    }
    std::vector<double> nu(window.size());
    for (std::size_t i = 0; i < nu.size(); ++i) {
        nu[i] = window.lo_mhz + static_cast<double>(i) * window.step_mhz;
    }
    return synthesize_at(grid, scheme, nu);
}

ConvolvedProfile convolve_square_gaussian(double square_width_khz, double kernel_fwhm_khz) {
    if (!(square_width_khz >= 0.0) || !(kernel_fwhm_khz >= 0.0) ||
        (square_width_khz == 0.0 && kernel_fwhm_khz == 0.0)) {
        throw DomainError("widths must be non-negative and not both zero");
    }
    const double half = 0.5 * square_width_khz;
    const double sigma = kernel_fwhm_khz * kFwhmToSigma;
    auto profile = [&](double x) {
        if (sigma == 0.0) return std::abs(x) < half ? 1.0 : (std::abs(x) == half ? 0.5 : 0.0);
        if (half == 0.0) {
            return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
        }
        return gaussian_mass(x - half, x + half, sigma);
    };

    ConvolvedProfile out;
    const double extent = half + 5.0 * sigma;
    const std::size_t n = 2001;
    out.x_khz.resize(n);
    out.profile.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -extent + 2.0 * extent * static_cast<double>(i) / static_cast<double>(n - 1);
        out.x_khz[i] = x;
        out.profile[i] = profile(x);
    }
    if (sigma == 0.0) {
        out.fwhm_khz = square_width_khz;
        return out;
    }
    // The profile is symmetric and decreasing in |x|: bisect for half maximum.
    const double target = 0.5 * profile(0.0);
    double lo = 0.0;
    double hi = extent;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (profile(mid) > target ? lo : hi) = mid;
    }
    out.fwhm_khz = lo + hi;
    return out;
}

FeatureMeasurement measure_feature(const AbsorptionSpectrum& spectrum, double center_mhz,
                                   double span_mhz) {
    if (!(span_mhz > 0.0)) throw DomainError("feature span must be positive");
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double f = spectrum.frequencies_mhz[i];
        if (std::abs(f - center_mhz) <= 0.5 * span_mhz) {
            x.push_back(f);
            y.push_back(spectrum.absorption_db[i]);
        }
    }
    if (x.size() < 8) throw DomainError("too few spectrum samples inside the feature span");
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    if (ymax - ymin <= 1e-9 * std::max(1.0, std::abs(ymax))) {
        throw NumericError("no feature above background");
    }

    const GaussianFit fit = fit_gaussian_on_background(x, y);
    const double noise = std::max(fit.residual_rms, 1e-12 * std::max(1.0, std::abs(ymax)));
    if (!(fit.peak > 3.0 * noise) || !(fit.fwhm > 0.0) || !std::isfinite(fit.center) ||
        std::abs(fit.center - center_mhz) > 0.5 * span_mhz) {
        throw NumericError("no feature above background by 3x the fit noise");
    }
    FeatureMeasurement m;
    m.peak_db = fit.peak;
    m.fwhm_khz = fit.fwhm * 1e3;
    m.background_db = fit.background;
    m.center_mhz = fit.center;
    m.residual_rms_db = fit.residual_rms;
    return m;
}

}  // namespace afcsim
