#pragma once

// Absorption spectra synthesized from a population grid.
//
// Every ground level l of class delta absorbs on each of its banded
// transitions at f(t) + delta. The homogeneous line is narrower than a bin, so
// the class density is piecewise constant and is convolved with the Gaussian
// hyperfine-inhomogeneous kernel. Absorption is in measured dB.

#include "afcsim/hyperfine.hpp"
#include "afcsim/population.hpp"

#include <span>
#include <vector>

namespace afcsim {

struct SpectrumWindow {
    double lo_mhz = -30.0;
    double hi_mhz = 30.0;
    double step_mhz = 0.01;

    std::size_t size() const;
    void validate() const;
};

struct BackgroundDecomposition {
    double i0_tail_db = 0.0;                 // I=0 isotope line
    double bulk_tail_db = 0.0;               // most populated (spin-polarized) level
    double residual_polarization_db = 0.0;   // every other ground level

    double total_db() const { return i0_tail_db + bulk_tail_db + residual_polarization_db; }
};

struct AbsorptionSpectrum {
    std::vector<double> frequencies_mhz;
    std::vector<double> absorption_db;
    // Per-frequency components; empty for spectra that are not decomposed
    // (e.g. ideal combs).
    std::vector<double> i0_db;
    std::vector<double> bulk_db;
    std::vector<double> residual_db;
    int bulk_level = kLevelCount - 1;

    std::size_t size() const { return frequencies_mhz.size(); }
    bool decomposed() const { return i0_db.size() == size() && !i0_db.empty(); }
    /// Uniform sample spacing, or 0 when the grid is not uniform.
    double step_mhz() const;
    /// Linear interpolation of the total absorption.
    double absorption_at(double nu_mhz) const;
    /// Component values at the sample nearest to nu. Requires decomposed().
    BackgroundDecomposition background_at(double nu_mhz) const;
};

/// dB per unit (density x strength): the class at the line centre with its
/// whole population in -7/2 reads scheme.peak_feature_db on the -7/2 DmI = 0
/// transition.
double db_calibration(const SpectralPopulationGrid& grid, const LevelScheme& scheme);

/// Synthesizes the spectrum over `window`. Throws DomainError when the
/// window leaves the grid's detuning range.
AbsorptionSpectrum synthesize(const SpectralPopulationGrid& grid, const LevelScheme& scheme,
                              const SpectrumWindow& window);

/// Absorption at arbitrary frequencies (same model as synthesize).
AbsorptionSpectrum synthesize_at(const SpectralPopulationGrid& grid, const LevelScheme& scheme,
                                 std::span<const double> frequencies_mhz);

struct ConvolvedProfile {
    std::vector<double> x_khz;
    std::vector<double> profile;  // unit-height square convolved with a unit-area Gaussian
    double fwhm_khz = 0.0;
};

/// Square excitation of `square_width_khz` convolved with a Gaussian of FWHM
/// `kernel_fwhm_khz`. A zero-width square is treated as a unit-area delta.
ConvolvedProfile convolve_square_gaussian(double square_width_khz, double kernel_fwhm_khz);

struct FeatureMeasurement {
    double peak_db = 0.0;        // height above the fitted background
    double fwhm_khz = 0.0;
    double background_db = 0.0;
    double center_mhz = 0.0;
    double residual_rms_db = 0.0;
};

/// Fits a Gaussian on a flat background to the samples in
/// [center - span/2, center + span/2]. Throws NumericError when no feature
/// stands above the background by 3x the fit noise.
FeatureMeasurement measure_feature(const AbsorptionSpectrum& spectrum, double center_mhz,
                                   double span_mhz);

}  // namespace afcsim
