#pragma once

#include <span>
#include <vector>

namespace afcsim {

struct DecaySample {
    double t_s;
    double amplitude;
};

struct LifetimeFit {
    double lifetime_s = 0.0;
    double amplitude = 0.0;
    double lifetime_stderr_s = 0.0;
};

/// Least-squares fit of A exp(-t / T). Requires >= 3 samples with
/// non-negative, strictly increasing times. Throws NumericError for constant,
/// non-positive or non-decaying data.
LifetimeFit fit_exponential_lifetime(std::span<const DecaySample> samples);

struct GaussianFit {
    double peak = 0.0;        // height above background
    double center = 0.0;
    double fwhm = 0.0;
    double background = 0.0;  // flat offset
    double residual_rms = 0.0;
};

/// Least-squares fit of background + peak * exp(-4 ln2 (x - c)^2 / fwhm^2).
/// Initial guesses are taken from the data.
GaussianFit fit_gaussian_on_background(std::span<const double> x, std::span<const double> y);

}  // namespace afcsim
