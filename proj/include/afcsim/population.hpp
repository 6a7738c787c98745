#pragma once

// Spectral population grid and the optical-pumping (hole-burning) engine.
//
// Each ion class is labelled by its optical detuning delta: all of its
// transitions are rigidly shifted by delta. The grid stores, per class, the
// population density (per MHz) of each ground hyperfine level. Bins are
// uniform inside a fine window around the memory and coarser elsewhere.

#include "afcsim/hyperfine.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace afcsim {

using LevelVector = std::array<double, kLevelCount>;

struct GridSpec {
    double span_mhz = 2500.0;  // classes cover [-span, +span]
    double coarse_step_mhz = 0.1;
    double fine_center_mhz = 0.0;
    double fine_half_width_mhz = 30.0;
    double fine_step_mhz = 0.01;

    void validate() const;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

class SpectralPopulationGrid {
public:
    SpectralPopulationGrid() = default;
    SpectralPopulationGrid(const GridSpec& spec, const OpticalLine& line);

    std::size_t size() const noexcept { return centers_.size(); }
    std::span<const double> centers() const noexcept { return centers_; }
    std::span<const double> widths() const noexcept { return widths_; }
    const GridSpec& spec() const noexcept { return spec_; }
    const OpticalLine& line() const noexcept { return line_; }

    LevelVector& at(std::size_t bin) { return populations_[bin]; }
    const LevelVector& at(std::size_t bin) const { return populations_[bin]; }

    /// Normalized inhomogeneous profile (unit area over the grid).
    double profile_density(double delta_mhz) const { return line_.density(delta_mhz) / profile_norm_; }

    /// Density of `level` at class delta (piecewise constant per bin; 0 outside).
    double density(int level, double delta_mhz) const;

    /// Index of the bin containing delta, or size() when outside the grid.
    std::size_t locate(double delta_mhz) const;

    /// Half-open range of bins overlapping [lo, hi].
    std::pair<std::size_t, std::size_t> bins_overlapping(double lo, double hi) const;

    double level_total(int level) const;
    LevelVector level_totals() const;
    double total() const;

    double temperature_k = 0.0;
    double total_population = 0.0;

    friend bool operator==(const SpectralPopulationGrid&, const SpectralPopulationGrid&) = default;

private:
    GridSpec spec_;
    OpticalLine line_;
    double profile_norm_ = 1.0;
    std::vector<double> centers_;
    std::vector<double> widths_;
    std::vector<double> edges_;
    std::vector<LevelVector> populations_;
};

/// Boltzmann occupancies of the ground levels at temperature T (kelvin).
LevelVector boltzmann_occupancies(const LevelScheme& scheme, double temperature_k);

/// Thermal-equilibrium grid; every level's density follows the optical line.
SpectralPopulationGrid init_thermal(const LevelScheme& scheme, double temperature_k,
                                    const GridSpec& spec, const OpticalLine& line,
                                    double total = 1.0);
SpectralPopulationGrid init_thermal(const LevelScheme& scheme, double temperature_k,
                                    const GridSpec& spec = {}, double total = 1.0);

/// Constants mapping laser settings onto rate-equation pumping.
struct PumpCalibration {
    double rate_per_s = 1.1e5;           // pump rate at the reference Rabi frequency, strength 1
    double reference_rabi_khz = 500.0;
    double saturation_cap = 0.5;         // maximum excited fraction per burn or pass
    double jitter_fwhm_khz = 175.0;      // Gaussian laser frequency jitter
    double jump_fraction = 0.1;          // weight of rare large frequency jumps
    double jump_fwhm_khz = 600.0;
    double repump_overlap = 0.0;         // excited fraction still excited at the next burn
    double sweep_efficiency = 50.0;      // scales the per-pass sweep exposure
    double depolarization_rate_per_s = 0.02;  // thermalizing leak competing with a sweep

    void validate() const;
};

/// Effective (jitter-averaged) excitation profile of a square burn of width
/// `width_khz` centred at 0, evaluated at offset x (MHz). Peak -> 1 for
/// width >> jitter.
double excitation_profile(const PumpCalibration& cal, double width_khz, double x_mhz);

/// Frequency-selective burn. The laser at `center_mhz` (square chirp of
/// `width_khz`) drives every banded transition of every level that is
/// resonant for some class; `t` names the intended transition and is
/// validated against the scheme. Excited ions decay via branching_ratios.
void apply_burn(SpectralPopulationGrid& grid, const LevelScheme& scheme, const Transition& t,
                double center_mhz, double width_khz, double duration_s, double rabi_khz,
                const PumpCalibration& cal = {});

/// Repeated chirped sweep over `span_mhz` centred on the DmI = `band` band.
/// `sweep_rate_hz` full up/down sweeps per second for `duration_s`.
void apply_sweep(SpectralPopulationGrid& grid, const LevelScheme& scheme, int band,
                 double span_mhz, double duration_s, double sweep_rate_hz, double rabi_khz,
                 const PumpCalibration& cal = {});

/// Centre of the DmI = band band: midpoint of its extreme transition frequencies.
double band_center_mhz(const LevelScheme& scheme, int band);

}  // namespace afcsim
