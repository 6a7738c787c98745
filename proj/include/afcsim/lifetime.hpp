#pragma once

#include "afcsim/fitting.hpp"
#include "afcsim/relaxation.hpp"
#include "afcsim/spectrum.hpp"

#include <vector>

namespace afcsim {

struct DecayProbe {
    double feature_center_mhz = 0.0;
    double reference_offset_mhz = 2.0;  // local background taken at center +- offset
    double antihole_center_mhz = -4.5;
    double interval_s = 30.0;
    int samples = 21;
    SpectrumWindow window{-8.0, 8.0, 0.02};
};

struct DecayTrace {
    std::vector<double> t_s;
    std::vector<double> feature_db;   // height above the local background
    std::vector<double> antihole_db;  // absolute absorption at the anti-hole
    LifetimeFit fit;

    /// True when the anti-hole rises to an interior maximum and then falls.
    bool antihole_rises_then_falls() const;
};

/// Relaxes `grid` in place, recording the feature height before each
/// interval, and fits the decay.
DecayTrace track_decay(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                       const RelaxationRates& rates, const DecayProbe& probe = {});

/// Same as track_decay but the feature is a hole: its depth below the
/// absorption of `reference`.
DecayTrace track_hole_decay(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                            const RelaxationRates& rates, const AbsorptionSpectrum& reference,
                            const DecayProbe& probe = {});

}  // namespace afcsim
