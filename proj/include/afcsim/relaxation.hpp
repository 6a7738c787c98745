#pragma once

#include "afcsim/population.hpp"

#include <Eigen/Core>

namespace afcsim {

/// Two-channel hyperfine relaxation.
///  - ladder: single-phonon spin-lattice flips between adjacent m_I(g) levels,
///    downward rate `ladder_rate_per_s`, upward rate fixed by detailed balance;
///  - cross-relaxation: each class relaxes toward the ensemble-average level
///    distribution at `cross_coefficient_per_s` * overlap, where the overlap
///    1 - p_max measures how much of the ensemble sits outside its most
///    populated (bulk) level.
struct RelaxationRates {
    double ladder_rate_per_s = 0.0;
    double cross_coefficient_per_s = 0.0;
    double temperature_k = 1.5;

    void validate() const;
};

/// Calibrated defaults: polarized-background feature ~188 s, thermal hole
/// ~60 s, pure ladder ~600 s.
RelaxationRates default_relaxation_rates();

/// Spectral overlap factor driving cross-relaxation for the given ensemble
/// level fractions (sum to 1).
double cross_relaxation_overlap(const LevelVector& fractions);

/// 8x8 generator (column convention, d p/dt = A p) for one class.
Eigen::Matrix<double, kLevelCount, kLevelCount> relaxation_generator(
    const LevelScheme& scheme, const RelaxationRates& rates, const LevelVector& ensemble_fractions);

/// Advances the grid by dt seconds in sub-steps no longer than max_step_s.
/// The ensemble average is refreshed at each sub-step; within a sub-step the
/// evolution is the exact matrix exponential.
void relax(SpectralPopulationGrid& grid, const LevelScheme& scheme, double dt_s,
           const RelaxationRates& rates, double max_step_s = 10.0);

}  // namespace afcsim
