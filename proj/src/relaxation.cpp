#include "afcsim/relaxation.hpp"

#include "afcsim/error.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>

namespace afcsim {

namespace {
constexpr double kPlanckOverBoltzmannKPerMHz = 4.799243073e-5;
}

void RelaxationRates::validate() const {
    if (!(ladder_rate_per_s >= 0.0) || !(cross_coefficient_per_s >= 0.0)) {
        throw DomainError("relaxation rates must be non-negative");
    }
    if (!(temperature_k > 0.0)) throw DomainError("relaxation temperature must be positive");
}

RelaxationRates default_relaxation_rates() {
    RelaxationRates r;
    r.ladder_rate_per_s = 3.5e-3;
    r.cross_coefficient_per_s = 9.2e-3;
    r.temperature_k = 1.5;
    return r;
}

double cross_relaxation_overlap(const LevelVector& fractions) {
    double total = 0.0;
    double peak = 0.0;
    for (double f : fractions) {
        total += f;
        peak = std::max(peak, f);
    }
    if (total <= 0.0) return 0.0;
    return std::max(0.0, 1.0 - peak / total);
}

Eigen::Matrix<double, kLevelCount, kLevelCount> relaxation_generator(
    const LevelScheme& scheme, const RelaxationRates& rates, const LevelVector& ensemble_fractions) {
    rates.validate();
    Eigen::Matrix<double, kLevelCount, kLevelCount> a =
        Eigen::Matrix<double, kLevelCount, kLevelCount>::Zero();
    for (int k = 0; k + 1 < kLevelCount; ++k) {
        const double down = rates.ladder_rate_per_s;
        const double up = down * std::exp(-kPlanckOverBoltzmannKPerMHz *
                                          scheme.ground_splittings_mhz[k] / rates.temperature_k);
        // k -> k+1 at `up`, k+1 -> k at `down`
        a(k + 1, k) += up;
        a(k, k) -= up;
        a(k, k + 1) += down;
        a(k + 1, k + 1) -= down;
    }
    double total = 0.0;
    for (double f : ensemble_fractions) total += f;
    const double gamma = rates.cross_coefficient_per_s * cross_relaxation_overlap(ensemble_fractions);
    if (gamma > 0.0 && total > 0.0) {
        for (int r = 0; r < kLevelCount; ++r) {
            for (int c = 0; c < kLevelCount; ++c) {
                a(r, c) += gamma * ensemble_fractions[r] / total;
            }
            a(r, r) -= gamma;
        }
    }
    return a;
}

void relax(SpectralPopulationGrid& grid, const LevelScheme& scheme, double dt_s,
           const RelaxationRates& rates, double max_step_s) {
    if (!(dt_s >= 0.0)) throw DomainError("relaxation interval must be non-negative");
    if (!(max_step_s > 0.0)) throw DomainError("relaxation step must be positive");
    rates.validate();
    if (dt_s == 0.0) return;

    const long steps = std::max(1L, static_cast<long>(std::ceil(dt_s / max_step_s - 1e-12)));
    const double h = dt_s / static_cast<double>(steps);
    for (long s = 0; s < steps; ++s) {
        const LevelVector fractions = grid.level_totals();
        const Eigen::Matrix<double, kLevelCount, kLevelCount> propagator =
            (relaxation_generator(scheme, rates, fractions) * h).exp();
        for (std::size_t bin = 0; bin < grid.size(); ++bin) {
            LevelVector& pop = grid.at(bin);
            Eigen::Map<Eigen::Matrix<double, kLevelCount, 1>> v(pop.data());
            const double before = v.sum();
            if (before == 0.0) continue;
            v = (propagator * v).eval();
            for (double& x : pop) x = std::max(x, 0.0);
            const double after = v.sum();
            if (after > 0.0) v *= before / after;
        }
    }
}

}  // namespace afcsim
