#pragma once

// Weak coherent pulse storage read out by balanced heterodyne detection.
// Quadratures are in vacuum units: an ideal coherent state has variance 1.

#include <cstdint>
#include <utility>
#include <vector>

namespace afcsim {

/// Power transmission of a loss given in dB.
double transmission_from_db(double loss_db);

struct StorageRun {
    long n_events = 100000;
    double mean_photons_at_crystal = 0.8;
    double efficiency = 0.22;
    double collection_loss_db = 6.3;
    std::uint64_t rng_seed = 20190611;
    double phase_jitter_rad = 0.0;  // rms error of the reference-phase correction

    void validate() const;
};

struct QuadratureSamples {
    std::vector<double> phases;  // LO phase relative to the pulse, [0, 2 pi)
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
};

/// Input pulses reach the detector through the collection loss; echoes are
/// additionally scaled by the memory efficiency. Each sample is the
/// coherent mean at its phase plus Gaussian noise of variance
/// 1 + added_noise (echo) or 1 (input).
std::pair<QuadratureSamples, QuadratureSamples> simulate_storage_events(const StorageRun& run,
                                                                        double added_noise);

struct AddedVariance {
    double estimate = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double amplitude = 0.0;  // fitted quadrature amplitude
    std::vector<double> bin_variance;  // residual variance per phase bin, vacuum units
};

/// Variance in excess of vacuum: residuals about a fitted phase sinusoid,
/// pooled over phase bins, minus 1. The 95% interval is a seeded percentile
/// bootstrap over events. Throws DomainError for fewer than 100 samples.
AddedVariance added_variance(const QuadratureSamples& samples, int phase_bins = 16,
                             int bootstrap_rounds = 400, std::uint64_t bootstrap_seed = 7);

/// Added noise a classical measure-and-prepare strategy cannot beat: 2 eta.
double classical_bound(double efficiency);
bool beats_classical_bound(double added_variance_upper, double efficiency);

/// Photon number at the crystal from the detected mean and collection loss.
double calibrate_photon_number(double detected_mean_photons, double loss_db);

}  // namespace afcsim
