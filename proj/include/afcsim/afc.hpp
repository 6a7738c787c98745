#pragma once

// Atomic-frequency-comb memory: analytic efficiency for an infinite Gaussian
// comb, finesse optimisation, causal time-domain echo simulation and the
// impedance-matched cavity projection.

#include "afcsim/spectrum.hpp"

#include <limits>
#include <string>
#include <vector>

namespace afcsim {

/// dB -> natural optical depth.
double db_to_natural(double db);

enum class ToothShape { gaussian, square };
ToothShape parse_tooth_shape(const std::string& text);

struct CombParams {
    double peak_od_db = 18.0;
    double spacing_mhz = 1.5;
    double tooth_fwhm_khz = 380.0;
    double background_db = 1.0;
    int n_teeth = 5;
    ToothShape tooth_shape = ToothShape::gaussian;

    double finesse() const { return spacing_mhz * 1e3 / tooth_fwhm_khz; }
    void validate() const;
};

/// Echo efficiency of an infinite comb of Gaussian teeth, d and d0 in dB.
double efficiency_analytic(double d_db, double finesse, double d0_db);

struct EfficiencyInterval {
    double low = 0.0;
    double central = 0.0;
    double high = 0.0;
};

/// Extremes of efficiency_analytic over d in [d - dd, d + dd] and d0 in
/// [d0 - dd0, d0 + dd0] (clamped at 0) at fixed finesse.
EfficiencyInterval efficiency_interval(double d_db, double d_uncertainty_db, double finesse,
                                       double d0_db, double d0_uncertainty_db);

struct FinesseOptimum {
    double finesse = 0.0;
    double efficiency = 0.0;
};

/// Closed-form maximiser of efficiency_analytic over F. Throws DomainError for d <= 0.
FinesseOptimum optimize_finesse(double d_db, double d0_db);

/// Ideal comb absorption on a uniform window: teeth centred symmetrically
/// about 0 on top of the flat background.
AbsorptionSpectrum ideal_comb_spectrum(const CombParams& comb, const SpectrumWindow& window);

enum class PulseShape { gaussian, square };

struct PulseSpec {
    double fwhm_ns = 200.0;  // intensity FWHM (gaussian) or full length (square)
    double center_mhz = 0.0;
    PulseShape shape = PulseShape::gaussian;
};

struct EchoOptions {
    /// Reference background (dB). NaN: minimum absorption inside the pulse band.
    double reference_background_db = std::numeric_limits<double>::quiet_NaN();
    /// Largest tolerated distance of the edge absorption from the reference,
    /// relative to the absorption range.
    double edge_tolerance = 0.05;
};

struct EchoResult {
    std::vector<double> t_ns;           // relative to the input peak
    std::vector<double> intensity;      // output |E|^2, input peak normalised to 1
    std::vector<double> input_intensity;
    double efficiency = 0.0;
    double echo_delay_ns = 0.0;
    double transmitted_fraction = 0.0;
    double reference_background_db = 0.0;
    double time_step_ns = 0.0;
    double causality_leakage = 0.0;     // max |h(t<0)| / max |h|
};

/// Propagates the pulse through exp(-alpha/2 + i phi), phi the minimum-phase
/// (Kramers-Kronig) partner of the absorption. The spectrum must be uniformly
/// sampled and return to its background at both edges.
EchoResult echo_simulate(const AbsorptionSpectrum& spectrum, const PulseSpec& pulse,
                         const EchoOptions& options = {});

/// Mean tooth parameters of a comb read from a spectrum: each tooth is fitted
/// with measure_feature; the background is the mean absorption midway
/// between adjacent teeth.
struct CombFit {
    CombParams params;
    std::vector<FeatureMeasurement> teeth;
    double inter_tooth_background_db = 0.0;
};
CombFit fit_comb(const AbsorptionSpectrum& spectrum, const std::vector<double>& tooth_centers_mhz);

struct CavityDesign {
    double cavity_length_cm = 27.0;
    double cavity_finesse = 11.0;
    double bandwidth_mhz = 100.0;
    double comb_finesse = 9.0;
    double peak_od_db = 20.0;
    double background_db = 0.08;

    void validate() const;
};

/// Impedance-matched cavity efficiency:
///   (dm / (dm + d0))^2 exp(-pi^2 / (4 ln2 F^2)),  dm = d / F (natural units).
double cavity_projection(const CavityDesign& design);

}  // namespace afcsim
