#include "afcsim/afc.hpp"

#include "afcsim/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace afcsim {

namespace {

constexpr double kFourLn2 = 4.0 * std::numbers::ln2;
// pi^2 / (4 ln 2): Gaussian-tooth dephasing constant
const double kDephasing = std::numbers::pi * std::numbers::pi / kFourLn2;

using cplx = std::complex<double>;

// In-place unnormalised DFT; sign = FFTW_FORWARD or FFTW_BACKWARD.
void dft(std::vector<cplx>& data, int sign) {
    const int n = static_cast<int>(data.size());
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan = fftw_plan_dft_1d(n, ptr, ptr, sign, FFTW_ESTIMATE);
    if (!plan) throw NumericError("FFT plan creation failed");
    fftw_execute(plan);
    fftw_destroy_plan(plan);
}

double peak_offset(double ym, double y0, double yp) {
    const double denom = ym - 2.0 * y0 + yp;
    if (denom >= 0.0) return 0.0;
    return std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
}

double dephasing_factor(double finesse) { return std::exp(-kDephasing / (finesse * finesse)); }

}  // namespace

double db_to_natural(double db) { return db * std::numbers::ln10 / 10.0; }

ToothShape parse_tooth_shape(const std::string& text) {
    if (text == "gaussian") return ToothShape::gaussian;
    if (text == "square") return ToothShape::square;
    throw DomainError("unknown tooth shape '" + text + "' (gaussian or square)");
}

void CombParams::validate() const {
    if (!(peak_od_db >= 0.0) || !(background_db >= 0.0)) {
        throw DomainError("comb optical depths must be non-negative");
    }
    if (!(spacing_mhz > 0.0) || !(tooth_fwhm_khz > 0.0)) {
        throw DomainError("comb spacing and tooth width must be positive");
    }
    if (!(finesse() > 1.0)) throw DomainError("comb finesse must exceed 1");
    if (n_teeth < 2) throw DomainError("a comb needs at least two teeth");
}

double efficiency_analytic(double d_db, double finesse, double d0_db) {
    if (!(d_db >= 0.0) || !(d0_db >= 0.0)) throw DomainError("optical depths must be non-negative");
    if (!(finesse > 1.0)) throw DomainError("finesse must exceed 1");
    const double x = db_to_natural(d_db) / finesse;
    return x * x * std::exp(-x) * dephasing_factor(finesse) * std::exp(-db_to_natural(d0_db));
}

EfficiencyInterval efficiency_interval(double d_db, double d_uncertainty_db, double finesse,
                                       double d0_db, double d0_uncertainty_db) {
    if (!(d_uncertainty_db >= 0.0) || !(d0_uncertainty_db >= 0.0)) {
        throw DomainError("uncertainties must be non-negative");
    }
    const double d_lo = std::max(0.0, d_db - d_uncertainty_db);
    const double d_hi = d_db + d_uncertainty_db;
    const double d0_lo = std::max(0.0, d0_db - d0_uncertainty_db);
    const double d0_hi = d0_db + d0_uncertainty_db;
    EfficiencyInterval out;
    out.central = efficiency_analytic(d_db, finesse, d0_db);
    // x^2 e^-x peaks at x = d/F = 2 (natural units)
    const double d_star = 2.0 * finesse * 10.0 / std::numbers::ln10;
    double best_d = efficiency_analytic(d_lo, finesse, 0.0) > efficiency_analytic(d_hi, finesse, 0.0)
                        ? d_lo
                        : d_hi;
    if (d_star > d_lo && d_star < d_hi) best_d = d_star;
    out.high = efficiency_analytic(best_d, finesse, d0_lo);
    out.low = std::min(efficiency_analytic(d_lo, finesse, d0_hi),
                       efficiency_analytic(d_hi, finesse, d0_hi));
    return out;
}

FinesseOptimum optimize_finesse(double d_db, double d0_db) {
    if (!(d_db > 0.0)) throw DomainError("peak optical depth must be positive");
    if (!(d0_db >= 0.0)) throw DomainError("background must be non-negative");
    // stationary point of ln(eta) in x = 1/F: 2 a x^2 + d x - 2 = 0
    const double d = db_to_natural(d_db);
    const double a = kDephasing;
    const double x = (-d + std::sqrt(d * d + 16.0 * a)) / (4.0 * a);
    FinesseOptimum out;
    out.finesse = 1.0 / x;
    if (!(out.finesse > 1.0)) throw DomainError("optimal finesse falls below 1");
    out.efficiency = efficiency_analytic(d_db, out.finesse, d0_db);
    return out;
}

AbsorptionSpectrum ideal_comb_spectrum(const CombParams& comb, const SpectrumWindow& window) {
    comb.validate();
    window.validate();
    const double gamma = comb.tooth_fwhm_khz * 1e-3;
    AbsorptionSpectrum out;
    const std::size_t n = window.size();
    out.frequencies_mhz.resize(n);
    out.absorption_db.resize(n);
    const double first = -0.5 * (comb.n_teeth - 1) * comb.spacing_mhz;
    for (std::size_t i = 0; i < n; ++i) {
        const double nu = window.lo_mhz + static_cast<double>(i) * window.step_mhz;
        double a = comb.background_db;
        for (int k = 0; k < comb.n_teeth; ++k) {
            const double u = (nu - (first + k * comb.spacing_mhz)) / gamma;
            if (comb.tooth_shape == ToothShape::gaussian) {
                a += comb.peak_od_db * std::exp(-kFourLn2 * u * u);
            } else if (std::abs(u) <= 0.5) {
                a += comb.peak_od_db;
            }
        }
        out.frequencies_mhz[i] = nu;
        out.absorption_db[i] = a;
    }
    return out;
}

EchoResult echo_simulate(const AbsorptionSpectrum& spectrum, const PulseSpec& pulse,
                         const EchoOptions& options) {
    const std::size_t n = spectrum.size();
    if (n < 64) throw DomainError("spectrum too short for an echo simulation");
    const double df = spectrum.step_mhz();
    if (!(df > 0.0)) throw DomainError("echo simulation needs a uniformly sampled spectrum");
    if (!(pulse.fwhm_ns > 0.0)) throw DomainError("pulse duration must be positive");
    for (double a : spectrum.absorption_db) {
        if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("absorption must be finite and >= 0");
    }

    const double f_lo = spectrum.frequencies_mhz.front();
    const double f_hi = spectrum.frequencies_mhz.back();
    const double tau_us = pulse.fwhm_ns * 1e-3;
    const double bandwidth_mhz = (pulse.shape == PulseShape::gaussian ? 0.4413 : 0.8859) / tau_us;
    if (pulse.center_mhz - 4.0 * bandwidth_mhz < f_lo || pulse.center_mhz + 4.0 * bandwidth_mhz > f_hi) {
        throw DomainError("pulse bandwidth exceeds the spectrum window");
    }
    const double period_us = 1.0 / (static_cast<double>(n) * df);
    const double window_us = period_us * static_cast<double>(n);
    if (window_us < 30.0 * tau_us) throw DomainError("spectral resolution too coarse for the pulse");

    double reference = options.reference_background_db;
    if (std::isnan(reference)) {
        reference = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(spectrum.frequencies_mhz[i] - pulse.center_mhz) <= 2.0 * bandwidth_mhz) {
                reference = std::min(reference, spectrum.absorption_db[i]);
            }
        }
    }
    if (!(reference >= 0.0)) throw DomainError("reference background must be non-negative");

    const auto [amin_it, amax_it] = std::minmax_element(spectrum.absorption_db.begin(),
                                                        spectrum.absorption_db.end());
    const double edge_slack = options.edge_tolerance * (*amax_it - *amin_it) + 1e-9;
    if (std::abs(spectrum.absorption_db.front() - reference) > edge_slack ||
        std::abs(spectrum.absorption_db.back() - reference) > edge_slack) {
        throw NumericError("absorption does not decay to the background at the window edges");
    }

    // FFT bin k holds baseband offset k*df (k < n/2) or (k-n)*df, relative to
    // the pulse carrier snapped onto the spectrum grid.
    const long jc = std::lround((pulse.center_mhz - f_lo) / df);
    const long ln = static_cast<long>(n);
    std::vector<cplx> cep(n);
    for (long k = 0; k < ln; ++k) {
        const long signed_k = k < (ln + 1) / 2 ? k : k - ln;
        const long j = ((jc + signed_k) % ln + ln) % ln;
        cep[static_cast<std::size_t>(k)] = -0.5 * db_to_natural(spectrum.absorption_db[static_cast<std::size_t>(j)]);
    }
    dft(cep, FFTW_BACKWARD);
    for (auto& c : cep) c /= static_cast<double>(n);
    // fold the real cepstrum onto positive quefrency
    for (std::size_t q = 1; q < n; ++q) {
        if (2 * q < n) {
            cep[q] *= 2.0;
        } else if (2 * q > n) {
            cep[q] = 0.0;
        }
    }
    dft(cep, FFTW_FORWARD);
    std::vector<cplx> h(n);
    for (std::size_t k = 0; k < n; ++k) h[k] = std::exp(cep[k]);

    EchoResult out;
    out.reference_background_db = reference;
    out.time_step_ns = period_us * 1e3;

    {
        std::vector<cplx> impulse = h;
        dft(impulse, FFTW_BACKWARD);
        double peak = 0.0;
        double acausal = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::abs(impulse[i]);
            peak = std::max(peak, v);
            if (2 * i >= n) acausal = std::max(acausal, v);
        }
        out.causality_leakage = peak > 0.0 ? acausal / peak : 0.0;
    }

    const double t0 = 10.0 * tau_us;
    std::vector<cplx> field(n);
    std::vector<double> input(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(i) * period_us - t0) / tau_us;
        double e = 0.0;
        if (pulse.shape == PulseShape::gaussian) {
            e = std::exp(-2.0 * std::numbers::ln2 * u * u);
        } else {
            e = std::abs(u) <= 0.5 ? 1.0 : 0.0;
        }
        field[i] = e;
        input[i] = e * e;
    }
    dft(field, FFTW_FORWARD);
    for (std::size_t k = 0; k < n; ++k) field[k] *= h[k] / static_cast<double>(n);
    dft(field, FFTW_BACKWARD);

    out.t_ns.resize(n);
    out.intensity.resize(n);
    double input_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.t_ns[i] = (static_cast<double>(i) * period_us - t0) * 1e3;
        out.intensity[i] = std::norm(field[i]);
        input_energy += input[i];
    }
    out.input_intensity = std::move(input);

    // first echo: strongest output after the transmitted pulse, within half the window
    const double search_from = 2.0 * pulse.fwhm_ns;
    const double search_to = 0.5 * window_us * 1e3 - t0 * 1e3;
    std::size_t ip = n;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (out.t_ns[i] <= search_from || out.t_ns[i] >= search_to) continue;
        // a genuine echo is a local maximum, not the tail of the transmitted pulse
        const bool local_max = out.intensity[i] > out.intensity[i - 1] &&
                               out.intensity[i] >= out.intensity[i + 1] && out.intensity[i] > 1e-9;
        if (local_max && (ip == n || out.intensity[i] > out.intensity[ip])) ip = i;
    }
    const double reference_energy = input_energy * std::pow(10.0, -reference / 10.0);
    double transmitted = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(out.t_ns[i]) <= 1.5 * pulse.fwhm_ns) transmitted += out.intensity[i];
    }
    out.transmitted_fraction = transmitted / input_energy;
    if (ip == n) {
        out.efficiency = 0.0;
        out.echo_delay_ns = 0.0;
        return out;
    }
    out.echo_delay_ns =
        out.t_ns[ip] + out.time_step_ns * peak_offset(out.intensity[ip - 1], out.intensity[ip],
                                                      out.intensity[ip + 1]);
    double echo = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(out.t_ns[i] - out.t_ns[ip]) <= 1.5 * pulse.fwhm_ns) echo += out.intensity[i];
    }
    out.efficiency = std::clamp(echo / reference_energy, 0.0, 1.0);
    return out;
}

CombFit fit_comb(const AbsorptionSpectrum& spectrum, const std::vector<double>& tooth_centers_mhz) {
    if (tooth_centers_mhz.size() < 2) throw DomainError("comb fit needs at least two teeth");
    std::vector<double> centers = tooth_centers_mhz;
    std::sort(centers.begin(), centers.end());
    double spacing = centers[1] - centers[0];
    for (std::size_t i = 1; i < centers.size(); ++i) spacing = std::min(spacing, centers[i] - centers[i - 1]);
    if (!(spacing > 0.0)) throw DomainError("tooth centres must be distinct");

    CombFit fit;
    double peak = 0.0;
    double width = 0.0;
    for (double c : centers) {
        fit.teeth.push_back(measure_feature(spectrum, c, spacing));
        peak += fit.teeth.back().peak_db;
        width += fit.teeth.back().fwhm_khz;
    }
    double background = 0.0;
    for (std::size_t i = 1; i < centers.size(); ++i) {
        background += spectrum.absorption_at(0.5 * (centers[i] + centers[i - 1]));
    }
    fit.inter_tooth_background_db = background / static_cast<double>(centers.size() - 1);

    const double n = static_cast<double>(centers.size());
    fit.params.peak_od_db = peak / n;
    fit.params.tooth_fwhm_khz = width / n;
    fit.params.spacing_mhz =
        (fit.teeth.back().center_mhz - fit.teeth.front().center_mhz) / (n - 1.0);
    fit.params.background_db = fit.inter_tooth_background_db;
    fit.params.n_teeth = static_cast<int>(centers.size());
    fit.params.tooth_shape = ToothShape::gaussian;
    return fit;
}

void CavityDesign::validate() const {
    if (!(cavity_length_cm > 0.0) || !(cavity_finesse > 0.0) || !(bandwidth_mhz > 0.0) ||
        !(comb_finesse > 1.0) || !(peak_od_db > 0.0) || !(background_db >= 0.0)) {
        throw DomainError("cavity design parameters must be positive, comb finesse above 1");
    }
}

double cavity_projection(const CavityDesign& design) {
    design.validate();
    const double mean_depth = db_to_natural(design.peak_od_db) / design.comb_finesse;
    const double loss = db_to_natural(design.background_db);
    const double absorbed = mean_depth / (mean_depth + loss);
    return absorbed * absorbed * dephasing_factor(design.comb_finesse);
}

}  // namespace afcsim
