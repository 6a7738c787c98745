#include "afcsim/population.hpp"

#include "afcsim/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace afcsim {

namespace {

// h / k_B in kelvin per MHz.
constexpr double kPlanckOverBoltzmannKPerMHz = 4.799243073e-5;
constexpr double kFwhmToSigma = 1.0 / 2.3548200450309493;

using BranchingTable = std::array<std::array<double, kLevelCount>, kLevelCount>;

BranchingTable branching_table(const LevelScheme& scheme) {
    BranchingTable table{};
    for (int e = 0; e < kLevelCount; ++e) {
        table[e] = branching_ratios(scheme, SpinProjection::from_index(e));
    }
    return table;
}

// Exposure of one level of one class to one excited level.
struct Drive {
    std::size_t bin;
    int level;
    int excited;
    double exposure;
};

// Moves population of one class according to per-level exposures. Excited
// ions are capped at `cap` of the level population and decay immediately via
// the branching table, except the `repump` fraction which returns to origin.
void pump_class(LevelVector& pop, const std::array<LevelVector, kLevelCount>& exposure,
                const BranchingTable& branching, double cap, double repump) {
    const LevelVector old = pop;
    for (int level = 0; level < kLevelCount; ++level) {
        double total = 0.0;
        for (double x : exposure[level]) total += x;
        if (total <= 0.0 || old[level] <= 0.0) continue;
        const double moving = (1.0 - repump) * cap * -std::expm1(-total) * old[level];
        pop[level] -= moving;
        for (int e = 0; e < kLevelCount; ++e) {
            if (exposure[level][e] <= 0.0) continue;
            const double share = moving * exposure[level][e] / total;
            for (int g = 0; g < kLevelCount; ++g) pop[g] += share * branching[e][g];
        }
    }
    for (double& v : pop) v = std::max(v, 0.0);
}

}  // namespace

void GridSpec::validate() const {
    if (!(span_mhz > 0.0) || !(coarse_step_mhz > 0.0) || !(fine_step_mhz > 0.0) ||
        !(fine_half_width_mhz >= 0.0)) {
        throw DomainError("grid spans and steps must be positive");
    }
    if (fine_step_mhz > coarse_step_mhz) {
        throw DomainError("fine step must not exceed the coarse step");
    }
    if (std::abs(fine_center_mhz) + fine_half_width_mhz >= span_mhz) {
        throw DomainError("fine window must lie inside the grid span");
    }
}

SpectralPopulationGrid::SpectralPopulationGrid(const GridSpec& spec, const OpticalLine& line)
    : spec_(spec), line_(line) {
    spec.validate();
    const double lo = -spec.span_mhz;
    const double hi = spec.span_mhz;
    const double fine_lo = spec.fine_center_mhz - spec.fine_half_width_mhz;
    const double fine_hi = spec.fine_center_mhz + spec.fine_half_width_mhz;

    // Edges by index arithmetic so that repeated construction is bit-identical.
    for (long k = 0;; ++k) {
        const double x = lo + k * spec.coarse_step_mhz;
        if (x >= fine_lo - 1e-9) break;
        edges_.push_back(x);
    }
    if (spec.fine_half_width_mhz > 0.0) {
        const long n_fine = std::lround((fine_hi - fine_lo) / spec.fine_step_mhz);
        for (long k = 0; k < n_fine; ++k) edges_.push_back(fine_lo + k * spec.fine_step_mhz);
    }
    const long first_upper = static_cast<long>(std::ceil((fine_hi - lo) / spec.coarse_step_mhz - 1e-9));
    edges_.push_back(fine_hi);
    for (long k = first_upper;; ++k) {
        const double x = lo + k * spec.coarse_step_mhz;
        if (x > hi + 1e-9) break;
        if (x > fine_hi + 1e-9) edges_.push_back(x);
    }
    if (edges_.back() < hi - 1e-9) edges_.push_back(hi);

    const std::size_t n = edges_.size() - 1;
    centers_.resize(n);
    widths_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        centers_[i] = 0.5 * (edges_[i] + edges_[i + 1]);
        widths_[i] = edges_[i + 1] - edges_[i];
    }
    populations_.assign(n, LevelVector{});

    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += line_.density(centers_[i]) * widths_[i];
    profile_norm_ = norm;
}

std::size_t SpectralPopulationGrid::locate(double delta_mhz) const {
    if (edges_.empty() || delta_mhz < edges_.front() || delta_mhz >= edges_.back()) return size();
    const auto it = std::upper_bound(edges_.begin(), edges_.end(), delta_mhz);
    return static_cast<std::size_t>(it - edges_.begin()) - 1;
}

std::pair<std::size_t, std::size_t> SpectralPopulationGrid::bins_overlapping(double lo,
                                                                            double hi) const {
    if (edges_.empty() || hi <= edges_.front() || lo >= edges_.back() || hi <= lo) return {0, 0};
    const auto first = std::upper_bound(edges_.begin(), edges_.end(), lo);
    const auto last = std::lower_bound(edges_.begin(), edges_.end(), hi);
    const std::size_t b = first == edges_.begin() ? 0 : static_cast<std::size_t>(first - edges_.begin()) - 1;
    const std::size_t e = static_cast<std::size_t>(last - edges_.begin());
    return {b, std::min(e, size())};
}

double SpectralPopulationGrid::density(int level, double delta_mhz) const {
    const std::size_t bin = locate(delta_mhz);
    return bin < size() ? populations_[bin][level] : 0.0;
}

double SpectralPopulationGrid::level_total(int level) const {
    // Neumaier summation keeps conservation checks at the 1e-12 level.
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        const double v = populations_[i][level] * widths_[i];
        const double t = sum + v;
        comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    return sum + comp;
}

LevelVector SpectralPopulationGrid::level_totals() const {
    LevelVector out{};
    for (int l = 0; l < kLevelCount; ++l) out[l] = level_total(l);
    return out;
}

double SpectralPopulationGrid::total() const {
    double sum = 0.0;
    for (double v : level_totals()) sum += v;
    return sum;
}

LevelVector boltzmann_occupancies(const LevelScheme& scheme, double temperature_k) {
    if (!(temperature_k > 0.0)) throw DomainError("temperature must be positive");
    LevelVector occ{};
    double z = 0.0;
    for (int l = 0; l < kLevelCount; ++l) {
        const double energy = scheme.ground_energy_mhz(SpinProjection::from_index(l));
        occ[l] = std::isinf(temperature_k)
                     ? 1.0
                     : std::exp(-kPlanckOverBoltzmannKPerMHz * energy / temperature_k);
        z += occ[l];
    }
    for (double& v : occ) v /= z;
    return occ;
}

SpectralPopulationGrid init_thermal(const LevelScheme& scheme, double temperature_k,
                                    const GridSpec& spec, const OpticalLine& line, double total) {
    if (!(total >= 0.0)) throw DomainError("total population must be non-negative");
    const LevelVector occ = boltzmann_occupancies(scheme, temperature_k);
    SpectralPopulationGrid grid(spec, line);
    grid.temperature_k = temperature_k;
    grid.total_population = total;
    const auto centers = grid.centers();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double p = total * grid.profile_density(centers[i]);
        for (int l = 0; l < kLevelCount; ++l) grid.at(i)[l] = occ[l] * p;
    }
    return grid;
}

SpectralPopulationGrid init_thermal(const LevelScheme& scheme, double temperature_k,
                                    const GridSpec& spec, double total) {
    return init_thermal(scheme, temperature_k, spec, scheme.optical_line, total);
}

void PumpCalibration::validate() const {
    if (!(rate_per_s >= 0.0) || !(reference_rabi_khz > 0.0)) {
        throw DomainError("pump rate must be non-negative and reference Rabi positive");
    }
    if (!(saturation_cap > 0.0 && saturation_cap <= 1.0)) {
        throw DomainError("saturation cap must lie in (0, 1]");
    }
    if (!(jitter_fwhm_khz >= 0.0) || !(jump_fwhm_khz >= 0.0) ||
        !(jump_fraction >= 0.0 && jump_fraction <= 1.0)) {
        throw DomainError("invalid laser jitter parameters");
    }
    if (!(repump_overlap >= 0.0 && repump_overlap < 1.0)) {
        throw DomainError("repump overlap must lie in [0, 1)");
    }
    if (!(sweep_efficiency >= 0.0) || !(depolarization_rate_per_s >= 0.0)) {
        throw DomainError("sweep efficiency and depolarization rate must be non-negative");
    }
}

double excitation_profile(const PumpCalibration& cal, double width_khz, double x_mhz) {
    const double half = 0.5 * width_khz * 1e-3;
    auto smeared = [&](double fwhm_khz) {
        const double sigma = fwhm_khz * 1e-3 * kFwhmToSigma;
        if (sigma <= 0.0) return std::abs(x_mhz) <= half ? 1.0 : 0.0;
        const double s = sigma * std::numbers::sqrt2;
        return 0.5 * (std::erf((x_mhz + half) / s) - std::erf((x_mhz - half) / s));
    };
    double e = (1.0 - cal.jump_fraction) * smeared(cal.jitter_fwhm_khz);
    if (cal.jump_fraction > 0.0) {
        e += cal.jump_fraction *
             smeared(std::hypot(cal.jitter_fwhm_khz, cal.jump_fwhm_khz));
    }
    return e;
}

void apply_burn(SpectralPopulationGrid& grid, const LevelScheme& scheme, const Transition& t,
                double center_mhz, double width_khz, double duration_s, double rabi_khz,
                const PumpCalibration& cal) {
    if (!(width_khz > 0.0)) throw DomainError("burn width must be positive");
    if (!(duration_s >= 0.0)) throw DomainError("burn duration must be non-negative");
    if (!(rabi_khz >= 0.0)) throw DomainError("Rabi frequency must be non-negative");
    cal.validate();
    if (!is_supported_band(t.delta_mi) || t.e_level.index() - t.g_level.index() != t.delta_mi ||
        scheme.strength(t.g_level, t.e_level) <= 0.0) {
        throw DomainError("invalid transition " + t.g_level.to_string() + " -> " +
                          t.e_level.to_string());
    }
    if (duration_s == 0.0 || rabi_khz == 0.0 || cal.rate_per_s == 0.0) return;

    const double rabi_ratio = rabi_khz / cal.reference_rabi_khz;
    const double base = cal.rate_per_s * rabi_ratio * rabi_ratio * duration_s;
    const double widest = std::max(cal.jitter_fwhm_khz,
                                   cal.jump_fraction > 0.0
                                       ? std::hypot(cal.jitter_fwhm_khz, cal.jump_fwhm_khz)
                                       : 0.0);
    const double reach = 0.5 * width_khz * 1e-3 + 7.0 * widest * 1e-3 * kFwhmToSigma;

    std::vector<Drive> drives;
    const auto centers = grid.centers();
    for (int level = 0; level < kLevelCount; ++level) {
        for (const auto& tr : transitions_from(scheme, SpinProjection::from_index(level))) {
            // classes with |f + delta - center| <= reach
            const double d0 = center_mhz - tr.center_frequency_mhz;
            const auto [b, e] = grid.bins_overlapping(d0 - reach, d0 + reach);
            for (std::size_t bin = b; bin < e; ++bin) {
                const double profile = excitation_profile(cal, width_khz, centers[bin] - d0);
                if (profile <= 0.0) continue;
                drives.push_back({bin, level, tr.e_level.index(), base * tr.strength * profile});
            }
        }
    }
    std::sort(drives.begin(), drives.end(), [](const Drive& a, const Drive& b) {
        if (a.bin != b.bin) return a.bin < b.bin;
        if (a.level != b.level) return a.level < b.level;
        return a.excited < b.excited;
    });

    const BranchingTable branching = branching_table(scheme);
    std::size_t i = 0;
    while (i < drives.size()) {
        const std::size_t bin = drives[i].bin;
        std::array<LevelVector, kLevelCount> exposure{};
        for (; i < drives.size() && drives[i].bin == bin; ++i) {
            exposure[drives[i].level][drives[i].excited] += drives[i].exposure;
        }
        pump_class(grid.at(bin), exposure, branching, cal.saturation_cap, cal.repump_overlap);
    }
}

double band_center_mhz(const LevelScheme& scheme, int band) {
    if (!is_supported_band(band)) {
        throw DomainError("unknown band DmI = " + std::to_string(band));
    }
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    for (int g = 0; g < kLevelCount; ++g) {
        const int e = g + band;
        if (e < 0 || e >= kLevelCount) continue;
        const double f =
            transition_frequency(scheme, SpinProjection::from_index(g), SpinProjection::from_index(e));
        lo = any ? std::min(lo, f) : f;
        hi = any ? std::max(hi, f) : f;
        any = true;
    }
    return 0.5 * (lo + hi);
}

void apply_sweep(SpectralPopulationGrid& grid, const LevelScheme& scheme, int band,
                 double span_mhz, double duration_s, double sweep_rate_hz, double rabi_khz,
                 const PumpCalibration& cal) {
    if (!is_supported_band(band)) throw DomainError("unknown band DmI = " + std::to_string(band));
    if (!(span_mhz > 0.0)) throw DomainError("sweep span must be positive");
    if (!(duration_s >= 0.0)) throw DomainError("sweep duration must be non-negative");
    if (!(sweep_rate_hz > 0.0)) throw DomainError("sweep rate must be positive");
    if (!(rabi_khz >= 0.0)) throw DomainError("Rabi frequency must be non-negative");
    cal.validate();
    if (duration_s == 0.0) return;

    const double lo = band_center_mhz(scheme, band) - 0.5 * span_mhz;
    const double hi = lo + span_mhz;
    // Each up or down pass crosses a resonance in (jitter width) / (chirp speed).
    const double passes = 2.0 * duration_s * sweep_rate_hz;
    const double chirp_mhz_per_s = 2.0 * span_mhz * sweep_rate_hz;
    const double dwell_s = cal.jitter_fwhm_khz * 1e-3 / chirp_mhz_per_s;
    const double rabi_ratio = rabi_khz / cal.reference_rabi_khz;
    const double base = cal.sweep_efficiency * cal.rate_per_s * rabi_ratio * rabi_ratio * dwell_s;
    const double leak = -std::expm1(-cal.depolarization_rate_per_s / (2.0 * sweep_rate_hz));
    const LevelVector thermal = boltzmann_occupancies(
        scheme, grid.temperature_k > 0.0 ? grid.temperature_k : 1.5);

    std::vector<std::vector<Transition>> transitions(kLevelCount);
    for (int l = 0; l < kLevelCount; ++l) {
        transitions[l] = transitions_from(scheme, SpinProjection::from_index(l));
    }
    const BranchingTable branching = branching_table(scheme);
    const long whole = static_cast<long>(std::floor(passes));
    const double partial = passes - static_cast<double>(whole);

    using Matrix8 = Eigen::Matrix<double, kLevelCount, kLevelCount>;
    auto pass_matrix = [&](const std::array<LevelVector, kLevelCount>& exposure, double scale) {
        Matrix8 m;
        for (int col = 0; col < kLevelCount; ++col) {
            LevelVector unit{};
            unit[col] = 1.0;
            std::array<LevelVector, kLevelCount> scaled = exposure;
            for (auto& row : scaled) {
                for (double& x : row) x *= scale;
            }
            pump_class(unit, scaled, branching, cal.saturation_cap, cal.repump_overlap);
            const double keep = 1.0 - leak * scale;
            double sum = 0.0;
            for (double v : unit) sum += v;
            for (int r = 0; r < kLevelCount; ++r) {
                m(r, col) = keep * unit[r] + (1.0 - keep) * sum * thermal[r];
            }
        }
        return m;
    };

    const auto centers = grid.centers();
    const auto widths = grid.widths();
    for (std::size_t bin = 0; bin < grid.size(); ++bin) {
        std::array<LevelVector, kLevelCount> exposure{};
        bool driven = false;
        const double b_lo = centers[bin] - 0.5 * widths[bin];
        const double b_hi = centers[bin] + 0.5 * widths[bin];
        for (int l = 0; l < kLevelCount; ++l) {
            for (const auto& tr : transitions[l]) {
                // fraction of this class bin whose resonance falls inside the span
                const double f_lo = tr.center_frequency_mhz + b_lo;
                const double f_hi = tr.center_frequency_mhz + b_hi;
                const double overlap = std::min(f_hi, hi) - std::max(f_lo, lo);
                if (overlap <= 0.0) continue;
                const double coverage = overlap / (f_hi - f_lo);
                exposure[l][tr.e_level.index()] += base * tr.strength * coverage;
                driven = true;
            }
        }
        if (!driven && leak == 0.0) continue;

        Matrix8 total = Matrix8::Identity();
        if (whole > 0) {
            Matrix8 power = pass_matrix(exposure, 1.0);
            for (long n = whole; n > 0; n >>= 1) {
                if (n & 1) total = power * total;
                if (n > 1) power = power * power;
            }
        }
        if (partial > 0.0) total = pass_matrix(exposure, partial) * total;

        LevelVector& pop = grid.at(bin);
        Eigen::Map<Eigen::Matrix<double, kLevelCount, 1>> v(pop.data());
        const double before = v.sum();
        v = (total * v).eval();
        for (double& x : pop) x = std::max(x, 0.0);
        // Renormalize away round-off from repeated squaring.
        const double after = v.sum();
        if (after > 0.0) v *= before / after;
    }
}

}  // namespace afcsim
