#pragma once

// Resolved hyperfine level scheme of an I = 7/2 ion: ground/excited level
// energies, optical transition frequencies, relative oscillator strengths,
// excited-state branching and the catalog of spin-storage Lambda systems.
//
// Frequencies are MHz offsets from the DmI = 0 transition of the m_I = -7/2
// ground level for the reference ion class (delta = 0).

#include <Eigen/Core>

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace afcsim {

inline constexpr int kLevelCount = 8;
inline constexpr double kNuclearSpin = 3.5;

/// m_I value of a hyperfine level. Stored as an index 0..7 for m_I = -7/2..+7/2.
class SpinProjection {
public:
    constexpr SpinProjection() = default;

    static constexpr SpinProjection from_index(int index) { return SpinProjection(index); }
    /// Accepts "-7/2", "+3/2", "7/2" and friends. Throws DomainError otherwise.
    static SpinProjection parse(std::string_view text);
    static SpinProjection from_value(double m);

    constexpr int index() const noexcept { return index_; }
    constexpr double value() const noexcept { return index_ - kNuclearSpin; }
    std::string to_string() const;

    friend constexpr bool operator==(SpinProjection, SpinProjection) = default;

private:
    explicit constexpr SpinProjection(int index) : index_(index) {}
    int index_ = 0;
};

/// Inhomogeneous distribution of ion classes over optical detuning: a Gaussian
/// core with a Lorentzian wing component. Normalized to unit area.
struct OpticalLine {
    double center_mhz = 0.0;
    double core_fwhm_mhz = 30.0;
    double wing_fwhm_mhz = 200.0;
    double wing_weight = 0.0;

    double density(double delta_mhz) const;

    friend bool operator==(const OpticalLine&, const OpticalLine&) = default;
};

/// Bands are labelled by DmI = m_I(e) - m_I(g).
inline constexpr std::array<int, 4> kBands = {-2, -1, 0, 1};
bool is_supported_band(int delta_mi);

struct LevelScheme {
    std::array<double, kLevelCount - 1> ground_splittings_mhz{};
    std::array<double, kLevelCount - 1> excited_splittings_mhz{};
    std::array<double, 4> band_offsets_mhz{};  // DmI = -2, -1, 0, +1
    Eigen::Matrix<double, kLevelCount, kLevelCount> osc_strengths =
        Eigen::Matrix<double, kLevelCount, kLevelCount>::Zero();  // (g, e)
    double i0_fraction = 0.08;
    double hyperfine_inhomog_fwhm_khz = 130.0;
    double excited_lifetime_s = 10e-3;
    double peak_feature_db = 20.0;  // fully transferred -7/2 DmI=0 class reads this
    double i0_line_mhz = 0.0;       // I=0 isotope transition for class delta = 0
    OpticalLine optical_line;

    static LevelScheme defaults();

    /// Throws DomainError when an invariant is broken.
    void validate() const;

    double band_offset(int delta_mi) const;
    double ground_energy_mhz(SpinProjection g) const;
    double excited_energy_mhz(SpinProjection e) const;
    double strength(SpinProjection g, SpinProjection e) const {
        return osc_strengths(g.index(), e.index());
    }
};

/// Oscillator strengths built from one mixing coefficient: DmI = 0 entries are
/// 1, |DmI| = 1 entries mixing * w(m_g), |DmI| = 2 entries mixing^2 * w(m_g),
/// with w(m_g) = (I - m_g + 1) / (2I + 1) growing toward m_g = -7/2.
Eigen::Matrix<double, kLevelCount, kLevelCount> mixing_strengths(double mixing);

struct Transition {
    SpinProjection g_level;
    SpinProjection e_level;
    int delta_mi = 0;
    double center_frequency_mhz = 0.0;
    double strength = 0.0;
};

/// Frequency of g -> e for ion class delta = 0. Throws DomainError for a DmI
/// outside {-2, -1, 0, +1}.
double transition_frequency(const LevelScheme& scheme, SpinProjection g, SpinProjection e);
inline double transition_frequency(const LevelScheme& scheme, const Transition& t) {
    return transition_frequency(scheme, t.g_level, t.e_level);
}

Transition make_transition(const LevelScheme& scheme, SpinProjection g, SpinProjection e);

/// Parses "-5/2 -> -7/2" into a transition.
Transition parse_transition(const LevelScheme& scheme, std::string_view text);

/// All banded transitions out of ground level g with non-zero strength.
std::vector<Transition> transitions_from(const LevelScheme& scheme, SpinProjection g);

/// Decay distribution of excited level e over the ground levels.
std::array<double, kLevelCount> branching_ratios(const LevelScheme& scheme, SpinProjection e);

struct LambdaSystem {
    Transition storage;
    Transition control;
    SpinProjection shared_excited;
    double rel_peak_strength = 0.0;  // storage strength relative to option 1
    double rel_background = 0.0;     // polarized background relative to option 1
};

/// Absorption (arbitrary units) at optical frequency nu from a fully polarized
/// +7/2 bulk plus the I=0 isotope line; used to rank Lambda systems.
double polarized_background(const LevelScheme& scheme, double nu_mhz);

/// Weight of the I=0 isotope line relative to the 167Er class density, in the
/// units of the -7/2 DmI = 0 oscillator strength.
double i0_line_weight(const LevelScheme& scheme);

/// Lambda systems on the -7/2 memory level with a DmI = -1 control transition
/// and a DmI in {0, +1} storage transition, ordered by storage DmI.
std::vector<LambdaSystem> lambda_catalog(const LevelScheme& scheme);

LevelScheme parse_level_scheme(std::string_view text, const std::string& source = {});
LevelScheme load_level_scheme(const std::string& path);

}  // namespace afcsim
