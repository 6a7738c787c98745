#include "afcsim/hyperfine.hpp"

#include "afcsim/error.hpp"
#include "afcsim/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace afcsim {

namespace {

constexpr double kLn2 = std::numbers::ln2;

double gaussian_density(double x, double fwhm) {
    const double sigma = fwhm / (2.0 * std::sqrt(2.0 * kLn2));
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

double lorentzian_density(double x, double fwhm) {
    const double hwhm = 0.5 * fwhm;
    return hwhm / (std::numbers::pi * (x * x + hwhm * hwhm));
}

int band_index(int delta_mi) { return delta_mi + 2; }

}  // namespace

SpinProjection SpinProjection::parse(std::string_view text) {
    std::string s = kv::trim(text);
    int sign = 1;
    std::size_t pos = 0;
    if (!s.empty() && (s[0] == '+' || s[0] == '-')) {
        sign = s[0] == '-' ? -1 : 1;
        pos = 1;
    }
    const std::size_t slash = s.find('/', pos);
    int numerator = 0;
    bool ok = slash != std::string::npos && s.substr(slash + 1) == "2";
    if (ok) {
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + slash, numerator);
        ok = ec == std::errc() && ptr == s.data() + slash && numerator % 2 == 1 && numerator <= 7;
    }
    if (!ok) throw DomainError("invalid m_I value '" + s + "' (expected e.g. -7/2 ... +7/2)");
    return from_value(sign * numerator / 2.0);
}

SpinProjection SpinProjection::from_value(double m) {
    const double idx = m + kNuclearSpin;
    const int i = static_cast<int>(std::lround(idx));
    if (std::abs(idx - i) > 1e-9 || i < 0 || i >= kLevelCount) {
        throw DomainError("m_I value out of range for I = 7/2");
    }
    return from_index(i);
}

std::string SpinProjection::to_string() const {
    const int twice = 2 * index_ - 7;
    return (twice > 0 ? "+" : "-") + std::to_string(std::abs(twice)) + "/2";
}

double OpticalLine::density(double delta_mhz) const {
    const double x = delta_mhz - center_mhz;
    return (1.0 - wing_weight) * gaussian_density(x, core_fwhm_mhz) +
           wing_weight * lorentzian_density(x, wing_fwhm_mhz);
}

bool is_supported_band(int delta_mi) { return delta_mi >= -2 && delta_mi <= 1; }

Eigen::Matrix<double, kLevelCount, kLevelCount> mixing_strengths(double mixing) {
    Eigen::Matrix<double, kLevelCount, kLevelCount> s =
        Eigen::Matrix<double, kLevelCount, kLevelCount>::Zero();
    for (int g = 0; g < kLevelCount; ++g) {
        const double m_g = g - kNuclearSpin;
        const double weight = (kNuclearSpin - m_g + 1.0) / (2.0 * kNuclearSpin + 1.0);
        for (int e = 0; e < kLevelCount; ++e) {
            switch (std::abs(e - g)) {
                case 0: s(g, e) = 1.0; break;
                case 1: s(g, e) = mixing * weight; break;
                case 2: s(g, e) = mixing * mixing * weight; break;
                default: break;
            }
        }
    }
    return s;
}

LevelScheme LevelScheme::defaults() {
    LevelScheme s;
    s.ground_splittings_mhz = {997.0, 965.0, 935.0, 910.0, 890.0, 875.0, 865.0};
    // DmI = 0 line positions: -7/2 at 0, -5/2 at -4.5 MHz, then rising with m_I(g).
    constexpr std::array<double, kLevelCount> dm0_positions = {0.0,  -4.5,  28.0,  58.0,
                                                               88.0, 118.0, 148.0, 178.0};
    for (int k = 0; k < kLevelCount - 1; ++k) {
        s.excited_splittings_mhz[k] =
            s.ground_splittings_mhz[k] + dm0_positions[k + 1] - dm0_positions[k];
    }
    s.band_offsets_mhz = {0.0, 0.0, 0.0, 0.0};
    s.osc_strengths = mixing_strengths(0.30);
    s.optical_line = OpticalLine{-12.69, 39.75, 301.7, 0.2324};
    s.i0_line_mhz = -37.71;
    return s;
}

void LevelScheme::validate() const {
    for (double v : ground_splittings_mhz) {
        if (!(v > 0.0)) throw DomainError("ground splittings must be strictly positive");
    }
    for (double v : excited_splittings_mhz) {
        if (!(v > 0.0)) throw DomainError("excited splittings must be strictly positive");
    }
    for (int g = 0; g < kLevelCount; ++g) {
        bool any = false;
        for (int e = 0; e < kLevelCount; ++e) {
            const double v = osc_strengths(g, e);
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw DomainError("oscillator strengths must be finite and non-negative");
            }
            any = any || v > 0.0;
        }
        if (!any) throw DomainError("every ground level needs at least one non-zero strength");
    }
    // |DmI| > 0 strengths must not decrease toward lower m_I(g).
    for (int delta : {-2, -1, 1, 2}) {
        double previous = -1.0;
        for (int g = kLevelCount - 1; g >= 0; --g) {
            const int e = g + delta;
            if (e < 0 || e >= kLevelCount) continue;
            const double v = osc_strengths(g, e);
            if (previous >= 0.0 && v < previous - 1e-12) {
                throw DomainError("|DmI| > 0 oscillator strengths must be non-decreasing as "
                                  "m_I(g) decreases");
            }
            previous = v;
        }
    }
    if (!(i0_fraction >= 0.0 && i0_fraction < 1.0)) {
        throw DomainError("i0_fraction must lie in [0, 1)");
    }
    if (!(hyperfine_inhomog_fwhm_khz >= 0.0)) {
        throw DomainError("hyperfine inhomogeneous width must be non-negative");
    }
    if (!(excited_lifetime_s > 0.0)) throw DomainError("excited lifetime must be positive");
    if (!(peak_feature_db > 0.0)) throw DomainError("peak feature absorption must be positive");
    if (!(optical_line.core_fwhm_mhz > 0.0) || !(optical_line.wing_fwhm_mhz > 0.0) ||
        !(optical_line.wing_weight >= 0.0 && optical_line.wing_weight <= 1.0)) {
        throw DomainError("optical line widths must be positive and wing weight in [0, 1]");
    }
}

double LevelScheme::band_offset(int delta_mi) const {
    if (!is_supported_band(delta_mi)) {
        throw DomainError("unknown band DmI = " + std::to_string(delta_mi) +
                          " (supported: -2, -1, 0, +1)");
    }
    return band_offsets_mhz[band_index(delta_mi)];
}

double LevelScheme::ground_energy_mhz(SpinProjection g) const {
    double e = 0.0;
    for (int k = 0; k < g.index(); ++k) e += ground_splittings_mhz[k];
    return e;
}

double LevelScheme::excited_energy_mhz(SpinProjection e) const {
    double v = 0.0;
    for (int k = 0; k < e.index(); ++k) v += excited_splittings_mhz[k];
    return v;
}

double transition_frequency(const LevelScheme& scheme, SpinProjection g, SpinProjection e) {
    const int delta = e.index() - g.index();
    return scheme.band_offset(delta) + scheme.excited_energy_mhz(e) - scheme.ground_energy_mhz(g);
}

Transition make_transition(const LevelScheme& scheme, SpinProjection g, SpinProjection e) {
    Transition t;
    t.g_level = g;
    t.e_level = e;
    t.delta_mi = e.index() - g.index();
    t.center_frequency_mhz = transition_frequency(scheme, g, e);
    t.strength = scheme.strength(g, e);
    return t;
}

Transition parse_transition(const LevelScheme& scheme, std::string_view text) {
    const std::size_t arrow = text.find("->");
    if (arrow == std::string_view::npos) {
        throw DomainError("transition must be written as '<m_g> -> <m_e>', got '" +
                          std::string(text) + "'");
    }
    const SpinProjection g = SpinProjection::parse(text.substr(0, arrow));
    const SpinProjection e = SpinProjection::parse(text.substr(arrow + 2));
    return make_transition(scheme, g, e);
}

std::vector<Transition> transitions_from(const LevelScheme& scheme, SpinProjection g) {
    std::vector<Transition> out;
    for (int delta : kBands) {
        const int e = g.index() + delta;
        if (e < 0 || e >= kLevelCount) continue;
        if (scheme.osc_strengths(g.index(), e) <= 0.0) continue;
        out.push_back(make_transition(scheme, g, SpinProjection::from_index(e)));
    }
    return out;
}

std::array<double, kLevelCount> branching_ratios(const LevelScheme& scheme, SpinProjection e) {
    std::array<double, kLevelCount> out{};
    double sum = 0.0;
    for (int g = 0; g < kLevelCount; ++g) {
        if (std::abs(e.index() - g) > 2) continue;
        out[g] = scheme.osc_strengths(g, e.index());
        sum += out[g];
    }
    if (sum <= 0.0) {
        // A dark excited level cannot be populated optically; it decays to its
        // DmI = 0 partner.
        out.fill(0.0);
        out[e.index()] = 1.0;
        return out;
    }
    for (double& v : out) v /= sum;
    return out;
}

double polarized_background(const LevelScheme& scheme, double nu_mhz) {
    const auto& line = scheme.optical_line;
    double total = 0.0;
    for (const auto& t : transitions_from(scheme, SpinProjection::from_index(kLevelCount - 1))) {
        total += t.strength * line.density(nu_mhz - t.center_frequency_mhz);
    }
    total += i0_line_weight(scheme) * line.density(nu_mhz - scheme.i0_line_mhz);
    return total;
}

double i0_line_weight(const LevelScheme& scheme) {
    const SpinProjection low = SpinProjection::from_index(0);
    return scheme.i0_fraction / (1.0 - scheme.i0_fraction) * scheme.strength(low, low);
}

std::vector<LambdaSystem> lambda_catalog(const LevelScheme& scheme) {
    const SpinProjection memory = SpinProjection::from_index(0);
    std::vector<LambdaSystem> out;
    for (int storage_delta : {0, 1}) {
        const int e = memory.index() + storage_delta;
        const int control_g = e + 1;  // control on DmI = -1 into the same excited level
        if (control_g >= kLevelCount) continue;
        LambdaSystem sys;
        sys.shared_excited = SpinProjection::from_index(e);
        sys.storage = make_transition(scheme, memory, sys.shared_excited);
        sys.control =
            make_transition(scheme, SpinProjection::from_index(control_g), sys.shared_excited);
        if (sys.storage.strength <= 0.0 || sys.control.strength <= 0.0) continue;
        out.push_back(sys);
    }
    if (out.empty()) return out;
    const double ref_strength = out.front().storage.strength;
    const double ref_background =
        polarized_background(scheme, out.front().storage.center_frequency_mhz);
    for (auto& sys : out) {
        sys.rel_peak_strength = sys.storage.strength / ref_strength;
        sys.rel_background =
            polarized_background(scheme, sys.storage.center_frequency_mhz) / ref_background;
    }
    return out;
}

LevelScheme parse_level_scheme(std::string_view text, const std::string& source) {
    using kv::Dimension;
    const kv::Document doc = kv::parse(text, source);
    LevelScheme s = LevelScheme::defaults();
    const kv::Section& root = doc.root;

    auto read_splittings = [&](std::string_view key, std::array<double, kLevelCount - 1>& out) {
        if (!root.has(key)) return;
        const auto values = root.get_numbers(key, Dimension::frequency);
        if (values.size() != out.size()) {
            root.fail(key, "expected " + std::to_string(out.size()) + " values, got " +
                               std::to_string(values.size()));
        }
        std::copy(values.begin(), values.end(), out.begin());
    };
    read_splittings("ground_splittings", s.ground_splittings_mhz);
    read_splittings("excited_splittings", s.excited_splittings_mhz);
    if (root.has("band_offsets")) {
        const auto values = root.get_numbers("band_offsets", Dimension::frequency);
        if (values.size() != 4) root.fail("band_offsets", "expected 4 values (DmI = -2, -1, 0, +1)");
        std::copy(values.begin(), values.end(), s.band_offsets_mhz.begin());
    }
    if (root.has("mixing")) s.osc_strengths = mixing_strengths(root.get_number("mixing"));
    s.i0_fraction = root.get_number_or("i0_fraction", s.i0_fraction);
    s.hyperfine_inhomog_fwhm_khz =
        root.get_number_or("hyperfine_inhomog_fwhm", s.hyperfine_inhomog_fwhm_khz * 1e-3,
                           Dimension::frequency) *
        1e3;
    s.excited_lifetime_s = root.get_number_or("excited_lifetime", s.excited_lifetime_s, Dimension::time);
    s.peak_feature_db = root.get_number_or("peak_feature", s.peak_feature_db, Dimension::attenuation);
    s.i0_line_mhz = root.get_number_or("i0_line", s.i0_line_mhz, Dimension::frequency);
    root.reject_unknown();

    for (const auto& section : doc.sections) {
        if (section.name() == "optical_line") {
            auto& line = s.optical_line;
            line.center_mhz = section.get_number_or("center", line.center_mhz, Dimension::frequency);
            line.core_fwhm_mhz =
                section.get_number_or("core_fwhm", line.core_fwhm_mhz, Dimension::frequency);
            line.wing_fwhm_mhz =
                section.get_number_or("wing_fwhm", line.wing_fwhm_mhz, Dimension::frequency);
            line.wing_weight = section.get_number_or("wing_weight", line.wing_weight);
        } else if (section.name() == "osc_strengths") {
            for (int g = 0; g < kLevelCount; ++g) {
                const std::string key = "g" + std::to_string(g);
                if (!section.has(key)) continue;
                const auto row = section.get_numbers(key);
                if (row.size() != kLevelCount) section.fail(key, "expected 8 strengths");
                for (int e = 0; e < kLevelCount; ++e) s.osc_strengths(g, e) = row[e];
            }
        } else {
            throw ConfigError("unknown section [" + section.name() + "]", section.line(), 1, source);
        }
        section.reject_unknown();
    }
    try {
        s.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what(), 0, 0, source);
    }
    return s;
}

LevelScheme load_level_scheme(const std::string& path) {
    return parse_level_scheme(kv::read_file(path), path);
}

}  // namespace afcsim
