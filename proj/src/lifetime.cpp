#include "afcsim/lifetime.hpp"

#include "afcsim/error.hpp"

#include <algorithm>
#include <functional>

namespace afcsim {

namespace {

void check_probe(const DecayProbe& probe) {
    if (probe.samples < 3) throw DomainError("decay trace needs at least 3 samples");
    if (!(probe.interval_s > 0.0)) throw DomainError("decay interval must be positive");
    probe.window.validate();
}

DecayTrace run(SpectralPopulationGrid& grid, const LevelScheme& scheme,
               const RelaxationRates& rates, const DecayProbe& probe,
               const std::function<double(const AbsorptionSpectrum&)>& height) {
    check_probe(probe);
    DecayTrace trace;
    std::vector<DecaySample> samples;
    for (int k = 0; k < probe.samples; ++k) {
        if (k > 0) relax(grid, scheme, probe.interval_s, rates);
        const AbsorptionSpectrum sp = synthesize(grid, scheme, probe.window);
        const double t = k * probe.interval_s;
        trace.t_s.push_back(t);
        trace.feature_db.push_back(height(sp));
        trace.antihole_db.push_back(sp.absorption_at(probe.antihole_center_mhz));
        samples.push_back({t, trace.feature_db.back()});
    }
    trace.fit = fit_exponential_lifetime(samples);
    return trace;
}

}  // namespace

bool DecayTrace::antihole_rises_then_falls() const {
    if (antihole_db.size() < 3) return false;
    const auto peak = std::max_element(antihole_db.begin(), antihole_db.end());
    return peak != antihole_db.begin() && peak != antihole_db.end() - 1 &&
           *peak > antihole_db.front() && *peak > antihole_db.back();
}

DecayTrace track_decay(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                       const RelaxationRates& rates, const DecayProbe& probe) {
    const double c = probe.feature_center_mhz;
    const double off = probe.reference_offset_mhz;
    return run(grid, scheme, rates, probe, [c, off](const AbsorptionSpectrum& sp) {
        return sp.absorption_at(c) - 0.5 * (sp.absorption_at(c - off) + sp.absorption_at(c + off));
    });
}

DecayTrace track_hole_decay(SpectralPopulationGrid& grid, const LevelScheme& scheme,
                            const RelaxationRates& rates, const AbsorptionSpectrum& reference,
                            const DecayProbe& probe) {
    const double c = probe.feature_center_mhz;
    const double ref = reference.absorption_at(c);
    return run(grid, scheme, rates, probe,
               [c, ref](const AbsorptionSpectrum& sp) { return ref - sp.absorption_at(c); });
}

}  // namespace afcsim
