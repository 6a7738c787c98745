#include "afcsim/noise.hpp"

#include "afcsim/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace afcsim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Quadrature samples with cached trigonometry of their phases.
struct Trig {
    std::vector<double> c;
    std::vector<double> s;
    const std::vector<double>* v;
};

// Residual variance about the least-squares fit v = a cos + b sin + k over
// the given event indices.
double residual_variance(const Trig& q, const std::vector<std::size_t>& idx,
                         Eigen::Vector3d* coef_out = nullptr) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atb = Eigen::Vector3d::Zero();
    for (std::size_t i : idx) {
        const Eigen::Vector3d row(q.c[i], q.s[i], 1.0);
        ata.noalias() += row * row.transpose();
        atb.noalias() += row * (*q.v)[i];
    }
    const Eigen::Vector3d coef = ata.ldlt().solve(atb);
    if (!coef.allFinite()) throw NumericError("quadrature sinusoid fit is singular");
    if (coef_out) *coef_out = coef;
    // compensated sum
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i : idx) {
        const double r = (*q.v)[i] - coef(0) * q.c[i] - coef(1) * q.s[i] - coef(2);
        const double y = r * r - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(idx.size() - 3);
}

}  // namespace

double transmission_from_db(double loss_db) {
    if (!(loss_db >= 0.0)) throw DomainError("loss must be non-negative");
    return std::pow(10.0, -loss_db / 10.0);
}

void StorageRun::validate() const {
    if (n_events < 1) throw DomainError("n_events must be at least 1");
    if (!(mean_photons_at_crystal >= 0.0)) throw DomainError("mean photon number must be >= 0");
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("efficiency must lie in [0, 1]");
    if (!(collection_loss_db >= 0.0)) throw DomainError("collection loss must be non-negative");
    if (!(phase_jitter_rad >= 0.0)) throw DomainError("phase jitter must be non-negative");
}

std::pair<QuadratureSamples, QuadratureSamples> simulate_storage_events(const StorageRun& run,
                                                                        double added_noise) {
    run.validate();
    if (!(added_noise >= 0.0)) throw DomainError("added noise must be non-negative");
    std::mt19937_64 rng(run.rng_seed);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double t_loss = transmission_from_db(run.collection_loss_db);
    // heterodyne: each quadrature carries sqrt(2 n) cos(theta) at unit vacuum variance
    const double input_amp = std::sqrt(2.0 * run.mean_photons_at_crystal * t_loss);
    const double echo_amp = std::sqrt(run.efficiency) * input_amp;
    const double echo_sigma = std::sqrt(1.0 + added_noise);

    QuadratureSamples input;
    QuadratureSamples echo;
    const auto n = static_cast<std::size_t>(run.n_events);
    input.phases.resize(n);
    input.values.resize(n);
    echo.phases.resize(n);
    echo.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double theta = phase(rng);
        const double error = run.phase_jitter_rad > 0.0 ? run.phase_jitter_rad * normal(rng) : 0.0;
        input.phases[i] = theta;
        input.values[i] = input_amp * std::cos(theta + error) + normal(rng);
        echo.phases[i] = theta;
        echo.values[i] = echo_amp * std::cos(theta + error) + echo_sigma * normal(rng);
    }
    return {std::move(input), std::move(echo)};
}

AddedVariance added_variance(const QuadratureSamples& samples, int phase_bins, int bootstrap_rounds,
                             std::uint64_t bootstrap_seed) {
    const std::size_t n = samples.size();
    if (n < 100 || samples.phases.size() != n) {
        throw DomainError("added variance needs at least 100 phase-tagged samples");
    }
    if (phase_bins < 1 || bootstrap_rounds < 20) throw DomainError("invalid estimator settings");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(samples.values[i]) || !(samples.phases[i] >= 0.0 && samples.phases[i] < kTwoPi)) {
            throw DomainError("quadrature samples must be finite with phases in [0, 2 pi)");
        }
    }

    Trig trig{std::vector<double>(n), std::vector<double>(n), &samples.values};
    for (std::size_t i = 0; i < n; ++i) {
        trig.c[i] = std::cos(samples.phases[i]);
        trig.s[i] = std::sin(samples.phases[i]);
    }

    AddedVariance out;
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    Eigen::Vector3d coef;
    out.estimate = residual_variance(trig, all, &coef) - 1.0;
    out.amplitude = std::hypot(coef(0), coef(1));

    // per-bin residual variances (reported; pooled equals the global residual variance)
    std::vector<double> sum(static_cast<std::size_t>(phase_bins), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(phase_bins), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = samples.phases[i];
        const double r = samples.values[i] - coef(0) * trig.c[i] - coef(1) * trig.s[i] - coef(2);
        const auto b = std::min(static_cast<std::size_t>(phi / kTwoPi * phase_bins),
                                static_cast<std::size_t>(phase_bins - 1));
        sum[b] += r * r;
        ++count[b];
    }
    out.bin_variance.resize(static_cast<std::size_t>(phase_bins));
    for (std::size_t b = 0; b < sum.size(); ++b) {
        out.bin_variance[b] = count[b] > 0 ? sum[b] / static_cast<double>(count[b]) : 0.0;
    }

    std::mt19937_64 rng(bootstrap_seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> estimates(static_cast<std::size_t>(bootstrap_rounds));
    std::vector<std::size_t> idx(n);
    for (auto& e : estimates) {
        for (auto& i : idx) i = pick(rng);
        e = residual_variance(trig, idx) - 1.0;
    }
    std::sort(estimates.begin(), estimates.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(estimates.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, estimates.size() - 1);
        return estimates[lo] + (pos - static_cast<double>(lo)) * (estimates[hi] - estimates[lo]);
    };
    out.ci_low = quantile(0.025);
    out.ci_high = quantile(0.975);
    return out;
}

double classical_bound(double efficiency) {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw DomainError("efficiency must lie in [0, 1]");
    return 2.0 * efficiency;
}

bool beats_classical_bound(double added_variance_upper, double efficiency) {
    return added_variance_upper < classical_bound(efficiency);
}

double calibrate_photon_number(double detected_mean_photons, double loss_db) {
    if (!(detected_mean_photons >= 0.0)) throw DomainError("detected photon number must be >= 0");
    return detected_mean_photons / transmission_from_db(loss_db);
}

}  // namespace afcsim
