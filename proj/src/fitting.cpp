#include "afcsim/fitting.hpp"

#include "afcsim/error.hpp"

#include <Eigen/Core>
#include <Eigen/LU>
#include <unsupported/Eigen/NonLinearOptimization>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace afcsim {

namespace {

struct DecayFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    std::span<const DecaySample> samples;

    int inputs() const { return 2; }
    int values() const { return static_cast<int>(samples.size()); }

    // x = (A, rate)
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            f(i) = x(0) * std::exp(-x(1) * samples[i].t_s) - samples[i].amplitude;
        }
        return 0;
    }
    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const double e = std::exp(-x(1) * samples[i].t_s);
            j(i, 0) = e;
            j(i, 1) = -x(0) * samples[i].t_s * e;
        }
        return 0;
    }
};

constexpr double kFourLn2 = 4.0 * std::numbers::ln2;

struct GaussianFunctor {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    std::span<const double> x;
    std::span<const double> y;

    int inputs() const { return 4; }
    int values() const { return static_cast<int>(x.size()); }

    // p = (peak, center, fwhm, background)
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& f) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - p(1)) / p(2);
            f(i) = p(3) + p(0) * std::exp(-kFourLn2 * u * u) - y[i];
        }
        return 0;
    }
    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double u = (x[i] - p(1)) / p(2);
            const double g = std::exp(-kFourLn2 * u * u);
            j(i, 0) = g;
            j(i, 1) = p(0) * g * 2.0 * kFourLn2 * u / p(2);
            j(i, 2) = p(0) * g * 2.0 * kFourLn2 * u * u / p(2);
            j(i, 3) = 1.0;
        }
        return 0;
    }
};

}  // namespace

LifetimeFit fit_exponential_lifetime(std::span<const DecaySample> samples) {
    if (samples.size() < 3) throw DomainError("lifetime fit needs at least 3 samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!(samples[i].t_s >= 0.0) || !std::isfinite(samples[i].amplitude)) {
            throw DomainError("sample times must be non-negative and amplitudes finite");
        }
        if (i > 0 && !(samples[i].t_s > samples[i - 1].t_s)) {
            throw DomainError("sample times must be strictly increasing");
        }
    }
    const auto [lo, hi] = std::minmax_element(
        samples.begin(), samples.end(),
        [](const DecaySample& a, const DecaySample& b) { return a.amplitude < b.amplitude; });
    if (hi->amplitude <= 0.0) throw NumericError("decay data is non-positive");
    if (hi->amplitude - lo->amplitude <= 1e-12 * std::abs(hi->amplitude)) {
        throw NumericError("decay data is constant");
    }

    // Log-linear regression over the positive samples seeds the fit.
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    for (const auto& s : samples) {
        if (s.amplitude <= 0.0) continue;
        const double l = std::log(s.amplitude);
        sw += 1;
        st += s.t_s;
        sl += l;
        stt += s.t_s * s.t_s;
        stl += s.t_s * l;
    }
    if (sw < 2) throw NumericError("decay data has fewer than two positive samples");
    const double denom = sw * stt - st * st;
    double slope = denom != 0.0 ? (sw * stl - st * sl) / denom : 0.0;
    double intercept = (sl - slope * st) / sw;
    if (!(slope < 0.0)) slope = -1.0 / (samples.back().t_s - samples.front().t_s + 1.0);

    Eigen::VectorXd x(2);
    x << std::exp(intercept), -slope;
    DecayFunctor functor{samples};
    Eigen::LevenbergMarquardt<DecayFunctor> lm(functor);
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    lm.parameters.maxfev = 2000;
    lm.minimize(x);

    if (!(x(1) > 0.0) || !std::isfinite(x(1))) throw NumericError("decay data is not decaying");

    Eigen::VectorXd residual(samples.size());
    functor(x, residual);
    Eigen::MatrixXd jac(samples.size(), 2);
    functor.df(x, jac);
    const double dof = static_cast<double>(samples.size()) - 2.0;
    const double sigma2 = residual.squaredNorm() / std::max(dof, 1.0);
    const Eigen::Matrix2d cov = (jac.transpose() * jac).inverse() * sigma2;
    const double rate = x(1);
    LifetimeFit fit;
    fit.amplitude = x(0);
    fit.lifetime_s = 1.0 / rate;
    fit.lifetime_stderr_s = std::sqrt(std::max(cov(1, 1), 0.0)) / (rate * rate);
    return fit;
}

GaussianFit fit_gaussian_on_background(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 5) {
        throw DomainError("Gaussian fit needs at least 5 matching samples");
    }
    const auto imax = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    const double ymin = *std::min_element(y.begin(), y.end());
    const double half = 0.5 * (y[imax] + ymin);
    std::size_t l = imax;
    std::size_t r = imax;
    while (l > 0 && y[l] > half) --l;
    while (r + 1 < y.size() && y[r] > half) ++r;
    double width = x[r] - x[l];
    if (!(width > 0.0)) width = (x.back() - x.front()) / 4.0;

    Eigen::VectorXd p(4);
    p << y[imax] - ymin, x[imax], width, ymin;
    GaussianFunctor functor{x, y};
    Eigen::LevenbergMarquardt<GaussianFunctor> lm(functor);
    lm.parameters.xtol = 1e-12;
    lm.parameters.ftol = 1e-12;
    lm.parameters.maxfev = 4000;
    lm.minimize(p);

    Eigen::VectorXd residual(x.size());
    functor(p, residual);
    GaussianFit fit;
    fit.peak = p(0);
    fit.center = p(1);
    fit.fwhm = std::abs(p(2));
    fit.background = p(3);
    fit.residual_rms = std::sqrt(residual.squaredNorm() / static_cast<double>(x.size()));
    return fit;
}

}  // namespace afcsim
