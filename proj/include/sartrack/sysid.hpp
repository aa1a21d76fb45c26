#ifndef SARTRACK_SYSID_HPP
#define SARTRACK_SYSID_HPP

// Per-axis system identification: excitation signals, first-order plant
// simulation and least-squares model fitting from input/output telemetry.

#include "sartrack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sartrack::sysid {

/// Uniformly sampled input/output log of one axis.
struct TelemetrySeries {
    double dt = 0.0;
    std::vector<double> inputs;
    std::vector<double> outputs;

    void validate() const
    {
        if (!(dt > 0.0) || !std::isfinite(dt)) {
            throw InvalidSeriesError("sample interval must be positive");
        }
        if (inputs.size() != outputs.size()) {
            throw InvalidSeriesError("inputs and outputs differ in length");
        }
        if (inputs.size() < 10) {
            throw InvalidSeriesError("series needs at least 10 samples");
        }
    }
};

/// v' = (K u - v) / tau
struct FirstOrderModel {
    double gain = 1.0;
    double tau = 1.0;

    bool valid() const { return tau > 0.0 && std::isfinite(tau) && std::isfinite(gain); }

    /// Per-sample pole of the zero-order-hold discretization.
    double pole(double dt) const { return std::exp(-dt / tau); }
};

struct FitReport {
    /// NRMSE fit; empty when the measured output is constant (zero denominator).
    std::optional<double> fit_percent;
    double residual_rms = 0.0;
};

enum class Pattern { step_train, square_wave };

/// Piecewise-constant excitation. square_wave alternates +a/-a each half
/// period, step_train alternates a/0. First and last samples are 0.
inline std::vector<double> generate_excitation(Pattern pattern, double amplitude, double period,
                                               double duration, double dt)
{
    if (!(dt > 0.0) || !(period > 0.0) || !(dt < period / 10.0)) {
        throw InvalidTimingError("sample interval must be positive and below period/10");
    }
    if (!(duration >= 2.0 * period)) {
        throw InvalidTimingError("duration must cover at least two periods");
    }
    const auto n = static_cast<std::size_t>(std::llround(duration / dt));
    const auto half = std::max<long long>(1, std::llround(period / (2.0 * dt)));
    const double low = pattern == Pattern::square_wave ? -amplitude : 0.0;

    std::vector<double> u(n);
    for (std::size_t k = 0; k < n; ++k) {
        u[k] = (static_cast<long long>(k) / half) % 2 == 0 ? amplitude : low;
    }
    if (n > 0) {
        u.front() = 0.0;
        u.back() = 0.0;
    }
    return u;
}

/// One zero-order-hold step; shared with the simulated plant so both produce identical traces.
inline double zoh_step(double pole, double gain, double v, double u) { return pole * v + gain * (1.0 - pole) * u; }

/// Exact ZOH response: v[0] = v0, v[k+1] = a v[k] + K (1 - a) u[k].
inline std::vector<double> simulate_model(const FirstOrderModel& model, std::span<const double> inputs, double dt,
                                          double v0 = 0.0)
{
    if (!(dt > 0.0)) {
        throw InvalidTimingError("dt must be positive");
    }
    std::vector<double> v(inputs.size());
    if (v.empty()) {
        return v;
    }
    const double a = model.pole(dt);
    v[0] = v0;
    for (std::size_t k = 0; k + 1 < inputs.size(); ++k) {
        v[k + 1] = zoh_step(a, model.gain, v[k], inputs[k]);
    }
    return v;
}

/// Full-simulation fit of a model against a recorded series:
/// fit% = 100 (1 - |v - v_hat| / |v - mean(v)|).
inline FitReport validate_fit(const FirstOrderModel& model, const TelemetrySeries& holdout)
{
    holdout.validate();
    const auto& v = holdout.outputs;
    const auto v_hat = simulate_model(model, holdout.inputs, holdout.dt, v.front());

    double residual_sq = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        residual_sq += (v[k] - v_hat[k]) * (v[k] - v_hat[k]);
    }
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double spread_sq = 0.0;
    for (double x : v) {
        spread_sq += (x - mean) * (x - mean);
    }

    FitReport report;
    report.residual_rms = std::sqrt(residual_sq / static_cast<double>(v.size()));
    // the mean of a constant series can round away from its value, so test constancy directly
    const bool constant = std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    if (!constant && spread_sq > 0.0) {
        report.fit_percent = residual_sq == 0.0 ? 100.0 : 100.0 * (1.0 - std::sqrt(residual_sq / spread_sq));
    }
    return report;
}

namespace detail {

// Solves the 2x2 system [[a b] [c d]] x = [e f]; empty if (near) singular.
inline std::optional<std::pair<double, double>> solve2(double a, double b, double c, double d, double e, double f)
{
    const double det = a * d - b * c;
    const double scale = std::abs(a * d) + std::abs(b * c);
    if (!(scale > 0.0) || std::abs(det) <= 1e-12 * scale) {
        return std::nullopt;
    }
    return std::pair{(e * d - b * f) / det, (a * f - e * c) / det};
}

inline FirstOrderModel to_model(double a, double b, double dt)
{
    if (!(a > 0.0 && a < 1.0) || !std::isfinite(b)) {
        throw UnstableEstimateError("fitted pole " + std::to_string(a) + " outside (0, 1)");
    }
    return {b / (1.0 - a), -dt / std::log(a)};
}

} // namespace detail

/// Instrumental-variable refinement passes applied after the initial least-squares estimate.
inline constexpr int iv_passes = 3;

/// Fits v[k+1] = a v[k] + b u[k], then K = b / (1 - a), tau = -dt / ln(a).
///
/// The first estimate is ordinary least squares on the one-step-ahead
/// equation. Measurement noise on v[k] biases that estimate towards a
/// faster pole, so it is refined by instrumental variables: the regressor
/// v[k] is instrumented by the noise-free simulated output of the current
/// estimate, which is correlated with v[k] but not with its noise. On
/// noise-free data every pass returns the least-squares solution unchanged.
inline std::pair<FirstOrderModel, FitReport> fit_first_order(const TelemetrySeries& series)
{
    series.validate();
    const auto& u = series.inputs;
    const auto& v = series.outputs;
    const auto [u_lo, u_hi] = std::minmax_element(u.begin(), u.end());
    if (*u_lo == *u_hi) {
        throw InsufficientExcitationError("input signal is constant; the plant pole is not excited");
    }

    const std::size_t n = v.size() - 1;
    double svv = 0.0, svu = 0.0, suu = 0.0, svy = 0.0, suy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        svv += v[k] * v[k];
        svu += v[k] * u[k];
        suu += u[k] * u[k];
        svy += v[k] * v[k + 1];
        suy += u[k] * v[k + 1];
    }
    auto solution = detail::solve2(svv, svu, svu, suu, svy, suy);
    if (!solution) {
        throw InsufficientExcitationError("regressors are collinear; the plant pole is not excited");
    }
    double a = solution->first;
    double b = solution->second;
    auto model = detail::to_model(a, b, series.dt);

    for (int pass = 0; pass < iv_passes; ++pass) {
        const auto x = simulate_model(model, u, series.dt, v.front());
        double zv = 0.0, zu = 0.0, uv = 0.0, uu = 0.0, zy = 0.0, uy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            zv += x[k] * v[k];
            zu += x[k] * u[k];
            uv += u[k] * v[k];
            uu += u[k] * u[k];
            zy += x[k] * v[k + 1];
            uy += u[k] * v[k + 1];
        }
        auto refined = detail::solve2(zv, zu, uv, uu, zy, uy);
        if (!refined) {
            break;
        }
        a = refined->first;
        b = refined->second;
        model = detail::to_model(a, b, series.dt);
    }

    return {model, validate_fit(model, series)};
}

} // namespace sartrack::sysid

#endif // SARTRACK_SYSID_HPP
