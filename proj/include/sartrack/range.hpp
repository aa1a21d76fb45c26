#ifndef SARTRACK_RANGE_HPP
#define SARTRACK_RANGE_HPP

// Monocular range from body size: a quadratic in the shoulder-hip pixel
// distance, y = k1 x^2 + k2 x + k3 [cm], plus a guard that treats implausibly
// fast range changes as posture artifacts and holds forward motion.

#include "sartrack/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sartrack::range {

struct CalibrationSample {
    double x_px = 0.0;
    double y_cm = 0.0;
};

struct QuadraticCoefficients {
    double k1 = 0.0;
    double k2 = 0.0;
    double k3 = 0.0;

    double operator()(double x) const { return (k1 * x + k2) * x + k3; }
    double slope(double x) const { return 2.0 * k1 * x + k2; }
};

struct RangeCalibration {
    QuadraticCoefficients coeffs;
    double x_min = 0.0;
    double x_max = 0.0;
    double assumed_height_cm = 180.0;

    /// Strictly decreasing over [x_min, x_max]. The slope is linear in x, so
    /// checking both ends is exact.
    bool monotone_decreasing() const { return coeffs.slope(x_min) < 0.0 && coeffs.slope(x_max) < 0.0; }
};

inline constexpr double male_height_cm = 180.0;
inline constexpr double female_height_cm = 171.0;
inline constexpr double default_torso_ratio = 0.28;

/// Plain least-squares quadratic through the samples (no domain checks).
inline QuadraticCoefficients fit_quadratic(std::span<const CalibrationSample> samples)
{
    if (samples.size() < 3) {
        throw InsufficientSamplesError("a quadratic needs at least 3 samples");
    }
    // Work in t = x / scale to keep the normal equations well conditioned.
    double scale = 0.0;
    for (const auto& s : samples) {
        scale = std::max(scale, std::abs(s.x_px));
    }
    if (!(scale > 0.0)) {
        throw InsufficientSamplesError("sample pixel distances are all zero");
    }

    std::array<std::array<double, 4>, 3> m{}; // augmented [A^T A | A^T y], basis (t^2, t, 1)
    for (const auto& s : samples) {
        const double t = s.x_px / scale;
        const std::array<double, 3> row{t * t, t, 1.0};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                m[i][j] += row[i] * row[j];
            }
            m[i][3] += row[i] * s.y_cm;
        }
    }
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) {
                pivot = r;
            }
        }
        std::swap(m[col], m[pivot]);
        if (std::abs(m[col][col]) < 1e-14) {
            throw InsufficientSamplesError("samples do not determine a quadratic (too few distinct x)");
        }
        for (int r = 0; r < 3; ++r) {
            if (r == col) {
                continue;
            }
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    const double c2 = m[0][3] / m[0][0];
    const double c1 = m[1][3] / m[1][1];
    const double c0 = m[2][3] / m[2][2];
    return {c2 / (scale * scale), c1 / scale, c0};
}

/// Least-squares calibration over the sampled pixel domain.
/// Rejects fits that are not strictly decreasing on that domain.
inline RangeCalibration fit_calibration(std::span<const CalibrationSample> samples, double assumed_height_cm)
{
    if (samples.size() < 4) {
        throw InsufficientSamplesError("calibration needs at least 4 samples, got " + std::to_string(samples.size()));
    }
    double x_min = samples.front().x_px;
    double x_max = x_min;
    for (const auto& s : samples) {
        if (!(s.x_px > 0.0)) {
            throw InsufficientSamplesError("sample pixel distance must be positive");
        }
        if (!(s.y_cm >= 0.0 && s.y_cm <= 600.0)) {
            throw InsufficientSamplesError("sample range must lie in [0, 600] cm");
        }
        x_min = std::min(x_min, s.x_px);
        x_max = std::max(x_max, s.x_px);
    }
    if (x_max < 2.0 * x_min) {
        throw InsufficientSamplesError("sample pixel distances must span a ratio of at least 2");
    }

    RangeCalibration calib{fit_quadratic(samples), x_min, x_max, assumed_height_cm};
    if (!calib.monotone_decreasing()) {
        throw NonMonotoneFitError("fitted quadratic is not strictly decreasing on [" + std::to_string(x_min) + ", " +
                                  std::to_string(x_max) + "] px");
    }
    return calib;
}

struct RangeEstimate {
    double cm = 0.0;
    bool extrapolated = false;
};

/// Evaluates the calibration; inputs outside the fitted domain are clamped
/// to its edge and flagged.
inline RangeEstimate estimate_range(const RangeCalibration& calib, double x_px)
{
    const double x = std::clamp(x_px, calib.x_min, calib.x_max);
    return {calib.coeffs(x), x != x_px};
}

/// Pinhole prediction of the shoulder-hip pixel distance for a person of the
/// given height at the given forward depth.
inline double pinhole_pixel_distance(double focal_px, double height_cm, double torso_ratio, double range_cm)
{
    return focal_px * torso_ratio * height_cm / range_cm;
}

/// Calibration samples from the pinhole model at ranges [min_cm, max_cm] every step_cm.
inline std::vector<CalibrationSample> pinhole_samples(double focal_px, double height_cm, double torso_ratio,
                                                      double min_cm, double max_cm, double step_cm)
{
    std::vector<CalibrationSample> out;
    const auto n = static_cast<int>(std::floor((max_cm - min_cm) / step_cm + 1e-9));
    for (int i = 0; i <= n; ++i) {
        const double y = min_cm + i * step_cm;
        out.push_back({pinhole_pixel_distance(focal_px, height_cm, torso_ratio, y), y});
    }
    return out;
}

struct GuardState {
    double last_estimate_cm = 0.0;
    double last_time_s = 0.0;
    double hold_until_s = 0.0;
    bool initialized = false;
};

struct GuardConfig {
    double max_closing_speed_cm_s = 300.0;
    double hold_duration_s = 0.5;
};

struct GuardResult {
    double accepted_cm = 0.0;
    bool motion_hold = false;
    GuardState state;
};

/// Rejects estimates implying a closing speed above the limit: the last
/// accepted value is kept and forward motion is held for hold_duration_s.
inline GuardResult guard_range(const GuardState& guard, double new_estimate_cm, double now_s,
                               const GuardConfig& config = {})
{
    if (!guard.initialized) {
        return {new_estimate_cm, false, {new_estimate_cm, now_s, now_s, true}};
    }
    GuardState next = guard;
    const double elapsed = now_s - guard.last_time_s;
    const double speed = elapsed > 0.0 ? std::abs(new_estimate_cm - guard.last_estimate_cm) / elapsed
                                       : (new_estimate_cm == guard.last_estimate_cm ? 0.0 : INFINITY);
    if (speed > config.max_closing_speed_cm_s) {
        next.hold_until_s = std::max(guard.hold_until_s, now_s + config.hold_duration_s);
        return {guard.last_estimate_cm, true, next};
    }
    next.last_estimate_cm = new_estimate_cm;
    next.last_time_s = now_s;
    return {new_estimate_cm, now_s < guard.hold_until_s, next};
}

} // namespace sartrack::range

#endif // SARTRACK_RANGE_HPP
