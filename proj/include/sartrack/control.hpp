#ifndef SARTRACK_CONTROL_HPP
#define SARTRACK_CONTROL_HPP

#include "sartrack/errors.hpp"
#include "sartrack/geometry.hpp"
#include "sartrack/sysid.hpp"

#include <algorithm>
#include <cmath>

namespace sartrack::control {

struct PDGains {
    double kp = 0.0;
    double kd = 0.0;

    bool valid() const { return kp > 0.0 && kd >= 0.0 && std::isfinite(kp) && std::isfinite(kd); }
};

struct AxisLimits {
    double cmd_min = -1.0;
    double cmd_max = 1.0;
    double slew_max = 4.0; ///< command units per second

    bool valid() const { return cmd_min < cmd_max && slew_max > 0.0; }
    double clamp(double x) const { return std::clamp(x, cmd_min, cmd_max); }
};

struct PDControllerState {
    double prev_error = 0.0;
    double prev_output = 0.0;
    bool initialized = false;
};

struct PDResult {
    double command = 0.0;
    PDControllerState state;
};

/// kp e + kd (e - e_prev) / dt, clamped to the limits and slew-limited
/// against the previous output. The derivative term is zero until the
/// controller has seen one error sample.
inline PDResult pd_step(const PDGains& gains, const PDControllerState& state, double error, double dt,
                        const AxisLimits& limits)
{
    if (!(dt > 0.0)) {
        throw InvalidTimingError("controller dt must be positive");
    }
    const double derivative = state.initialized ? (error - state.prev_error) / dt : 0.0;
    const double raw = gains.kp * error + gains.kd * derivative;
    const double max_delta = limits.slew_max * dt;
    const double out = std::clamp(limits.clamp(raw), state.prev_output - max_delta, state.prev_output + max_delta);
    return {out, {error, out, true}};
}

/// Moves a held output towards zero at the slew limit (used while the measurement is missing).
inline double slew_towards_zero(double prev_output, double dt, const AxisLimits& limits)
{
    const double max_delta = limits.slew_max * dt;
    return limits.clamp(std::clamp(0.0, prev_output - max_delta, prev_output + max_delta));
}

/// Pole-placement PD tuning for a first-order velocity plant driving an
/// integrating error: with u = kp e + kd de/dt and de/dt = -K' v,
/// tau dv/dt + v = u, the closed loop is
///
///     e'' + (1 + K' kd) / tau e' + K' kp / tau e = 0.
///
/// Matching it to s^2 + 2 zeta wn s + wn^2 with wn = 4 / (zeta Ts) gives
/// kp = tau wn^2 / K' and kd = (2 zeta wn tau - 1) / K', where
/// K' = model.gain * loop_scale converts plant output into error units per
/// second (e.g. 100 * max speed for a range error in cm).
inline PDGains tune_pd(const sysid::FirstOrderModel& model, double settle_time, double damping,
                       double loop_scale = 1.0)
{
    if (!(settle_time > 0.0)) {
        throw InfeasibleSpecError("settle time must be positive");
    }
    if (!(damping >= 0.7 && damping <= 1.5)) {
        throw InfeasibleSpecError("damping must lie in [0.7, 1.5]");
    }
    if (!model.valid()) {
        throw InfeasibleSpecError("plant model is invalid");
    }
    const double loop_gain = model.gain * loop_scale;
    const double wn = 4.0 / (damping * settle_time);
    const PDGains gains{model.tau * wn * wn / loop_gain, (2.0 * damping * wn * model.tau - 1.0) / loop_gain};
    if (!gains.valid()) {
        throw InfeasibleSpecError("tuned gains kp=" + std::to_string(gains.kp) + " kd=" + std::to_string(gains.kd) +
                                  " violate kp > 0, kd >= 0; request a shorter settle time or check the plant gain");
    }
    return gains;
}

struct AxisController {
    PDGains gains;
    AxisLimits limits;
    PDControllerState state;

    double step(double error, double dt)
    {
        auto r = pd_step(gains, state, error, dt, limits);
        state = r.state;
        return r.command;
    }

    /// Overrides the emitted output (e.g. a motion hold) so the next slew starts from it.
    void force_output(double value) { state.prev_output = limits.clamp(value); }

    double coast(double dt)
    {
        state.prev_output = slew_towards_zero(state.prev_output, dt, limits);
        return state.prev_output;
    }

    void reset() { state = {}; }
};

/// The three tracking controllers.
///
/// x acts on range error (estimate - setpoint, cm): positive means the target
/// is too far and the UAV flies forward. yaw and z act on the shoulder
/// midpoint's pixel offset from the crosshair; image u grows to the right and
/// v grows downwards, so both offsets are negated before the PD step to turn
/// the UAV towards the target and climb when it sits above the crosshair.
struct ControllerBank {
    AxisController x_axis;
    AxisController z_axis;
    AxisController yaw_axis;

    VelocityCommand step(double range_error_cm, double horiz_px_error, double vert_px_error, double dt)
    {
        VelocityCommand cmd;
        cmd.vx = x_axis.step(range_error_cm, dt);
        cmd.yaw_rate = yaw_axis.step(-horiz_px_error, dt);
        cmd.vz = z_axis.step(-vert_px_error, dt);
        return cmd;
    }

    /// Centering only: yaw and z run, x output stays at zero.
    VelocityCommand center(double horiz_px_error, double vert_px_error, double dt)
    {
        VelocityCommand cmd;
        cmd.yaw_rate = yaw_axis.step(-horiz_px_error, dt);
        cmd.vz = z_axis.step(-vert_px_error, dt);
        x_axis.force_output(0.0);
        return cmd;
    }

    VelocityCommand coast(double dt)
    {
        VelocityCommand cmd;
        cmd.vx = x_axis.coast(dt);
        cmd.yaw_rate = yaw_axis.coast(dt);
        cmd.vz = z_axis.coast(dt);
        return cmd;
    }

    void reset()
    {
        x_axis.reset();
        z_axis.reset();
        yaw_axis.reset();
    }
};

} // namespace sartrack::control

#endif // SARTRACK_CONTROL_HPP
