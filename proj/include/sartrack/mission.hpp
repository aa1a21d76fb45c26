#ifndef SARTRACK_MISSION_HPP
#define SARTRACK_MISSION_HPP

// Operator workflow as a state machine:
//
//   Free --start_search--> Search --face match--> AwaitConfirm --start_track--> Track
//   Track --target missing for loss_frames ticks--> Reconfirm
//   Reconfirm --template matches again--> Track
//   Reconfirm --timeout--> Search
//   AwaitConfirm --target missing for loss_frames ticks--> Search
//   any mode except Free --go_free--> Free
//
// A button is applied first; the resulting mode then handles this tick's
// perception. Buttons that do not apply in the current mode are ignored and
// reported as `ignored-input` events.

#include "sartrack/control.hpp"
#include "sartrack/geometry.hpp"
#include "sartrack/identity.hpp"
#include "sartrack/range.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sartrack::mission {

enum class Mode { Free, Search, AwaitConfirm, Track, Reconfirm };

inline constexpr std::array<Mode, 5> all_modes = {Mode::Free, Mode::Search, Mode::AwaitConfirm, Mode::Track,
                                                  Mode::Reconfirm};

inline std::string_view to_string(Mode m)
{
    switch (m) {
    case Mode::Free: return "Free";
    case Mode::Search: return "Search";
    case Mode::AwaitConfirm: return "AwaitConfirm";
    case Mode::Track: return "Track";
    case Mode::Reconfirm: return "Reconfirm";
    }
    return "?";
}

inline std::optional<Mode> mode_from_string(std::string_view s)
{
    for (Mode m : all_modes) {
        if (to_string(m) == s) {
            return m;
        }
    }
    return std::nullopt;
}

enum class Button { start_search, start_track, capture_template, go_free };

inline constexpr std::array<Button, 4> all_buttons = {Button::start_search, Button::start_track,
                                                      Button::capture_template, Button::go_free};

inline std::string_view to_string(Button b)
{
    switch (b) {
    case Button::start_search: return "start_search";
    case Button::start_track: return "start_track";
    case Button::capture_template: return "capture_template";
    case Button::go_free: return "go_free";
    }
    return "?";
}

inline std::optional<Button> button_from_string(std::string_view s)
{
    for (Button b : all_buttons) {
        if (to_string(b) == s) {
            return b;
        }
    }
    return std::nullopt;
}

struct MissionConfig {
    double track_setpoint_cm = 200.0;
    double search_yaw_rate = 0.5;
    double yaw_cap = 0.7854; ///< 45 deg/s: face matching runs at 5 Hz
    int loss_frames = 15;
    double reconfirm_timeout_s = 10.0;
    double centering_tolerance_px = 40.0;
    double capture_radius_px = 150.0;
    std::optional<std::string> target_label;
    range::GuardConfig guard;
};

struct OperatorInput {
    std::optional<VelocityCommand> manual;
    std::optional<Button> button;
    std::string capture_label; ///< used with Button::capture_template
};

struct FaceMatch {
    int track_id = 0;
    identity::MatchResult result;
};

struct Event {
    double t = 0.0;
    std::string name;
    std::string payload;
};

struct MissionState {
    Mode mode = Mode::Free;
    std::optional<int> target_track_id;
    std::optional<std::string> target_label;
    int consecutive_misses = 0;
    control::ControllerBank bank;
    range::GuardState guard;
    std::optional<double> reconfirm_deadline;
    std::optional<double> last_control_time;
    std::optional<std::string> pending_capture;
    bool centered = false;

    // Latest measurements, for telemetry.
    std::optional<double> range_estimate_cm;
    std::optional<double> horizontal_error_px;
    bool motion_hold = false;
};

/// Session constants the state machine reads.
struct MissionContext {
    MissionConfig config;
    CameraModel camera;
    range::RangeCalibration calibration;
};

struct CaptureRequest {
    std::string label;
    EmbeddingValues embedding{};
};

struct StepOutput {
    MissionState state;
    VelocityCommand command;
    std::vector<Event> events;
    std::optional<CaptureRequest> capture;
};

/// Signed pixel offset of the shoulder midpoint from the crosshair (image
/// center). Positive horizontal is right of center, positive vertical below.
inline PixelPoint centering_error(const TrackedDetection& detection, const CameraModel& camera)
{
    if (!detection.keypoints) {
        throw MissingKeypointError("keypoints");
    }
    const auto mid = shoulder_midpoint(*detection.keypoints);
    return {mid.u - camera.center_x, mid.v - camera.center_y};
}

inline MissionState initial_state(const MissionContext& ctx, const control::ControllerBank& bank,
                                  Mode mode = Mode::Free)
{
    MissionState s;
    s.mode = mode;
    s.bank = bank;
    s.target_label = ctx.config.target_label;
    return s;
}

namespace detail {

inline VelocityCommand clamp_manual(const VelocityCommand& in, const control::ControllerBank& bank)
{
    const auto& xl = bank.x_axis.limits;
    return {xl.clamp(in.vx), xl.clamp(in.vy), bank.z_axis.limits.clamp(in.vz), bank.yaw_axis.limits.clamp(in.yaw_rate)};
}

inline bool shoulders_visible(const TrackedDetection& d)
{
    return d.keypoints && d.keypoints->visible(Keypoint::left_shoulder) &&
           d.keypoints->visible(Keypoint::right_shoulder);
}

} // namespace detail

/// Advances the mission by one control tick.
///
/// `frame` is the perception output delivered since the previous tick (empty
/// when no frame arrived, e.g. a glitch). `face_matches` is non-empty only on
/// face-recognition ticks and lists registry matches per track id, in
/// detection order.
inline StepOutput mission_step(const MissionContext& ctx, MissionState state, const DetectionFrame* frame,
                               std::span<const FaceMatch> face_matches, const OperatorInput& input, double now,
                               double dt)
{
    const auto& cfg = ctx.config;
    StepOutput out;
    auto emit = [&](std::string name, std::string payload = {}) {
        out.events.push_back({now, std::move(name), std::move(payload)});
    };
    auto enter = [&](Mode m) {
        state.mode = m;
        state.consecutive_misses = 0;
        state.centered = false;
        state.motion_hold = false;
        state.bank.reset();
        emit("mode-changed", std::string(to_string(m)));
    };
    auto ignore = [&](Button b) {
        emit("ignored-input", std::string(to_string(b)) + " in " + std::string(to_string(state.mode)));
    };

    const double pd_dt = state.last_control_time && now > *state.last_control_time
                             ? now - *state.last_control_time
                             : dt;
    state.last_control_time = now;
    state.horizontal_error_px.reset();

    if (input.button) {
        const Button b = *input.button;
        switch (b) {
        case Button::go_free:
            if (state.mode == Mode::Free) {
                ignore(b);
            } else {
                state.target_track_id.reset();
                state.reconfirm_deadline.reset();
                state.range_estimate_cm.reset();
                enter(Mode::Free);
            }
            break;
        case Button::start_search:
            if (state.mode == Mode::Free) {
                state.pending_capture.reset();
                enter(Mode::Search);
            } else {
                ignore(b);
            }
            break;
        case Button::start_track:
            if (state.mode == Mode::AwaitConfirm) {
                state.guard = {};
                enter(Mode::Track);
            } else {
                ignore(b);
            }
            break;
        case Button::capture_template:
            if (state.mode == Mode::Free && !input.capture_label.empty()) {
                state.pending_capture = input.capture_label;
            } else {
                ignore(b);
            }
            break;
        }
    }

    const TrackedDetection* target = nullptr;
    if (frame != nullptr && state.target_track_id) {
        target = frame->find(*state.target_track_id);
    }

    switch (state.mode) {
    case Mode::Free: {
        out.command = detail::clamp_manual(input.manual.value_or(VelocityCommand{}), state.bank);
        if (state.pending_capture && frame != nullptr) {
            const TrackedDetection* best = nullptr;
            double best_dist = std::numeric_limits<double>::infinity();
            const PixelPoint crosshair{ctx.camera.center_x, ctx.camera.center_y};
            for (const auto& d : frame->detections) {
                const double dist = pixel_distance(d.bbox.center(), crosshair);
                if (d.embedding && dist <= cfg.capture_radius_px && dist < best_dist) {
                    best = &d;
                    best_dist = dist;
                }
            }
            if (best != nullptr) {
                out.capture = CaptureRequest{*state.pending_capture, *best->embedding};
                state.target_label = *state.pending_capture;
                emit("template-captured", *state.pending_capture + " track=" + std::to_string(best->track_id));
                state.pending_capture.reset();
            }
        }
        break;
    }
    case Mode::Search: {
        const double yaw = std::min({cfg.search_yaw_rate, cfg.yaw_cap, state.bank.yaw_axis.limits.cmd_max});
        out.command = {0.0, 0.0, 0.0, yaw};
        for (const auto& fm : face_matches) {
            if (!fm.result.matched) {
                continue;
            }
            if (state.target_label && fm.result.label != *state.target_label) {
                continue;
            }
            state.target_track_id = fm.track_id;
            state.target_label = fm.result.label;
            enter(Mode::AwaitConfirm);
            emit("target-found", "track=" + std::to_string(fm.track_id) + " label=" + fm.result.label +
                                     " distance=" + io::fixed(fm.result.distance, 4));
            out.command = {};
            break;
        }
        break;
    }
    case Mode::AwaitConfirm: {
        if (target != nullptr && detail::shoulders_visible(*target)) {
            state.consecutive_misses = 0;
            const auto err = centering_error(*target, ctx.camera);
            state.horizontal_error_px = err.u;
            out.command = state.bank.center(err.u, err.v, pd_dt);
            const bool centered =
                std::abs(err.u) <= cfg.centering_tolerance_px && std::abs(err.v) <= cfg.centering_tolerance_px;
            if (centered && !state.centered) {
                emit("target-centered", "track=" + std::to_string(*state.target_track_id));
            }
            state.centered = centered;
        } else {
            ++state.consecutive_misses;
            out.command = state.bank.coast(pd_dt);
            if (state.consecutive_misses >= cfg.loss_frames) {
                emit("target-lost", "track=" + std::to_string(*state.target_track_id));
                state.target_track_id.reset();
                enter(Mode::Search);
                out.command = {};
            }
        }
        break;
    }
    case Mode::Track: {
        if (target != nullptr && target->keypoints && has_torso(*target->keypoints)) {
            state.consecutive_misses = 0;
            const double x = shoulder_hip_pixel_distance(*target->keypoints);
            const auto estimate = range::estimate_range(ctx.calibration, x);
            const auto guarded = range::guard_range(state.guard, estimate.cm, now, cfg.guard);
            state.guard = guarded.state;
            if (guarded.motion_hold && !state.motion_hold) {
                emit("motion-hold", "until=" + io::fixed(state.guard.hold_until_s, 3));
            }
            state.motion_hold = guarded.motion_hold;
            state.range_estimate_cm = guarded.accepted_cm;

            const auto err = centering_error(*target, ctx.camera);
            state.horizontal_error_px = err.u;
            out.command = state.bank.step(guarded.accepted_cm - cfg.track_setpoint_cm, err.u, err.v, pd_dt);
            if (state.motion_hold) {
                out.command.vx = 0.0;
                state.bank.x_axis.force_output(0.0);
            }
        } else {
            ++state.consecutive_misses;
            out.command = state.bank.coast(pd_dt);
            state.motion_hold = state.guard.initialized && now < state.guard.hold_until_s;
            if (state.motion_hold) {
                out.command.vx = 0.0;
                state.bank.x_axis.force_output(0.0);
            }
            if (state.consecutive_misses >= cfg.loss_frames) {
                emit("target-lost", "track=" + std::to_string(*state.target_track_id));
                enter(Mode::Reconfirm);
                state.reconfirm_deadline = now + cfg.reconfirm_timeout_s;
                state.range_estimate_cm.reset();
                out.command = {};
            }
        }
        break;
    }
    case Mode::Reconfirm: {
        out.command = {};
        bool reacquired = false;
        for (const auto& fm : face_matches) {
            if (fm.result.matched && state.target_label && fm.result.label == *state.target_label) {
                state.target_track_id = fm.track_id;
                state.reconfirm_deadline.reset();
                state.guard = {};
                enter(Mode::Track);
                emit("reacquired", "track=" + std::to_string(fm.track_id) + " label=" + fm.result.label);
                reacquired = true;
                break;
            }
        }
        if (!reacquired && state.reconfirm_deadline && now >= *state.reconfirm_deadline) {
            emit("reconfirm-timeout", state.target_label.value_or(""));
            state.target_track_id.reset();
            state.reconfirm_deadline.reset();
            enter(Mode::Search);
        }
        break;
    }
    }

    out.state = std::move(state);
    return out;
}

} // namespace sartrack::mission

#endif // SARTRACK_MISSION_HPP
