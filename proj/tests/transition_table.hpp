#ifndef SARTRACK_TRANSITION_TABLE_HPP
#define SARTRACK_TRANSITION_TABLE_HPP

#include "sartrack/mission.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <vector>

namespace sartrack::testing {

using namespace sartrack::mission;

constexpr double dt = 1.0 / 15.0;

inline MissionContext make_context()
{
    MissionContext ctx;
    ctx.config.target_label = "alice";
    ctx.calibration = range::fit_calibration(range::pinhole_samples(700.0, 180.0, 0.28, 140.0, 300.0, 10.0), 180.0);
    return ctx;
}

inline control::ControllerBank make_bank()
{
    control::ControllerBank bank;
    bank.x_axis.gains = {0.037, 0.012};
    bank.z_axis.gains = {0.006, 0.0017};
    bank.yaw_axis.gains = {0.009, 0.0018};
    bank.yaw_axis.limits = {-1.57, 1.57, 10.0};
    return bank;
}

inline TrackedDetection person(int id, double torso_px = 176.4, PixelPoint shoulder = {640.0, 360.0})
{
    TrackedDetection d;
    d.track_id = id;
    d.bbox = {shoulder.u - 60, shoulder.v - 80, shoulder.u + 60, shoulder.v + 300};
    d.keypoints = testing::upright_torso(shoulder, torso_px);
    return d;
}

inline DetectionFrame frame_with(std::vector<TrackedDetection> d, double t = 0.0) { return {t, std::move(d)}; }

inline FaceMatch face(int track, const std::string& label, double distance = 0.2)
{
    return {track, {label, distance, distance < identity::match_threshold}};
}

inline bool has_event(const StepOutput& out, const std::string& name)
{
    return std::any_of(out.events.begin(), out.events.end(), [&](const Event& e) { return e.name == name; });
}

// ---------------------------------------------------------------------------
// Transition table

enum class Perception { nothing, target_visible, face_match, face_other, loss_threshold, reconfirm_expired };
constexpr std::array all_perception = {Perception::nothing,    Perception::target_visible,
                                       Perception::face_match, Perception::face_other,
                                       Perception::loss_threshold, Perception::reconfirm_expired};

// The documented workflow, written out independently of mission_step.
inline Mode expected_next(Mode m, std::optional<Button> b, Perception p)
{
    Mode after = m;
    if (b) {
        switch (*b) {
        case Button::go_free: after = Mode::Free; break;
        case Button::start_search: after = m == Mode::Free ? Mode::Search : m; break;
        case Button::start_track: after = m == Mode::AwaitConfirm ? Mode::Track : m; break;
        case Button::capture_template: break;
        }
    }
    const bool fresh = after != m; // entering a mode resets its loss counter
    switch (after) {
    case Mode::Free: return Mode::Free;
    case Mode::Search: return p == Perception::face_match ? Mode::AwaitConfirm : Mode::Search;
    case Mode::AwaitConfirm: return p == Perception::loss_threshold && !fresh ? Mode::Search : Mode::AwaitConfirm;
    case Mode::Track: return p == Perception::loss_threshold && !fresh ? Mode::Reconfirm : Mode::Track;
    case Mode::Reconfirm:
        if (p == Perception::face_match) {
            return Mode::Track;
        }
        return p == Perception::reconfirm_expired ? Mode::Search : Mode::Reconfirm;
    }
    return m;
}

inline bool expected_ignored(Mode m, Button b)
{
    switch (b) {
    case Button::go_free: return m == Mode::Free;
    case Button::start_search: return m != Mode::Free;
    case Button::start_track: return m != Mode::AwaitConfirm;
    case Button::capture_template: return m != Mode::Free;
    }
    return true;
}

struct TransitionReport {
    int cases = 0;
    std::vector<std::string> mismatches;
};

/// Runs every (mode, button, perception) combination through mission_step.
inline TransitionReport check_transition_table()
{
    TransitionReport report;
    const auto ctx = make_context();
    const double now = 20.0;
    std::vector<std::optional<Button>> buttons{std::nullopt};
    for (auto b : all_buttons) {
        buttons.emplace_back(b);
    }
    for (Mode m : all_modes) {
        for (const auto& b : buttons) {
            for (Perception p : all_perception) {
                auto s = initial_state(ctx, make_bank(), m);
                s.last_control_time = now - dt;
                if (m != Mode::Free && m != Mode::Search) {
                    s.target_track_id = 1;
                }
                if (m == Mode::Reconfirm) {
                    s.reconfirm_deadline = p == Perception::reconfirm_expired ? now - 0.1 : now + 5.0;
                }
                DetectionFrame frame = frame_with({person(1)}, now);
                DetectionFrame other = frame_with({person(2)}, now);
                const DetectionFrame* f = nullptr;
                std::vector<FaceMatch> faces;
                switch (p) {
                case Perception::nothing: break;
                case Perception::target_visible: f = &frame; break;
                case Perception::face_match:
                    f = &frame;
                    faces.push_back(face(1, "alice"));
                    break;
                case Perception::face_other:
                    f = &other;
                    faces.push_back(face(2, "mallory"));
                    break;
                case Perception::loss_threshold: s.consecutive_misses = ctx.config.loss_frames - 1; break;
                case Perception::reconfirm_expired: break;
                }
                OperatorInput in;
                in.button = b;
                if (b == Button::capture_template) {
                    in.capture_label = "alice";
                }
                const auto out = mission_step(ctx, s, f, faces, in, now, dt);
                const Mode want = expected_next(m, b, p);
                const std::string where = std::string(to_string(m)) + " + " +
                                          (b ? std::string(to_string(*b)) : std::string("none")) + " + perception " +
                                          std::to_string(static_cast<int>(p));
                if (out.state.mode != want) {
                    report.mismatches.push_back(where + ": got " + std::string(to_string(out.state.mode)) +
                                                ", want " + std::string(to_string(want)));
                }
                if (has_event(out, "mode-changed") != (want != m)) {
                    report.mismatches.push_back(where + ": mode-changed event");
                }
                if (has_event(out, "ignored-input") != (b.has_value() && expected_ignored(m, *b))) {
                    report.mismatches.push_back(where + ": ignored-input event");
                }
                ++report.cases;
            }
        }
    }
    return report;
}

} // namespace sartrack::testing

#endif
