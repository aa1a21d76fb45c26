#ifndef SARTRACK_SIMWORLD_HPP
#define SARTRACK_SIMWORLD_HPP

// Deterministic closed-loop world: per-axis first-order plant, scripted
// people, synthetic pinhole perception (person boxes, COCO-17 keypoints and
// face embeddings) and the fixed-timestep session that ties perception,
// mission and plant together.

#include "sartrack/control.hpp"
#include "sartrack/errors.hpp"
#include "sartrack/geometry.hpp"
#include "sartrack/identity.hpp"
#include "sartrack/mission.hpp"
#include "sartrack/range.hpp"
#include "sartrack/rng.hpp"
#include "sartrack/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace sartrack::sim {

// ---------------------------------------------------------------------------
// Plant

struct AxisModels {
    sysid::FirstOrderModel x{1.0, 0.35};
    sysid::FirstOrderModel z{1.0, 0.30};
    sysid::FirstOrderModel yaw{1.0, 0.20};
};

/// Maps normalized commands to physical velocity targets. Yaw commands are already rad/s.
struct CommandScale {
    double max_forward_mps = 1.5;
    double max_vertical_mps = 1.0;
};

struct Plant {
    AxisModels models;
    CommandScale scale;
};

struct PlantState {
    WorldPose pose;
    double v_x = 0.0; ///< body forward, m/s
    double v_y = 0.0; ///< body left, m/s (Free mode only)
    double v_z = 0.0;
    double yaw_v = 0.0;
};

/// Each axis velocity follows its first-order model under zero-order hold
/// (the same recurrence as sysid::simulate_model); the pose integrates the
/// updated velocities, forward velocity along the current heading.
inline PlantState plant_step(const Plant& plant, PlantState s, const VelocityCommand& cmd, double dt)
{
    if (!(dt > 0.0)) {
        throw InvalidTimingError("plant dt must be positive");
    }
    const auto& m = plant.models;
    s.v_x = sysid::zoh_step(m.x.pole(dt), m.x.gain, s.v_x, cmd.vx * plant.scale.max_forward_mps);
    s.v_y = sysid::zoh_step(m.x.pole(dt), m.x.gain, s.v_y, cmd.vy * plant.scale.max_forward_mps);
    s.v_z = sysid::zoh_step(m.z.pole(dt), m.z.gain, s.v_z, cmd.vz * plant.scale.max_vertical_mps);
    s.yaw_v = sysid::zoh_step(m.yaw.pole(dt), m.yaw.gain, s.yaw_v, cmd.yaw_rate);

    const double c = std::cos(s.pose.heading);
    const double sn = std::sin(s.pose.heading);
    s.pose.x += (s.v_x * c - s.v_y * sn) * dt;
    s.pose.y += (s.v_x * sn + s.v_y * c) * dt;
    s.pose.z = std::max(0.0, s.pose.z + s.v_z * dt);
    s.pose.heading = normalize_heading(s.pose.heading + s.yaw_v * dt);
    return s;
}

enum class Axis { x, z, yaw };

/// Excites one axis of the plant from rest with `inputs` (one per sample)
/// and records the measured velocity with white noise, as an IMU log would.
inline sysid::TelemetrySeries record_axis_telemetry(const Plant& plant, Axis axis, const std::vector<double>& inputs,
                                                    double dt, double noise_sigma, Rng& rng)
{
    sysid::TelemetrySeries series{dt, inputs, {}};
    PlantState s;
    s.pose.z = 1.0;
    for (double u : inputs) {
        const double v = axis == Axis::x ? s.v_x : axis == Axis::z ? s.v_z : s.yaw_v;
        series.outputs.push_back(v + noise_sigma * rng.normal());
        VelocityCommand cmd;
        (axis == Axis::x ? cmd.vx : axis == Axis::z ? cmd.vz : cmd.yaw_rate) = u;
        s = plant_step(plant, s, cmd, dt);
    }
    return series;
}

/// Command-to-measured-velocity model of an axis as sysid would identify it
/// (normalized command in, m/s or rad/s out).
inline sysid::FirstOrderModel effective_axis_model(const Plant& plant, Axis axis)
{
    switch (axis) {
    case Axis::x: return {plant.models.x.gain * plant.scale.max_forward_mps, plant.models.x.tau};
    case Axis::z: return {plant.models.z.gain * plant.scale.max_vertical_mps, plant.models.z.tau};
    case Axis::yaw: return plant.models.yaw;
    }
    return {};
}

/// Factor converting an axis' measured velocity into the rate of its tracking error:
/// cm per m for range, pixels per radian for yaw, pixels per meter at the setpoint range for z.
inline double loop_scale(Axis axis, const CameraModel& camera, double setpoint_cm)
{
    switch (axis) {
    case Axis::x: return 100.0;
    case Axis::z: return camera.focal_px / (setpoint_cm / 100.0);
    case Axis::yaw: return camera.focal_px;
    }
    return 1.0;
}

struct DisturbanceConfig {
    double output_noise_sigma = 0.0; ///< m/s on recorded velocities
    double range_noise_sigma_cm = 0.0; ///< white noise on the measured range (axis step tests)
    double sine_amplitude_cm = 0.0;
    double sine_period_s = 5.0;

    double sine(double t) const
    {
        return sine_amplitude_cm == 0.0 ? 0.0
                                        : sine_amplitude_cm * std::sin(2.0 * std::numbers::pi * t / sine_period_s);
    }
};

struct StepSample {
    double t = 0.0;
    double range_cm = 0.0;
    double command = 0.0;
};

/// Forward-axis closed loop against a stationary target: the UAV starts
/// `start_cm` away and the PD drives the (optionally disturbed) range
/// measurement to `setpoint_cm`. Control runs every `control_div` physics steps.
inline std::vector<StepSample> simulate_range_step(const Plant& plant, const control::AxisController& controller,
                                                   double start_cm, double setpoint_cm, double duration_s,
                                                   double physics_rate_hz, int control_div,
                                                   const DisturbanceConfig& disturbance = {}, std::uint64_t seed = 0)
{
    Rng rng(seed);
    auto ctl = controller;
    ctl.reset();
    PlantState s;
    s.pose.z = 1.0;
    const double target_x = start_cm / 100.0;
    const double dt = 1.0 / physics_rate_hz;
    const double control_dt = control_div * dt;
    const auto steps = static_cast<long long>(std::llround(duration_s * physics_rate_hz));

    std::vector<StepSample> trace;
    VelocityCommand cmd;
    for (long long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / physics_rate_hz;
        const double range_cm = (target_x - s.pose.x) * 100.0;
        if (k % control_div == 0) {
            const double measured = range_cm + disturbance.sine(t) + disturbance.range_noise_sigma_cm * rng.normal();
            cmd.vx = ctl.step(measured - setpoint_cm, control_dt);
        }
        trace.push_back({t, range_cm, cmd.vx});
        s = plant_step(plant, s, cmd, dt);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// People

struct Waypoint {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    std::optional<double> heading; ///< facing while walking to this point; default: direction of travel
};

struct Person {
    int id = 0;
    std::string label;
    double x = 0.0;
    double y = 0.0;
    double height_cm = 180.0;
    double heading = 0.0;
    EmbeddingValues embedding{};
    std::vector<Waypoint> script;
};

struct PersonPose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;
};

/// Position is piecewise linear through the waypoints, starting from the
/// initial position at t = 0; the person stays put after the last one.
inline PersonPose person_pose_at(const Person& p, double t)
{
    PersonPose pose{p.x, p.y, p.heading};
    double seg_t0 = 0.0;
    for (const auto& wp : p.script) {
        const double dx = wp.x - pose.x;
        const double dy = wp.y - pose.y;
        const bool moving = dx != 0.0 || dy != 0.0;
        const double facing = wp.heading ? *wp.heading : moving ? std::atan2(dy, dx) : pose.heading;
        if (t < wp.t) {
            const double span = wp.t - seg_t0;
            const double f = span > 0.0 ? std::clamp((t - seg_t0) / span, 0.0, 1.0) : 1.0;
            if (t >= seg_t0) {
                pose.x += f * dx;
                pose.y += f * dy;
                pose.heading = normalize_heading(facing);
            }
            return pose;
        }
        pose = {wp.x, wp.y, normalize_heading(facing)};
        seg_t0 = wp.t;
    }
    return pose;
}

/// Deterministic unit-norm identity vector for a person.
inline EmbeddingValues make_identity_embedding(std::uint64_t seed, int person_id)
{
    Rng rng(derive_seed(seed, 0x1d000000ULL + static_cast<std::uint64_t>(person_id)));
    EmbeddingValues e{};
    double norm = 0.0;
    for (auto& x : e) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : e) {
        x /= norm;
    }
    return e;
}

// ---------------------------------------------------------------------------
// Perception

struct PerceptionConfig {
    int detect_rate_hz = 30;
    int pose_rate_hz = 15;
    int face_rate_hz = 5;
    int control_rate_hz = 15;
    double pixel_noise_sigma = 0.5;
    /// Expected norm of the additive embedding noise (per-component sigma is this / sqrt(128)).
    double embedding_noise_sigma = 0.15;
    double glitch_prob = 0.0;
    double face_visibility_half_angle = 60.0 * std::numbers::pi / 180.0;
    double torso_ratio = range::default_torso_ratio;
    double bbox_margin_px = 8.0;
};

/// Scripted full perception outage (no frames at all).
struct Blackout {
    double start_s = 0.0;
    double duration_s = 0.0;

    bool active(double t) const { return t >= start_s && t < start_s + duration_s; }
};

/// Scripted posture change: the person's torso appears shortened by `scale`
/// (e.g. leaning towards the camera).
struct PostureEvent {
    int person_id = 0;
    double start_s = 0.0;
    double duration_s = 0.0;
    double scale = 1.0;

    bool active(double t) const { return t >= start_s && t < start_s + duration_s; }
};

struct World {
    std::vector<Person> people;
    std::vector<Blackout> blackouts;
    std::vector<PostureEvent> posture_events;
    DisturbanceConfig disturbance;

    bool blackout_active(double t) const
    {
        return std::any_of(blackouts.begin(), blackouts.end(), [t](const Blackout& b) { return b.active(t); });
    }

    /// The tracker loses its ids across an outage: every finished blackout starts a new id epoch.
    int id_epoch(double t) const
    {
        int epoch = 0;
        for (const auto& b : blackouts) {
            if (t >= b.start_s + b.duration_s) {
                ++epoch;
            }
        }
        return epoch;
    }

    int track_id_for(const Person& p, double t) const { return p.id + 1000 * id_epoch(t); }

    const Person* person_for_track(int track_id, double t) const
    {
        for (const auto& p : people) {
            if (track_id_for(p, t) == track_id) {
                return &p;
            }
        }
        return nullptr;
    }

    double torso_scale(int person_id, double t) const
    {
        double scale = 1.0;
        for (const auto& e : posture_events) {
            if (e.person_id == person_id && e.active(t)) {
                scale *= e.scale;
            }
        }
        return scale;
    }
};

/// Horizontal distance from the UAV to the person, cm.
inline double true_range_cm(const WorldPose& uav, const PersonPose& person)
{
    return 100.0 * std::hypot(person.x - uav.x, person.y - uav.y);
}

/// Body keypoint placement as fractions of standing height: vertical
/// position, lateral offset (towards the person's left) and forward offset.
struct KeypointAnchor {
    double up = 0.0;
    double left = 0.0;
    double forward = 0.0;
};

inline constexpr double shoulder_height_ratio = 0.82;

inline std::array<KeypointAnchor, keypoint_count> body_anchors(double torso_ratio)
{
    const double sh = shoulder_height_ratio;
    const double hip = sh - torso_ratio;
    return {{
        {0.935, 0.0, 0.05},    // nose
        {0.955, 0.018, 0.04},  // left eye
        {0.955, -0.018, 0.04}, // right eye
        {0.945, 0.045, 0.0},   // left ear
        {0.945, -0.045, 0.0},  // right ear
        {sh, 0.115, 0.0},      // left shoulder
        {sh, -0.115, 0.0},     // right shoulder
        {0.63, 0.14, 0.0},     // left elbow
        {0.63, -0.14, 0.0},    // right elbow
        {0.48, 0.14, 0.02},    // left wrist
        {0.48, -0.14, 0.02},   // right wrist
        {hip, 0.06, 0.0},      // left hip
        {hip, -0.06, 0.0},     // right hip
        {0.285, 0.055, 0.0},   // left knee
        {0.285, -0.055, 0.0},  // right knee
        {0.045, 0.055, 0.0},   // left ankle
        {0.045, -0.055, 0.0},  // right ankle
    }};
}

struct RenderTicks {
    bool pose = false;
    bool face = false;
};

/// Renders one camera frame from the UAV pose. Empty when the frame is lost
/// (glitch draw or scripted blackout). Random draws happen in a fixed order
/// regardless of visibility so a run is reproducible from its seed.
inline std::optional<DetectionFrame> render_perception(const World& world, const WorldPose& uav,
                                                       const CameraModel& camera, const PerceptionConfig& config,
                                                       Rng& rng, double t, RenderTicks ticks)
{
    const bool glitch = rng.bernoulli(config.glitch_prob);
    if (glitch || world.blackout_active(t)) {
        return std::nullopt;
    }

    constexpr double min_depth = 0.05;
    const double ch = std::cos(uav.heading);
    const double sh = std::sin(uav.heading);
    const double emb_sigma = config.embedding_noise_sigma / std::sqrt(static_cast<double>(embedding_dim));

    DetectionFrame frame;
    frame.t = t;
    for (const auto& person : world.people) {
        PersonPose pp = person_pose_at(person, t);
        double range_m = std::hypot(pp.x - uav.x, pp.y - uav.y);
        const double disturbance = world.disturbance.sine(t) / 100.0;
        if (disturbance != 0.0 && range_m > 0.0) {
            const double f = (range_m + disturbance) / range_m;
            pp.x = uav.x + (pp.x - uav.x) * f;
            pp.y = uav.y + (pp.y - uav.y) * f;
            range_m += disturbance;
        }

        const double height_m = person.height_cm / 100.0;
        const double torso = config.torso_ratio * world.torso_scale(person.id, t);
        const auto anchors = body_anchors(torso);
        const double pc = std::cos(pp.heading);
        const double ps = std::sin(pp.heading);

        KeypointSet kps;
        bool any_visible = false;
        BoundingBox box{camera.width, camera.height, 0.0, 0.0};
        for (std::size_t i = 0; i < keypoint_count; ++i) {
            const auto& a = anchors[i];
            const double wx = pp.x + height_m * (a.forward * pc - a.left * ps);
            const double wy = pp.y + height_m * (a.forward * ps + a.left * pc);
            const double wz = height_m * a.up;
            const double dx = wx - uav.x;
            const double dy = wy - uav.y;
            const double depth = dx * ch + dy * sh;
            const double lateral = -dx * sh + dy * ch;
            const double up = wz - uav.z;
            const double nu = config.pixel_noise_sigma * rng.normal();
            const double nv = config.pixel_noise_sigma * rng.normal();
            if (depth <= min_depth) {
                continue;
            }
            const double u = camera.center_x - camera.focal_px * lateral / depth + nu;
            const double v = camera.center_y - camera.focal_px * up / depth + nv;
            if (!camera.contains(u, v)) {
                continue;
            }
            kps.points[i] = {u, v, true};
            any_visible = true;
            box.u_min = std::min(box.u_min, u);
            box.v_min = std::min(box.v_min, v);
            box.u_max = std::max(box.u_max, u);
            box.v_max = std::max(box.v_max, v);
        }

        std::optional<EmbeddingValues> embedding;
        if (ticks.face) {
            EmbeddingValues e = person.embedding;
            for (auto& x : e) {
                x += emb_sigma * rng.normal();
            }
            const double bearing = std::atan2(pp.y - uav.y, pp.x - uav.x);
            const double facing_off = normalize_heading(bearing - pp.heading - std::numbers::pi);
            if (kps.visible(Keypoint::nose) && std::abs(facing_off) <= config.face_visibility_half_angle) {
                embedding = e;
            }
        }

        if (!any_visible) {
            continue;
        }
        const double m = config.bbox_margin_px;
        box = {std::max(0.0, box.u_min - m), std::max(0.0, box.v_min - m), std::min(camera.width, box.u_max + m),
               std::min(camera.height, box.v_max + m)};
        if (!box.non_degenerate()) {
            continue;
        }

        TrackedDetection det;
        det.track_id = world.track_id_for(person, t);
        det.bbox = box;
        if (ticks.pose) {
            det.keypoints = kps;
        }
        det.embedding = embedding;
        frame.detections.push_back(std::move(det));
    }
    return frame;
}

// ---------------------------------------------------------------------------
// Session

struct ScriptedInput {
    double t = 0.0;
    mission::OperatorInput input;
};

struct Scenario {
    std::uint64_t seed = 1;
    double physics_rate_hz = 150.0;
    CameraModel camera;
    Plant plant;
    PlantState initial;
    control::ControllerBank bank;
    range::RangeCalibration calibration;
    World world;
    PerceptionConfig perception;
    mission::MissionConfig mission;
    mission::Mode initial_mode = mission::Mode::Free;
    identity::Registry registry;
    std::vector<ScriptedInput> inputs; ///< sorted by time
};

/// Throws ValidationError naming the offending field.
inline void validate(const Scenario& s)
{
    const double phys = s.physics_rate_hz;
    if (!(phys > 0.0) || phys != std::floor(phys)) {
        throw ValidationError("physics_rate_hz", "must be a positive integer");
    }
    auto check_rate = [&](const char* field, int rate) {
        if (rate <= 0 || static_cast<long long>(phys) % rate != 0) {
            throw ValidationError(std::string("perception.") + field,
                                  std::to_string(rate) + " Hz does not divide the physics rate " +
                                      std::to_string(static_cast<long long>(phys)) + " Hz");
        }
    };
    check_rate("detect_rate_hz", s.perception.detect_rate_hz);
    check_rate("pose_rate_hz", s.perception.pose_rate_hz);
    check_rate("face_rate_hz", s.perception.face_rate_hz);
    check_rate("control_rate_hz", s.perception.control_rate_hz);
    const auto& p = s.perception;
    if (!(p.glitch_prob >= 0.0 && p.glitch_prob <= 1.0)) {
        throw ValidationError("perception.glitch_prob", "must lie in [0, 1]");
    }
    if (!(p.pixel_noise_sigma >= 0.0)) {
        throw ValidationError("perception.pixel_noise_sigma", "must be >= 0");
    }
    if (!(p.embedding_noise_sigma >= 0.0)) {
        throw ValidationError("perception.embedding_noise_sigma", "must be >= 0");
    }
    if (!(p.torso_ratio > 0.0 && p.torso_ratio < shoulder_height_ratio)) {
        throw ValidationError("perception.torso_ratio", "must lie in (0, 0.82)");
    }
    if (!s.camera.valid()) {
        throw ValidationError("camera", "needs focal_px > 0 and a principal point inside the image");
    }
    if (!s.plant.models.x.valid() || !s.plant.models.z.valid() || !s.plant.models.yaw.valid()) {
        throw ValidationError("plant", "every axis needs tau > 0 and a finite gain");
    }
    if (s.initial.pose.z < 0.0) {
        throw ValidationError("uav.z", "must be >= 0");
    }
    const auto& m = s.mission;
    if (!(m.search_yaw_rate > 0.0 && m.search_yaw_rate <= m.yaw_cap)) {
        throw ValidationError("mission.search_yaw_rate", "must be positive and at most yaw_cap");
    }
    if (m.loss_frames < 1) {
        throw ValidationError("mission.loss_frames", "must be >= 1");
    }
    if (!(m.reconfirm_timeout_s > 0.0)) {
        throw ValidationError("mission.reconfirm_timeout_s", "must be positive");
    }
    const auto& cal = s.calibration;
    const double near_cm = cal.coeffs(cal.x_max);
    const double far_cm = cal.coeffs(cal.x_min);
    if (!(m.track_setpoint_cm >= near_cm && m.track_setpoint_cm <= far_cm)) {
        throw ValidationError("mission.track_setpoint_cm", "setpoint lies outside the calibrated range [" +
                                                               std::to_string(near_cm) + ", " +
                                                               std::to_string(far_cm) + "] cm");
    }
    for (std::size_t i = 0; i < s.world.people.size(); ++i) {
        const auto& person = s.world.people[i];
        const std::string path = "people[" + std::to_string(i) + "]";
        if (!(person.height_cm >= 140.0 && person.height_cm <= 210.0)) {
            throw ValidationError(path + ".height_cm", "must lie in [140, 210]");
        }
        double prev = 0.0;
        for (std::size_t j = 0; j < person.script.size(); ++j) {
            if (!(person.script[j].t > prev) && !(j == 0 && person.script[j].t >= 0.0)) {
                throw ValidationError(path + ".script[" + std::to_string(j) + "].t", "times must be strictly increasing");
            }
            prev = person.script[j].t;
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (s.world.people[j].id == person.id) {
                throw ValidationError(path + ".id", "duplicate person id");
            }
        }
        if (person.id < 0 || person.id >= 1000) {
            throw ValidationError(path + ".id", "must lie in [0, 1000)");
        }
    }
    for (std::size_t i = 1; i < s.inputs.size(); ++i) {
        if (s.inputs[i].t < s.inputs[i - 1].t) {
            throw ValidationError("inputs[" + std::to_string(i) + "].t", "scripted inputs must be sorted by time");
        }
    }
    if (m.target_label) {
        bool known = s.registry.find(*m.target_label) != nullptr;
        for (const auto& in : s.inputs) {
            if (in.input.button == mission::Button::capture_template && in.input.capture_label == *m.target_label) {
                known = true;
            }
        }
        if (!known) {
            throw ValidationError("mission.target_label", "'" + *m.target_label + "' is not a registry template");
        }
    }
}

struct TickFlags {
    bool detect = false;
    bool pose = false;
    bool face = false;
    bool control = false;
};

struct LogRow {
    long long tick = 0;
    double t = 0.0;
    mission::Mode mode = mission::Mode::Free;
    WorldPose pose;
    VelocityCommand command;
    std::optional<double> range_est_cm;
    std::optional<double> range_true_cm;
    std::optional<int> target_id;
    std::vector<mission::Event> events;

    // Not written to the CSV.
    TickFlags ticks;
    bool frame_dropped = false;
    std::optional<double> horizontal_error_px;
    bool motion_hold = false;
};

/// One simulation run stepped a physics tick at a time.
///
/// Operator input is queued and drained on control ticks: manual stick values
/// replace the held stick immediately, buttons are applied one per tick and
/// excess buttons wait for later ticks.
class Session {
public:
    explicit Session(Scenario scenario) : scenario_(std::move(scenario)), rng_(scenario_.seed)
    {
        validate(scenario_);
        const auto phys = static_cast<long long>(scenario_.physics_rate_hz);
        const auto& p = scenario_.perception;
        detect_div_ = phys / p.detect_rate_hz;
        pose_div_ = phys / p.pose_rate_hz;
        face_div_ = phys / p.face_rate_hz;
        control_div_ = phys / p.control_rate_hz;
        ctx_ = {scenario_.mission, scenario_.camera, scenario_.calibration};
        mission_ = mission::initial_state(ctx_, scenario_.bank, scenario_.initial_mode);
        plant_ = scenario_.initial;
        registry_ = scenario_.registry;
    }

    /// Queues operator input for the next control tick.
    void enqueue(mission::OperatorInput input) { queue_.push_back(std::move(input)); }

    LogRow step()
    {
        const long long k = tick_;
        const double t = time();
        const double dt = 1.0 / scenario_.physics_rate_hz;

        LogRow row;
        row.tick = k;
        row.t = t;
        row.ticks = {k % detect_div_ == 0, k % pose_div_ == 0, k % face_div_ == 0, k % control_div_ == 0};

        while (next_script_ < scenario_.inputs.size() && scenario_.inputs[next_script_].t <= t) {
            enqueue(scenario_.inputs[next_script_++].input);
        }

        if (row.ticks.detect) {
            auto frame = render_perception(scenario_.world, plant_.pose, scenario_.camera, scenario_.perception, rng_,
                                           t, {row.ticks.pose, row.ticks.face});
            row.frame_dropped = !frame.has_value();
            if (frame) {
                if (row.ticks.pose) {
                    pending_pose_ = *frame;
                }
                if (row.ticks.face) {
                    pending_face_ = *frame;
                }
                last_frame_ = std::move(frame);
            } else {
                last_frame_.reset();
            }
        }

        if (row.ticks.control) {
            mission::OperatorInput input;
            while (!queue_.empty()) {
                auto& front = queue_.front();
                if (front.manual) {
                    stick_ = *front.manual;
                }
                if (front.button) {
                    if (input.button) {
                        front.manual.reset();
                        break;
                    }
                    input.button = front.button;
                    input.capture_label = front.capture_label;
                }
                queue_.pop_front();
            }
            input.manual = stick_;

            std::vector<mission::FaceMatch> matches;
            const auto mode = mission_.mode;
            if (pending_face_ && (mode == mission::Mode::Search || mode == mission::Mode::Reconfirm)) {
                for (const auto& d : pending_face_->detections) {
                    if (!d.embedding) {
                        continue;
                    }
                    if (auto r = registry_.match(identity::Embedding(*d.embedding))) {
                        matches.push_back({d.track_id, *r});
                    }
                }
            }

            const double control_dt = static_cast<double>(control_div_) * dt;
            auto out = mission::mission_step(ctx_, std::move(mission_), pending_pose_ ? &*pending_pose_ : nullptr,
                                             matches, input, t, control_dt);
            mission_ = std::move(out.state);
            command_ = out.command;
            if (out.capture) {
                registry_.capture(out.capture->label, identity::Embedding(out.capture->embedding), t);
            }
            row.events = std::move(out.events);
            pending_pose_.reset();
            pending_face_.reset();
        }

        row.mode = mission_.mode;
        row.pose = plant_.pose;
        row.command = command_;
        row.range_est_cm = mission_.mode == mission::Mode::Track ? mission_.range_estimate_cm : std::nullopt;
        row.target_id = mission_.target_track_id;
        row.horizontal_error_px = mission_.horizontal_error_px;
        row.motion_hold = mission_.motion_hold;
        if (mission_.target_track_id) {
            if (const auto* p = scenario_.world.person_for_track(*mission_.target_track_id, t)) {
                row.range_true_cm = true_range_cm(plant_.pose, person_pose_at(*p, t));
            }
        }

        plant_ = plant_step(scenario_.plant, plant_, command_, dt);
        ++tick_;
        return row;
    }

    double time() const { return static_cast<double>(tick_) / scenario_.physics_rate_hz; }
    long long tick() const { return tick_; }
    const Scenario& scenario() const { return scenario_; }
    const PlantState& plant() const { return plant_; }
    const mission::MissionState& mission() const { return mission_; }
    const identity::Registry& registry() const { return registry_; }
    const VelocityCommand& command() const { return command_; }
    /// Most recent detect-tick frame (empty if that frame was lost).
    const std::optional<DetectionFrame>& last_frame() const { return last_frame_; }

private:
    Scenario scenario_;
    Rng rng_;
    mission::MissionContext ctx_;
    mission::MissionState mission_;
    PlantState plant_;
    identity::Registry registry_;
    VelocityCommand command_;
    VelocityCommand stick_;
    std::deque<mission::OperatorInput> queue_;
    std::size_t next_script_ = 0;
    std::optional<DetectionFrame> pending_pose_;
    std::optional<DetectionFrame> pending_face_;
    std::optional<DetectionFrame> last_frame_;
    long long tick_ = 0;
    long long detect_div_ = 1, pose_div_ = 1, face_div_ = 1, control_div_ = 1;
};

/// Runs a scenario headless for `duration_s` and returns one row per physics tick.
inline std::vector<LogRow> run_closed_loop(const Scenario& scenario, double duration_s)
{
    Session session(scenario);
    const auto steps = static_cast<long long>(std::llround(duration_s * scenario.physics_rate_hz));
    std::vector<LogRow> rows;
    rows.reserve(static_cast<std::size_t>(std::max(0LL, steps)));
    for (long long k = 0; k < steps; ++k) {
        rows.push_back(session.step());
    }
    return rows;
}

} // namespace sartrack::sim

#endif // SARTRACK_SIMWORLD_HPP
