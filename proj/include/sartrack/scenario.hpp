#ifndef SARTRACK_SCENARIO_HPP
#define SARTRACK_SCENARIO_HPP

// Scenario files: JSON with a versioned "schema" field. Unknown fields are
// rejected and every error names the offending field path.
//
// Controller gains come either explicitly ("gains") or from a tuning spec
// ("tuning"), which tunes against the nominal plant ("model") or against a
// model identified from recorded plant telemetry ("identify"). The range
// calibration is either explicit or fitted to pinhole-camera samples
// ("generate"). Registry templates come from a registry file or from the
// people's own embeddings ("from_people").

#include "sartrack/control.hpp"
#include "sartrack/errors.hpp"
#include "sartrack/identity.hpp"
#include "sartrack/io.hpp"
#include "sartrack/mission.hpp"
#include "sartrack/range.hpp"
#include "sartrack/simworld.hpp"
#include "sartrack/sysid.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace sartrack::scenario {

using json = nlohmann::json;

inline constexpr std::string_view schema_id = "sartrack-scenario/1";

namespace detail {

/// Object reader that remembers its path and which keys were consumed.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ValidationError(display(), "must be an object");
        }
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key)
    {
        seen_.insert(key);
        return j_.contains(key);
    }

    const json& raw(const std::string& key)
    {
        if (!has(key)) {
            throw ValidationError(field(key), "is required");
        }
        return j_.at(key);
    }

    double number(const std::string& key, double fallback)
    {
        return has(key) ? number(key) : fallback;
    }

    double number(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_number()) {
            throw ValidationError(field(key), "must be a number");
        }
        return v.get<double>();
    }

    long long integer(const std::string& key, long long fallback)
    {
        if (!has(key)) {
            return fallback;
        }
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) {
            throw ValidationError(field(key), "must be an integer");
        }
        return v.get<long long>();
    }

    std::string string(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_string()) {
            throw ValidationError(field(key), "must be a string");
        }
        return v.get<std::string>();
    }

    std::string string(const std::string& key, const std::string& fallback)
    {
        return has(key) ? string(key) : fallback;
    }

    Reader object(const std::string& key) { return Reader(raw(key), field(key)); }

    const json& array(const std::string& key)
    {
        const auto& v = raw(key);
        if (!v.is_array()) {
            throw ValidationError(field(key), "must be an array");
        }
        return v;
    }

    /// Throws on the first key that was never asked for.
    void finish() const
    {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.count(key)) {
                throw ValidationError(field(key), "unknown field");
            }
        }
    }

    const std::string& path() const { return path_; }

private:
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline sysid::FirstOrderModel read_model(Reader r, sysid::FirstOrderModel m)
{
    m.gain = r.number("gain", m.gain);
    m.tau = r.number("tau", m.tau);
    r.finish();
    if (!m.valid()) {
        throw ValidationError(r.path(), "needs tau > 0 and a finite gain");
    }
    return m;
}

inline control::AxisLimits read_limits(Reader r, control::AxisLimits l)
{
    l.cmd_min = r.number("cmd_min", l.cmd_min);
    l.cmd_max = r.number("cmd_max", l.cmd_max);
    l.slew_max = r.number("slew_max", l.slew_max);
    r.finish();
    if (!l.valid()) {
        throw ValidationError(r.path(), "needs cmd_min < cmd_max and slew_max > 0");
    }
    return l;
}

inline control::PDGains read_gains(Reader r)
{
    control::PDGains g{r.number("kp"), r.number("kd", 0.0)};
    r.finish();
    if (!g.valid()) {
        throw ValidationError(r.path(), "needs kp > 0 and kd >= 0");
    }
    return g;
}

inline VelocityCommand read_command(Reader r)
{
    VelocityCommand c{r.number("vx", 0.0), r.number("vy", 0.0), r.number("vz", 0.0), r.number("yaw_rate", 0.0)};
    r.finish();
    return c;
}

} // namespace detail

/// Default per-axis tuning targets (settle time in seconds).
struct TuningSpec {
    bool identify = false;
    double settle_x_s = 1.0;
    double settle_z_s = 1.5;
    double settle_yaw_s = 0.7;
    double damping = 1.0;
    double noise_sigma = 0.02;
    double excitation_amplitude = 1.0;
    double excitation_period_s = 4.0;
    double excitation_duration_s = 20.0;
    double excitation_dt_s = 0.02;
};

/// Tunes the three tracking axes. With `identify`, each axis is excited on
/// the plant, logged with noise and fitted first; otherwise the nominal
/// plant model is used directly.
inline control::ControllerBank tune_bank(const sim::Plant& plant, const CameraModel& camera, double setpoint_cm,
                                         const TuningSpec& spec, std::uint64_t seed, control::ControllerBank bank)
{
    auto model_for = [&](sim::Axis axis, std::uint64_t stream) {
        if (!spec.identify) {
            return sim::effective_axis_model(plant, axis);
        }
        const auto u = sysid::generate_excitation(sysid::Pattern::square_wave, spec.excitation_amplitude,
                                                  spec.excitation_period_s, spec.excitation_duration_s,
                                                  spec.excitation_dt_s);
        Rng rng(derive_seed(seed, stream));
        const auto series = sim::record_axis_telemetry(plant, axis, u, spec.excitation_dt_s, spec.noise_sigma, rng);
        return sysid::fit_first_order(series).first;
    };
    bank.x_axis.gains = control::tune_pd(model_for(sim::Axis::x, 0x5101), spec.settle_x_s, spec.damping,
                                         sim::loop_scale(sim::Axis::x, camera, setpoint_cm));
    bank.z_axis.gains = control::tune_pd(model_for(sim::Axis::z, 0x5102), spec.settle_z_s, spec.damping,
                                         sim::loop_scale(sim::Axis::z, camera, setpoint_cm));
    bank.yaw_axis.gains = control::tune_pd(model_for(sim::Axis::yaw, 0x5103), spec.settle_yaw_s, spec.damping,
                                           sim::loop_scale(sim::Axis::yaw, camera, setpoint_cm));
    return bank;
}

/// Builds a validated scenario. `base_dir` resolves relative registry paths.
inline sim::Scenario from_json(const json& doc, const std::filesystem::path& base_dir = {})
{
    using detail::Reader;
    Reader root(doc, "");
    const auto schema = root.string("schema");
    if (schema != schema_id) {
        throw ValidationError("schema", "expected '" + std::string(schema_id) + "', got '" + schema + "'");
    }

    sim::Scenario s;
    const auto seed = root.integer("seed", 1);
    if (seed < 0) {
        throw ValidationError("seed", "must be >= 0");
    }
    s.seed = static_cast<std::uint64_t>(seed);
    s.physics_rate_hz = root.number("physics_rate_hz", s.physics_rate_hz);

    if (root.has("camera")) {
        auto r = root.object("camera");
        s.camera.focal_px = r.number("focal_px", s.camera.focal_px);
        s.camera.center_x = r.number("center_x", s.camera.center_x);
        s.camera.center_y = r.number("center_y", s.camera.center_y);
        s.camera.width = r.number("width", s.camera.width);
        s.camera.height = r.number("height", s.camera.height);
        r.finish();
    }

    if (root.has("plant")) {
        auto r = root.object("plant");
        if (r.has("x")) {
            s.plant.models.x = detail::read_model(r.object("x"), s.plant.models.x);
        }
        if (r.has("z")) {
            s.plant.models.z = detail::read_model(r.object("z"), s.plant.models.z);
        }
        if (r.has("yaw")) {
            s.plant.models.yaw = detail::read_model(r.object("yaw"), s.plant.models.yaw);
        }
        s.plant.scale.max_forward_mps = r.number("max_forward_mps", s.plant.scale.max_forward_mps);
        s.plant.scale.max_vertical_mps = r.number("max_vertical_mps", s.plant.scale.max_vertical_mps);
        r.finish();
        if (!(s.plant.scale.max_forward_mps > 0.0)) {
            throw ValidationError("plant.max_forward_mps", "must be positive");
        }
        if (!(s.plant.scale.max_vertical_mps > 0.0)) {
            throw ValidationError("plant.max_vertical_mps", "must be positive");
        }
    }

    if (root.has("uav")) {
        auto r = root.object("uav");
        s.initial.pose.x = r.number("x", 0.0);
        s.initial.pose.y = r.number("y", 0.0);
        s.initial.pose.z = r.number("z", 1.2);
        s.initial.pose.heading = normalize_heading(r.number("heading", 0.0));
        r.finish();
    } else {
        s.initial.pose.z = 1.2;
    }

    if (root.has("perception")) {
        auto r = root.object("perception");
        auto& p = s.perception;
        p.detect_rate_hz = static_cast<int>(r.integer("detect_rate_hz", p.detect_rate_hz));
        p.pose_rate_hz = static_cast<int>(r.integer("pose_rate_hz", p.pose_rate_hz));
        p.face_rate_hz = static_cast<int>(r.integer("face_rate_hz", p.face_rate_hz));
        p.control_rate_hz = static_cast<int>(r.integer("control_rate_hz", p.control_rate_hz));
        p.pixel_noise_sigma = r.number("pixel_noise_sigma", p.pixel_noise_sigma);
        p.embedding_noise_sigma = r.number("embedding_noise_sigma", p.embedding_noise_sigma);
        p.glitch_prob = r.number("glitch_prob", p.glitch_prob);
        if (r.has("face_visibility_half_angle_deg")) {
            p.face_visibility_half_angle = r.number("face_visibility_half_angle_deg") * std::numbers::pi / 180.0;
        }
        p.torso_ratio = r.number("torso_ratio", p.torso_ratio);
        p.bbox_margin_px = r.number("bbox_margin_px", p.bbox_margin_px);
        r.finish();
    }

    if (root.has("disturbance")) {
        auto r = root.object("disturbance");
        auto& d = s.world.disturbance;
        d.output_noise_sigma = r.number("output_noise_sigma", d.output_noise_sigma);
        d.range_noise_sigma_cm = r.number("range_noise_sigma_cm", d.range_noise_sigma_cm);
        d.sine_amplitude_cm = r.number("sine_amplitude_cm", d.sine_amplitude_cm);
        d.sine_period_s = r.number("sine_period_s", d.sine_period_s);
        r.finish();
        if (d.output_noise_sigma < 0.0) {
            throw ValidationError("disturbance.output_noise_sigma", "must be >= 0");
        }
        if (d.range_noise_sigma_cm < 0.0) {
            throw ValidationError("disturbance.range_noise_sigma_cm", "must be >= 0");
        }
        if (d.sine_amplitude_cm != 0.0 && !(d.sine_period_s > 0.0)) {
            throw ValidationError("disturbance.sine_period_s", "must be positive when the amplitude is nonzero");
        }
    }

    if (root.has("mission")) {
        auto r = root.object("mission");
        auto& m = s.mission;
        m.track_setpoint_cm = r.number("track_setpoint_cm", m.track_setpoint_cm);
        m.search_yaw_rate = r.number("search_yaw_rate", m.search_yaw_rate);
        m.yaw_cap = r.number("yaw_cap", m.yaw_cap);
        m.loss_frames = static_cast<int>(r.integer("loss_frames", m.loss_frames));
        m.reconfirm_timeout_s = r.number("reconfirm_timeout_s", m.reconfirm_timeout_s);
        m.centering_tolerance_px = r.number("centering_tolerance_px", m.centering_tolerance_px);
        m.capture_radius_px = r.number("capture_radius_px", m.capture_radius_px);
        if (r.has("target_label")) {
            m.target_label = r.string("target_label");
        }
        if (r.has("guard")) {
            auto g = r.object("guard");
            m.guard.max_closing_speed_cm_s = g.number("max_closing_speed_cm_s", m.guard.max_closing_speed_cm_s);
            m.guard.hold_duration_s = g.number("hold_duration_s", m.guard.hold_duration_s);
            g.finish();
            if (!(m.guard.max_closing_speed_cm_s > 0.0)) {
                throw ValidationError("mission.guard.max_closing_speed_cm_s", "must be positive");
            }
            if (!(m.guard.hold_duration_s >= 0.0)) {
                throw ValidationError("mission.guard.hold_duration_s", "must be >= 0");
            }
        }
        if (r.has("initial_mode")) {
            const auto name = r.string("initial_mode");
            const auto mode = mission::mode_from_string(name);
            if (!mode) {
                throw ValidationError("mission.initial_mode", "unknown mode '" + name + "'");
            }
            s.initial_mode = *mode;
        }
        r.finish();
    }

    // People before the registry: "from_people" copies their embeddings.
    if (root.has("people")) {
        const auto& arr = root.array("people");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto path = detail::index("people", i);
            Reader r(arr[i], path);
            sim::Person p;
            p.id = static_cast<int>(r.integer("id", static_cast<long long>(i + 1)));
            p.label = r.string("label", "person" + std::to_string(p.id));
            p.x = r.number("x");
            p.y = r.number("y");
            p.height_cm = r.number("height_cm", range::male_height_cm);
            p.heading = normalize_heading(r.number("heading", 0.0));
            p.embedding = sim::make_identity_embedding(s.seed, p.id);
            if (r.has("script")) {
                const auto& script = r.array("script");
                for (std::size_t j = 0; j < script.size(); ++j) {
                    Reader w(script[j], detail::index(path + ".script", j));
                    sim::Waypoint wp{w.number("t"), w.number("x"), w.number("y"), std::nullopt};
                    if (w.has("heading")) {
                        wp.heading = w.number("heading");
                    }
                    w.finish();
                    p.script.push_back(wp);
                }
            }
            r.finish();
            s.world.people.push_back(std::move(p));
        }
    }

    if (root.has("blackouts")) {
        const auto& arr = root.array("blackouts");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader r(arr[i], detail::index("blackouts", i));
            sim::Blackout b{r.number("start_s"), r.number("duration_s")};
            r.finish();
            if (!(b.duration_s > 0.0)) {
                throw ValidationError(r.field("duration_s"), "must be positive");
            }
            s.world.blackouts.push_back(b);
        }
    }

    if (root.has("posture_events")) {
        const auto& arr = root.array("posture_events");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader r(arr[i], detail::index("posture_events", i));
            sim::PostureEvent e{static_cast<int>(r.integer("person_id", 1)), r.number("start_s"),
                                r.number("duration_s"), r.number("scale")};
            r.finish();
            if (!(e.scale > 0.0)) {
                throw ValidationError(r.field("scale"), "must be positive");
            }
            const bool known = std::any_of(s.world.people.begin(), s.world.people.end(),
                                           [&](const sim::Person& p) { return p.id == e.person_id; });
            if (!known) {
                throw ValidationError(r.field("person_id"), "no person with id " + std::to_string(e.person_id));
            }
            s.world.posture_events.push_back(e);
        }
    }

    if (root.has("calibration")) {
        auto r = root.object("calibration");
        if (r.has("generate")) {
            auto g = r.object("generate");
            const double height = g.number("assumed_height_cm", range::male_height_cm);
            const double min_cm = g.number("min_cm", 140.0);
            const double max_cm = g.number("max_cm", 300.0);
            const double step_cm = g.number("step_cm", 10.0);
            g.finish();
            r.finish();
            if (!(min_cm > 0.0 && max_cm > min_cm && step_cm > 0.0)) {
                throw ValidationError("calibration.generate", "needs 0 < min_cm < max_cm and step_cm > 0");
            }
            try {
                s.calibration = range::fit_calibration(
                    range::pinhole_samples(s.camera.focal_px, height, s.perception.torso_ratio, min_cm, max_cm,
                                           step_cm),
                    height);
            } catch (const Error& e) {
                throw ValidationError("calibration.generate", e.what());
            }
        } else {
            s.calibration.coeffs = {r.number("k1"), r.number("k2"), r.number("k3")};
            s.calibration.x_min = r.number("x_min");
            s.calibration.x_max = r.number("x_max");
            s.calibration.assumed_height_cm = r.number("assumed_height_cm", range::male_height_cm);
            r.finish();
            if (!(s.calibration.x_min > 0.0 && s.calibration.x_max > s.calibration.x_min)) {
                throw ValidationError("calibration.x_min", "needs 0 < x_min < x_max");
            }
            if (!s.calibration.monotone_decreasing()) {
                throw ValidationError("calibration", "polynomial must be strictly decreasing on [x_min, x_max]");
            }
        }
    } else {
        s.calibration = range::fit_calibration(
            range::pinhole_samples(s.camera.focal_px, range::male_height_cm, s.perception.torso_ratio, 140.0, 300.0,
                                   10.0),
            range::male_height_cm);
    }

    control::AxisLimits x_limits{-1.0, 1.0, 4.0};
    control::AxisLimits z_limits{-1.0, 1.0, 4.0};
    control::AxisLimits yaw_limits{-1.57, 1.57, 10.0};
    std::optional<json> gains_doc;
    std::optional<TuningSpec> tuning = TuningSpec{};
    if (root.has("controller")) {
        auto r = root.object("controller");
        if (r.has("limits")) {
            auto l = r.object("limits");
            if (l.has("x")) {
                x_limits = detail::read_limits(l.object("x"), x_limits);
            }
            if (l.has("z")) {
                z_limits = detail::read_limits(l.object("z"), z_limits);
            }
            if (l.has("yaw")) {
                yaw_limits = detail::read_limits(l.object("yaw"), yaw_limits);
            }
            l.finish();
        }
        const bool has_gains = r.has("gains");
        const bool has_tuning = r.has("tuning");
        if (has_gains && has_tuning) {
            throw ValidationError("controller", "give either gains or tuning, not both");
        }
        if (has_gains) {
            auto g = r.object("gains");
            s.bank.x_axis.gains = detail::read_gains(g.object("x"));
            s.bank.z_axis.gains = detail::read_gains(g.object("z"));
            s.bank.yaw_axis.gains = detail::read_gains(g.object("yaw"));
            g.finish();
            tuning.reset();
        }
        if (has_tuning) {
            auto t = r.object("tuning");
            TuningSpec spec;
            const auto source = t.string("source", "model");
            if (source != "model" && source != "identify") {
                throw ValidationError("controller.tuning.source", "must be 'model' or 'identify'");
            }
            spec.identify = source == "identify";
            if (t.has("settle_time_s")) {
                auto st = t.object("settle_time_s");
                spec.settle_x_s = st.number("x", spec.settle_x_s);
                spec.settle_z_s = st.number("z", spec.settle_z_s);
                spec.settle_yaw_s = st.number("yaw", spec.settle_yaw_s);
                st.finish();
            }
            spec.damping = t.number("damping", spec.damping);
            spec.noise_sigma = t.number("noise_sigma", spec.noise_sigma);
            t.finish();
            tuning = spec;
        }
        r.finish();
    }
    s.bank.x_axis.limits = x_limits;
    s.bank.z_axis.limits = z_limits;
    s.bank.yaw_axis.limits = yaw_limits;
    if (tuning) {
        try {
            s.bank = tune_bank(s.plant, s.camera, s.mission.track_setpoint_cm, *tuning, s.seed, s.bank);
        } catch (const Error& e) {
            throw ValidationError("controller.tuning", e.what());
        }
    }

    if (root.has("registry")) {
        auto r = root.object("registry");
        if (r.has("file")) {
            auto path = std::filesystem::path(r.string("file"));
            if (path.is_relative()) {
                path = base_dir / path;
            }
            try {
                s.registry = identity::load_registry(path);
            } catch (const Error& e) {
                throw ValidationError("registry.file", e.what());
            }
        }
        if (r.has("from_people")) {
            const auto& arr = r.array("from_people");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto field = detail::index("registry.from_people", i);
                if (!arr[i].is_string()) {
                    throw ValidationError(field, "must be a person label");
                }
                const auto label = arr[i].get<std::string>();
                const auto it = std::find_if(s.world.people.begin(), s.world.people.end(),
                                             [&](const sim::Person& p) { return p.label == label; });
                if (it == s.world.people.end()) {
                    throw ValidationError(field, "no person labeled '" + label + "'");
                }
                s.registry.capture(label, identity::Embedding(it->embedding), 0.0);
            }
        }
        r.finish();
    }

    if (root.has("inputs")) {
        const auto& arr = root.array("inputs");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            Reader r(arr[i], detail::index("inputs", i));
            sim::ScriptedInput in;
            in.t = r.number("t");
            if (r.has("manual")) {
                in.input.manual = detail::read_command(r.object("manual"));
            }
            if (r.has("button")) {
                const auto name = r.string("button");
                in.input.button = mission::button_from_string(name);
                if (!in.input.button) {
                    throw ValidationError(r.field("button"), "unknown button '" + name + "'");
                }
            }
            in.input.capture_label = r.string("label", "");
            r.finish();
            if (!in.input.manual && !in.input.button) {
                throw ValidationError(r.path(), "needs 'manual' or 'button'");
            }
            s.inputs.push_back(std::move(in));
        }
    }
    root.finish();

    sim::validate(s);
    return s;
}

inline sim::Scenario parse(const std::string& text, const std::filesystem::path& base_dir = {})
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("scenario is not valid JSON: ") + e.what());
    }
    return from_json(doc, base_dir);
}

inline sim::Scenario load(const std::filesystem::path& path)
{
    return parse(io::read_file(path), path.parent_path());
}

// ---------------------------------------------------------------------------
// Recorded operator inputs (serve --record, replay --inputs)

/// Inputs keyed by the physics tick at which they were queued.
struct RecordedInput {
    long long tick = 0;
    mission::OperatorInput input;
};

inline json input_to_json(const mission::OperatorInput& in)
{
    json j = json::object();
    if (in.manual) {
        j["manual"] = {{"vx", in.manual->vx}, {"vy", in.manual->vy}, {"vz", in.manual->vz},
                       {"yaw_rate", in.manual->yaw_rate}};
    }
    if (in.button) {
        j["button"] = std::string(mission::to_string(*in.button));
    }
    if (!in.capture_label.empty()) {
        j["label"] = in.capture_label;
    }
    return j;
}

inline std::string format_recording(const std::vector<RecordedInput>& inputs)
{
    json arr = json::array();
    for (const auto& r : inputs) {
        auto j = input_to_json(r.input);
        j["tick"] = r.tick;
        arr.push_back(std::move(j));
    }
    json doc = {{"schema", "sartrack-inputs/1"}, {"inputs", std::move(arr)}};
    return doc.dump(2) + "\n";
}

inline std::vector<RecordedInput> parse_recording(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(std::string("input recording is not valid JSON: ") + e.what());
    }
    detail::Reader root(doc, "");
    if (root.string("schema") != "sartrack-inputs/1") {
        throw ValidationError("schema", "expected 'sartrack-inputs/1'");
    }
    std::vector<RecordedInput> out;
    const auto& arr = root.array("inputs");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        detail::Reader r(arr[i], detail::index("inputs", i));
        RecordedInput rec;
        rec.tick = r.integer("tick", -1);
        if (rec.tick < 0 || (!out.empty() && rec.tick < out.back().tick)) {
            throw ValidationError(r.field("tick"), "ticks must be non-negative and sorted");
        }
        if (r.has("manual")) {
            rec.input.manual = detail::read_command(r.object("manual"));
        }
        if (r.has("button")) {
            const auto name = r.string("button");
            rec.input.button = mission::button_from_string(name);
            if (!rec.input.button) {
                throw ValidationError(r.field("button"), "unknown button '" + name + "'");
            }
        }
        rec.input.capture_label = r.string("label", "");
        r.finish();
        out.push_back(std::move(rec));
    }
    root.finish();
    return out;
}

/// Steps a session for `steps` ticks, queueing each recorded input before the tick it was recorded at.
inline std::vector<sim::LogRow> replay(const sim::Scenario& scenario, const std::vector<RecordedInput>& inputs,
                                       long long steps)
{
    sim::Session session(scenario);
    std::vector<sim::LogRow> rows;
    rows.reserve(static_cast<std::size_t>(std::max(0LL, steps)));
    std::size_t next = 0;
    for (long long k = 0; k < steps; ++k) {
        while (next < inputs.size() && inputs[next].tick <= k) {
            session.enqueue(inputs[next++].input);
        }
        rows.push_back(session.step());
    }
    return rows;
}

} // namespace sartrack::scenario

#endif // SARTRACK_SCENARIO_HPP
