// sartrack: command-line front end for identification, tuning, calibration,
// headless runs, the live gateway and replays.
//
// Log verbosity: SARTRACK_LOG=trace|debug|info|warn|error|off (default warn).

#include "sartrack/gateway.hpp"
#include "sartrack/sartrack.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <map>

using namespace sartrack;

namespace {

void configure_logging()
{
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SARTRACK_LOG")) {
        const auto level = spdlog::level::from_str(env);
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("SARTRACK_LOG='{}' is not a level; keeping warn", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

/// Parses `KEY=value` tokens such as `K=1.2 tau=0.4`.
std::map<std::string, double> parse_assignments(const std::vector<std::string>& tokens)
{
    std::map<std::string, double> out;
    for (const auto& tok : tokens) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error("expected KEY=value, got '" + tok + "'");
        }
        try {
            std::size_t used = 0;
            const std::string value = tok.substr(eq + 1);
            out[tok.substr(0, eq)] = std::stod(value, &used);
            if (used != value.size()) {
                throw std::invalid_argument(value);
            }
        } catch (const std::logic_error&) {
            throw Error("invalid number in '" + tok + "'");
        }
    }
    return out;
}

struct SysidArgs {
    std::string input;
    std::vector<std::string> generate;
    std::string output;
    std::string report;
    double noise = 0.0;
    std::uint64_t seed = 1;
    double amplitude = 1.0;
    double period = 4.0;
    double duration = 20.0;
    double dt = 0.02;
};

int cmd_sysid(const SysidArgs& a)
{
    sysid::TelemetrySeries series;
    if (!a.generate.empty()) {
        const auto kv = parse_assignments(a.generate);
        for (const auto& [k, v] : kv) {
            if (k != "K" && k != "tau") {
                throw Error("--generate accepts K= and tau=, got '" + k + "'");
            }
        }
        if (!kv.count("K") || !kv.count("tau")) {
            throw Error("--generate needs both K= and tau=");
        }
        const sysid::FirstOrderModel truth{kv.at("K"), kv.at("tau")};
        if (!truth.valid()) {
            throw Error("--generate needs tau > 0");
        }
        series.dt = a.dt;
        series.inputs = sysid::generate_excitation(sysid::Pattern::square_wave, a.amplitude, a.period, a.duration, a.dt);
        series.outputs = sysid::simulate_model(truth, series.inputs, a.dt, 0.0);
        Rng rng(a.seed);
        for (auto& v : series.outputs) {
            v += a.noise * rng.normal();
        }
        if (!a.output.empty()) {
            io::write_file_atomic(a.output, telemetry::format_series(series));
            spdlog::info("wrote {} samples to {}", series.inputs.size(), a.output);
        }
    } else {
        series = telemetry::parse_series(io::read_file(a.input));
    }

    const auto [model, report] = sysid::fit_first_order(series);
    std::string text;
    text += "K: " + io::fixed(model.gain, 6) + "\n";
    text += "tau: " + io::fixed(model.tau, 6) + "\n";
    text += "fit_percent: " + (report.fit_percent ? io::fixed(*report.fit_percent, 4) : std::string("undefined")) + "\n";
    text += "residual_rms: " + io::fixed(report.residual_rms, 6) + "\n";
    text += "samples: " + std::to_string(series.inputs.size()) + "\n";
    text += "dt: " + io::fixed(series.dt, 6) + "\n";
    std::cout << text;
    if (!a.report.empty()) {
        io::write_file_atomic(a.report, text);
    }
    return 0;
}

struct TuneArgs {
    std::string scenario;
    double K = 0.0;
    double tau = 0.0;
    double settle = 2.0;
    double damping = 1.0;
    double loop_scale = 1.0;
};

int cmd_tune(const TuneArgs& a)
{
    if (!a.scenario.empty()) {
        const auto s = scenario::load(a.scenario);
        auto line = [](const char* axis, const control::AxisController& c) {
            std::cout << axis << ": kp=" << io::fixed(c.gains.kp, 8) << " kd=" << io::fixed(c.gains.kd, 8) << "\n";
        };
        line("x", s.bank.x_axis);
        line("z", s.bank.z_axis);
        line("yaw", s.bank.yaw_axis);
        return 0;
    }
    const auto g = control::tune_pd({a.K, a.tau}, a.settle, a.damping, a.loop_scale);
    std::cout << "kp: " << io::fixed(g.kp, 8) << "\nkd: " << io::fixed(g.kd, 8) << "\n";
    return 0;
}

struct CalibrateArgs {
    double focal = 700.0;
    double height = range::male_height_cm;
    double torso_ratio = range::default_torso_ratio;
    double min_cm = 140.0;
    double max_cm = 300.0;
    double step_cm = 10.0;
    std::string output;
};

int cmd_calibrate(const CalibrateArgs& a)
{
    const auto samples = range::pinhole_samples(a.focal, a.height, a.torso_ratio, a.min_cm, a.max_cm, a.step_cm);
    const auto calib = range::fit_calibration(samples, a.height);
    double max_err = 0.0;
    std::string csv = "x_px,y_cm_fit,y_cm_true\n";
    for (const auto& s : samples) {
        const double fit = calib.coeffs(s.x_px);
        max_err = std::max(max_err, std::abs(fit - s.y_cm));
        csv += io::fixed(s.x_px, 6) + "," + io::fixed(fit, 6) + "," + io::fixed(s.y_cm, 6) + "\n";
    }
    std::cout << "k1: " << io::exact(calib.coeffs.k1) << "\nk2: " << io::exact(calib.coeffs.k2)
              << "\nk3: " << io::exact(calib.coeffs.k3) << "\nx_min: " << io::fixed(calib.x_min, 6)
              << "\nx_max: " << io::fixed(calib.x_max, 6) << "\nassumed_height_cm: " << io::fixed(a.height, 1)
              << "\nmax_abs_error_cm: " << io::fixed(max_err, 3) << "\n";
    if (!a.output.empty()) {
        io::write_file_atomic(a.output, csv);
    }
    return 0;
}

void emit_log_and_summary(const std::vector<sim::LogRow>& rows, const sim::Scenario& s, const std::string& output,
                          const std::string& summary_path)
{
    const auto csv = telemetry::format_log(rows);
    if (!output.empty()) {
        io::write_file_atomic(output, csv);
        spdlog::info("wrote {} rows to {}", rows.size(), output);
    }
    telemetry::SummaryOptions opt;
    opt.setpoint_cm = s.mission.track_setpoint_cm;
    const auto text = telemetry::format_summary(telemetry::summarize(telemetry::parse_log(csv), opt));
    std::cout << text;
    if (!summary_path.empty()) {
        io::write_file_atomic(summary_path, text);
    }
}

struct RunArgs {
    std::string scenario;
    double duration = 30.0;
    std::string output;
    std::string summary;
};

int cmd_run(const RunArgs& a)
{
    const auto s = scenario::load(a.scenario);
    const auto rows = sim::run_closed_loop(s, a.duration);
    emit_log_and_summary(rows, s, a.output, a.summary);
    return 0;
}

struct ServeArgs {
    std::string scenario;
    std::string address = "127.0.0.1";
    unsigned short port = 8765;
    std::optional<double> duration;
    double speed = 1.0;
    std::string output;
    std::string record;
};

int cmd_serve(const ServeArgs& a)
{
    const auto s = scenario::load(a.scenario);
    gateway::net::io_context ioc;
    gateway::Gateway gw(ioc, s, {a.address, a.port, a.duration, a.speed});
    gateway::net::signal_set signals(ioc, SIGINT, SIGTERM);
    signals.async_wait([&](const boost::system::error_code& ec, int) {
        if (!ec) {
            gw.stop();
        }
    });
    gateway::net::steady_timer grace(ioc);
    gw.on_stop([&] {
        signals.cancel();
        // Clients that never answer the close handshake must not keep us alive.
        grace.expires_after(std::chrono::seconds(2));
        grace.async_wait([&](const boost::system::error_code&) { ioc.stop(); });
    });
    std::cout << "listening on ws://" << a.address << ":" << gw.port() << std::endl;
    gw.start();
    ioc.run();

    if (!a.record.empty()) {
        io::write_file_atomic(a.record, scenario::format_recording(gw.recording()));
    }
    emit_log_and_summary(gw.rows(), s, a.output, "");
    return 0;
}

struct ReplayArgs {
    std::string log;
    std::string scenario;
    std::string inputs;
    std::optional<double> duration;
    std::string output;
    double setpoint = 200.0;
};

int cmd_replay(const ReplayArgs& a)
{
    if (!a.log.empty()) {
        telemetry::SummaryOptions opt;
        opt.setpoint_cm = a.setpoint;
        std::cout << telemetry::format_summary(telemetry::summarize(telemetry::parse_log(io::read_file(a.log)), opt));
        return 0;
    }
    if (a.scenario.empty() || a.inputs.empty()) {
        throw Error("replay needs --log, or --scenario together with --inputs");
    }
    const auto s = scenario::load(a.scenario);
    const auto inputs = scenario::parse_recording(io::read_file(a.inputs));
    long long steps = 0;
    if (a.duration) {
        steps = std::llround(*a.duration * s.physics_rate_hz);
    } else if (!inputs.empty()) {
        steps = inputs.back().tick + 1;
    }
    emit_log_and_summary(scenario::replay(s, inputs, steps), s, a.output, "");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    configure_logging();
    CLI::App app{"Search-and-rescue UAV tracking simulator"};
    app.require_subcommand(1);

    SysidArgs sysid_args;
    auto* sysid_cmd = app.add_subcommand("sysid", "Fit a first-order model to t,u,v telemetry");
    auto* input_opt = sysid_cmd->add_option("--input", sysid_args.input, "Telemetry CSV (t,u,v)");
    auto* gen_opt = sysid_cmd->add_option("--generate", sysid_args.generate, "Synthesize telemetry: K=<gain> tau=<s>")
                        ->expected(1, 2);
    input_opt->excludes(gen_opt);
    sysid_cmd->add_option("--output", sysid_args.output, "Write generated telemetry here");
    sysid_cmd->add_option("--report", sysid_args.report, "Write the fit report here");
    sysid_cmd->add_option("--noise", sysid_args.noise, "Output noise sigma for --generate");
    sysid_cmd->add_option("--seed", sysid_args.seed, "Noise seed for --generate");
    sysid_cmd->add_option("--amplitude", sysid_args.amplitude, "Square-wave amplitude");
    sysid_cmd->add_option("--period", sysid_args.period, "Square-wave period, s");
    sysid_cmd->add_option("--duration", sysid_args.duration, "Excitation length, s");
    sysid_cmd->add_option("--dt", sysid_args.dt, "Sample interval, s");

    TuneArgs tune_args;
    auto* tune_cmd = app.add_subcommand("tune", "PD gains by pole placement");
    auto* tune_scn = tune_cmd->add_option("--scenario", tune_args.scenario, "Print the gains a scenario resolves to");
    tune_cmd->add_option("--K", tune_args.K, "Plant gain")->excludes(tune_scn);
    tune_cmd->add_option("--tau", tune_args.tau, "Plant time constant, s")->excludes(tune_scn);
    tune_cmd->add_option("--settle", tune_args.settle, "Settle time, s");
    tune_cmd->add_option("--damping", tune_args.damping, "Damping ratio in [0.7, 1.5]");
    tune_cmd->add_option("--loop-scale", tune_args.loop_scale, "Error units per plant output unit");

    CalibrateArgs cal_args;
    auto* cal_cmd = app.add_subcommand("calibrate", "Fit the range quadratic to pinhole samples");
    cal_cmd->add_option("--focal", cal_args.focal, "Focal length, px");
    cal_cmd->add_option("--height", cal_args.height, "Assumed person height, cm");
    cal_cmd->add_option("--torso-ratio", cal_args.torso_ratio, "Shoulder-hip length / height");
    cal_cmd->add_option("--min-cm", cal_args.min_cm, "Nearest calibration range, cm");
    cal_cmd->add_option("--max-cm", cal_args.max_cm, "Farthest calibration range, cm");
    cal_cmd->add_option("--step-cm", cal_args.step_cm, "Sample spacing, cm");
    cal_cmd->add_option("--output", cal_args.output, "Write x_px,y_cm_fit,y_cm_true CSV here");

    RunArgs run_args;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario headless");
    run_cmd->add_option("--scenario", run_args.scenario, "Scenario JSON")->required();
    run_cmd->add_option("--duration", run_args.duration, "Simulated seconds");
    run_cmd->add_option("--output", run_args.output, "Telemetry CSV");
    run_cmd->add_option("--summary", run_args.summary, "Write the summary here");

    ServeArgs serve_args;
    auto* serve_cmd = app.add_subcommand("serve", "Run a scenario live behind the websocket gateway");
    serve_cmd->add_option("--scenario", serve_args.scenario, "Scenario JSON")->required();
    serve_cmd->add_option("--address", serve_args.address, "Bind address");
    serve_cmd->add_option("--port", serve_args.port, "Port (0 picks one)");
    serve_cmd->add_option("--duration", serve_args.duration, "Stop after this many simulated seconds");
    serve_cmd->add_option("--speed", serve_args.speed, "Simulated seconds per wall-clock second");
    serve_cmd->add_option("--output", serve_args.output, "Telemetry CSV written on exit");
    serve_cmd->add_option("--record", serve_args.record, "Operator inputs written on exit, for replay");

    ReplayArgs replay_args;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run recorded inputs, or summarize a saved log");
    auto* log_opt = replay_cmd->add_option("--log", replay_args.log, "Telemetry CSV to summarize");
    replay_cmd->add_option("--scenario", replay_args.scenario, "Scenario JSON")->excludes(log_opt);
    replay_cmd->add_option("--inputs", replay_args.inputs, "Input recording from serve --record")->excludes(log_opt);
    replay_cmd->add_option("--duration", replay_args.duration, "Simulated seconds (default: through the last input)");
    replay_cmd->add_option("--output", replay_args.output, "Telemetry CSV");
    replay_cmd->add_option("--setpoint", replay_args.setpoint, "Range setpoint for --log summaries, cm");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sysid_cmd) {
            if (sysid_args.input.empty() && sysid_args.generate.empty()) {
                throw Error("sysid needs --input or --generate");
            }
            return cmd_sysid(sysid_args);
        }
        if (*tune_cmd) {
            return cmd_tune(tune_args);
        }
        if (*cal_cmd) {
            return cmd_calibrate(cal_args);
        }
        if (*run_cmd) {
            return cmd_run(run_args);
        }
        if (*serve_cmd) {
            return cmd_serve(serve_args);
        }
        if (*replay_cmd) {
            return cmd_replay(replay_args);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
