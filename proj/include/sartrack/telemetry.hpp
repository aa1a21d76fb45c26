#ifndef SARTRACK_TELEMETRY_HPP
#define SARTRACK_TELEMETRY_HPP

// Telemetry CSV files: the closed-loop log and the per-axis sysid log, plus
// run summaries that are always computed from the CSV text so they can be
// reproduced from a saved file.

#include "sartrack/errors.hpp"
#include "sartrack/io.hpp"
#include "sartrack/mission.hpp"
#include "sartrack/simworld.hpp"
#include "sartrack/sysid.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sartrack::telemetry {

inline constexpr std::string_view log_header =
    "t,mode,x,y,z,heading,vx_cmd,vz_cmd,yaw_cmd,range_est_cm,range_true_cm,target_id,event";

inline constexpr std::string_view sysid_header = "t,u,v";

namespace detail {

inline std::string quote(std::string_view s)
{
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw ParseError(lineno, "unterminated quoted field");
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline double parse_double(std::string_view field, std::size_t lineno, std::string_view column)
{
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw ParseError(lineno, "column " + std::string(column) + ": invalid number '" + std::string(field) + "'");
    }
    return value;
}

inline std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    return lines;
}

} // namespace detail

// ---------------------------------------------------------------------------
// sysid telemetry: t,u,v

inline std::string format_series(const sysid::TelemetrySeries& series)
{
    std::string out(sysid_header);
    out += '\n';
    for (std::size_t k = 0; k < series.inputs.size(); ++k) {
        out += io::exact(static_cast<double>(k) * series.dt);
        out += ',';
        out += io::exact(series.inputs[k]);
        out += ',';
        out += io::exact(series.outputs[k]);
        out += '\n';
    }
    return out;
}

/// Parses `t,u,v` text. Sampling must be uniform (relative jitter below 1e-6).
inline sysid::TelemetrySeries parse_series(const std::string& text)
{
    const auto lines = detail::lines_of(text);
    if (lines.empty() || lines.front().empty()) {
        throw ParseError(1, "empty file; expected header '" + std::string(sysid_header) + "'");
    }
    if (lines.front() != sysid_header) {
        throw ParseError(1, "expected header '" + std::string(sysid_header) + "', got '" + lines.front() + "'");
    }
    std::vector<double> t;
    sysid::TelemetrySeries series;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (lines[i].empty()) {
            continue;
        }
        const auto f = detail::split_csv_line(lines[i], lineno);
        if (f.size() != 3) {
            throw ParseError(lineno, "expected 3 fields, got " + std::to_string(f.size()));
        }
        t.push_back(detail::parse_double(f[0], lineno, "t"));
        series.inputs.push_back(detail::parse_double(f[1], lineno, "u"));
        series.outputs.push_back(detail::parse_double(f[2], lineno, "v"));
    }
    if (t.size() < 2) {
        throw ParseError(lines.size(), "need at least two samples");
    }
    series.dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    if (!(series.dt > 0.0)) {
        throw ParseError(2, "timestamps must increase");
    }
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (std::abs((t[k] - t[k - 1]) - series.dt) > 1e-6 * series.dt + 1e-12) {
            throw ParseError(k + 2, "non-uniform sampling interval");
        }
    }
    return series;
}

// ---------------------------------------------------------------------------
// closed-loop log

/// One parsed log line.
struct CsvRow {
    double t = 0.0;
    std::string mode;
    double x = 0.0, y = 0.0, z = 0.0, heading = 0.0;
    double vx_cmd = 0.0, vz_cmd = 0.0, yaw_cmd = 0.0;
    std::optional<double> range_est_cm;
    std::optional<double> range_true_cm;
    std::optional<int> target_id;
    std::string event;
};

inline std::string format_events(const std::vector<mission::Event>& events)
{
    std::string out;
    for (const auto& e : events) {
        if (!out.empty()) {
            out += ';';
        }
        out += e.name;
        if (!e.payload.empty()) {
            out += ':';
            out += e.payload;
        }
    }
    return out;
}

inline std::string format_row(const sim::LogRow& r)
{
    std::string out;
    out.reserve(160);
    auto num = [&](double v, int decimals = 6) {
        out += io::fixed(v, decimals);
        out += ',';
    };
    num(r.t);
    out += mission::to_string(r.mode);
    out += ',';
    num(r.pose.x);
    num(r.pose.y);
    num(r.pose.z);
    num(r.pose.heading);
    num(r.command.vx);
    num(r.command.vz);
    num(r.command.yaw_rate);
    if (r.range_est_cm) {
        out += io::fixed(*r.range_est_cm, 3);
    }
    out += ',';
    if (r.range_true_cm) {
        out += io::fixed(*r.range_true_cm, 3);
    }
    out += ',';
    if (r.target_id) {
        out += std::to_string(*r.target_id);
    }
    out += ',';
    if (!r.events.empty()) {
        out += detail::quote(format_events(r.events));
    }
    return out;
}

inline std::string format_log(const std::vector<sim::LogRow>& rows)
{
    std::string out(log_header);
    out += '\n';
    for (const auto& r : rows) {
        out += format_row(r);
        out += '\n';
    }
    return out;
}

inline std::vector<CsvRow> parse_log(const std::string& text)
{
    const auto lines = detail::lines_of(text);
    if (lines.empty() || lines.front() != log_header) {
        throw ParseError(1, "expected header '" + std::string(log_header) + "'");
    }
    std::vector<CsvRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t lineno = i + 1;
        if (lines[i].empty()) {
            continue;
        }
        const auto f = detail::split_csv_line(lines[i], lineno);
        if (f.size() != 13) {
            throw ParseError(lineno, "expected 13 fields, got " + std::to_string(f.size()));
        }
        CsvRow r;
        r.t = detail::parse_double(f[0], lineno, "t");
        r.mode = f[1];
        if (!mission::mode_from_string(r.mode)) {
            throw ParseError(lineno, "unknown mode '" + r.mode + "'");
        }
        r.x = detail::parse_double(f[2], lineno, "x");
        r.y = detail::parse_double(f[3], lineno, "y");
        r.z = detail::parse_double(f[4], lineno, "z");
        r.heading = detail::parse_double(f[5], lineno, "heading");
        r.vx_cmd = detail::parse_double(f[6], lineno, "vx_cmd");
        r.vz_cmd = detail::parse_double(f[7], lineno, "vz_cmd");
        r.yaw_cmd = detail::parse_double(f[8], lineno, "yaw_cmd");
        if (!f[9].empty()) {
            r.range_est_cm = detail::parse_double(f[9], lineno, "range_est_cm");
        }
        if (!f[10].empty()) {
            r.range_true_cm = detail::parse_double(f[10], lineno, "range_true_cm");
        }
        if (!f[11].empty()) {
            r.target_id = static_cast<int>(detail::parse_double(f[11], lineno, "target_id"));
        }
        r.event = f[12];
        rows.push_back(std::move(r));
    }
    return rows;
}

struct SummaryOptions {
    double setpoint_cm = 200.0;
    double band_cm = 30.0;
};

struct RunSummary {
    std::size_t rows = 0;
    double duration_s = 0.0;
    std::optional<double> track_start_s;
    /// Seconds from the first Track row until the true range stays inside the band.
    std::optional<double> convergence_time_s;
    /// RMS of (true range - setpoint) over Track rows after convergence.
    std::optional<double> range_rms_cm;
    double max_displacement_m = 0.0;
    std::vector<std::pair<double, std::string>> events;
};

inline RunSummary summarize(const std::vector<CsvRow>& rows, const SummaryOptions& opt = {})
{
    RunSummary s;
    s.rows = rows.size();
    if (rows.empty()) {
        return s;
    }
    s.duration_s = rows.back().t - rows.front().t;
    for (const auto& r : rows) {
        s.max_displacement_m = std::max(
            s.max_displacement_m, std::sqrt((r.x - rows.front().x) * (r.x - rows.front().x) +
                                            (r.y - rows.front().y) * (r.y - rows.front().y) +
                                            (r.z - rows.front().z) * (r.z - rows.front().z)));
        if (!r.event.empty()) {
            s.events.emplace_back(r.t, r.event);
        }
    }

    std::optional<std::size_t> start;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].mode == "Track") {
            start = i;
            break;
        }
    }
    if (!start) {
        return s;
    }
    s.track_start_s = rows[*start].t;

    // Last Track row outside the band; convergence is the row after it.
    std::optional<std::size_t> last_outside;
    for (std::size_t i = *start; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.mode == "Track" && r.range_true_cm && std::abs(*r.range_true_cm - opt.setpoint_cm) > opt.band_cm) {
            last_outside = i;
        }
    }
    const std::size_t conv = last_outside ? *last_outside + 1 : *start;
    if (conv >= rows.size()) {
        return s;
    }
    s.convergence_time_s = rows[conv].t - rows[*start].t;
    double sq = 0.0;
    std::size_t n = 0;
    for (std::size_t i = conv; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.mode == "Track" && r.range_true_cm) {
            sq += (*r.range_true_cm - opt.setpoint_cm) * (*r.range_true_cm - opt.setpoint_cm);
            ++n;
        }
    }
    if (n > 0) {
        s.range_rms_cm = std::sqrt(sq / static_cast<double>(n));
    }
    return s;
}

inline std::string format_summary(const RunSummary& s)
{
    auto opt = [](const std::optional<double>& v, int decimals) {
        return v ? io::fixed(*v, decimals) : std::string("none");
    };
    std::string out;
    out += "rows: " + std::to_string(s.rows) + "\n";
    out += "duration_s: " + io::fixed(s.duration_s, 3) + "\n";
    out += "track_start_s: " + opt(s.track_start_s, 3) + "\n";
    out += "convergence_time_s: " + opt(s.convergence_time_s, 3) + "\n";
    out += "range_rms_cm: " + opt(s.range_rms_cm, 3) + "\n";
    out += "max_displacement_m: " + io::fixed(s.max_displacement_m, 3) + "\n";
    out += "events: " + std::to_string(s.events.size()) + "\n";
    for (const auto& [t, e] : s.events) {
        out += "  " + io::fixed(t, 3) + " " + e + "\n";
    }
    return out;
}

} // namespace sartrack::telemetry

#endif // SARTRACK_TELEMETRY_HPP
