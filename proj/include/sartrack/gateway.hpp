#ifndef SARTRACK_GATEWAY_HPP
#define SARTRACK_GATEWAY_HPP

// Live gateway: a websocket server that paces a Session in real time,
// broadcasts a `state` message after every control tick and queues operator
// messages for the next tick. Everything runs on one io_context thread, so
// the session, the client list and the outboxes need no locking.
//
// Client -> server (text frames, JSON objects tagged by "type"):
//   {"type":"set_mode","mode":"free"|"search"|"track"}
//   {"type":"manual","vx":..,"vy":..,"vz":..,"yaw_rate":..}
//   {"type":"button","name":"start_search"|"start_track"|"capture_template"|"go_free"}
//   {"type":"capture_template","label":"..."}
// Server -> client:
//   {"type":"hello","operator":bool}
//   {"type":"state", ...}   see Gateway::state_message
//   {"type":"error","message":"..."}
//
// The first connected client is the operator; later clients are read-only
// until they become the oldest connection.

#include "sartrack/errors.hpp"
#include "sartrack/mission.hpp"
#include "sartrack/scenario.hpp"
#include "sartrack/simworld.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sartrack::gateway {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using json = nlohmann::json;

/// Decodes one client message. Throws Error with a human-readable reason.
inline mission::OperatorInput parse_client_message(const std::string& text)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error&) {
        throw Error("message is not valid JSON");
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw Error("message must be an object with a string 'type'");
    }
    const auto type = j["type"].get<std::string>();
    auto str = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) {
            throw Error(type + ": '" + key + "' must be a string");
        }
        return j[key].get<std::string>();
    };
    auto num = [&](const char* key) {
        if (!j.contains(key)) {
            return 0.0;
        }
        if (!j[key].is_number()) {
            throw Error(type + ": '" + key + "' must be a number");
        }
        const double v = j[key].get<double>();
        if (!std::isfinite(v)) {
            throw Error(type + ": '" + key + "' must be finite");
        }
        return v;
    };

    mission::OperatorInput in;
    if (type == "set_mode") {
        const auto mode = str("mode");
        if (mode == "free") {
            in.button = mission::Button::go_free;
        } else if (mode == "search") {
            in.button = mission::Button::start_search;
        } else if (mode == "track") {
            in.button = mission::Button::start_track;
        } else {
            throw Error("set_mode: unknown mode '" + mode + "'");
        }
    } else if (type == "manual") {
        in.manual = VelocityCommand{num("vx"), num("vy"), num("vz"), num("yaw_rate")};
    } else if (type == "button") {
        const auto name = str("name");
        in.button = mission::button_from_string(name);
        if (!in.button) {
            throw Error("button: unknown name '" + name + "'");
        }
        if (*in.button == mission::Button::capture_template) {
            in.capture_label = j.contains("label") && j["label"].is_string() ? j["label"].get<std::string>() : "";
        }
    } else if (type == "capture_template") {
        in.button = mission::Button::capture_template;
        in.capture_label = str("label");
        if (in.capture_label.empty()) {
            throw Error("capture_template: label must be non-empty");
        }
    } else {
        throw Error("unknown message type '" + type + "'");
    }
    return in;
}

inline json error_message(const std::string& message) { return {{"type", "error"}, {"message", message}}; }

struct GatewayOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8765; ///< 0 picks a free port
    std::optional<double> duration_s;
    double speed = 1.0; ///< simulated seconds per wall-clock second
};

class Gateway;

class Client : public std::enable_shared_from_this<Client> {
public:
    Client(tcp::socket socket, Gateway& gateway) : ws_(std::move(socket)), gateway_(gateway) {}

    void start();
    void send(std::string message);
    void close();
    bool open() const { return open_; }

private:
    void do_read();
    void do_write();

    websocket::stream<beast::tcp_stream> ws_;
    Gateway& gateway_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    bool open_ = false;
    bool closing_ = false;
};

class Gateway {
public:
    Gateway(net::io_context& ioc, sim::Scenario scenario, GatewayOptions options)
        : ioc_(ioc), acceptor_(ioc), timer_(ioc), session_(std::move(scenario)), options_(options)
    {
        if (!(options_.speed > 0.0)) {
            throw Error("speed must be positive");
        }
        try {
            const tcp::endpoint endpoint(net::ip::make_address(options_.address), options_.port);
            acceptor_.open(endpoint.protocol());
            acceptor_.set_option(net::socket_base::reuse_address(true));
            acceptor_.bind(endpoint);
            acceptor_.listen();
        } catch (const boost::system::system_error& e) {
            throw Error("cannot bind " + options_.address + ":" + std::to_string(options_.port) + ": " + e.what());
        }
    }

    unsigned short port() const { return acceptor_.local_endpoint().port(); }

    void start()
    {
        do_accept();
        started_ = std::chrono::steady_clock::now();
        schedule();
    }

    /// Stops ticking and closes every connection; io_context::run returns once they drain.
    void stop()
    {
        if (stopped_) {
            return;
        }
        stopped_ = true;
        timer_.cancel();
        beast::error_code ec;
        acceptor_.close(ec);
        for (auto& c : clients_) {
            c->close();
        }
        if (on_stop_) {
            on_stop_();
        }
    }

    void on_stop(std::function<void()> f) { on_stop_ = std::move(f); }

    const sim::Session& session() const { return session_; }
    const std::vector<sim::LogRow>& rows() const { return rows_; }
    const std::vector<scenario::RecordedInput>& recording() const { return recording_; }

    // Client callbacks.

    void attach(const std::shared_ptr<Client>& c)
    {
        clients_.push_back(c);
        c->send(json{{"type", "hello"}, {"operator", clients_.front() == c}}.dump());
    }

    void detach(const Client* c)
    {
        std::erase_if(clients_, [c](const std::shared_ptr<Client>& p) { return p.get() == c; });
    }

    void on_message(Client& c, const std::string& text)
    {
        if (clients_.empty() || clients_.front().get() != &c) {
            c.send(error_message("read-only client: only the first connection may send commands").dump());
            return;
        }
        try {
            auto input = parse_client_message(text);
            recording_.push_back({session_.tick(), input});
            session_.enqueue(std::move(input));
        } catch (const Error& e) {
            c.send(error_message(e.what()).dump());
        }
    }

    /// The broadcast snapshot after a control tick.
    json state_message(std::span<const mission::Event> events) const
    {
        const auto& ms = session_.mission();
        const auto& pose = session_.plant().pose;
        const auto& cmd = session_.command();
        json people = json::array();
        if (const auto& frame = session_.last_frame()) {
            for (const auto& d : frame->detections) {
                json kp = nullptr;
                if (const auto it = keypoints_.find(d.track_id); it != keypoints_.end()) {
                    kp = json::array();
                    for (const auto& p : it->second.points) {
                        kp.push_back({p.u, p.v, p.visible});
                    }
                }
                people.push_back({{"track_id", d.track_id},
                                  {"bbox", {d.bbox.u_min, d.bbox.v_min, d.bbox.u_max, d.bbox.v_max}},
                                  {"keypoints", kp},
                                  {"matched", ms.target_track_id && *ms.target_track_id == d.track_id}});
            }
        }
        json ev = json::array();
        for (const auto& e : events) {
            ev.push_back({{"t", e.t}, {"name", e.name}, {"payload", e.payload}});
        }
        return {{"type", "state"},
                {"t", session_.time()},
                {"tick", session_.tick()},
                {"mode", mission::to_string(ms.mode)},
                {"uav", {{"x", pose.x}, {"y", pose.y}, {"z", pose.z}, {"heading", pose.heading}}},
                {"people", people},
                {"target_id", ms.target_track_id ? json(*ms.target_track_id) : json(nullptr)},
                {"range_est_cm", ms.range_estimate_cm ? json(*ms.range_estimate_cm) : json(nullptr)},
                {"motion_hold", ms.motion_hold},
                {"command", {{"vx", cmd.vx}, {"vy", cmd.vy}, {"vz", cmd.vz}, {"yaw_rate", cmd.yaw_rate}}},
                {"events", ev}};
    }

private:
    void do_accept()
    {
        acceptor_.async_accept(ioc_, [this](beast::error_code ec, tcp::socket socket) {
            if (ec || stopped_) {
                return;
            }
            std::make_shared<Client>(std::move(socket), *this)->start();
            do_accept();
        });
    }

    long long steps_limit() const
    {
        if (!options_.duration_s) {
            return -1;
        }
        return std::llround(*options_.duration_s * session_.scenario().physics_rate_hz);
    }

    void schedule()
    {
        const double rate = session_.scenario().physics_rate_hz;
        const auto due = started_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(static_cast<double>(session_.tick()) /
                                                                      (rate * options_.speed)));
        timer_.expires_at(due);
        timer_.async_wait([this](beast::error_code ec) {
            if (ec || stopped_) {
                return;
            }
            tick_until_due();
            if (!stopped_) {
                schedule();
            }
        });
    }

    void tick_until_due()
    {
        const double rate = session_.scenario().physics_rate_hz;
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count() * options_.speed;
        const auto target = static_cast<long long>(elapsed * rate) + 1;
        const auto limit = steps_limit();
        while (session_.tick() < target) {
            if (limit >= 0 && session_.tick() >= limit) {
                stop();
                return;
            }
            step_once();
        }
    }

    void step_once()
    {
        auto row = session_.step();
        if (row.ticks.pose) {
            if (const auto& frame = session_.last_frame()) {
                keypoints_.clear();
                for (const auto& d : frame->detections) {
                    if (d.keypoints) {
                        keypoints_[d.track_id] = *d.keypoints;
                    }
                }
            }
        }
        pending_events_.insert(pending_events_.end(), row.events.begin(), row.events.end());
        const bool control = row.ticks.control;
        rows_.push_back(std::move(row));
        if (control) {
            const auto msg = state_message(pending_events_).dump();
            pending_events_.clear();
            for (auto& c : clients_) {
                c->send(msg);
            }
        }
    }

    net::io_context& ioc_;
    tcp::acceptor acceptor_;
    net::steady_timer timer_;
    sim::Session session_;
    GatewayOptions options_;
    std::chrono::steady_clock::time_point started_;
    std::vector<std::shared_ptr<Client>> clients_;
    std::vector<sim::LogRow> rows_;
    std::vector<scenario::RecordedInput> recording_;
    std::vector<mission::Event> pending_events_;
    std::map<int, KeypointSet> keypoints_;
    std::function<void()> on_stop_;
    bool stopped_ = false;
};

// Client handlers share the gateway's io_context; with a single run()
// thread they never run concurrently with the simulation.

inline void Client::start()
{
    auto self = shared_from_this();
    net::dispatch(ws_.get_executor(), [self] {
        self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        self->ws_.async_accept([self](beast::error_code ec) {
            if (ec) {
                return;
            }
            self->open_ = true;
            self->gateway_.attach(self);
            self->do_read();
        });
    });
}

inline void Client::do_read()
{
    auto self = shared_from_this();
    ws_.async_read(buffer_, [self](beast::error_code ec, std::size_t) {
        if (ec) {
            self->open_ = false;
            self->gateway_.detach(self.get());
            return;
        }
        if (!self->ws_.got_text()) {
            self->send(error_message("binary frames are not supported").dump());
        } else {
            self->gateway_.on_message(*self, beast::buffers_to_string(self->buffer_.data()));
        }
        self->buffer_.consume(self->buffer_.size());
        self->do_read();
    });
}

inline void Client::send(std::string message)
{
    if (!open_ || closing_) {
        return;
    }
    // A slow reader only ever needs the newest state; keep the backlog bounded.
    if (outbox_.size() > 32) {
        outbox_.erase(outbox_.begin() + 1, outbox_.end() - 16);
    }
    outbox_.push_back(std::move(message));
    if (outbox_.size() == 1) {
        do_write();
    }
}

inline void Client::do_write()
{
    auto self = shared_from_this();
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self](beast::error_code ec, std::size_t) {
        if (ec) {
            self->outbox_.clear();
            return;
        }
        self->outbox_.pop_front();
        if (!self->outbox_.empty()) {
            self->do_write();
        } else if (self->closing_) {
            self->ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
        }
    });
}

inline void Client::close()
{
    if (!open_ || closing_) {
        return;
    }
    closing_ = true;
    if (outbox_.empty()) {
        auto self = shared_from_this();
        ws_.async_close(websocket::close_code::going_away, [self](beast::error_code) {});
    }
}

} // namespace sartrack::gateway

#endif // SARTRACK_GATEWAY_HPP
