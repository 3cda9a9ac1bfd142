#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eknit/sim/scenario.hpp"

namespace eknit::service {

inline constexpr const char* kSessionHeader = "X-Eknit-Session";
inline constexpr const char* kDefaultSession = "default";

struct Request {
    std::string method;
    std::string target;  ///< path plus optional query string
    std::string body;
    std::string session = kDefaultSession;
};

struct Response {
    int status = 200;
    nlohmann::json body = nlohmann::json::object();
};

/// One push-channel message: {"seq", "type", "session", "payload"}.
struct Push {
    std::uint64_t seq = 0;
    std::string type;
    nlohmann::json payload;

    nlohmann::json to_json(const std::string& session) const;
};

using Clock = std::chrono::steady_clock;

struct ServiceOptions {
    std::chrono::seconds idle_timeout{30 * 60};
    std::size_t placement_seeds = 100;
};

/// Transport-independent request handling. Every session owns its own bus;
/// requests for one session are serialised by that session's mutex, and
/// pushes are emitted while it is held, so subscribers see them in sequence
/// order.
class Service {
  public:
    using Subscriber = std::function<void(const std::string& message)>;
    using CloseHandler = std::function<void()>;

    explicit Service(sim::Scenario base, ServiceOptions options = {});
    ~Service();

    Response handle(const Request& request);

    /// Registers a push subscriber; pushes with seq >= `from_seq` that already
    /// happened are replayed first. Returns nullopt for an unknown session.
    std::optional<std::uint64_t> subscribe(const std::string& session, Subscriber on_push,
                                           CloseHandler on_close, std::uint64_t from_seq = 0);
    void unsubscribe(const std::string& session, std::uint64_t subscription);

    /// Pushes with seq >= `from_seq`, for polling clients and tests.
    std::vector<Push> pushes(const std::string& session, std::uint64_t from_seq = 0);

    bool has_session(const std::string& session);
    std::string create_session();

    /// Drops sessions idle for longer than the timeout, closing their
    /// subscribers. Returns how many were dropped.
    std::size_t expire_idle(Clock::time_point now = Clock::now());

    /// JSON shapes of every request and push payload.
    static nlohmann::json schema();

  private:
    struct Session;

    std::shared_ptr<Session> find_or_create(const std::string& id);
    std::shared_ptr<Session> find(const std::string& id);

    sim::Scenario base_;
    ServiceOptions options_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t session_counter_ = 0;
};

/// Status code carried by service-level errors.
class HttpError : public Error {
  public:
    HttpError(int status, std::string code, const std::string& message)
        : Error(message), status_(status), code_(std::move(code)) {}
    int status() const { return status_; }
    const std::string& code() const { return code_; }

  private:
    int status_;
    std::string code_;
};

Response error_response(int status, const std::string& code, const std::string& message);

}  // namespace eknit::service
