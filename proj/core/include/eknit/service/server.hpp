#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "eknit/service/service.hpp"

namespace eknit::service {

struct ServerOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 8080;  ///< 0 picks a free port
    int threads = 2;
    std::chrono::milliseconds reap_interval{30'000};
};

/// HTTP on every path under /api, websocket upgrade on /api/events.
/// The websocket takes its session from the X-Eknit-Session header or a
/// `session` query parameter, and replays pushes from `since` (default 0).
class Server {
  public:
    Server(Service& service, ServerOptions options = {});
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    unsigned short port() const;

    void start();  // background threads
    void run();    // blocks until stop()
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace eknit::service
