#include "eknit/service/server.hpp"

#include <csignal>
#include <deque>
#include <mutex>
#include <map>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace eknit::service {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::map<std::string, std::string> query_of(std::string_view target) {
    std::map<std::string, std::string> out;
    const auto q = target.find('?');
    if (q == std::string_view::npos) return out;
    std::string_view rest = target.substr(q + 1);
    while (!rest.empty()) {
        const auto amp = rest.find('&');
        const auto kv = rest.substr(0, amp);
        const auto eq = kv.find('=');
        out[std::string(kv.substr(0, eq))] = eq == std::string_view::npos ? "" : std::string(kv.substr(eq + 1));
        if (amp == std::string_view::npos) break;
        rest = rest.substr(amp + 1);
    }
    return out;
}

std::string_view path_of(std::string_view target) { return target.substr(0, target.find('?')); }

class WsSession;

// Live websockets, so that stopping the server can drop their subscriptions
// while the io_context is still around.
struct Registry {
    std::mutex mutex;
    std::vector<std::weak_ptr<WsSession>> sessions;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
  public:
    WsSession(tcp::socket socket, Service& service) : ws_(std::move(socket)), service_(service) {}

    void drop() {
        std::lock_guard lock(drop_mutex_);
        if (subscribed_) service_.unsubscribe(session_, subscription_);
        subscribed_ = false;
    }

    void run(http::request<http::string_body> req) {
        auto q = query_of(std::string(req.target()));
        session_ = std::string(req[kSessionHeader]);
        if (session_.empty()) session_ = q.count("session") ? q["session"] : std::string(kDefaultSession);
        since_ = 0;
        if (q.count("since")) {
            try {
                since_ = std::stoull(q["since"]);
            } catch (const std::exception&) {
                since_ = 0;
            }
        }
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
    }

  private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        auto self = shared_from_this();
        auto exec = ws_.get_executor();
        auto sub = service_.subscribe(
            session_,
            [self, exec](const std::string& msg) { net::post(exec, [self, msg] { self->send(msg); }); },
            [self, exec] { net::post(exec, [self] { self->close("session expired"); }); }, since_);
        if (!sub) {
            close("unknown session");
            return;
        }
        {
            std::lock_guard lock(drop_mutex_);
            subscription_ = *sub;
            subscribed_ = true;
        }
        do_read();
    }

    void send(std::string msg) {
        if (closing_) return;
        queue_.push_back(std::move(msg));
        if (queue_.size() == 1) do_write();
    }

    void do_write() {
        ws_.text(true);
        ws_.async_write(net::buffer(queue_.front()),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            if (ec) return self->drop();
                            self->queue_.pop_front();
                            if (!self->queue_.empty()) {
                                self->do_write();
                            } else if (self->closing_) {
                                self->finish_close();
                            }
                        });
    }

    void close(std::string reason) {
        if (closing_) return;
        closing_ = true;
        reason_ = std::move(reason);
        {
            std::lock_guard lock(drop_mutex_);
            subscribed_ = false;  // the service already dropped us, or never had us
        }
        if (queue_.empty()) finish_close();
    }

    void finish_close() {
        ws_.async_close(websocket::close_reason(websocket::close_code::going_away, reason_),
                        [self = shared_from_this()](beast::error_code) {});
    }

    void do_read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) return self->drop();
            // Client messages carry nothing; the channel is push-only.
            self->buffer_.consume(self->buffer_.size());
            self->do_read();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    Service& service_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
    std::string session_;
    std::string reason_;
    std::uint64_t since_ = 0;
    std::uint64_t subscription_ = 0;
    bool subscribed_ = false;
    bool closing_ = false;
    std::mutex drop_mutex_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
  public:
    HttpSession(tcp::socket socket, Service& service, Registry& registry)
        : stream_(std::move(socket)), service_(service), registry_(registry) {}

    void run() {
        net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
    }

  private:
    void do_read() {
        parser_.emplace();
        parser_->body_limit(8 * 1024 * 1024);
        stream_.expires_after(std::chrono::seconds(60));
        http::async_read(stream_, buffer_, *parser_,
                         beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
    }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
            return;
        }
        auto req = parser_->release();
        if (websocket::is_upgrade(req)) {
            if (path_of(std::string(req.target())) == "/api/events") {
                stream_.expires_never();
                auto ws = std::make_shared<WsSession>(stream_.release_socket(), service_);
                {
                    std::lock_guard lock(registry_.mutex);
                    std::erase_if(registry_.sessions, [](const auto& w) { return w.expired(); });
                    registry_.sessions.push_back(ws);
                }
                ws->run(std::move(req));
            } else {
                stream_.socket().shutdown(tcp::socket::shutdown_both, ec);
            }
            return;
        }

        auto res = std::make_shared<http::response<http::string_body>>();
        res->version(req.version());
        res->keep_alive(req.keep_alive());
        res->set(http::field::access_control_allow_origin, "*");
        if (req.method() == http::verb::options) {
            res->result(http::status::no_content);
            res->set(http::field::access_control_allow_methods, "GET, POST, DELETE, OPTIONS");
            res->set(http::field::access_control_allow_headers, std::string("Content-Type, ") + kSessionHeader);
        } else {
            Request r;
            r.method = std::string(req.method_string());
            r.target = std::string(req.target());
            r.body = std::move(req.body());
            if (auto it = req.find(kSessionHeader); it != req.end() && !it->value().empty()) {
                r.session = std::string(it->value());
            }
            const Response out = service_.handle(r);
            res->result(static_cast<unsigned>(out.status));
            res->set(http::field::content_type, "application/json");
            res->body() = out.body.dump();
        }
        res->prepare_payload();
        http::async_write(stream_, *res,
                          [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
                              if (wec) return;
                              if (!res->keep_alive()) {
                                  self->stream_.socket().shutdown(tcp::socket::shutdown_send, wec);
                                  return;
                              }
                              self->do_read();
                          });
    }

    beast::tcp_stream stream_;
    Service& service_;
    Registry& registry_;
    beast::flat_buffer buffer_;
    std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

struct Server::Impl {
    Impl(Service& s, ServerOptions o)
        : service(s), options(std::move(o)), ioc(std::max(1, options.threads)), acceptor(net::make_strand(ioc)),
          reaper(ioc) {
        const tcp::endpoint ep(net::ip::make_address(options.address), options.port);
        acceptor.open(ep.protocol());
        acceptor.set_option(net::socket_base::reuse_address(true));
        acceptor.bind(ep);
        acceptor.listen(net::socket_base::max_listen_connections);
        accept();
        reap();
    }

    void accept() {
        acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
            if (ec == net::error::operation_aborted) return;
            if (!ec) std::make_shared<HttpSession>(std::move(socket), service, registry)->run();
            accept();
        });
    }

    void reap() {
        reaper.expires_after(options.reap_interval);
        reaper.async_wait([this](beast::error_code ec) {
            if (ec) return;
            service.expire_idle();
            reap();
        });
    }

    Service& service;
    ServerOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor;
    net::steady_timer reaper;
    Registry registry;
    std::vector<std::thread> threads;
};

Server::Server(Service& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

Server::~Server() { stop(); }

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
    for (int i = 0; i < std::max(1, impl_->options.threads); ++i) {
        impl_->threads.emplace_back([this] { impl_->ioc.run(); });
    }
}

void Server::run() {
    net::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
    signals.async_wait([this](beast::error_code, int) { impl_->ioc.stop(); });
    start();
    for (auto& t : impl_->threads) t.join();
    impl_->threads.clear();
}

void Server::stop() {
    impl_->ioc.stop();
    for (auto& t : impl_->threads) {
        if (t.joinable() && t.get_id() != std::this_thread::get_id()) t.join();
    }
    impl_->threads.clear();
    std::vector<std::shared_ptr<WsSession>> live;
    {
        std::lock_guard lock(impl_->registry.mutex);
        for (auto& w : impl_->registry.sessions) {
            if (auto s = w.lock()) live.push_back(std::move(s));
        }
        impl_->registry.sessions.clear();
    }
    for (auto& s : live) s->drop();
}

}  // namespace eknit::service
