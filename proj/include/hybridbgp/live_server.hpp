#pragma once

// HTTP + WebSocket front end for live sessions (Boost.Beast). Endpoints:
//   GET  /scenarios            bundled scenario files
//   POST /sessions             {"scenario": name | object, "seed", "speed", "start"}
//   GET  /sessions/{id}        session status and command log
//   DELETE /sessions/{id}
//   GET  /sessions/{id}/ws     WebSocket upgrade; see docs/wire-protocol.md

#include <algorithm>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hybridbgp/io.hpp"
#include "hybridbgp/live_session.hpp"

namespace hybridbgp {

namespace live_net {
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace asio = boost::asio;
using tcp = asio::ip::tcp;
}  // namespace live_net

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::string scenarios_dir = "scenarios";
  WallClock clock = steady_wall_clock();
};

class LiveServer {
 public:
  explicit LiveServer(ServerConfig cfg) : cfg_(std::move(cfg)), acceptor_(ioc_) {}
  ~LiveServer() { stop(); }
  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  // Binds and starts serving on a background thread.
  void start() {
    using namespace live_net;
    const tcp::endpoint ep{asio::ip::make_address(cfg_.address), cfg_.port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(asio::socket_base::max_listen_connections);
    port_ = acceptor_.local_endpoint().port();
    do_accept();
    io_thread_ = std::thread([this] { ioc_.run(); });
  }

  void stop() {
    if (!io_thread_.joinable()) return;
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
    });
    ioc_.stop();
    io_thread_.join();
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) s->stop();
    sessions_.clear();
  }

  // Blocks until the server stops (used by the CLI).
  void wait() {
    if (io_thread_.joinable()) io_thread_.join();
  }

  unsigned short port() const { return port_; }

  std::shared_ptr<LiveSession> session(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  Json list_scenarios() const {
    namespace fs = std::filesystem;
    Json out = Json::array();
    std::vector<fs::path> files;
    std::error_code ec;
    for (auto& e : fs::directory_iterator(cfg_.scenarios_dir, ec))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
      Json entry = {{"name", f.stem().string()}};
      try {
        const Json raw = detail::parse_json(detail::read_file(f.string()), f.string());
        if (raw.contains("runs_per_cell") || raw.contains("sizes")) continue;  // sweep configs
        const ScenarioConfig s = scenario_from_json(raw);
        entry["id"] = s.id;
        entry["description"] = raw.value("description", "");
        entry["graph"] = to_json(s.graph);
        entry["penetration"] = s.penetration;
        entry["explicit_topology"] = s.topology.has_value();
      } catch (const std::exception& e) {
        entry["error"] = e.what();
      }
      out.push_back(entry);
    }
    return {{"scenarios", out}};
  }

  // POST /sessions body. Returns the new session's id.
  std::string create_session(const Json& body) {
    detail::reject_unknown(body, {"scenario", "seed", "speed", "start"}, "session request");
    if (!body.contains("scenario")) throw ConfigError("missing 'scenario'");
    ScenarioConfig cfg;
    const Json& sc = body["scenario"];
    if (sc.is_string()) {
      const std::string name = sc.get<std::string>();
      if (name.empty() || name.find_first_of("/\\") != std::string::npos || name.find("..") != std::string::npos) {
        throw ConfigError("bad scenario name");
      }
      const auto path = std::filesystem::path(cfg_.scenarios_dir) / (name + ".json");
      if (!std::filesystem::exists(path)) throw ConfigError("unknown scenario '" + name + "'");
      cfg = load_scenario(path.string());
    } else if (sc.is_object()) {
      cfg = scenario_from_json(sc);
    } else {
      throw ConfigError("'scenario' must be a name or an object");
    }
    const std::uint64_t seed = detail::get_or(body, "seed", cfg.seed);
    const double speed = detail::get_or(body, "speed", 1.0);
    std::string id;
    {
      std::lock_guard lock(mu_);
      id = "s" + std::to_string(next_session_++);
    }
    auto s = std::make_shared<LiveSession>(id, std::move(cfg), seed, speed, cfg_.clock);
    if (detail::get_or(body, "start", true)) s->post(0, {{"op", "start"}});
    s->run_in_thread();
    std::lock_guard lock(mu_);
    sessions_[id] = s;
    return id;
  }

  bool delete_session(const std::string& id) {
    std::shared_ptr<LiveSession> s;
    {
      std::lock_guard lock(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) return false;
      s = it->second;
      sessions_.erase(it);
    }
    s->stop();
    return true;
  }

  template <class Body>
  live_net::http::response<live_net::http::string_body> handle(const live_net::http::request<Body>& req) {
    using namespace live_net;
    auto reply = [&](http::status st, const Json& body) {
      http::response<http::string_body> res{st, req.version()};
      res.set(http::field::content_type, "application/json; charset=utf-8");
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(req.keep_alive());
      res.body() = body.dump();
      res.prepare_payload();
      return res;
    };
    const std::string target(req.target());
    const std::string path = target.substr(0, target.find('?'));
    try {
      if (path == "/scenarios") {
        if (req.method() != http::verb::get) return reply(http::status::method_not_allowed, {{"error", "use GET"}});
        return reply(http::status::ok, list_scenarios());
      }
      if (path == "/sessions") {
        if (req.method() != http::verb::post) return reply(http::status::method_not_allowed, {{"error", "use POST"}});
        const Json body = detail::parse_json(req.body(), "request body");
        const std::string id = create_session(body);
        return reply(http::status::created, {{"id", id}, {"ws", "/sessions/" + id + "/ws"}});
      }
      const std::string pre = "/sessions/";
      if (path.starts_with(pre)) {
        const std::string id = path.substr(pre.size());
        if (req.method() == http::verb::delete_) {
          if (!delete_session(id)) return reply(http::status::not_found, {{"error", "unknown session '" + id + "'"}});
          return reply(http::status::ok, {{"deleted", id}});
        }
        auto s = session(id);
        if (!s) return reply(http::status::not_found, {{"error", "unknown session '" + id + "'"}});
        if (req.method() != http::verb::get) return reply(http::status::method_not_allowed, {{"error", "use GET"}});
        return reply(http::status::ok, s->status());
      }
      return reply(http::status::not_found, {{"error", "no route for " + path}});
    } catch (const std::exception& e) {
      return reply(http::status::bad_request, {{"error", e.what()}});
    }
  }

 private:
  class WsConnection : public std::enable_shared_from_this<WsConnection> {
   public:
    WsConnection(live_net::tcp::socket&& socket, std::shared_ptr<LiveSession> session)
        : ws_(std::move(socket)), session_(std::move(session)) {}

    void run(live_net::http::request<live_net::http::string_body> req) {
      using namespace live_net;
      beast::get_lowest_layer(ws_).expires_never();
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.async_accept(req, beast::bind_front_handler(&WsConnection::on_accept, shared_from_this()));
    }

   private:
    void on_accept(live_net::beast::error_code ec) {
      if (ec) return;
      std::weak_ptr<WsConnection> weak = shared_from_this();
      auto ex = ws_.get_executor();
      sid_ = session_->attach([weak, ex](const std::string& msg) {
        boost::asio::post(ex, [weak, msg] {
          if (auto self = weak.lock()) self->enqueue(msg);
        });
      });
      do_read();
    }

    void do_read() {
      ws_.async_read(buffer_, live_net::beast::bind_front_handler(&WsConnection::on_read, shared_from_this()));
    }

    void on_read(live_net::beast::error_code ec, std::size_t) {
      if (ec) {
        session_->detach(sid_);
        return;
      }
      session_->post_text(sid_, live_net::beast::buffers_to_string(buffer_.data()));
      buffer_.consume(buffer_.size());
      do_read();
    }

    void enqueue(std::string msg) {
      queue_.push_back(std::move(msg));
      if (queue_.size() == 1) do_write();
    }

    void do_write() {
      ws_.text(true);
      ws_.async_write(boost::asio::buffer(queue_.front()),
                      live_net::beast::bind_front_handler(&WsConnection::on_write, shared_from_this()));
    }

    void on_write(live_net::beast::error_code ec, std::size_t) {
      if (ec) return;
      queue_.pop_front();
      if (!queue_.empty()) do_write();
    }

    live_net::websocket::stream<live_net::beast::tcp_stream> ws_;
    std::shared_ptr<LiveSession> session_;
    int sid_ = 0;
    live_net::beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
  };

  class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
   public:
    HttpConnection(live_net::tcp::socket&& socket, LiveServer& server) : stream_(std::move(socket)), server_(server) {}

    void run() { do_read(); }

   private:
    void do_read() {
      using namespace live_net;
      req_ = {};
      stream_.expires_after(std::chrono::seconds(30));
      http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpConnection::on_read, shared_from_this()));
    }

    void on_read(live_net::beast::error_code ec, std::size_t) {
      using namespace live_net;
      if (ec == http::error::end_of_stream) {
        stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      if (ec) return;
      if (websocket::is_upgrade(req_)) {
        const std::string target(req_.target());
        const std::string pre = "/sessions/", post = "/ws";
        std::shared_ptr<LiveSession> s;
        if (target.starts_with(pre) && target.ends_with(post) && target.size() > pre.size() + post.size()) {
          s = server_.session(target.substr(pre.size(), target.size() - pre.size() - post.size()));
        }
        if (s) {
          std::make_shared<WsConnection>(stream_.release_socket(), s)->run(std::move(req_));
          return;
        }
        write(std::make_shared<http::response<http::string_body>>(not_found(target)));
        return;
      }
      write(std::make_shared<http::response<http::string_body>>(server_.handle(req_)));
    }

    live_net::http::response<live_net::http::string_body> not_found(const std::string& target) {
      using namespace live_net;
      http::response<http::string_body> res{http::status::not_found, req_.version()};
      res.set(http::field::content_type, "application/json; charset=utf-8");
      res.body() = Json{{"error", "no session at " + target}}.dump();
      res.prepare_payload();
      return res;
    }

    void write(std::shared_ptr<live_net::http::response<live_net::http::string_body>> res) {
      using namespace live_net;
      auto self = shared_from_this();
      http::async_write(stream_, *res, [self, res](beast::error_code ec, std::size_t) {
        if (ec) return;
        if (res->need_eof()) {
          self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
          return;
        }
        self->do_read();
      });
    }

    live_net::beast::tcp_stream stream_;
    LiveServer& server_;
    live_net::beast::flat_buffer buffer_;
    live_net::http::request<live_net::http::string_body> req_;
  };

  void do_accept() {
    acceptor_.async_accept(boost::asio::make_strand(ioc_), [this](boost::system::error_code ec, live_net::tcp::socket s) {
      if (ec) return;  // closed
      std::make_shared<HttpConnection>(std::move(s), *this)->run();
      do_accept();
    });
  }

  ServerConfig cfg_;
  boost::asio::io_context ioc_;
  live_net::tcp::acceptor acceptor_;
  unsigned short port_ = 0;
  std::thread io_thread_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions_;
  int next_session_ = 1;
};

}  // namespace hybridbgp
