#include <gtest/gtest.h>

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hybridbgp/live_server.hpp"

using namespace hybridbgp;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

struct HttpReply {
  int status = 0;
  Json body;
};

HttpReply request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
  boost::asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.set(http::field::content_type, "application/json");
  req.body() = body;
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), Json::parse(res.body())};
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerConfig cfg;
    cfg.port = 0;
    cfg.scenarios_dir = std::string(HB_SOURCE_DIR) + "/scenarios";
    server = std::make_unique<LiveServer>(cfg);
    server->start();
    port = server->port();
  }
  void TearDown() override { server->stop(); }

  std::unique_ptr<LiveServer> server;
  unsigned short port = 0;
};

// Reads messages until one of the given type arrives.
Json read_until(websocket::stream<beast::tcp_stream>& ws, const std::string& type, int limit = 10000) {
  for (int i = 0; i < limit; ++i) {
    beast::flat_buffer buf;
    ws.read(buf);
    Json m = Json::parse(beast::buffers_to_string(buf.data()));
    if (m["type"] == type) return m;
  }
  ADD_FAILURE() << "no " << type << " message";
  return {};
}

}  // namespace

TEST_F(ServerTest, ListsBundledScenarios) {
  const HttpReply r = request(port, http::verb::get, "/scenarios");
  EXPECT_EQ(r.status, 200);
  std::set<std::string> names;
  for (const Json& s : r.body["scenarios"]) {
    names.insert(s["name"].get<std::string>());
    EXPECT_FALSE(s.contains("error")) << s.dump();
  }
  EXPECT_TRUE(names.count("demo-ring"));
  EXPECT_TRUE(names.count("clique8"));
  EXPECT_FALSE(names.count("full-grid"));  // sweep configs are not sessions
}

TEST_F(ServerTest, SessionLifecycle) {
  HttpReply r = request(port, http::verb::post, "/sessions", R"({"scenario": "demo-ring", "seed": 1, "speed": 50})");
  ASSERT_EQ(r.status, 201) << r.body.dump();
  const std::string id = r.body["id"];
  EXPECT_EQ(r.body["ws"], "/sessions/" + id + "/ws");

  r = request(port, http::verb::get, "/sessions/" + id);
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["id"], id);
  EXPECT_EQ(r.body["scenario"], "demo-ring");

  EXPECT_EQ(request(port, http::verb::delete_, "/sessions/" + id).status, 200);
  EXPECT_EQ(request(port, http::verb::get, "/sessions/" + id).status, 404);
}

TEST_F(ServerTest, BadRequests) {
  EXPECT_EQ(request(port, http::verb::post, "/sessions", R"({"scenario": "nope"})").status, 400);
  EXPECT_EQ(request(port, http::verb::post, "/sessions", R"({"scenario": "../etc/passwd"})").status, 400);
  EXPECT_EQ(request(port, http::verb::post, "/sessions", "not json").status, 400);
  EXPECT_EQ(request(port, http::verb::post, "/sessions", R"({"scenario": "clique8", "bogus": 1})").status, 400);
  EXPECT_EQ(request(port, http::verb::get, "/sessions").status, 405);
  EXPECT_EQ(request(port, http::verb::get, "/nowhere").status, 404);
}

TEST_F(ServerTest, InlineScenarioObject) {
  const HttpReply r = request(port, http::verb::post, "/sessions",
                              R"({"scenario": {"id": "inline", "graph": {"family": "clique", "n": 4}}, "start": false})");
  ASSERT_EQ(r.status, 201) << r.body.dump();
  const HttpReply st = request(port, http::verb::get, "/sessions/" + r.body["id"].get<std::string>());
  EXPECT_EQ(st.body["scenario"], "inline");
  EXPECT_EQ(st.body["started"], false);
}

TEST_F(ServerTest, WebSocketSessionDrivesAFailover) {
  HttpReply r = request(port, http::verb::post, "/sessions", R"({"scenario": "demo-ring", "speed": 200})");
  ASSERT_EQ(r.status, 201);
  const std::string ws_path = r.body["ws"];

  boost::asio::io_context ioc;
  websocket::stream<beast::tcp_stream> ws(ioc);
  beast::get_lowest_layer(ws).connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port));
  beast::get_lowest_layer(ws).expires_after(std::chrono::seconds(60));
  ws.handshake("127.0.0.1", ws_path);

  const Json hello = read_until(ws, "hello");
  EXPECT_EQ(hello["v"], 1);
  EXPECT_EQ(hello["payload"]["prefix"], "198.51.100.0/24");
  const Json topo = read_until(ws, "topology");
  EXPECT_EQ(topo["payload"]["client"], 100);

  ws.write(boost::asio::buffer(
      Json{{"v", 1}, {"type", "command"}, {"id", 7},
           {"payload", {{"op", "subscribe"}, {"streams", {"forwarding_tree"}}}}}
          .dump()));
  Json ack = read_until(ws, "command_ack");
  EXPECT_EQ(ack["payload"]["id"], 7);
  const Json tree = read_until(ws, "forwarding_tree");
  EXPECT_EQ(tree["payload"]["prefix"], "198.51.100.0/24");

  ws.write(boost::asio::buffer(Json{{"op", "link"}, {"a", 100}, {"b", 1}, {"state", "down"}, {"id", 8}}.dump()));
  ack = read_until(ws, "command_ack");
  EXPECT_EQ(ack["payload"]["id"], 8);
  EXPECT_EQ(ack["payload"]["noop"], false);

  // Wait for the network to settle on the backup path.
  bool settled = false;
  for (int i = 0; i < 2000 && !settled; ++i) {
    const Json tick = read_until(ws, "metrics_tick");
    settled = tick["payload"]["quiescent"] == true && tick["payload"]["sim_time"].get<double>() > ack["payload"]["sim_time"].get<double>() + 60 &&
              tick["payload"]["loops"] == 0 && tick["payload"]["reachable_fraction"] == 1.0;
  }
  EXPECT_TRUE(settled);

  ws.write(boost::asio::buffer(std::string("{oops")));
  const Json err = read_until(ws, "error");
  EXPECT_TRUE(err["payload"]["message"].is_string());

  ws.close(websocket::close_code::normal);
}

TEST_F(ServerTest, WebSocketToUnknownSessionIsRefused) {
  boost::asio::io_context ioc;
  websocket::stream<beast::tcp_stream> ws(ioc);
  beast::get_lowest_layer(ws).connect(tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port));
  EXPECT_THROW(ws.handshake("127.0.0.1", "/sessions/zzz/ws"), beast::system_error);
}
