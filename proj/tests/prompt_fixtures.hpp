#pragma once

#include "omni/prompt.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace omni::test {

inline LabeledPair fixture_pair() {
  LabeledPair p;
  p.a = {"osm:4021", {{"name", "Auckland War Memorial Museum"}, {"type", "museum"}, {"address", "Domain Drive"}},
         Point{{174.7778, -36.8604}}};
  p.b = {"gaz:77", {{"name", "Auckland Museum"}, {"type", ""}, {"address", "The Domain, Parnell"}},
         Point{{174.7773, -36.8598}}};
  p.label = 1;
  return p;
}

inline LabeledPair numbered_pair(int i, int label) {
  LabeledPair p;
  const std::string n = std::to_string(i);
  p.a = {"a" + n, {{"name", "alpha-" + n}, {"type", "park"}}, Point{{174.0 + 0.01 * i, -36.0}}};
  p.b = {"b" + n, {{"name", "beta-" + n}, {"type", "park"}}, Point{{174.0 + 0.01 * i, -36.001}}};
  p.label = label;
  return p;
}

inline std::vector<LabeledPair> train_split(int n_classes) {
  std::vector<LabeledPair> out;
  for (int i = 0; i < 12; ++i) out.push_back(numbered_pair(100 + i, i % n_classes));
  return out;
}

/// Local chat-completion stand-in on an ephemeral port.
class MockServer {
 public:
  explicit MockServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  EndpointConfig endpoint() const {
    EndpointConfig e;
    e.url = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    e.backoff = std::chrono::milliseconds(1);
    e.timeout = std::chrono::milliseconds(5000);
    return e;
  }

  std::atomic<int> calls{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

inline void reply(httplib::Response& res, const std::string& content) {
  nlohmann::json body{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}}};
  res.set_content(body.dump(), "application/json");
}

inline std::string user_content(const httplib::Request& req) {
  return nlohmann::json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
}

}  // namespace omni::test
