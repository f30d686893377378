#include "zoomin/reward_server.hpp"

#include <functional>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "zoomin/rewards.hpp"
#include "zoomin/version.hpp"

namespace zoomin::rewards {

using nlohmann::json;

struct RewardServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  json body;
  body["error"] = message;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <typename Request>
void handle_scoring(const httplib::Request& http_req, httplib::Response& res,
                    Request (*parse)(const json&), RewardBreakdown (*score)(const Request&)) {
  json body = json::parse(http_req.body, nullptr, false);
  if (body.is_discarded()) {
    send_error(res, 400, "malformed JSON body");
    return;
  }
  try {
    if (body.is_array()) {
      json out = json::array();
      for (size_t i = 0; i < body.size(); ++i) {
        try {
          out.push_back(breakdown_to_json(score(parse(body[i]))));
        } catch (const std::invalid_argument& e) {
          send_error(res, 400, "item " + std::to_string(i) + ": " + e.what());
          return;
        }
      }
      res.set_content(out.dump(), "application/json");
    } else {
      res.set_content(breakdown_to_json(score(parse(body))).dump(), "application/json");
    }
  } catch (const std::invalid_argument& e) {
    send_error(res, 400, e.what());
  }
}

}  // namespace

RewardServer::RewardServer() : impl_(std::make_unique<Impl>()) {
  impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    json body;
    body["status"] = "ok";
    body["service"] = "zoomin-reward";
    body["version"] = kToolVersion;
    res.set_content(body.dump(), "application/json");
  });
  impl_->server.Post("/v1/reward/stage1",
                     [](const httplib::Request& req, httplib::Response& res) {
                       handle_scoring<Stage1Request>(req, res, stage1_request_from_json,
                                                     score_stage1);
                     });
  impl_->server.Post("/v1/reward/stage2",
                     [](const httplib::Request& req, httplib::Response& res) {
                       handle_scoring<Stage2Request>(req, res, stage2_request_from_json,
                                                     score_stage2);
                     });
}

RewardServer::~RewardServer() { stop(); }

bool RewardServer::start(const std::string& bind_address, int port) {
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(bind_address);
    if (impl_->port <= 0) return false;
  } else {
    if (!impl_->server.bind_to_port(bind_address, port)) return false;
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return true;
}

int RewardServer::port() const { return impl_->port; }

void RewardServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void RewardServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace zoomin::rewards
