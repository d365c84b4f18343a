#include "xlemo/annotation_service.hpp"

#include "xlemo/errors.hpp"

#include <httplib.h>

#include <charconv>

namespace xlemo::service {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, json{{"code", code}, {"message", message}});
}

std::string required_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name) || req.get_param_value(name).empty()) {
    throw ValidationError(std::string("missing query parameter '") + name + "'");
  }
  return req.get_param_value(name);
}

template <typename T>
T numeric_param(const httplib::Request& req, const char* name, T fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ValidationError(std::string("query parameter '") + name + "' must be an integer, got '" + v + "'");
  }
  return out;
}

template <typename Handler>
httplib::Server::Handler guarded(std::shared_ptr<Registry> registry, Handler handler) {
  return [registry, handler](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto campaign = registry->find(req.matches[1].str());
      handler(*campaign, req, res);
    } catch (const ConflictError& e) {
      send_error(res, 409, "conflict", e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const ValidationError& e) {
      send_error(res, 400, "invalid", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

}  // namespace

struct HttpServer::Impl {
  std::shared_ptr<Registry> registry;
  httplib::Server server;
};

HttpServer::HttpServer(std::shared_ptr<Registry> registry) : impl_(std::make_unique<Impl>()) {
  impl_->registry = std::move(registry);
  auto& srv = impl_->server;
  auto reg = impl_->registry;

  srv.Get(R"(/campaigns/([^/]+)/next)",
          guarded(reg, [](Campaign& c, const httplib::Request& req, httplib::Response& res) {
            const std::string annotator = required_param(req, "annotator");
            const Emotion emotion = parse_emotion(required_param(req, "emotion"));
            const auto assignment = c.next_tuple(annotator, emotion);
            if (!assignment) {
              send_json(res, 200, json{{"done", true}, {"annotator_id", annotator}});
            } else {
              send_json(res, 200, to_json(*assignment));
            }
          }));

  srv.Post(R"(/campaigns/([^/]+)/judgments)",
           guarded(reg, [](Campaign& c, const httplib::Request& req, httplib::Response& res) {
             const bws::Judgment j = bws::judgment_from_json(req.body);
             send_json(res, 200, to_json(c.submit_judgment(j)));
           }));

  srv.Get(R"(/campaigns/([^/]+)/scores)",
          guarded(reg, [](Campaign& c, const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, to_json(c.scores(parse_emotion(required_param(req, "emotion")))));
          }));

  srv.Get(R"(/campaigns/([^/]+)/reliability)",
          guarded(reg, [](Campaign& c, const httplib::Request& req, httplib::Response& res) {
            const Emotion emotion = parse_emotion(required_param(req, "emotion"));
            const int iterations = numeric_param(req, "iterations", bws::kDefaultReliabilityIterations);
            const auto seed = numeric_param<std::uint64_t>(req, "seed", 0);
            send_json(res, 200, to_json(c.reliability(emotion, iterations, seed)));
          }));

  srv.Get(R"(/campaigns/([^/]+)/progress)",
          guarded(reg, [](Campaign& c, const httplib::Request& req, httplib::Response& res) {
            std::optional<Emotion> emotion;
            if (req.has_param("emotion")) emotion = parse_emotion(req.get_param_value("emotion"));
            send_json(res, 200, to_json(c.progress(required_param(req, "annotator"), emotion)));
          }));
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() {
  if (!impl_->server.listen_after_bind()) throw IoError("HTTP server stopped with an error");
}

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace xlemo::service
