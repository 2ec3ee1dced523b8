#include "citeworth/service.hpp"

#include <iostream>

#include <httplib.h>

#include "citeworth/artifact.hpp"
#include "citeworth/error.hpp"
#include "citeworth/predictor.hpp"

namespace citeworth::service {

namespace {

Response error_response(int status, const std::string& message) {
  return {status, nlohmann::json{{"error", message}}.dump()};
}

}  // namespace

PredictionService::PredictionService(std::shared_ptr<const model::Classifier> model,
                                     ServiceConfig config, std::uint32_t model_version)
    : model_(std::move(model)), config_(std::move(config)), model_version_(model_version) {
  if (model_) {
    if (model_version_ == 0) model_version_ = artifact::kFormatVersion;
    header_ = model_->header();
    // vocabularies are large and not useful to clients
    header_.erase("pipeline");
    header_.erase("words");
    header_.erase("chars");
    header_.erase("feature_scaler");
    header_["format_version"] = model_version_;
  }
}

Response PredictionService::health() const {
  if (!model_) return {503, nlohmann::json{{"status", "unavailable"}, {"model_version", nullptr}}.dump()};
  return {200, nlohmann::json{{"status", "ok"}, {"model_version", model_version_}}.dump()};
}

Response PredictionService::model_info() const {
  if (!model_) return error_response(503, "no model loaded");
  return {200, header_.dump()};
}

Response PredictionService::predict(std::string_view body) const {
  if (body.size() > config_.max_body_bytes) return error_response(413, "payload too large");
  if (!model_) return error_response(503, "no model loaded");

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return error_response(400, "request must be a JSON object");

  const bool has_raw = req.contains("raw_text") && !req["raw_text"].is_null();
  const bool has_list = req.contains("sentences") && !req["sentences"].is_null();
  if (has_raw == has_list) return error_response(400, "exactly one of raw_text or sentences is required");

  predict::PredictOptions opt;
  if (req.contains("contextual")) {
    if (!req["contextual"].is_boolean()) return error_response(400, "contextual must be a boolean");
    opt.contextual = req["contextual"].get<bool>();
  }
  if (req.contains("two_pass")) {
    if (!req["two_pass"].is_boolean()) return error_response(400, "two_pass must be a boolean");
    opt.two_pass = req["two_pass"].get<bool>();
  }
  if (req.contains("threshold")) {
    if (!req["threshold"].is_number()) return error_response(400, "threshold must be a number");
    opt.threshold = req["threshold"].get<double>();
    if (!(opt.threshold > 0.0 && opt.threshold < 1.0)) {
      return error_response(400, "threshold must lie in (0, 1)");
    }
  }

  std::vector<predict::InputSentence> inputs;
  if (has_raw) {
    if (!req["raw_text"].is_string()) return error_response(400, "raw_text must be a string");
    inputs = predict::split_raw_text(req["raw_text"].get<std::string>());
  } else {
    if (!req["sentences"].is_array()) return error_response(400, "sentences must be an array");
    for (const auto& s : req["sentences"]) {
      if (!s.is_object() || !s.contains("text") || !s["text"].is_string()) {
        return error_response(400, "each sentence needs a string 'text'");
      }
      predict::InputSentence in{s["text"].get<std::string>(), std::nullopt};
      if (s.contains("section_type") && !s["section_type"].is_null()) {
        if (!s["section_type"].is_string()) return error_response(400, "section_type must be a string");
        in.section_type = s["section_type"].get<std::string>();
      }
      inputs.push_back(std::move(in));
    }
  }

  std::vector<predict::Prediction> preds;
  try {
    preds = predict::predict_sentences(*model_, inputs, opt);
  } catch (const Error& e) {
    return error_response(e.code() == ErrorCode::InvalidArgument ? 400 : 500, e.what());
  }

  nlohmann::json out;
  out["sentences"] = nlohmann::json::array();
  for (const auto& p : preds) {
    out["sentences"].push_back({{"text", p.text},
                                {"probability", p.probability},
                                {"worthy", p.worthy},
                                {"section_type", p.section_type}});
  }
  out["model_info"] = {{"family", std::string(model::to_string(model_->family()))},
                       {"attention_variant", model_->attention_variant()},
                       {"version", model_version_}};
  return {200, out.dump()};
}

Response PredictionService::handle(std::string_view method, std::string_view path,
                                   std::string_view body) const {
  if (path == "/api/predict") {
    if (method != "POST") return error_response(405, "use POST");
    return predict(body);
  }
  if (path == "/api/health" && method == "GET") return health();
  if (path == "/api/model-info" && method == "GET") return model_info();
  return error_response(404, "no such route");
}

PredictionService make_service(const std::string& model_file, const ServiceConfig& config) {
  try {
    const auto art = artifact::Artifact::load(model_file);
    auto model = std::make_shared<const model::Classifier>(model::Classifier::from_artifact(art));
    return PredictionService(std::move(model), config, art.version);
  } catch (const Error& e) {
    std::cerr << "model not loaded: " << e.what() << '\n';
    return PredictionService(nullptr, config);
  }
}

struct Server::Impl {
  explicit Impl(const PredictionService& s) : service(s) {}
  const PredictionService& service;
  httplib::Server http;
};

Server::Server(const PredictionService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->http;
  const auto& cfg = service.config();
  // one byte over the limit still reaches the handler, which answers 413
  server.set_payload_max_length(cfg.max_body_bytes + 1);
  server.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  const PredictionService* svc = &service;
  server.Post("/api/predict", [svc, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, svc->predict(req.body));
  });
  server.Get("/api/health", [svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc->health());
  });
  server.Get("/api/model-info", [svc, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, svc->model_info());
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

Server::~Server() = default;

int Server::bind() {
  const auto& cfg = impl_->service.config();
  int port = cfg.port;
  if (port == 0) {
    port = impl_->http.bind_to_any_port(cfg.host);
    if (port < 0) throw Error(ErrorCode::Io, "cannot bind " + cfg.host);
  } else if (!impl_->http.bind_to_port(cfg.host, port)) {
    throw Error(ErrorCode::Io, "cannot listen on " + cfg.host + ":" + std::to_string(port));
  }
  return port;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

void Server::stop() { impl_->http.stop(); }

void serve(const PredictionService& service) {
  Server server(service);
  const int port = server.bind();
  std::cerr << "listening on " << service.config().host << ':' << port << '\n';
  server.run();
}

}  // namespace citeworth::service
