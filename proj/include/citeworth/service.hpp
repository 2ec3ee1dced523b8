#pragma once

// JSON-over-HTTP prediction service.
//
//   POST /api/predict     {"raw_text": "..."} or {"sentences": [{"text", "section_type"?}]},
//                         optional "contextual" (bool, default true), "threshold" (0,1),
//                         "two_pass" (bool)
//   GET  /api/health      {"status", "model_version"}; 503 without a model
//   GET  /api/model-info  the model file header
//
// Errors are {"error": message} with 400 (bad request), 413 (body over the
// limit) or 503 (no model loaded).

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "citeworth/classifier.hpp"

namespace citeworth::service {

struct ServiceConfig {
  std::size_t max_body_bytes = 1 << 20;
  std::string cors_origin = "*";
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct Response {
  int status = 200;
  std::string body;  // JSON
};

class PredictionService {
 public:
  /// `model` may be null (model file missing): every model-backed route then
  /// answers 503.
  PredictionService(std::shared_ptr<const model::Classifier> model, ServiceConfig config = {},
                    std::uint32_t model_version = 0);

  Response predict(std::string_view body) const;
  Response health() const;
  Response model_info() const;

  /// Routes by method and path; unknown routes give 404.
  Response handle(std::string_view method, std::string_view path, std::string_view body) const;

  const ServiceConfig& config() const { return config_; }

 private:
  std::shared_ptr<const model::Classifier> model_;
  ServiceConfig config_;
  std::uint32_t model_version_;
  nlohmann::json header_;
};

/// Loads the model (a missing or unreadable file leaves the service in the
/// 503 state and logs the reason to stderr).
PredictionService make_service(const std::string& model_file, const ServiceConfig& config);

/// HTTP front end for a service. The service must outlive the server.
class Server {
 public:
  explicit Server(const PredictionService& service);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the configured host and port (port 0 picks a free one) and
  /// returns the bound port. Throws Error{Io}.
  int bind();
  /// Serves until stop() is called from another thread.
  void run();
  /// Blocks until run() is accepting connections.
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Binds and blocks serving HTTP until the process is stopped.
void serve(const PredictionService& service);

}  // namespace citeworth::service
