#include <doctest.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "citeworth/predictor.hpp"
#include "citeworth/service.hpp"
#include "support.hpp"

// after Eigen: <resolv.h> defines a _res macro
#include <httplib.h>

using namespace citeworth;
using namespace citeworth::service;
using nlohmann::json;

namespace {

std::shared_ptr<const model::Classifier> shared_model() {
  static auto m = std::make_shared<const model::Classifier>(testing::quick_model(model::Family::Enlr));
  return m;
}

json body_of(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("predict keeps sentence order and reports model info") {
  PredictionService svc(shared_model());
  const json req = {{"sentences",
                     {{{"text", "Cells were grown in medium for two days."}, {"section_type", "methods"}},
                      {{"text", "As shown previously the growth rates differ between groups."}}}}};
  const auto r = svc.predict(req.dump());
  REQUIRE(r.status == 200);
  const auto j = body_of(r);
  REQUIRE(j["sentences"].size() == 2);
  CHECK(j["sentences"][0]["text"] == "Cells were grown in medium for two days.");
  CHECK(j["sentences"][0]["section_type"] == "methods");
  CHECK(j["sentences"][1]["text"] == "As shown previously the growth rates differ between groups.");
  CHECK(j["sentences"][1]["section_type"] == "");
  for (const auto& s : j["sentences"]) {
    const double p = s["probability"];
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(s["worthy"] == (p >= 0.5));
  }
  CHECK(j["model_info"]["family"] == "enlr");
  CHECK(j["model_info"]["attention_variant"] == "none");
  CHECK(j["model_info"]["version"] == 1);
}

TEST_CASE("the threshold decides worthiness") {
  PredictionService svc(shared_model());
  const json req = {{"raw_text", "Cells were grown in medium for two days."}, {"threshold", 0.99}};
  const auto j = body_of(svc.predict(req.dump()));
  REQUIRE(j["sentences"].size() == 1);
  const double p = j["sentences"][0]["probability"];
  REQUIRE(p < 0.99);
  CHECK(j["sentences"][0]["worthy"] == false);
  const json low = {{"raw_text", "Cells were grown in medium for two days."}, {"threshold", p}};
  CHECK(body_of(svc.predict(low.dump()))["sentences"][0]["worthy"] == true);
}

TEST_CASE("service output equals direct prediction") {
  PredictionService svc(shared_model());
  const std::string text =
      "Growth rates differ between groups [4]. We measured protein levels.\n\nAs shown previously cells were grown.";
  for (bool contextual : {true, false}) {
    for (bool two_pass : {true, false}) {
      const json req = {{"raw_text", text}, {"contextual", contextual}, {"two_pass", two_pass}};
      const auto j = body_of(svc.predict(req.dump()));
      predict::PredictOptions o;
      o.contextual = contextual;
      o.two_pass = two_pass;
      const auto direct = predict::predict_sentences(*shared_model(), predict::split_raw_text(text), o);
      REQUIRE(j["sentences"].size() == direct.size());
      for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(j["sentences"][i]["probability"].get<double>() == direct[i].probability);
        CHECK(j["sentences"][i]["text"] == direct[i].text);
      }
    }
  }
  // hint markers are stripped before scoring
  CHECK(body_of(svc.predict(json{{"raw_text", text}}.dump()))["sentences"][0]["text"] ==
        "Growth rates differ between groups .");
}

TEST_CASE("bad requests get 400") {
  PredictionService svc(shared_model());
  const std::vector<std::string> bad = {
      "{not json",
      "[1, 2]",
      R"({})",
      R"({"raw_text": "a", "sentences": [{"text": "b"}]})",
      R"({"raw_text": 5})",
      R"({"sentences": "abc"})",
      R"({"sentences": [{"section_type": "x"}]})",
      R"({"sentences": [{"text": "Cells grow.", "section_type": 3}]})",
      R"({"raw_text": "Cells grow.", "threshold": 1.5})",
      R"({"raw_text": "Cells grow.", "threshold": 0})",
      R"({"raw_text": "Cells grow.", "threshold": "high"})",
      R"({"raw_text": "Cells grow.", "contextual": "yes"})",
      R"({"raw_text": "Cells grow.", "two_pass": 1})"};
  for (const auto& b : bad) {
    CAPTURE(b);
    const auto r = svc.predict(b);
    CHECK(r.status == 400);
    CHECK(body_of(r).contains("error"));
  }
}

TEST_CASE("oversized bodies get 413") {
  ServiceConfig cfg;
  cfg.max_body_bytes = 64;
  PredictionService svc(shared_model(), cfg);
  const std::string big = json{{"raw_text", std::string(100, 'a')}}.dump();
  CHECK(svc.predict(big).status == 413);
  CHECK(svc.predict(json{{"raw_text", "Cells grow here."}}.dump()).status == 200);
}

TEST_CASE("without a model every model route is unavailable") {
  PredictionService svc(nullptr);
  CHECK(svc.predict(R"({"raw_text": "Cells grow."})").status == 503);
  const auto h = svc.health();
  CHECK(h.status == 503);
  CHECK(body_of(h)["status"] == "unavailable");
  CHECK(body_of(h)["model_version"].is_null());
  CHECK(svc.model_info().status == 503);
  const auto missing = make_service("/nonexistent/model.cwm", ServiceConfig{});
  CHECK(missing.health().status == 503);
}

TEST_CASE("health, model info and routing") {
  PredictionService svc(shared_model());
  const auto h = body_of(svc.health());
  CHECK(h["status"] == "ok");
  CHECK(h["model_version"] == 1);
  const auto info = body_of(svc.model_info());
  CHECK(info["family"] == "enlr");
  CHECK(info["format_version"] == 1);
  CHECK_FALSE(info.contains("pipeline"));
  CHECK(svc.handle("GET", "/api/predict", "").status == 405);
  CHECK(svc.handle("GET", "/api/nothing", "").status == 404);
  CHECK(svc.handle("GET", "/api/health", "").status == 200);
  CHECK(svc.handle("POST", "/api/predict", R"({"raw_text": "Cells grow here."})").status == 200);
}

TEST_CASE("HTTP round trip with CORS headers") {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.cors_origin = "http://localhost:3000";
  cfg.max_body_bytes = 4096;
  PredictionService svc(shared_model(), cfg);
  Server server(svc);
  const int port = server.bind();
  std::thread t([&] { server.run(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  const std::string req = json{{"raw_text", "Cells were grown in medium for two days."}}.dump();
  auto res = client.Post("/api/predict", req, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:3000");
  CHECK(json::parse(res->body) == body_of(svc.predict(req)));

  auto big = client.Post("/api/predict", json{{"raw_text", std::string(5000, 'a')}}.dump(), "application/json");
  REQUIRE(big);
  CHECK(big->status == 413);
  auto health = client.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto pre = client.Options("/api/predict");
  REQUIRE(pre);
  CHECK(pre->status == 204);

  server.stop();
  t.join();
}
