#pragma once

// OpenAI-compatible chat/embedding backend over cpp-httplib. Define
// CPPHTTPLIB_OPENSSL_SUPPORT before including to reach https endpoints.

#include <cstdlib>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "shockcast/error.hpp"
#include "shockcast/news_agent.hpp"

namespace shockcast {

struct HttpBackendConfig {
  std::string base_url = "https://api.openai.com";  // scheme://host[:port]
  std::string path_prefix = "/v1";
  std::string chat_model = "gpt-4o-mini";
  std::string embedding_model = "text-embedding-3-small";
  std::string key_env = "NEWS_BACKEND_KEY";
  double temperature = 0.0;
  int timeout_seconds = 60;
};

class HttpBackend final : public TextBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
    if (const char* k = std::getenv(cfg_.key_env.c_str())) key_ = k;
    if (key_.empty()) throw ConfigError("environment variable " + cfg_.key_env + " is not set");
  }

  std::string id() const override { return "http:" + cfg_.chat_model; }

  std::string generate(const GenerationRequest& req) override { return chat(req.prompt); }

  Verdict verify(const FactCheckRequest& req) override { return parse_verdict(chat(req.prompt)); }

  std::vector<double> embed(const std::string& text) override {
    nlohmann::json body = {{"model", cfg_.embedding_model}, {"input", text}};
    const auto j = post("/embeddings", body);
    try {
      return j.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected embedding response: ") + e.what(), false);
    }
  }

  // First line must read "VERDICT: 0" or "VERDICT: 1"; anything else is treated
  // as a retryable malformed reply.
  static Verdict parse_verdict(const std::string& reply) {
    const auto nl = reply.find('\n');
    std::string first(text::trim(reply.substr(0, nl)));
    std::string rest = nl == std::string::npos ? "" : std::string(text::trim(reply.substr(nl + 1)));
    for (auto& c : first) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    first.erase(std::remove(first.begin(), first.end(), ' '), first.end());
    if (first == "VERDICT:1") return {1, rest.empty() ? std::nullopt : std::optional<std::string>(rest)};
    if (first == "VERDICT:0") return {0, rest.empty() ? std::nullopt : std::optional<std::string>(rest)};
    throw BackendError("fact-checker reply has no verdict line", true);
  }

 private:
  std::string chat(const std::string& prompt) {
    nlohmann::json body = {{"model", cfg_.chat_model},
                           {"temperature", cfg_.temperature},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    const auto j = post("/chat/completions", body);
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(std::string("unexpected chat response: ") + e.what(), false);
    }
  }

  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    httplib::Client client(cfg_.base_url);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);
    client.set_bearer_token_auth(key_);
    auto res = client.Post(cfg_.path_prefix + path, body.dump(), "application/json");
    if (!res) throw BackendError("transport failure: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500) {
      throw BackendError("backend returned HTTP " + std::to_string(res->status), true);
    }
    if (res->status != 200) throw BackendError("backend returned HTTP " + std::to_string(res->status), false);
    try {
      return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw BackendError(std::string("backend returned invalid JSON: ") + e.what(), true);
    }
  }

  HttpBackendConfig cfg_;
  std::string key_;
};

}  // namespace shockcast
