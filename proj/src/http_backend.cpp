#include "httplib.h"

#include <cstdlib>

#include "refswap/backend.hpp"

namespace refswap {

namespace {

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("base_url must include a scheme: '" + url + "'");
  }
  std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

}  // namespace

HttpChatBackend::HttpChatBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  std::tie(scheme_host_port_, path_prefix_) = split_base_url(config_.base_url);
}

HttpChatBackend::~HttpChatBackend() = default;

json HttpChatBackend::request_body(const std::string& prompt,
                                   const SamplingParams& params) const {
  return json{{"model", config_.model},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})},
              {"temperature", params.temperature},
              {"max_tokens", params.max_tokens}};
}

std::string HttpChatBackend::complete(const std::string& prompt,
                                      const SamplingParams& params,
                                      const PromptContext* /*context*/) {
  httplib::Client client(scheme_host_port_);
  auto timeout = static_cast<time_t>(config_.timeout.count());
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);

  httplib::Headers headers;
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const std::string body = request_body(prompt, params).dump();
  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body,
                         "application/json");
  if (!res) {
    throw TransportError(config_.id + ": " + httplib::to_string(res.error()),
                         /*retriable=*/true);
  }
  if (res->status != 200) {
    bool retriable = res->status == 429 || res->status >= 500;
    throw TransportError(config_.id + ": HTTP " + std::to_string(res->status) +
                             ": " + res->body.substr(0, 200),
                         retriable);
  }
  json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
  if (reply.is_discarded()) {
    throw TransportError(config_.id + ": response is not JSON", /*retriable=*/true);
  }
  try {
    const json& content = reply.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const json::exception& e) {
    throw TransportError(config_.id + ": unexpected response shape: " + e.what(),
                         /*retriable=*/false);
  }
}

}  // namespace refswap
