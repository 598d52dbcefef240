#pragma once

// Chat-completion transport over HTTP(S).
//
// Request:  POST <endpoint> {"model", "messages": [{"role": "user", ...}], "temperature"}
// Reply:    choices[0].message.content when present; otherwise the whole body
//           is treated as the assistant text.

#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "maskcl/agents.hpp"

namespace maskcl {

struct EndpointUrl {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string path;              // e.g. "/v1/chat/completions"
};

inline EndpointUrl split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::Config, "endpoint needs a scheme: " + url);
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorKind::Config, "endpoint scheme must be http or https: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpChatTransport : public ChatTransport {
 public:
  explicit HttpChatTransport(LlmSettings settings) : settings_(std::move(settings)) {
    url_ = split_endpoint(settings_.endpoint);
    if (const char* key = std::getenv(settings_.api_key_env.c_str()); key != nullptr) api_key_ = key;
  }

  std::string complete(const std::string& prompt) override {
    httplib::Client client(url_.scheme_host_port);
    const auto secs = static_cast<time_t>(settings_.timeout_seconds);
    const auto usecs = static_cast<time_t>((settings_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const nlohmann::json body = {
        {"model", settings_.model},
        {"messages", {{{"role", "user"}, {"content", prompt}}}},
        {"temperature", settings_.temperature},
    };
    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + settings_.endpoint + " failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("HTTP " + std::to_string(res->status) + " from " + settings_.endpoint);
    }
    return extract_content(res->body);
  }

  static std::string extract_content(const std::string& body) {
    const auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const auto& choice = j["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        return choice["message"]["content"].get<std::string>();
      }
    }
    return body;
  }

 private:
  LlmSettings settings_;
  EndpointUrl url_;
  std::string api_key_;
};

}  // namespace maskcl
