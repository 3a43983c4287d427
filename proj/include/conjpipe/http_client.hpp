#pragma once

#include <chrono>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "conjpipe/genpipe.hpp"

// Minimal chat-completion client shared by the generator and prover HTTP
// backends. Request shape: {model, messages:[{role,content}...], temperature};
// the first choice's message content is the completion.
namespace conjpipe::http {

struct ChatEndpoint {
  std::string url;  // full URL, e.g. https://host/v1/chat/completions
  std::string model;
  double temperature = 1.0;
  std::string api_key;
  int max_retries = 3;     // additional attempts on 5xx/timeouts
  int backoff_ms = 250;    // doubled per retry
  int timeout_s = 120;
};

struct ChatUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

namespace detail {

inline void split_url(const std::string& url, std::string& base, std::string& path) {
  const size_t scheme = url.find("://");
  const size_t slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (slash == std::string::npos) {
    base = url;
    path = "/";
  } else {
    base = url.substr(0, slash);
    path = url.substr(slash);
  }
}

}  // namespace detail

inline std::string chat_complete(const ChatEndpoint& ep, const std::string& system_message,
                                 const std::string& user_message,
                                 ChatUsage* usage = nullptr) {
  if (ep.url.empty()) throw gen::BackendUnavailable("no endpoint configured");

  nlohmann::json body = {
      {"model", ep.model},
      {"messages",
       {{{"role", "system"}, {"content", system_message}},
        {{"role", "user"}, {"content", user_message}}}},
      {"temperature", ep.temperature},
  };

  std::string base, path;
  detail::split_url(ep.url, base, path);
  httplib::Client cli(base);
  cli.set_connection_timeout(ep.timeout_s, 0);
  cli.set_read_timeout(ep.timeout_s, 0);
  httplib::Headers headers;
  if (!ep.api_key.empty()) headers.emplace("Authorization", "Bearer " + ep.api_key);

  std::string last_error;
  for (int attempt = 0; attempt <= ep.max_retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(ep.backoff_ms << (attempt - 1)));
    auto res = cli.Post(path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;  // connection failures and timeouts are retryable
    }
    if (res->status >= 500) {
      last_error = "server error: HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw gen::BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + ep.url);
    }
    try {
      const auto j = nlohmann::json::parse(res->body);
      const auto& choices = j.at("choices");
      if (choices.empty()) throw gen::BackendRefusal("response carried no choices");
      const auto& content = choices.at(0).at("message").at("content");
      if (!content.is_string() || content.get<std::string>().empty())
        throw gen::BackendRefusal("response content empty or non-text");
      if (usage && j.contains("usage")) {
        usage->prompt_tokens = j.at("usage").value("prompt_tokens", 0L);
        usage->completion_tokens = j.at("usage").value("completion_tokens", 0L);
      }
      return content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw gen::BackendRefusal(std::string("unparseable response: ") + e.what());
    }
  }
  throw gen::BackendUnavailable(last_error.empty() ? "request failed" : last_error);
}

}  // namespace conjpipe::http
