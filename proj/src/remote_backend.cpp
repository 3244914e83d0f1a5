#include "httplib.h"

#include <cstdlib>
#include <regex>

#include "gistkit/llm.hpp"
#include "url.hpp"

namespace gistkit::llm {

RemoteBackend::RemoteBackend(Options options) : options_(std::move(options)) {
  auto url = detail::split_url(options_.base_url);
  origin_ = url.origin;
  path_ = url.path + "/chat/completions";
}

RemoteBackend::Options RemoteBackend::options_from_env() {
  Options options;
  if (const char* key = std::getenv("OPENAI_API_KEY")) options.api_key = key;
  if (const char* base = std::getenv("OPENAI_BASE_URL"); base != nullptr && *base != '\0') {
    options.base_url = base;
  }
  return options;
}

Json RemoteBackend::request_body(const CompletionRequest& request) {
  Json messages = Json::array();
  if (request.prompt.system) {
    messages.push_back({{"role", "system"}, {"content", *request.prompt.system}});
  }
  messages.push_back({{"role", "user"}, {"content", request.prompt.user}});
  return {{"model", request.model_id},
          {"messages", std::move(messages)},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens}};
}

ProviderReply RemoteBackend::parse_reply(const std::string& body) {
  Json json;
  try {
    json = Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw ProtocolError(std::string("provider returned invalid JSON: ") + e.what());
  }
  try {
    ProviderReply reply;
    const Json& message = json.at("choices").at(0).at("message");
    reply.text = message.at("content").get<std::string>();
    if (json.contains("usage") && json["usage"].is_object()) {
      reply.usage.prompt_tokens = json["usage"].value("prompt_tokens", 0);
      reply.usage.completion_tokens = json["usage"].value("completion_tokens", 0);
    }
    return reply;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("unexpected completion payload: ") + e.what());
  }
}

ProviderReply RemoteBackend::call(const CompletionRequest& request) {
  if (options_.api_key.empty()) {
    throw GatewayError(401, "OPENAI_API_KEY is not set");
  }
  httplib::Client client(origin_);
  client.set_connection_timeout(options_.timeout);
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers{{"Authorization", "Bearer " + options_.api_key}};

  auto result = client.Post(path_, headers, request_body(request).dump(), "application/json");
  if (!result) {
    throw GatewayError(0, "transport error: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    std::string snippet = result->body.substr(0, 300);
    throw GatewayError(result->status, "HTTP " + std::to_string(result->status) + ": " + snippet);
  }
  return parse_reply(result->body);
}

}  // namespace gistkit::llm
