#include "lingame/http_provider.hpp"

#include <cstdlib>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

namespace lingame {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

HttpProviderSettings HttpProviderSettings::from_environment() {
  HttpProviderSettings s;
  s.api_key = env_or("LINGAME_API_KEY", "");
  if (s.api_key.empty()) {
    throw Error(ErrorCode::ProviderFailure, "LINGAME_API_KEY is not set; live elicitation disabled");
  }
  s.base_url = env_or("LINGAME_API_URL", "https://api.openai.com");
  s.model = env_or("LINGAME_MODEL", "gpt-4");
  return s;
}

HttpChatProvider::HttpChatProvider(HttpProviderSettings settings) : settings_(std::move(settings)) {
  const auto scheme_end = settings_.base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "API URL needs a scheme: " + settings_.base_url);
  }
  const auto path_start = settings_.base_url.find('/', scheme_end + 3);
  origin_ = settings_.base_url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : settings_.base_url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (ends_with(path, "/chat/completions")) {
    path_ = path;
  } else if (ends_with(path, "/v1")) {
    path_ = path + "/chat/completions";
  } else {
    path_ = path + "/v1/chat/completions";
  }
}

HttpChatProvider::~HttpChatProvider() = default;

SessionId HttpChatProvider::open_session() {
  std::lock_guard lock(mutex_);
  const SessionId id = ++next_session_;
  sessions_[id];
  return id;
}

void HttpChatProvider::close_session(SessionId session) {
  std::lock_guard lock(mutex_);
  sessions_.erase(session);
}

std::string HttpChatProvider::complete(SessionId session, const Query& query) {
  nlohmann::json messages = nlohmann::json::array();
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(session);
    if (it == sessions_.end()) throw ProviderError("unknown session", false);
    for (const auto& m : it->second) messages.push_back({{"role", m.role}, {"content", m.content}});
  }
  messages.push_back({{"role", "user"}, {"content", query.prompt}});

  nlohmann::json body{{"model", settings_.model}, {"messages", messages}};
  if (settings_.temperature) body["temperature"] = *settings_.temperature;

  httplib::Client client(origin_);
  client.set_connection_timeout(settings_.timeout);
  client.set_read_timeout(settings_.timeout);
  client.set_bearer_token_auth(settings_.api_key);
  const auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw ProviderError("transport error: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw ProviderError("HTTP " + std::to_string(res->status), true);
  }
  if (res->status != 200) {
    throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body, false);
  }

  std::string content;
  try {
    const auto reply = nlohmann::json::parse(res->body);
    content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(std::string("malformed completion response: ") + e.what(), true);
  }

  std::lock_guard lock(mutex_);
  auto& history = sessions_[session];
  history.push_back({"user", query.prompt});
  history.push_back({"assistant", content});
  return content;
}

}  // namespace lingame
