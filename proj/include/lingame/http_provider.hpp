#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lingame/elicit.hpp"

namespace lingame {

struct HttpProviderSettings {
  std::string base_url;  // e.g. https://api.openai.com or http://127.0.0.1:8080/v1
  std::string model;
  std::string api_key;
  std::optional<double> temperature;
  std::chrono::seconds timeout{60};

  // Reads LINGAME_API_KEY, LINGAME_API_URL and LINGAME_MODEL. Throws
  // Error{ProviderFailure} when the key is missing; the URL defaults to
  // https://api.openai.com and the model to gpt-4.
  static HttpProviderSettings from_environment();
};

// Chat-completion client. Each session keeps its own message history, so a
// fresh session starts from an empty chat.
class HttpChatProvider final : public CompletionProvider {
 public:
  explicit HttpChatProvider(HttpProviderSettings settings);
  ~HttpChatProvider() override;

  SessionId open_session() override;
  std::string complete(SessionId session, const Query& query) override;
  void close_session(SessionId session) override;

  // Resolved request path, e.g. /v1/chat/completions.
  const std::string& endpoint_path() const noexcept { return path_; }

 private:
  struct Message {
    std::string role;
    std::string content;
  };

  HttpProviderSettings settings_;
  std::string origin_;
  std::string path_;
  std::mutex mutex_;
  SessionId next_session_ = 0;
  std::map<SessionId, std::vector<Message>> sessions_;
};

}  // namespace lingame
