// HTTP collaborators: chat-completions client, remote classifier, image
// encoding for VLM prompts.
#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "gift/chat.hpp"
#include "gift/classifier.hpp"

namespace gift {

struct Endpoint {
  std::string base_url;  // e.g. https://host/v1
  std::string token;
  std::string model;

  // Reads {prefix}_URL, {prefix}_TOKEN and {prefix}_MODEL; nullopt when the
  // URL is unset.
  static std::optional<Endpoint> from_env(const std::string& prefix);
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{500};  // doubled after each failure
  std::chrono::seconds timeout{120};
};

// POSTs to {base_url}/chat/completions. Retriable failures (transport
// errors, 429, 5xx) are retried with exponential backoff. Every attempt is
// appended to the transcript file when one is given.
class HttpChatClient final : public TextGenerator {
 public:
  HttpChatClient(Endpoint endpoint, std::optional<std::filesystem::path> transcript = std::nullopt,
                 RetryPolicy retry = {});
  std::string complete(const ChatRequest& request) override;
  const Endpoint& endpoint() const { return endpoint_; }

 private:
  void log(const json& entry);

  Endpoint endpoint_;
  std::optional<std::filesystem::path> transcript_;
  RetryPolicy retry_;
  std::mutex log_mutex_;
};

// Splits http(s)://host[:port][/prefix] into origin and path prefix.
// Throws std::invalid_argument for other schemes.
std::pair<std::string, std::string> split_url(const std::string& url);

std::string base64_encode(std::string_view bytes);
std::string svg_data_url(std::string_view svg);

// Classifier behind POST {url}/predict with body {"scene": ...} answering
// {"label": 0|1}. At most max_inflight requests run at once.
class WireClassifier final : public Model {
 public:
  explicit WireClassifier(std::string url, unsigned max_inflight = 8, RetryPolicy retry = {});
  ~WireClassifier() override;
  ClassLabel classify(const Scene& scene) const override;
  std::string describe() const override;

 private:
  struct Gate;
  std::string url_;
  RetryPolicy retry_;
  std::unique_ptr<Gate> gate_;
};

}  // namespace gift
