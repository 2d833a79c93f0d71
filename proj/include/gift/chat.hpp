// Chat-completions request model shared by the captioning and summarization
// clients, plus the error taxonomy for external endpoints.
#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gift/scene.hpp"

namespace gift {

struct ChatPart {
  enum class Kind { Text, Image };
  Kind kind = Kind::Text;
  std::string text;       // Kind::Text
  std::string image_url;  // Kind::Image, usually a data: URL

  static ChatPart of_text(std::string t) { return {Kind::Text, std::move(t), {}}; }
  static ChatPart of_image(std::string url) { return {Kind::Image, {}, std::move(url)}; }
};

struct ChatMessage {
  std::string role = "user";
  std::vector<ChatPart> parts;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;

  // Wire body in the OpenAI chat-completions shape.
  json to_json() const;
  // Stable key derived from the request body; logged with every attempt.
  std::string idempotency_key() const;
};

// Base of every failure talking to an external model.
class EndpointError : public std::runtime_error {
 public:
  EndpointError(const std::string& what, bool retriable)
      : std::runtime_error(what), retriable_(retriable) {}
  bool retriable() const { return retriable_; }

 private:
  bool retriable_;
};

class TransportError : public EndpointError {
 public:
  explicit TransportError(const std::string& what) : EndpointError(what, true) {}
};

class HttpStatusError : public EndpointError {
 public:
  HttpStatusError(int status, const std::string& body)
      : EndpointError("endpoint returned HTTP " + std::to_string(status), status == 429 || status >= 500),
        status_(status),
        body_(body) {}
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

class MalformedResponse : public EndpointError {
 public:
  explicit MalformedResponse(const std::string& what) : EndpointError(what, false) {}
};

// Anything that turns a chat request into the assistant's text.
class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual std::string complete(const ChatRequest& request) = 0;
};

// Extracts choices[0].message.content; throws MalformedResponse otherwise.
std::string extract_completion_text(std::string_view body);

// Serves responses recorded in a transcript (JSONL with "key" and
// "response" fields), keyed by request idempotency key.
class ReplayGenerator final : public TextGenerator {
 public:
  static ReplayGenerator from_jsonl(std::string_view text);
  void add(std::string key, std::string response);
  std::string complete(const ChatRequest& request) override;

 private:
  std::map<std::string, std::string> responses_;
};

// Splits `prompt` at each {IMAGE_TOKEN} and interleaves the given images.
// Throws std::invalid_argument when the counts differ.
ChatMessage interleave_images(std::string_view prompt, const std::vector<std::string>& image_urls);

}  // namespace gift
