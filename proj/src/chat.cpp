#include "gift/chat.hpp"

#include <sstream>

#include "gift/rng.hpp"

namespace gift {

json ChatRequest::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) {
    json content = json::array();
    for (const auto& p : m.parts) {
      if (p.kind == ChatPart::Kind::Text) {
        content.push_back({{"text", p.text}, {"type", "text"}});
      } else {
        content.push_back({{"image_url", {{"url", p.image_url}}}, {"type", "image_url"}});
      }
    }
    msgs.push_back({{"content", std::move(content)}, {"role", m.role}});
  }
  return json{{"messages", std::move(msgs)}, {"model", model}, {"temperature", temperature}};
}

std::string ChatRequest::idempotency_key() const { return hex64(fnv1a64(to_json().dump())); }

std::string extract_completion_text(std::string_view body) {
  if (body.empty()) throw MalformedResponse("empty response body");
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw MalformedResponse("response is not a JSON object");
  auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    throw MalformedResponse("response has no choices");
  }
  const json& msg = (*choices)[0].value("message", json::object());
  auto content = msg.find("content");
  if (content == msg.end()) throw MalformedResponse("choice has no message content");
  if (content->is_string()) return content->get<std::string>();
  if (content->is_array()) {
    std::string text;
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  }
  throw MalformedResponse("message content has unexpected type");
}

ReplayGenerator ReplayGenerator::from_jsonl(std::string_view text) {
  ReplayGenerator g;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (j.contains("response") && j["response"].is_string()) {
      g.add(j.at("key").get<std::string>(), j["response"].get<std::string>());
    }
  }
  return g;
}

void ReplayGenerator::add(std::string key, std::string response) {
  responses_.insert_or_assign(std::move(key), std::move(response));
}

std::string ReplayGenerator::complete(const ChatRequest& request) {
  auto it = responses_.find(request.idempotency_key());
  if (it == responses_.end()) {
    throw MalformedResponse("no recorded response for request " + request.idempotency_key());
  }
  return it->second;
}

ChatMessage interleave_images(std::string_view prompt, const std::vector<std::string>& image_urls) {
  static constexpr std::string_view kToken = "{IMAGE_TOKEN}";
  ChatMessage msg;
  std::size_t used = 0;
  std::size_t start = 0;
  for (std::size_t pos = prompt.find(kToken); pos != std::string_view::npos;
       pos = prompt.find(kToken, start)) {
    if (used == image_urls.size()) throw std::invalid_argument("prompt has more image slots than images");
    msg.parts.push_back(ChatPart::of_text(std::string(prompt.substr(start, pos - start))));
    msg.parts.push_back(ChatPart::of_image(image_urls[used++]));
    start = pos + kToken.size();
  }
  if (used != image_urls.size()) throw std::invalid_argument("prompt has fewer image slots than images");
  msg.parts.push_back(ChatPart::of_text(std::string(prompt.substr(start))));
  return msg;
}

}  // namespace gift
