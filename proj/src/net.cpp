#include "gift/net.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <semaphore>
#include <thread>

namespace gift {

namespace {

std::string env_or_empty(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  return v == nullptr ? std::string() : std::string(v);
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, const RetryPolicy& retry) {
  auto client = std::make_unique<httplib::Client>(origin);
  client->set_connection_timeout(std::chrono::seconds(10));
  client->set_read_timeout(retry.timeout);
  client->set_write_timeout(retry.timeout);
  return client;
}

// Runs `attempt` until it succeeds, a non-retriable error occurs or the
// attempts are used up.
template <typename Fn>
auto with_retries(const RetryPolicy& retry, Fn&& attempt) {
  auto delay = retry.base_delay;
  for (int i = 1;; ++i) {
    try {
      return attempt(i);
    } catch (const EndpointError& e) {
      if (!e.retriable() || i >= retry.attempts) throw;
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace

std::optional<Endpoint> Endpoint::from_env(const std::string& prefix) {
  std::string url = env_or_empty(prefix + "_URL");
  if (url.empty()) return std::nullopt;
  return Endpoint{std::move(url), env_or_empty(prefix + "_TOKEN"), env_or_empty(prefix + "_MODEL")};
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw std::invalid_argument("not an http(s) URL: " + url);
  std::string prefix = m[2].str();
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

std::string base64_encode(std::string_view bytes) { return httplib::detail::base64_encode(std::string(bytes)); }

std::string svg_data_url(std::string_view svg) { return "data:image/svg+xml;base64," + base64_encode(svg); }

HttpChatClient::HttpChatClient(Endpoint endpoint, std::optional<std::filesystem::path> transcript, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), transcript_(std::move(transcript)), retry_(retry) {
  split_url(endpoint_.base_url);
}

void HttpChatClient::log(const json& entry) {
  if (!transcript_) return;
  std::lock_guard lock(log_mutex_);
  if (transcript_->has_parent_path()) std::filesystem::create_directories(transcript_->parent_path());
  std::ofstream out(*transcript_, std::ios::app | std::ios::binary);
  out << entry.dump() << '\n';
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  ChatRequest req = request;
  if (req.model.empty()) req.model = endpoint_.model;
  const auto [origin, prefix] = split_url(endpoint_.base_url);
  const std::string body = req.to_json().dump();
  const std::string key = req.idempotency_key();

  return with_retries(retry_, [&](int attempt) {
    json entry{{"attempt", attempt}, {"key", key}, {"request", req.to_json()}};
    auto client = make_client(origin, retry_);
    httplib::Headers headers{{"Idempotency-Key", key}};
    if (!endpoint_.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.token);
    auto res = client->Post(prefix + "/chat/completions", headers, body, "application/json");
    if (!res) {
      const std::string err = "transport error: " + httplib::to_string(res.error());
      entry["error"] = err;
      log(entry);
      throw TransportError(err);
    }
    entry["status"] = res->status;
    if (res->status != 200) {
      entry["error"] = "HTTP " + std::to_string(res->status);
      entry["body"] = res->body;
      log(entry);
      throw HttpStatusError(res->status, res->body);
    }
    try {
      std::string text = extract_completion_text(res->body);
      entry["response"] = text;
      log(entry);
      return text;
    } catch (const MalformedResponse& e) {
      entry["error"] = e.what();
      entry["body"] = res->body;
      log(entry);
      throw;
    }
  });
}

struct WireClassifier::Gate {
  explicit Gate(unsigned n) : slots(static_cast<std::ptrdiff_t>(n)) {}
  std::counting_semaphore<> slots;
};

WireClassifier::WireClassifier(std::string url, unsigned max_inflight, RetryPolicy retry)
    : url_(std::move(url)), retry_(retry), gate_(std::make_unique<Gate>(std::max(1u, max_inflight))) {
  split_url(url_);
}

WireClassifier::~WireClassifier() = default;

ClassLabel WireClassifier::classify(const Scene& scene) const {
  const auto [origin, prefix] = split_url(url_);
  const std::string body = json{{"scene", scene.to_json()}}.dump();
  gate_->slots.acquire();
  struct Release {
    Gate& g;
    ~Release() { g.slots.release(); }
  } release{*gate_};
  return with_retries(retry_, [&](int) {
    auto client = make_client(origin, retry_);
    auto res = client->Post(prefix + "/predict", body, "application/json");
    if (!res) throw TransportError("classifier transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) throw HttpStatusError(res->status, res->body);
    const json j = json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("label") || !j["label"].is_number_integer()) {
      throw MalformedResponse("classifier answer lacks an integer 'label'");
    }
    const int label = j["label"].get<int>();
    if (label != 0 && label != 1) throw MalformedResponse("classifier label must be 0 or 1");
    return label_from_int(label);
  });
}

std::string WireClassifier::describe() const { return "remote classifier at " + url_; }

}  // namespace gift
