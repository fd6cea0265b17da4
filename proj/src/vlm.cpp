#include "aftermath/vlm.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "aftermath/resample.hpp"

namespace aftermath::vlm {

using nlohmann::json;

std::string_view role_name(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Message Message::user(std::string text) {
  Message m;
  m.role = Role::user;
  m.add_text(std::move(text));
  return m;
}

Message& Message::add_text(std::string text) {
  parts.push_back(TextPart{std::move(text)});
  return *this;
}

Message& Message::add_png(std::vector<std::uint8_t> png) {
  parts.push_back(ImagePart{std::move(png)});
  return *this;
}

Message& Message::add_image(const img::Image& image) {
  return add_png(img::encode_png(image));
}

namespace {

// In-flight request cap shared by every session in the process.
class RequestGate {
 public:
  void set_limit(int limit) {
    std::lock_guard lock(mu_);
    limit_ = std::max(1, limit);
    cv_.notify_all();
  }

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return in_flight_ < limit_; });
    ++in_flight_;
  }

  void release() {
    std::lock_guard lock(mu_);
    --in_flight_;
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int limit_ = 2;
  int in_flight_ = 0;
};

RequestGate& gate() {
  static RequestGate g;
  return g;
}

struct GateHold {
  GateHold() { gate().acquire(); }
  ~GateHold() { gate().release(); }
};

json part_to_json(const Part& part) {
  if (const auto* t = std::get_if<TextPart>(&part)) return json{{"text", t->text}};
  const auto& image = std::get<ImagePart>(part);
  return json{{"png_base64", img::base64_encode(image.png)}};
}

json message_to_json(const Message& m) {
  json parts = json::array();
  for (const Part& p : m.parts) parts.push_back(part_to_json(p));
  return json{{"role", std::string(role_name(m.role))}, {"parts", std::move(parts)}};
}

}  // namespace

void set_request_concurrency(int limit) { gate().set_limit(limit); }

Message downscale_for_send(const Message& message, int max_image_edge) {
  Message out;
  out.role = message.role;
  for (const Part& part : message.parts) {
    const auto* image_part = std::get_if<ImagePart>(&part);
    if (!image_part) {
      out.parts.push_back(part);
      continue;
    }
    img::Image decoded = img::decode_png(image_part->png);
    if (std::max(decoded.width, decoded.height) <= max_image_edge) {
      out.parts.push_back(part);  // within bound: original bytes untouched
      continue;
    }
    auto [w, h] = img::fit_within_edge(decoded.width, decoded.height, max_image_edge);
    out.add_image(img::bilinear_resize(decoded, w, h));
  }
  return out;
}

std::string request_body(const VlmConfig& config, const std::vector<Message>& transcript,
                         const Message& pending) {
  json messages = json::array();
  for (const Message& m : transcript) messages.push_back(message_to_json(m));
  messages.push_back(message_to_json(pending));
  // Wire carries exactly these three keys; max_output_tokens and timeouts are
  // client-side concerns.
  json body{{"model", config.model_name},
            {"temperature", config.temperature},
            {"messages", std::move(messages)}};
  return body.dump();
}

ChatSession::ChatSession(VlmConfig config, std::string session_id)
    : config_(std::move(config)), session_id_(std::move(session_id)) {}

ChatSession new_session(const VlmConfig& config) {
  static std::atomic<int> counter{0};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "session-%06d", ++counter);
  return ChatSession(config, buf);
}

ChatSession new_session(const VlmConfig& config, std::string label) {
  return ChatSession(config, std::move(label));
}

std::string ChatSession::send(Message message) {
  if (message.role != Role::user) throw Error("send() takes user messages only");
  Message prepared = downscale_for_send(message, config_.max_image_edge);
  std::string body = request_body(config_, transcript_, prepared);

  std::string reply;
  std::exception_ptr last_error;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(100 << (attempt - 1)));
    try {
      GateHold hold;
      httplib::Client client(config_.endpoint_url);
      client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
      client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));
      client.set_write_timeout(std::chrono::duration<double>(config_.timeout_s));

      httplib::Result res = client.Post("/chat", body, "application/json");
      if (!res) {
        if (res.error() == httplib::Error::ConnectionTimeout)
          throw Timeout("request to " + config_.endpoint_url + " timed out");
        throw EndpointUnavailable("cannot reach " + config_.endpoint_url + ": " +
                                  httplib::to_string(res.error()));
      }
      if (res->status < 200 || res->status >= 300)
        throw HttpError(res->status, "endpoint returned HTTP " + std::to_string(res->status));
      json doc = json::parse(res->body, nullptr, false);
      if (doc.is_discarded() || !doc.contains("text") || !doc["text"].is_string())
        throw MalformedResponse("response is not {\"text\": ...}");
      reply = doc["text"].get<std::string>();
      last_error = nullptr;
      break;
    } catch (const Error&) {
      last_error = std::current_exception();
    }
  }
  if (last_error) std::rethrow_exception(last_error);

  transcript_.push_back(std::move(prepared));
  Message assistant;
  assistant.role = Role::assistant;
  assistant.add_text(reply);
  transcript_.push_back(std::move(assistant));
  return reply;
}

}  // namespace aftermath::vlm
