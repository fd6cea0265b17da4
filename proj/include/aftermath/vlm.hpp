#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aftermath/errors.hpp"
#include "aftermath/image.hpp"

namespace aftermath::vlm {

struct EndpointUnavailable : Error {
  using Error::Error;
};
struct Timeout : Error {
  using Error::Error;
};
struct MalformedResponse : Error {
  using Error::Error;
};
struct HttpError : Error {
  HttpError(int status_, const std::string& what) : Error(what), status(status_) {}
  int status;
};

struct VlmConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8080
  std::string model_name;
  double temperature = 0.0;  // 0 for reproducible runs
  int max_output_tokens = 2048;
  double timeout_s = 120.0;
  int max_image_edge = 2048;  // images larger than this are downscaled before send
};

enum class Role { system, user, assistant };
std::string_view role_name(Role r);

struct TextPart {
  std::string text;
};
struct ImagePart {
  std::vector<std::uint8_t> png;
};
using Part = std::variant<TextPart, ImagePart>;

struct Message {
  Role role = Role::user;
  std::vector<Part> parts;

  static Message user(std::string text);
  Message& add_text(std::string text);
  Message& add_png(std::vector<std::uint8_t> png);
  Message& add_image(const img::Image& image);
  int part_count() const { return static_cast<int>(parts.size()); }
};

/// One conversation. The transcript is what was actually sent: images appear
/// post-downscale. Sessions never share state.
class ChatSession {
 public:
  explicit ChatSession(VlmConfig config, std::string session_id);

  const std::string& session_id() const { return session_id_; }
  const VlmConfig& config() const { return config_; }
  const std::vector<Message>& transcript() const { return transcript_; }

  /// Sends one user message and returns the assistant text verbatim. Appends
  /// both to the transcript; on error the transcript is unchanged.
  std::string send(Message message);

 private:
  VlmConfig config_;
  std::string session_id_;
  std::vector<Message> transcript_;
};

/// Fresh session with a generated id (process-local counter). Prefer the
/// labeled overload where reports must be reproducible across runs.
ChatSession new_session(const VlmConfig& config);
ChatSession new_session(const VlmConfig& config, std::string label);

/// Exact bytes POSTed to /chat for this transcript plus pending message.
/// Exposed so tests can pin the wire format.
std::string request_body(const VlmConfig& config, const std::vector<Message>& transcript,
                         const Message& pending);

/// Copy of the message with oversized images downscaled to fit
/// max_image_edge (aspect preserved); images already within the bound keep
/// their original bytes.
Message downscale_for_send(const Message& message, int max_image_edge);

/// Process-wide cap on concurrent in-flight requests (default 2).
void set_request_concurrency(int limit);

}  // namespace aftermath::vlm
