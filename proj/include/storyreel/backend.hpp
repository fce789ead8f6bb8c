#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace storyreel {

enum class Role { system, user, assistant };
std::string_view to_string(Role r);

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_name;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  std::optional<std::int64_t> seed;
  int max_tokens = 2048;

  // Throws InvalidRequest unless there is >=1 message, the last one is from the
  // user, temperature >= 0 and max_tokens > 0.
  void validate() const;
  const std::string& last_user_message() const;
};

enum class Modality { text, image };
std::string_view to_string(Modality m);

struct EmbeddingRequest {
  Modality modality = Modality::text;
  std::string payload;  // UTF-8 text or encoded image bytes
};

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dim() const { return values.size(); }
};

struct ImageRequest {
  std::string prompt;
  std::optional<std::string> negative_prompt;
  std::int64_t seed = 0;
  int width = 512;
  int height = 512;
  std::optional<std::string> style_embedding_ref;
};

struct RetryPolicy {
  int max_attempts = 3;
  double backoff_seconds = 0.5;  // doubled after every failed attempt
};

struct BackendConfig {
  enum class Kind { http, mock };
  Kind kind = Kind::mock;
  std::string endpoint;
  std::string auth_env;  // name of the env var holding the bearer token
  std::string model = "gpt-4";
  RetryPolicy retry;
  double rate_limit = 0.0;  // requests per second; 0 disables
  std::filesystem::path script;
  double temperature = 0.7;
  int max_tokens = 2048;
  int dim = 512;         // embedding backends
  int max_side = 2048;   // image backends

  // http requires endpoint; mock requires script.
  void validate(std::string_view name) const;
};

// Backends perform one attempt per call. A transient transport failure is
// reported as Errc::BackendUnavailable; the client layer retries those.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string complete(const ChatRequest& req) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string id() const = 0;
  virtual EmbeddingVector embed(const EmbeddingRequest& req) = 0;
};

class ImageBackend {
 public:
  virtual ~ImageBackend() = default;
  virtual std::string id() const = 0;
  // Returns PNG bytes.
  virtual std::string generate(const ImageRequest& req) = 0;
};

// Relative script paths resolve against `base_dir`.
std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& cfg, const std::filesystem::path& base_dir);
std::shared_ptr<EmbeddingBackend> make_embedding_backend(const BackendConfig& cfg,
                                                         const std::filesystem::path& base_dir);
std::shared_ptr<ImageBackend> make_image_backend(const BackendConfig& cfg, const std::filesystem::path& base_dir);

}  // namespace storyreel
