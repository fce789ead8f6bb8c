#include "storyreel/backend.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cmath>
#include <cstdlib>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/mock_backends.hpp"

namespace storyreel {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(Modality m) { return m == Modality::text ? "text" : "image"; }

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(Errc::InvalidRequest, "chat request without messages");
  if (messages.back().role != Role::user) throw Error(Errc::InvalidRequest, "last chat message must be from the user");
  if (!(temperature >= 0.0)) throw Error(Errc::InvalidRequest, "temperature must be >= 0");
  if (max_tokens <= 0) throw Error(Errc::InvalidRequest, "max_tokens must be positive");
}

const std::string& ChatRequest::last_user_message() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == Role::user) return it->content;
  throw Error(Errc::InvalidRequest, "chat request without a user message");
}

void BackendConfig::validate(std::string_view name) const {
  std::string n(name);
  if (kind == Kind::http && endpoint.empty()) throw Error(Errc::Config, "backend '" + n + "': http requires endpoint");
  if (kind == Kind::mock && script.empty()) throw Error(Errc::Config, "backend '" + n + "': mock requires script");
  if (retry.max_attempts < 1) throw Error(Errc::Config, "backend '" + n + "': retry.max_attempts must be >= 1");
  if (retry.backoff_seconds < 0) throw Error(Errc::Config, "backend '" + n + "': retry.backoff must be >= 0");
  if (rate_limit < 0) throw Error(Errc::Config, "backend '" + n + "': rate_limit must be >= 0");
  if (dim <= 0) throw Error(Errc::Config, "backend '" + n + "': dim must be positive");
}

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::Config, "endpoint '" + endpoint + "' lacks a scheme");
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class HttpTransport {
 public:
  explicit HttpTransport(const BackendConfig& cfg) : url_(split_url(cfg.endpoint)), auth_env_(cfg.auth_env) {}

  std::string post_json(const json& body, const std::string& accept) const {
    httplib::Client client(url_.origin);
    client.set_connection_timeout(30);
    client.set_read_timeout(300);
    httplib::Headers headers{{"Accept", accept}};
    if (!auth_env_.empty()) {
      const char* token = std::getenv(auth_env_.c_str());
      if (!token) throw Error(Errc::Config, "auth env var " + auth_env_ + " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = client.Post(url_.path, headers, body.dump(), "application/json");
    if (!res) {
      throw Error(Errc::BackendUnavailable, "POST " + url_.origin + url_.path + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 429 || res->status >= 500)
      throw Error(Errc::BackendUnavailable, "POST " + url_.path + " returned HTTP " + std::to_string(res->status));
    if (res->status >= 400)
      throw Error(Errc::InvalidRequest, "POST " + url_.path + " returned HTTP " + std::to_string(res->status) +
                                            ": " + res->body.substr(0, 200));
    return res->body;
  }

  std::string id() const { return url_.origin + url_.path; }

 private:
  Url url_;
  std::string auth_env_;
};

json parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ContractViolation, "backend returned non-JSON body");
  return j;
}

class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(const BackendConfig& cfg) : transport_(cfg) {}
  std::string id() const override { return "http:" + transport_.id(); }

  std::string complete(const ChatRequest& req) override {
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    json body{{"model", req.model_name},
              {"messages", messages},
              {"temperature", req.temperature},
              {"max_tokens", req.max_tokens}};
    if (req.seed) body["seed"] = *req.seed;
    json j = parse_body(transport_.post_json(body, "application/json"));
    if (j.contains("text") && j["text"].is_string()) return j["text"].get<std::string>();
    // tolerate the choices[0].message.content shape of chat-completion servers
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const auto& c = j["choices"][0];
      if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string())
        return c["message"]["content"].get<std::string>();
    }
    throw Error(Errc::ContractViolation, "chat response lacks 'text'");
  }

 private:
  HttpTransport transport_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(const BackendConfig& cfg) : transport_(cfg) {}
  std::string id() const override { return "http:" + transport_.id(); }

  EmbeddingVector embed(const EmbeddingRequest& req) override {
    json body{{"modality", to_string(req.modality)}};
    if (req.modality == Modality::text) {
      body["payload"] = req.payload;
    } else {
      body["payload"] = base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(req.payload.data()),
                                                req.payload.size()));
    }
    json j = parse_body(transport_.post_json(body, "application/json"));
    if (!j.contains("vector") || !j["vector"].is_array())
      throw Error(Errc::ContractViolation, "embedding response lacks 'vector'");
    EmbeddingVector v;
    for (const auto& x : j["vector"]) {
      if (!x.is_number()) throw Error(Errc::ContractViolation, "embedding vector has a non-number entry");
      v.values.push_back(x.get<double>());
    }
    return v;
  }

 private:
  HttpTransport transport_;
};

class HttpImageBackend final : public ImageBackend {
 public:
  explicit HttpImageBackend(const BackendConfig& cfg) : transport_(cfg) {}
  std::string id() const override { return "http:" + transport_.id(); }

  std::string generate(const ImageRequest& req) override {
    json body{{"prompt", req.prompt}, {"seed", req.seed}, {"width", req.width}, {"height", req.height}};
    if (req.negative_prompt) body["negative_prompt"] = *req.negative_prompt;
    if (req.style_embedding_ref) body["style_embedding_ref"] = *req.style_embedding_ref;
    std::string png = transport_.post_json(body, "image/png");
    if (png.size() < 8 || png.compare(0, 8, "\x89PNG\r\n\x1a\n") != 0)
      throw Error(Errc::ContractViolation, "image endpoint did not return a PNG body");
    return png;
  }

 private:
  HttpTransport transport_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::string script_tag(const std::filesystem::path& script) {
  return sha256_hex(read_file(script)).substr(0, 12);
}

}  // namespace

std::shared_ptr<ChatBackend> make_chat_backend(const BackendConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.kind == BackendConfig::Kind::http) return std::make_shared<HttpChatBackend>(cfg);
  auto path = resolve(base_dir, cfg.script);
  return std::make_shared<MockChatBackend>(load_chat_script(path), "mock-chat:" + script_tag(path));
}

std::shared_ptr<EmbeddingBackend> make_embedding_backend(const BackendConfig& cfg,
                                                         const std::filesystem::path& base_dir) {
  if (cfg.kind == BackendConfig::Kind::http) return std::make_shared<HttpEmbeddingBackend>(cfg);
  if (cfg.script.empty()) return std::make_shared<MockEmbeddingBackend>(cfg.dim, "", "mock-embed:default");
  auto path = resolve(base_dir, cfg.script);
  json j = read_json(path);
  std::string key = j.value("key", std::string());
  return std::make_shared<MockEmbeddingBackend>(cfg.dim, key, "mock-embed:" + script_tag(path));
}

std::shared_ptr<ImageBackend> make_image_backend(const BackendConfig& cfg, const std::filesystem::path& base_dir) {
  if (cfg.kind == BackendConfig::Kind::http) return std::make_shared<HttpImageBackend>(cfg);
  auto path = resolve(base_dir, cfg.script);
  json j = read_json(path);
  MockImageBackend::Options opts;
  if (j.contains("fail_seeds"))
    for (const auto& s : j["fail_seeds"]) opts.fail_seeds.insert(s.get<std::int64_t>());
  if (j.contains("fail_prompts"))
    for (const auto& s : j["fail_prompts"]) opts.fail_prompts.push_back(s.get<std::string>());
  if (j.contains("compression_level")) opts.compression_level = j["compression_level"].get<int>();
  return std::make_shared<MockImageBackend>(std::move(opts), "mock-image:" + script_tag(path));
}

}  // namespace storyreel
