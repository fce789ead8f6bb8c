#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "storyreel/backend.hpp"

namespace storyreel {

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;  // seconds
  virtual void sleep_for(double seconds) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;
};

// Time only moves when somebody sleeps.
class ManualClock final : public Clock {
 public:
  double now() override;
  void sleep_for(double seconds) override;

 private:
  std::mutex mutex_;
  double t_ = 0.0;
};

// Spaces request starts at least 1/rate apart. rate <= 0 disables limiting.
class RateLimiter {
 public:
  RateLimiter(double rate, std::shared_ptr<Clock> clock);
  void acquire();

 private:
  double interval_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::optional<double> next_;
};

// Content-addressed response store: <dir>/<key[0:2]>/<key>. No eviction.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  std::optional<std::string> get(std::string_view key) const;
  void put(std::string_view key, std::string_view bytes) const;

 private:
  std::filesystem::path path_for(std::string_view key) const;
  std::filesystem::path dir_;
};

// sha256 of the canonical (sorted-key) JSON of (backend id, kind, full request).
std::string cache_key(std::string_view backend_id, const ChatRequest& req);
std::string cache_key(std::string_view backend_id, const EmbeddingRequest& req);
std::string cache_key(std::string_view backend_id, const ImageRequest& req);

struct ClientOptions {
  RetryPolicy retry;
  double rate_limit = 0.0;
  std::shared_ptr<ResponseCache> cache;  // null disables caching
  std::shared_ptr<Clock> clock;          // null uses SystemClock
};

struct ClientStats {
  std::size_t requests = 0;       // client calls
  std::size_t backend_calls = 0;  // attempts that reached the backend
  std::size_t cache_hits = 0;
};

// Shared retry / rate-limit / cache / counting logic for the three clients.
class ClientCore {
 public:
  explicit ClientCore(ClientOptions opts);
  ClientStats stats() const;

 protected:
  template <class Fn>
  auto with_retries(Fn&& attempt) -> decltype(attempt());
  std::optional<std::string> cached(const std::string& key);
  void store(const std::string& key, std::string_view bytes);

  ClientOptions opts_;
  RateLimiter limiter_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> backend_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

class ChatClient : public ClientCore {
 public:
  ChatClient(std::shared_ptr<ChatBackend> backend, ClientOptions opts);
  std::string chat(const ChatRequest& req);
  const ChatBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
};

class EmbeddingClient : public ClientCore {
 public:
  EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend, int dim, ClientOptions opts);
  // Throws InvalidRequest on an empty payload and ContractViolation when the
  // backend answers with a wrong-sized or non-finite vector.
  EmbeddingVector embed(const EmbeddingRequest& req);
  int dim() const { return dim_; }

 private:
  std::shared_ptr<EmbeddingBackend> backend_;
  int dim_;
};

struct GeneratedImage {
  std::string png;
  std::string hash;  // sha256 of png
};

class ImageClient : public ClientCore {
 public:
  ImageClient(std::shared_ptr<ImageBackend> backend, int max_side, ClientOptions opts);
  // Throws InvalidRequest for an empty prompt or a side that is non-positive,
  // not a multiple of 8, or above max_side.
  GeneratedImage generate(const ImageRequest& req);

 private:
  std::shared_ptr<ImageBackend> backend_;
  int max_side_;
};

}  // namespace storyreel
