#include "storyreel/gateway.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"

namespace storyreel {

double SystemClock::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_for(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

double ManualClock::now() {
  std::lock_guard lock(mutex_);
  return t_;
}

void ManualClock::sleep_for(double seconds) {
  std::lock_guard lock(mutex_);
  if (seconds > 0) t_ += seconds;
}

RateLimiter::RateLimiter(double rate, std::shared_ptr<Clock> clock)
    : interval_(rate > 0 ? 1.0 / rate : 0.0), clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  if (interval_ <= 0) return;
  double wait = 0;
  {
    std::lock_guard lock(mutex_);
    double now = clock_->now();
    double start = next_ ? std::max(now, *next_) : now;
    next_ = start + interval_;
    wait = start - now;
  }
  clock_->sleep_for(wait);
}

std::filesystem::path ResponseCache::path_for(std::string_view key) const {
  std::string k(key);
  return dir_ / k.substr(0, 2) / k;
}

std::optional<std::string> ResponseCache::get(std::string_view key) const {
  auto p = path_for(key);
  if (!std::filesystem::exists(p)) return std::nullopt;
  return read_file(p);
}

void ResponseCache::put(std::string_view key, std::string_view bytes) const { atomic_write(path_for(key), bytes); }

std::string cache_key(std::string_view backend_id, const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json j{{"backend", backend_id},
         {"kind", "chat"},
         {"model", req.model_name},
         {"messages", messages},
         {"temperature", req.temperature},
         {"seed", req.seed ? json(*req.seed) : json(nullptr)},
         {"max_tokens", req.max_tokens}};
  return sha256_hex(j.dump());
}

std::string cache_key(std::string_view backend_id, const EmbeddingRequest& req) {
  json j{{"backend", backend_id}, {"kind", "embed"}, {"modality", to_string(req.modality)}};
  if (req.modality == Modality::text) {
    j["payload"] = req.payload;
  } else {
    j["payload_sha256"] = sha256_hex(req.payload);
  }
  return sha256_hex(j.dump());
}

std::string cache_key(std::string_view backend_id, const ImageRequest& req) {
  json j{{"backend", backend_id},
         {"kind", "image"},
         {"prompt", req.prompt},
         {"negative_prompt", req.negative_prompt ? json(*req.negative_prompt) : json(nullptr)},
         {"seed", req.seed},
         {"width", req.width},
         {"height", req.height},
         {"style_embedding_ref", req.style_embedding_ref ? json(*req.style_embedding_ref) : json(nullptr)}};
  return sha256_hex(j.dump());
}

namespace {

std::shared_ptr<Clock> default_clock(std::shared_ptr<Clock> c) {
  return c ? std::move(c) : std::make_shared<SystemClock>();
}

}  // namespace

ClientCore::ClientCore(ClientOptions opts)
    : opts_([&] {
        opts.clock = default_clock(std::move(opts.clock));
        return std::move(opts);
      }()),
      limiter_(opts_.rate_limit, opts_.clock) {}

ClientStats ClientCore::stats() const { return {requests_.load(), backend_calls_.load(), cache_hits_.load()}; }

template <class Fn>
auto ClientCore::with_retries(Fn&& attempt) -> decltype(attempt()) {
  double backoff = opts_.retry.backoff_seconds;
  std::string last;
  for (int i = 1; i <= opts_.retry.max_attempts; ++i) {
    limiter_.acquire();
    ++backend_calls_;
    try {
      return attempt();
    } catch (const Error& e) {
      if (e.code() != Errc::BackendUnavailable) throw;
      last = e.what();
    }
    if (i < opts_.retry.max_attempts) {
      opts_.clock->sleep_for(backoff);
      backoff *= 2;
    }
  }
  throw Error(Errc::BackendUnavailable,
              "gave up after " + std::to_string(opts_.retry.max_attempts) + " attempts; last error: " + last);
}

std::optional<std::string> ClientCore::cached(const std::string& key) {
  if (!opts_.cache) return std::nullopt;
  auto hit = opts_.cache->get(key);
  if (hit) ++cache_hits_;
  return hit;
}

void ClientCore::store(const std::string& key, std::string_view bytes) {
  if (opts_.cache) opts_.cache->put(key, bytes);
}

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, ClientOptions opts)
    : ClientCore(std::move(opts)), backend_(std::move(backend)) {}

std::string ChatClient::chat(const ChatRequest& req) {
  ++requests_;
  req.validate();
  std::string key = cache_key(backend_->id(), req);
  if (auto hit = cached(key)) return *hit;
  std::string text = with_retries([&] { return backend_->complete(req); });
  store(key, text);
  return text;
}

EmbeddingClient::EmbeddingClient(std::shared_ptr<EmbeddingBackend> backend, int dim, ClientOptions opts)
    : ClientCore(std::move(opts)), backend_(std::move(backend)), dim_(dim) {}

EmbeddingVector EmbeddingClient::embed(const EmbeddingRequest& req) {
  ++requests_;
  if (req.payload.empty()) throw Error(Errc::InvalidRequest, "embedding payload is empty");
  std::string key = cache_key(backend_->id(), req);
  if (auto hit = cached(key)) {
    json j = json::parse(*hit, nullptr, false);
    if (j.is_array()) {
      EmbeddingVector v;
      j.get_to(v.values);
      if (v.dim() == static_cast<std::size_t>(dim_)) return v;
    }
  }
  EmbeddingVector v = with_retries([&] { return backend_->embed(req); });
  if (v.dim() != static_cast<std::size_t>(dim_)) {
    throw Error(Errc::ContractViolation, backend_->id() + " returned a " + std::to_string(v.dim()) +
                                             "-dim vector, configured dim is " + std::to_string(dim_));
  }
  for (double x : v.values)
    if (!std::isfinite(x)) throw Error(Errc::ContractViolation, backend_->id() + " returned a non-finite value");
  store(key, json(v.values).dump());
  return v;
}

ImageClient::ImageClient(std::shared_ptr<ImageBackend> backend, int max_side, ClientOptions opts)
    : ClientCore(std::move(opts)), backend_(std::move(backend)), max_side_(max_side) {}

GeneratedImage ImageClient::generate(const ImageRequest& req) {
  ++requests_;
  if (req.prompt.empty()) throw Error(Errc::InvalidRequest, "image prompt is empty");
  for (int side : {req.width, req.height}) {
    if (side <= 0 || side % 8 != 0 || side > max_side_) {
      throw Error(Errc::InvalidRequest, "image size " + std::to_string(req.width) + "x" + std::to_string(req.height) +
                                            " must be positive multiples of 8 up to " + std::to_string(max_side_));
    }
  }
  std::string key = cache_key(backend_->id(), req);
  if (auto hit = cached(key)) return {*hit, sha256_hex(*hit)};
  std::string png = with_retries([&] { return backend_->generate(req); });
  store(key, png);
  return {png, sha256_hex(png)};
}

}  // namespace storyreel
