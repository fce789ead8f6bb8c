#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "storyreel/backend.hpp"

namespace storyreel {

// One scripted reply. Every string in `match` must occur in the last user
// message; the first matching entry wins.
struct ScriptEntry {
  std::vector<std::string> match;
  std::string response;
};

std::vector<ScriptEntry> load_chat_script(const std::filesystem::path& path);

class MockChatBackend final : public ChatBackend {
 public:
  explicit MockChatBackend(std::vector<ScriptEntry> script, std::string name = "mock-chat");

  std::string id() const override { return name_; }
  std::string complete(const ChatRequest& req) override;

  std::size_t calls() const { return calls_.load(); }
  // Last user message of every call, in call order.
  std::vector<std::string> call_log() const;

 private:
  std::vector<ScriptEntry> script_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex log_mutex_;
  std::vector<std::string> log_;
};

// Deterministic embedding: d0 = sha256("storyreel-mock-embed" 0x00 modality 0x00 key 0x00 payload);
// block b (b = 0,1,...) = sha256(d0 || uint32_le(b)); each 4-byte little-endian
// word u of the concatenated blocks yields one value u / 2^32 * 2 - 1.
class MockEmbeddingBackend final : public EmbeddingBackend {
 public:
  MockEmbeddingBackend(int dim, std::string key = "", std::string name = "mock-embed");

  std::string id() const override { return name_; }
  EmbeddingVector embed(const EmbeddingRequest& req) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  int dim_;
  std::string key_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

// Procedural PNG: a seed-driven diagonal gradient overlaid with an 8x8 grid of
// blocks whose colors come from sha256(prompt, style ref). Requests whose seed
// is in `fail_seeds` (or whose prompt contains any `fail_prompts` entry) fail
// with BackendUnavailable on every attempt.
class MockImageBackend final : public ImageBackend {
 public:
  struct Options {
    std::set<std::int64_t> fail_seeds;
    std::vector<std::string> fail_prompts;
    int compression_level = 0;
  };

  MockImageBackend() : MockImageBackend(Options{}) {}
  explicit MockImageBackend(Options opts, std::string name = "mock-image");

  std::string id() const override { return name_; }
  std::string generate(const ImageRequest& req) override;
  std::size_t calls() const { return calls_.load(); }

 private:
  Options opts_;
  std::string name_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace storyreel
