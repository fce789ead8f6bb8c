#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "storyreel/backend.hpp"
#include "storyreel/qa_dataset.hpp"
#include "storyreel/story_expansion.hpp"

namespace storyreel {

struct StyleConfig {
  int reference_scenes = 5;
  std::string trainer = "mock";  // "mock" or "command"
  std::string command;           // with {workdir}
};

struct KeyframeConfig {
  int width = 512;
  int height = 512;
  std::optional<std::string> negative_prompt;
};

// YAML file; relative paths resolve against the file's directory.
struct PipelineConfig {
  std::filesystem::path source;  // the file it was loaded from
  std::filesystem::path base_dir;
  std::optional<std::uint64_t> seed;
  std::string run_id;
  std::filesystem::path workspace;
  std::filesystem::path templates;
  std::optional<std::filesystem::path> cache_dir;
  int max_parallel_requests = 4;
  bool allow_gaps = false;

  BackendConfig chat;
  BackendConfig image;
  BackendConfig embedding;
  BackendConfig judge;

  ExpansionConfig expansion;
  QAConfig qa;
  KeyframeConfig keyframes;
  StyleConfig style;

  // Throws Config naming the offending key or path.
  static PipelineConfig load(const std::filesystem::path& file);
  static PipelineConfig parse(const std::string& yaml_text, const std::filesystem::path& base_dir);

  // Checks invariants that need the filesystem (templates, mock scripts) and
  // that a seed is present.
  void validate() const;

  // sha256 over the settings that shape outputs (not paths of the cache or
  // workspace), used to detect a different run reusing a run id.
  std::string hash() const;
};

// One backend block on its own (used by `metrics --embed-backend`).
BackendConfig load_backend_config(const std::filesystem::path& file, const std::string& name);

}  // namespace storyreel
