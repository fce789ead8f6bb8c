#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "storyreel/gateway.hpp"
#include "storyreel/plot_model.hpp"
#include "storyreel/run_store.hpp"

namespace storyreel {

inline constexpr std::string_view kStylePrefixPattern = R"(^generate an image in <[a-z0-9-]+(-[0-9]+)?> style: )";

// "generate an image in {trigger} style: " followed by the frame text with
// every character name replaced by its celebrity (whole word, case
// insensitive, longest name first, single pass). Throws MissingCasting when a
// mentioned character has no celebrity.
std::string render_prompt(const FrameDescription& frame, const std::vector<Character>& characters,
                          const StyleToken& token);

struct KeyframeSettings {
  std::int64_t run_seed = 0;
  int width = 512;
  int height = 512;
  std::optional<std::string> negative_prompt;
  int max_parallel = 4;
};

struct FrameFailure {
  int global_index = 0;
  std::string error;
};

struct KeyframeResult {
  std::vector<KeyFrameRecord> records;  // ordered by global_index, failed frames absent
  std::vector<FrameFailure> failures;
  bool complete() const { return failures.empty(); }
};

// One image per frame with seed run_seed + global_index and the style
// embedding as reference. Images land in the blob store and at
// <movie_dir>/frames/NNNNN.png; the record list goes to <movie_dir>/frames.json
// and failures to <movie_dir>/frames_failed.json. Frames already present in a
// previous frames.json with the same prompt and seed are reused without a call.
KeyframeResult generate_keyframes(const MoviePlot& plot, ImageClient& images, RunStore& store,
                                  const std::filesystem::path& movie_dir, const KeyframeSettings& settings);

std::string frame_file_name(int global_index);

}  // namespace storyreel
