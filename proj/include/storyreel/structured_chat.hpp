#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "storyreel/gateway.hpp"
#include "storyreel/prompt_template.hpp"
#include "storyreel/structured_parse.hpp"

namespace storyreel {

struct ChatSettings {
  std::string model = "gpt-4";
  double temperature = 0.7;
  int max_tokens = 2048;
  std::optional<std::int64_t> seed;
};

// Returns a violation message when the parsed value is unusable.
using AnswerCheck = std::function<std::optional<std::string>(const json&)>;

// Prompt -> structured answer loop shared by every model-facing stage: render,
// ask, parse, check; on a parse failure or violation re-prompt with the repair
// template (conversation kept), at most `max_repairs` times, then StageFailed.
// Each exchange is written to `<transcript_dir>/<stage>-<attempt>.txt` when a
// transcript directory is set.
class StructuredChat {
 public:
  StructuredChat(ChatClient& client, const TemplateSet& templates, ChatSettings settings,
                 std::filesystem::path transcript_dir = {});

  json ask(const std::string& stage, const std::string& prompt, const ExpectedShape& shape, const AnswerCheck& check,
           int max_repairs);

  ChatClient& client() { return client_; }
  const TemplateSet& templates() const { return templates_; }
  const ChatSettings& settings() const { return settings_; }

 private:
  void write_transcript(const std::string& stage, int attempt, const std::string& prompt,
                        const std::string& completion) const;

  ChatClient& client_;
  const TemplateSet& templates_;
  ChatSettings settings_;
  std::filesystem::path transcript_dir_;
};

// Cuts `text` to at most `max_chars` bytes on a UTF-8 boundary, appending "..."
// when something was removed.
std::string clip_text(std::string_view text, std::size_t max_chars);

}  // namespace storyreel
