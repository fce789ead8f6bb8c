#include "storyreel/structured_chat.hpp"

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"

namespace storyreel {

std::string clip_text(std::string_view text, std::size_t max_chars) {
  if (text.size() <= max_chars) return std::string(text);
  std::size_t keep = max_chars >= 3 ? max_chars - 3 : 0;
  while (keep > 0 && (static_cast<unsigned char>(text[keep]) & 0xC0) == 0x80) --keep;
  std::string out(text.substr(0, keep));
  out += "...";
  return out.substr(0, max_chars);
}

StructuredChat::StructuredChat(ChatClient& client, const TemplateSet& templates, ChatSettings settings,
                               std::filesystem::path transcript_dir)
    : client_(client), templates_(templates), settings_(std::move(settings)),
      transcript_dir_(std::move(transcript_dir)) {}

void StructuredChat::write_transcript(const std::string& stage, int attempt, const std::string& prompt,
                                      const std::string& completion) const {
  if (transcript_dir_.empty()) return;
  std::string body = "=== prompt ===\n" + prompt + "\n=== completion ===\n" + completion + "\n";
  atomic_write(transcript_dir_ / (stage + "-" + std::to_string(attempt) + ".txt"), body);
}

json StructuredChat::ask(const std::string& stage, const std::string& prompt, const ExpectedShape& shape,
                         const AnswerCheck& check, int max_repairs) {
  ChatRequest req;
  req.model_name = settings_.model;
  req.temperature = settings_.temperature;
  req.max_tokens = settings_.max_tokens;
  req.seed = settings_.seed;
  req.messages.push_back({Role::system, templates_.get("system").render({})});
  req.messages.push_back({Role::user, prompt});

  std::string violation;
  for (int attempt = 0; attempt <= max_repairs; ++attempt) {
    std::string completion = client_.chat(req);
    write_transcript(stage, attempt, req.messages.back().content, completion);
    try {
      ParseResult parsed = parse_structured(completion, shape);
      auto problem = check ? check(parsed.value) : std::nullopt;
      if (!problem) return std::move(parsed.value);
      violation = *problem;
    } catch (const Error& e) {
      if (e.code() != Errc::ParseFailed) throw;
      violation = e.what();
    }
    req.messages.push_back({Role::assistant, completion});
    req.messages.push_back(
        {Role::user, templates_.get("repair").render({{"violation", "[stage:" + stage + "] " + violation}})});
  }
  throw Error(Errc::StageFailed, stage + ": " + violation);
}

}  // namespace storyreel
