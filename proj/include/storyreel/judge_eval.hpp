#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storyreel/structured_chat.hpp"

namespace storyreel {

enum class Aspect { overview, plot, temporal };

inline constexpr Aspect kAllAspects[] = {Aspect::overview, Aspect::plot, Aspect::temporal};

std::string_view to_string(Aspect a);
std::optional<Aspect> parse_aspect(std::string_view s);

struct EvalItem {
  std::string item_id;
  Aspect aspect = Aspect::overview;
  std::string question;
  std::string ground_truth;
  std::string answer_a;
  std::string answer_b;
};

enum class Choice { A, B };

struct JudgeVerdict {
  std::string item_id;
  Choice preferred = Choice::A;
  int score_a = 0;
  int score_b = 0;
  bool a_in_slot_1 = true;
  std::string raw;  // last judge completion
};

// Whether model A is shown as "Assistant 1" for this item; derived from the
// seed and the item id only.
bool a_in_slot_1(std::uint64_t seed, std::string_view item_id);

struct SlotVerdict {
  int preferred = 0;  // 1 or 2; 0 for a declared tie
  int score_1 = 0;
  int score_2 = 0;
};

// Accepts {preferred, score_1, score_2} or {preferred, scores: [s1, s2]};
// `preferred` may be 1, "1", "Assistant 2", "tie", ... Returns a violation
// message when the value is unusable.
std::optional<std::string> read_slot_verdict(const json& v, SlotVerdict& out);

// Renders the judge prompt with the answers in seed-derived slots, asks for a
// structured verdict and maps it back to A/B. A declared tie is re-prompted
// once with the forced-choice instruction. Throws InvalidVerdict when no usable
// verdict arrives within `max_retries` re-prompts or on a second tie.
JudgeVerdict judge_item(const EvalItem& item, StructuredChat& chat, std::uint64_t seed, int max_retries = 2);

struct AspectResult {
  long long n_valid = 0;
  long long n_invalid = 0;
  long long wins_a = 0;
  long long wins_b = 0;
  std::optional<double> compare_ratio_a;
  std::optional<double> compare_ratio_b;
  std::optional<double> mean_score_a;
  std::optional<double> mean_score_b;
};

struct BenchmarkResult {
  std::map<Aspect, AspectResult> aspects;
  json to_json() const;
};

// Items without a verdict count as invalid for their aspect. A verdict whose
// item is unknown is a ContractViolation.
BenchmarkResult aggregate(const std::vector<JudgeVerdict>& verdicts, const std::vector<EvalItem>& items);

struct JoinResult {
  std::vector<EvalItem> items;  // benchmark order
  std::vector<std::string> warnings;
};

// Benchmark lines {item_id, aspect, question, ground_truth}; prediction lines
// {item_id, answer}. Inner join on item_id.
JoinResult build_eval_items(const std::filesystem::path& benchmark, const std::filesystem::path& pred_a,
                            const std::filesystem::path& pred_b);

struct EvalRun {
  std::vector<JudgeVerdict> verdicts;
  std::map<std::string, std::string> invalid;  // item_id -> reason
  BenchmarkResult result;
};

// Judges every item (up to `max_parallel` at once) and aggregates.
EvalRun run_eval(const std::vector<EvalItem>& items, StructuredChat& chat, std::uint64_t seed, int max_parallel,
                 int max_retries = 2);

// Per-item log, one JSON object per line in item order.
std::string verdict_log(const std::vector<EvalItem>& items, const EvalRun& run);

}  // namespace storyreel
