#include "storyreel/judge_eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/task_pool.hpp"

namespace storyreel {

namespace fs = std::filesystem;

std::string_view to_string(Aspect a) {
  switch (a) {
    case Aspect::overview: return "overview";
    case Aspect::plot: return "plot";
    case Aspect::temporal: return "temporal";
  }
  return "overview";
}

std::optional<Aspect> parse_aspect(std::string_view s) {
  for (Aspect a : kAllAspects)
    if (to_string(a) == s) return a;
  return std::nullopt;
}

bool a_in_slot_1(std::uint64_t seed, std::string_view item_id) {
  auto d = sha256_raw("judge-slot\n" + std::to_string(seed) + "\n" + std::string(item_id));
  return (d[0] & 1) == 0;
}

namespace {

std::optional<int> read_score(const json& v) {
  double d;
  if (v.is_number()) {
    d = v.get<double>();
  } else if (v.is_string()) {
    try {
      std::size_t used = 0;
      std::string s = v.get<std::string>();
      d = std::stod(s, &used);
      if (used != s.size()) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  if (!std::isfinite(d) || d != std::floor(d) || d < 1 || d > 5) return std::nullopt;
  return static_cast<int>(d);
}

std::string lower_copy(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::optional<std::string> read_slot_verdict(const json& v, SlotVerdict& out) {
  if (!v.is_object() || !v.contains("preferred")) return "the verdict needs a 'preferred' field";
  const json& p = v["preferred"];
  if (p.is_number_integer()) {
    out.preferred = p.get<int>();
  } else if (p.is_string()) {
    std::string s = lower_copy(p.get<std::string>());
    bool tie = s.find("tie") != std::string::npos || s.find("both") != std::string::npos ||
               s.find("equal") != std::string::npos || s.find("neither") != std::string::npos;
    bool one = s.find('1') != std::string::npos;
    bool two = s.find('2') != std::string::npos;
    if (tie || (one && two)) {
      out.preferred = 0;
    } else if (one) {
      out.preferred = 1;
    } else if (two) {
      out.preferred = 2;
    } else {
      return "'preferred' must be \"1\" or \"2\"";
    }
  } else {
    return "'preferred' must be \"1\" or \"2\"";
  }
  if (out.preferred < 0 || out.preferred > 2) return "'preferred' must be \"1\" or \"2\"";

  std::optional<int> s1, s2;
  if (v.contains("score_1") && v.contains("score_2")) {
    s1 = read_score(v["score_1"]);
    s2 = read_score(v["score_2"]);
  } else if (v.contains("scores") && v["scores"].is_array() && v["scores"].size() == 2) {
    s1 = read_score(v["scores"][0]);
    s2 = read_score(v["scores"][1]);
  } else {
    return "give both scores as 'score_1' and 'score_2'";
  }
  if (!s1 || !s2) return "scores must be integers from 1 to 5";
  out.score_1 = *s1;
  out.score_2 = *s2;
  return std::nullopt;
}

JudgeVerdict judge_item(const EvalItem& item, StructuredChat& chat, std::uint64_t seed, int max_retries) {
  const bool a_first = a_in_slot_1(seed, item.item_id);
  std::string prompt = chat.templates().get("judge").render({{"aspect", std::string(to_string(item.aspect))},
                                                             {"question", item.question},
                                                             {"ground_truth", item.ground_truth},
                                                             {"answer_1", a_first ? item.answer_a : item.answer_b},
                                                             {"answer_2", a_first ? item.answer_b : item.answer_a}});
  const std::string force = chat.templates().get("judge_force").render({});
  int ties = 0;
  SlotVerdict sv;
  json value;
  try {
    value = chat.ask(
        "judge-" + item.item_id, prompt, {ExpectedShape::Root::object, {"preferred"}},
        [&](const json& v) -> std::optional<std::string> {
          SlotVerdict parsed;
          if (auto problem = read_slot_verdict(v, parsed)) return problem;
          if (parsed.preferred == 0) {
            if (++ties > 1) throw Error(Errc::InvalidVerdict, item.item_id + ": judge declared a tie twice");
            return force;
          }
          sv = parsed;
          return std::nullopt;
        },
        max_retries);
  } catch (const Error& e) {
    if (e.code() == Errc::StageFailed || e.code() == Errc::ParseFailed)
      throw Error(Errc::InvalidVerdict, item.item_id + ": " + e.what());
    throw;
  }

  JudgeVerdict out;
  out.item_id = item.item_id;
  out.a_in_slot_1 = a_first;
  out.raw = value.dump();
  const bool slot1_wins = sv.preferred == 1;
  out.preferred = (slot1_wins == a_first) ? Choice::A : Choice::B;
  out.score_a = a_first ? sv.score_1 : sv.score_2;
  out.score_b = a_first ? sv.score_2 : sv.score_1;
  return out;
}

BenchmarkResult aggregate(const std::vector<JudgeVerdict>& verdicts, const std::vector<EvalItem>& items) {
  std::map<std::string, Aspect> aspect_of;
  for (const auto& it : items) aspect_of[it.item_id] = it.aspect;

  BenchmarkResult r;
  for (Aspect a : kAllAspects) r.aspects[a] = {};
  std::map<Aspect, long long> sum_a, sum_b, total;
  for (const auto& it : items) ++total[it.aspect];
  std::set<std::string> judged;
  for (const auto& v : verdicts) {
    auto found = aspect_of.find(v.item_id);
    if (found == aspect_of.end()) throw Error(Errc::ContractViolation, "verdict for unknown item " + v.item_id);
    if (!judged.insert(v.item_id).second) throw Error(Errc::DuplicateId, "two verdicts for item " + v.item_id);
    AspectResult& ar = r.aspects[found->second];
    ++ar.n_valid;
    (v.preferred == Choice::A ? ar.wins_a : ar.wins_b)++;
    sum_a[found->second] += v.score_a;
    sum_b[found->second] += v.score_b;
  }
  for (auto& [a, ar] : r.aspects) {
    ar.n_invalid = total[a] - ar.n_valid;
    if (ar.n_valid == 0) continue;
    const double n = static_cast<double>(ar.n_valid);
    ar.compare_ratio_a = static_cast<double>(ar.wins_a) / n;
    ar.compare_ratio_b = static_cast<double>(ar.wins_b) / n;
    ar.mean_score_a = static_cast<double>(sum_a[a]) / n;
    ar.mean_score_b = static_cast<double>(sum_b[a]) / n;
  }
  return r;
}

json BenchmarkResult::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j = json::object();
  for (const auto& [a, ar] : aspects) {
    j[std::string(to_string(a))] = {{"compare_ratio_a", opt(ar.compare_ratio_a)},
                                    {"compare_ratio_b", opt(ar.compare_ratio_b)},
                                    {"mean_score_a", opt(ar.mean_score_a)},
                                    {"mean_score_b", opt(ar.mean_score_b)},
                                    {"n_valid", ar.n_valid},
                                    {"n_invalid", ar.n_invalid}};
  }
  return j;
}

namespace {

std::string id_of(const json& j, const fs::path& file, int lineno) {
  if (!j.is_object() || !j.contains("item_id"))
    throw Error(Errc::ParseFailed, file.string() + " line " + std::to_string(lineno) + ": missing item_id");
  const json& id = j["item_id"];
  if (id.is_string() && !id.get<std::string>().empty()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw Error(Errc::ParseFailed, file.string() + " line " + std::to_string(lineno) + ": bad item_id");
}

std::string text_field(const json& j, const char* key, const fs::path& file, int lineno) {
  if (!j.contains(key) || !j[key].is_string() || j[key].get<std::string>().empty())
    throw Error(Errc::ParseFailed,
                file.string() + " line " + std::to_string(lineno) + ": '" + key + "' must be a non-empty string");
  return j[key].get<std::string>();
}

template <class Fn>
void each_line(const fs::path& file, Fn&& fn) {
  if (!fs::exists(file)) throw Error(Errc::Config, "file not found: " + file.string());
  std::istringstream in(read_file(file));
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::ParseFailed, file.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
    fn(j, lineno);
  }
}

std::map<std::string, std::string> load_predictions(const fs::path& file) {
  std::map<std::string, std::string> out;
  each_line(file, [&](const json& j, int lineno) {
    std::string id = id_of(j, file, lineno);
    if (!out.emplace(id, text_field(j, "answer", file, lineno)).second)
      throw Error(Errc::DuplicateId, "duplicate item_id " + id + " in " + file.string());
  });
  return out;
}

}  // namespace

JoinResult build_eval_items(const fs::path& benchmark, const fs::path& pred_a, const fs::path& pred_b) {
  std::vector<EvalItem> gt;
  std::set<std::string> gt_ids;
  each_line(benchmark, [&](const json& j, int lineno) {
    EvalItem it;
    it.item_id = id_of(j, benchmark, lineno);
    if (!gt_ids.insert(it.item_id).second)
      throw Error(Errc::DuplicateId, "duplicate item_id " + it.item_id + " in " + benchmark.string());
    std::string aspect = text_field(j, "aspect", benchmark, lineno);
    auto a = parse_aspect(aspect);
    if (!a)
      throw Error(Errc::ParseFailed, benchmark.string() + " line " + std::to_string(lineno) + ": unknown aspect '" +
                                         aspect + "' (expected overview, plot or temporal)");
    it.aspect = *a;
    it.question = text_field(j, "question", benchmark, lineno);
    it.ground_truth = text_field(j, "ground_truth", benchmark, lineno);
    gt.push_back(std::move(it));
  });
  auto a = load_predictions(pred_a);
  auto b = load_predictions(pred_b);

  JoinResult r;
  for (auto& it : gt) {
    auto fa = a.find(it.item_id);
    auto fb = b.find(it.item_id);
    if (fa == a.end() || fb == b.end()) {
      r.warnings.push_back("item " + it.item_id + " has no prediction from " +
                           (fa == a.end() && fb == b.end() ? "either model" : fa == a.end() ? "model A" : "model B"));
      continue;
    }
    it.answer_a = fa->second;
    it.answer_b = fb->second;
    r.items.push_back(it);
  }
  for (const auto* preds : {&a, &b})
    for (const auto& [id, ans] : *preds)
      if (!gt_ids.count(id))
        r.warnings.push_back("prediction " + id + " from model " + (preds == &a ? "A" : "B") +
                             " is not in the benchmark");
  if (r.items.empty()) throw Error(Errc::NoOverlap, "no item_id is shared by the benchmark and both prediction files");
  return r;
}

EvalRun run_eval(const std::vector<EvalItem>& items, StructuredChat& chat, std::uint64_t seed, int max_parallel,
                 int max_retries) {
  std::vector<std::optional<JudgeVerdict>> slots(items.size());
  std::vector<std::string> reasons(items.size());
  parallel_for(items.size(), max_parallel, [&](std::size_t i) {
    if (stop_requested()) throw Error(Errc::Interrupted, "evaluation interrupted");
    try {
      slots[i] = judge_item(items[i], chat, seed, max_retries);
    } catch (const Error& e) {
      if (e.code() != Errc::InvalidVerdict) throw;
      reasons[i] = e.what();
    }
  });
  EvalRun run;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (slots[i]) {
      run.verdicts.push_back(std::move(*slots[i]));
    } else {
      run.invalid[items[i].item_id] = reasons[i];
    }
  }
  run.result = aggregate(run.verdicts, items);
  return run;
}

std::string verdict_log(const std::vector<EvalItem>& items, const EvalRun& run) {
  std::map<std::string, const JudgeVerdict*> by_id;
  for (const auto& v : run.verdicts) by_id[v.item_id] = &v;
  std::string out;
  for (const auto& it : items) {
    json j{{"item_id", it.item_id}, {"aspect", std::string(to_string(it.aspect))}};
    auto found = by_id.find(it.item_id);
    if (found != by_id.end()) {
      const JudgeVerdict& v = *found->second;
      j["valid"] = true;
      j["a_slot"] = v.a_in_slot_1 ? 1 : 2;
      j["preferred"] = v.preferred == Choice::A ? "A" : "B";
      j["score_a"] = v.score_a;
      j["score_b"] = v.score_b;
      j["raw"] = v.raw;
    } else {
      j["valid"] = false;
      auto reason = run.invalid.find(it.item_id);
      j["reason"] = reason != run.invalid.end() ? reason->second : "not judged";
    }
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace storyreel
