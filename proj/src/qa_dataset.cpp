#include "storyreel/qa_dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>
#include <sstream>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"

namespace storyreel {

namespace fs = std::filesystem;

int QABudget::at(QACategory c) const {
  switch (c) {
    case QACategory::overview: return overview;
    case QACategory::plot_what: return plot_what;
    case QACategory::plot_where: return plot_where;
    case QACategory::plot_why: return plot_why;
    case QACategory::temporal: return temporal;
  }
  return 0;
}

void QABudget::validate() const {
  for (QACategory c : kAllQACategories)
    if (at(c) < 1) throw Error(Errc::Config, "qa budget for " + std::string(to_string(c)) + " must be >= 1");
}

namespace {

std::string lower_copy(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool nonempty_string(const json& obj, const char* key) {
  return obj.is_object() && obj.contains(key) && obj[key].is_string() && !obj[key].get<std::string>().empty();
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t seed_from(std::string_view material) {
  auto d = sha256_raw(material);
  std::uint64_t s = 0;
  std::memcpy(&s, d.data(), sizeof s);
  return s;
}

std::string story_outline(const MoviePlot& plot, std::size_t cap) {
  std::string out;
  for (const auto& ch : plot.chapters) {
    out += "Chapter " + std::to_string(ch.index + 1) + " (" + ch.title + "): " + ch.summary + "\n";
    for (const auto& th : ch.threads) out += "  - " + th.summary + "\n";
  }
  return clip_text(out, cap);
}

std::string aspect_of(QACategory c) {
  switch (c) {
    case QACategory::plot_what: return "what";
    case QACategory::plot_where: return "where";
    case QACategory::plot_why: return "why";
    default: return "";
  }
}

std::string stage_of(QACategory c) {
  if (c == QACategory::overview) return "qa_overview";
  if (c == QACategory::temporal) return "qa_temporal";
  return "qa_" + aspect_of(c);
}

std::vector<QAPair> ask_pairs(StructuredChat& chat, QACategory category, const std::string& prompt, int minimum,
                              int max_repairs) {
  std::vector<QAPair> acc;
  std::set<std::string> seen;
  chat.ask(
      stage_of(category), prompt, {ExpectedShape::Root::object, {"pairs"}},
      [&](const json& j) -> std::optional<std::string> {
        if (!j["pairs"].is_array()) return "'pairs' must be a list";
        std::vector<QAPair> fresh;
        for (const auto& p : j["pairs"]) {
          if (!nonempty_string(p, "question") || !nonempty_string(p, "answer"))
            return "every pair needs a non-empty 'question' and 'answer'";
          fresh.push_back({p["question"].get<std::string>(), p["answer"].get<std::string>(), category});
        }
        for (auto& p : fresh)
          if (seen.insert(lower_copy(p.question)).second) acc.push_back(std::move(p));
        int have = static_cast<int>(acc.size());
        if (have < minimum) {
          return "got " + std::to_string(have) + " of " + std::to_string(minimum) + " pairs; write " +
                 std::to_string(minimum - have) + " more new pairs";
        }
        return std::nullopt;
      },
      max_repairs);
  return acc;
}

std::string order_answer(const std::vector<std::string>& ordered) {
  std::string out = "The events occur in this order: ";
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (i) out += "; ";
    out += "(" + std::to_string(i + 1) + ") " + ordered[i];
  }
  return out + ".";
}

}  // namespace

std::vector<std::string> temporal_events(const MoviePlot& plot) {
  std::vector<std::string> titles;
  std::set<std::string> distinct;
  for (const auto& ch : plot.chapters) {
    titles.push_back(ch.title);
    distinct.insert(lower_copy(ch.title));
  }
  if (titles.size() >= 2 && distinct.size() == titles.size()) return titles;

  std::vector<std::string> events;
  for (const auto& ch : plot.chapters)
    for (const auto& th : ch.threads) events.push_back(clip_text(th.summary, 200));
  if (events.size() >= 2) return events;

  events.clear();
  for (const auto& ch : plot.chapters)
    for (const auto& th : ch.threads)
      for (const auto& f : th.frames) events.push_back(clip_text(f.text, 200));
  return events;
}

std::vector<EventSet> pick_event_sets(const MoviePlot& plot, int count, int per_set) {
  const auto events = temporal_events(plot);
  const std::size_t n = events.size();
  std::vector<EventSet> sets;
  if (n < 2) return sets;
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(per_set, 2)), 2, n);
  for (int s = 0; s < count; ++s) {
    std::uint64_t state = seed_from(plot.movie_id + "\ntemporal\n" + std::to_string(s));
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(splitmix64(state) % (n - i));
      std::swap(idx[i], idx[j]);
    }
    std::vector<std::size_t> picked(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<std::size_t> sorted = picked;
    std::sort(sorted.begin(), sorted.end());
    if (picked == sorted) std::rotate(picked.begin(), picked.begin() + 1, picked.end());
    EventSet set;
    for (auto i : picked) set.shown.push_back(events[i]);
    for (auto i : sorted) set.ordered.push_back(events[i]);
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<QAPair> generate_qa(const MoviePlot& plot, StructuredChat& chat, const QAConfig& cfg) {
  cfg.budget.validate();
  const TemplateSet& templates = chat.templates();
  const std::string overview = clip_text(plot.overview, cfg.overview_max_chars);
  const std::string outline = story_outline(plot, cfg.outline_max_chars);
  std::vector<QAPair> out;

  for (QACategory category : kAllQACategories) {
    const int want = cfg.budget.at(category);
    try {
      if (category == QACategory::overview) {
        std::string prompt =
            templates.get("qa_overview").render({{"overview", overview}, {"count", std::to_string(want)}});
        auto pairs = ask_pairs(chat, category, prompt, want, cfg.max_repair_attempts);
        out.insert(out.end(), pairs.begin(), pairs.end());
      } else if (category == QACategory::temporal) {
        auto sets = pick_event_sets(plot, want, cfg.events_per_question);
        if (sets.empty()) continue;
        std::string listing;
        for (std::size_t s = 0; s < sets.size(); ++s) {
          listing += "Set " + std::to_string(s + 1) + ":";
          for (const auto& e : sets[s].shown) listing += "\n  - " + e;
          listing += "\n";
        }
        std::string prompt = templates.get("qa_temporal")
                                 .render({{"overview", overview},
                                          {"event_sets", listing},
                                          {"count", std::to_string(sets.size())}});
        const std::size_t expected = sets.size();
        json v = chat.ask(
            stage_of(category), prompt, {ExpectedShape::Root::object, {"questions"}},
            [expected](const json& j) -> std::optional<std::string> {
              if (!j["questions"].is_array()) return "'questions' must be a list";
              if (j["questions"].size() != expected) {
                return "expected exactly " + std::to_string(expected) + " questions, got " +
                       std::to_string(j["questions"].size()) + ". Return exactly " + std::to_string(expected) + ".";
              }
              for (const auto& q : j["questions"])
                if (!q.is_string() || q.get<std::string>().empty()) return "every question must be a non-empty string";
              return std::nullopt;
            },
            cfg.max_repair_attempts);
        for (std::size_t s = 0; s < sets.size(); ++s)
          out.push_back({v["questions"][s].get<std::string>(), order_answer(sets[s].ordered), category});
      } else {
        std::string prompt = templates.get("qa_plot").render({{"aspect", aspect_of(category)},
                                                              {"overview", overview},
                                                              {"story_outline", outline},
                                                              {"count", std::to_string(want)}});
        auto pairs = ask_pairs(chat, category, prompt, want, cfg.max_repair_attempts);
        out.insert(out.end(), pairs.begin(), pairs.end());
      }
    } catch (const Error& e) {
      if (e.code() != Errc::StageFailed) throw;
      throw Error(Errc::StageFailed, "qa:" + std::string(to_string(category)) + ": " + e.what());
    }
  }
  return out;
}

void to_json(json& j, const DatasetRecord& v) {
  j = json{{"movie_id", v.movie_id},   {"video_dir", v.video_dir}, {"category", std::string(to_string(v.category))},
           {"question", v.question},   {"answer", v.answer},       {"frame_count", v.frame_count}};
}

void from_json(const json& j, DatasetRecord& v) {
  v.movie_id = j.at("movie_id").get<std::string>();
  v.video_dir = j.at("video_dir").get<std::string>();
  auto cat = parse_qa_category(j.at("category").get<std::string>());
  if (!cat) throw Error(Errc::ParseFailed, "unknown category " + j.at("category").get<std::string>());
  v.category = *cat;
  v.question = j.at("question").get<std::string>();
  v.answer = j.at("answer").get<std::string>();
  v.frame_count = j.at("frame_count").get<int>();
  if (v.movie_id.empty() || v.question.empty() || v.answer.empty() || v.frame_count < 0)
    throw Error(Errc::ParseFailed, "record has empty fields or a negative frame_count");
}

json package_json(const MoviePackage& pkg) {
  return json{{"plot", pkg.plot}, {"keyframes", pkg.keyframes}, {"qa_pairs", pkg.qa_pairs}};
}

std::string package_hash(const MoviePackage& pkg) { return sha256_hex(package_json(pkg).dump()); }

std::string records_jsonl(const std::vector<DatasetRecord>& records) {
  std::string out;
  for (const auto& r : records) out += json(r).dump() + "\n";
  return out;
}

std::vector<DatasetRecord> parse_records(const std::string& text) {
  std::vector<DatasetRecord> out;
  std::istringstream in(text);
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<DatasetRecord>());
    } catch (const std::exception& e) {
      throw Error(Errc::ParseFailed, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

PackageResult package_movie(const MoviePlot& plot, const std::vector<KeyFrameRecord>& keyframes,
                            const std::vector<QAPair>& qa, const fs::path& movie_dir, const std::string& video_dir,
                            bool allow_gaps) {
  if (qa.empty()) throw Error(Errc::PackagingRefused, "movie " + plot.movie_id + " has no QA pairs");
  const auto frames = flatten_frames(plot);
  std::vector<KeyFrameRecord> sorted = keyframes;
  std::sort(sorted.begin(), sorted.end(),
            [](const KeyFrameRecord& a, const KeyFrameRecord& b) { return a.global_index < b.global_index; });
  std::set<int> have;
  for (const auto& k : sorted) have.insert(k.global_index);
  std::vector<int> missing;
  for (const auto& f : frames)
    if (!have.count(f.global_index)) missing.push_back(f.global_index);
  if (!missing.empty() && !allow_gaps) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + std::to_string(missing[i]);
    if (missing.size() > 10) list += ", ...";
    throw Error(Errc::PackagingRefused, "movie " + plot.movie_id + " is missing " + std::to_string(missing.size()) +
                                            " frame(s): " + list + " (use --allow-gaps to package anyway)");
  }
  if (frames.size() >= 2) {
    for (QACategory c : kAllQACategories) {
      bool present = std::any_of(qa.begin(), qa.end(), [c](const QAPair& p) { return p.category == c; });
      if (!present)
        throw Error(Errc::PackagingRefused,
                    "movie " + plot.movie_id + " has no " + std::string(to_string(c)) + " QA pair");
    }
  }

  PackageResult result;
  result.package.plot = plot;
  result.package.keyframes = std::move(sorted);
  result.package.qa_pairs = qa;
  result.package.manifest_hash = package_hash(result.package);

  const int frame_count = static_cast<int>(result.package.keyframes.size());
  for (const auto& p : qa)
    result.records.push_back({plot.movie_id, video_dir, p.category, p.question, p.answer, frame_count});

  json manifest = package_json(result.package);
  manifest["manifest_hash"] = result.package.manifest_hash;
  write_json(movie_dir / "package.json", manifest);
  atomic_write(movie_dir / "records.jsonl", records_jsonl(result.records));
  return result;
}

DatasetStats stats_from_counts(long long n_qa, long long n_videos, long long n_frames) {
  DatasetStats s;
  s.n_qa = n_qa;
  s.n_videos = n_videos;
  s.n_frames = n_frames;
  if (n_videos > 0) s.qa_per_video = static_cast<double>(n_qa) / static_cast<double>(n_videos);
  if (n_frames > 0) s.qa_per_image = static_cast<double>(n_qa) / static_cast<double>(n_frames);
  return s;
}

DatasetStats compute_stats(const fs::path& dataset_file) {
  if (!fs::exists(dataset_file)) throw Error(Errc::NotFound, "dataset file not found: " + dataset_file.string());
  auto records = parse_records(read_file(dataset_file));
  std::map<std::string, int> frames_by_movie;
  std::vector<std::string> order;
  for (const auto& r : records) {
    if (frames_by_movie.emplace(r.movie_id, r.frame_count).second) order.push_back(r.movie_id);
  }
  long long total_frames = 0;
  for (const auto& [id, n] : frames_by_movie) total_frames += n;
  DatasetStats s = stats_from_counts(static_cast<long long>(records.size()),
                                     static_cast<long long>(frames_by_movie.size()), total_frames);

  fs::path run_dir = dataset_file.parent_path().parent_path();
  for (const auto& id : order) {
    fs::path plot_file = run_dir / id / "plot.json";
    if (!fs::exists(plot_file)) continue;
    json plot = read_json(plot_file);
    if (plot.contains("theme") && plot["theme"].contains("genre_tag"))
      ++s.genre_counts[plot["theme"]["genre_tag"].get<std::string>()];
  }
  s.n_genres = static_cast<long long>(s.genre_counts.size());
  return s;
}

json to_json(const DatasetStats& s) {
  json j{{"n_videos", s.n_videos}, {"n_qa", s.n_qa},       {"n_frames", s.n_frames},
         {"n_genres", s.n_genres}, {"genre_counts", s.genre_counts}};
  j["qa_per_video"] = s.qa_per_video ? json(*s.qa_per_video) : json(nullptr);
  j["qa_per_image"] = s.qa_per_image ? json(*s.qa_per_image) : json(nullptr);
  return j;
}

std::string format_stats(const DatasetStats& s) {
  auto ratio = [](const std::optional<double>& v, int prec) {
    if (!v) return std::string("undefined");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, *v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "Videos        " << s.n_videos << "\n"
      << "QA pairs      " << s.n_qa << "\n"
      << "Key frames    " << s.n_frames << "\n"
      << "QA per video  " << ratio(s.qa_per_video, 1) << "\n"
      << "QA per image  " << ratio(s.qa_per_image, 4) << "\n"
      << "Genres        " << s.n_genres << "\n";
  for (const auto& [g, n] : s.genre_counts) out << "  " << g << "  " << n << "\n";
  return out.str();
}

}  // namespace storyreel
