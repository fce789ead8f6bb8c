#include "storyreel/plot_model.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

#include "storyreel/errors.hpp"
#include "storyreel/hashing.hpp"

namespace storyreel {

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

std::string lower_copy(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

std::string position(int chapter, int thread = -1, int frame = -1) {
  std::string s = "chapters[" + std::to_string(chapter) + "]";
  if (thread >= 0) s += ".threads[" + std::to_string(thread) + "]";
  if (frame >= 0) s += ".frames[" + std::to_string(frame) + "]";
  return s;
}

}  // namespace

std::size_t MoviePlot::frame_count() const {
  std::size_t n = 0;
  for (const auto& c : chapters)
    for (const auto& t : c.threads) n += t.frames.size();
  return n;
}

std::string_view to_string(QACategory c) {
  switch (c) {
    case QACategory::overview: return "overview";
    case QACategory::plot_what: return "plot_what";
    case QACategory::plot_where: return "plot_where";
    case QACategory::plot_why: return "plot_why";
    case QACategory::temporal: return "temporal";
  }
  return "overview";
}

std::optional<QACategory> parse_qa_category(std::string_view s) {
  for (QACategory c : kAllQACategories)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

const std::vector<std::string>& default_genres() {
  static const std::vector<std::string> genres = {
      "action",  "adventure", "animation", "comedy",          "crime",
      "drama",   "family",    "fantasy",   "history",         "horror",
      "mystery", "romance",   "science-fiction", "thriller", "war"};
  return genres;
}

std::string make_movie_id(std::string_view theme_phrase, std::uint64_t run_seed) {
  std::string key(theme_phrase);
  key += '\n';
  key += std::to_string(run_seed);
  return sha256_hex(key).substr(0, 16);
}

bool is_valid_trigger(std::string_view trigger) {
  static const std::regex re("<[a-z0-9-]+>");
  return std::regex_match(trigger.begin(), trigger.end(), re);
}

std::size_t find_word_ci(std::string_view text, std::string_view word, std::size_t from) {
  if (word.empty() || text.size() < word.size()) return std::string_view::npos;
  for (std::size_t i = from; i + word.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (lower(text[i + k]) != lower(word[k])) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    bool left_ok = i == 0 || !is_word_char(text[i - 1]);
    bool right_ok = i + word.size() == text.size() || !is_word_char(text[i + word.size()]);
    if (left_ok && right_ok) return i;
  }
  return std::string_view::npos;
}

std::vector<std::string> extract_mentions(std::string_view text, const std::vector<Character>& characters) {
  std::vector<std::string> out;
  for (const auto& c : characters)
    if (find_word_ci(text, c.name) != std::string_view::npos) out.push_back(c.name);
  return out;
}

ValidationReport validate_plot(const MoviePlot& plot, const std::vector<std::string>& genres) {
  ValidationReport report;
  auto add = [&](std::string what, std::string where) { report.push_back({std::move(what), std::move(where)}); };

  if (plot.movie_id.empty()) add("empty movie id", "movie_id");
  if (plot.theme.phrase.empty()) add("empty theme phrase", "theme.phrase");
  if (std::find(genres.begin(), genres.end(), plot.theme.genre_tag) == genres.end())
    add("genre not in configured list", "theme.genre_tag");
  if (plot.overview.empty()) add("empty overview", "overview");

  if (plot.style.token && !is_valid_trigger(plot.style.token->trigger))
    add("malformed style trigger", "style.token.trigger");

  if (plot.characters.empty()) add("no characters", "characters");
  std::set<std::string> names;
  for (std::size_t i = 0; i < plot.characters.size(); ++i) {
    const auto& c = plot.characters[i];
    std::string where = "characters[" + std::to_string(i) + "]";
    if (c.name.empty()) add("empty character name", where);
    if (!names.insert(lower_copy(c.name)).second) add("duplicate character name", where);
    if (c.celebrity_name.empty()) add("missing celebrity casting", where);
    if (!c.celebrity_name.empty() && lower_copy(c.name) == lower_copy(c.celebrity_name))
      add("character name equals celebrity name", where);
  }

  if (plot.chapters.empty()) add("no chapters", "chapters");
  int expected_global = 0;
  bool reported_gap = false;
  for (std::size_t ci = 0; ci < plot.chapters.size(); ++ci) {
    const auto& ch = plot.chapters[ci];
    int c = static_cast<int>(ci);
    if (ch.index != c) add("non-contiguous chapter indices", position(c));
    if (ch.threads.empty()) add("chapter without threads", position(c));
    for (std::size_t ti = 0; ti < ch.threads.size(); ++ti) {
      const auto& th = ch.threads[ti];
      int t = static_cast<int>(ti);
      if (th.index != t) add("non-contiguous thread indices", position(c, t));
      if (th.frames.empty()) add("thread without frames", position(c, t));
      for (std::size_t fi = 0; fi < th.frames.size(); ++fi) {
        const auto& fr = th.frames[fi];
        int f = static_cast<int>(fi);
        if (fr.global_index != expected_global && !reported_gap) {
          add("non-contiguous frame indices", position(c, t, f));
          reported_gap = true;
        }
        expected_global = fr.global_index + 1;
        if (fr.text.empty()) add("empty frame text", position(c, t, f));
        for (const auto& m : fr.mentioned_characters) {
          if (!names.contains(lower_copy(m)))
            add("unknown character reference", position(c, t, f) + ": " + m);
        }
      }
    }
  }
  return report;
}

std::vector<FrameDescription> flatten_frames(const MoviePlot& plot, const std::vector<std::string>& genres) {
  auto report = validate_plot(plot, genres);
  if (!report.empty()) {
    std::string msg = "invalid plot:";
    for (const auto& v : report) msg += " [" + v.where + "] " + v.what + ";";
    throw Error(Errc::Validation, msg);
  }
  std::vector<FrameDescription> out;
  out.reserve(plot.frame_count());
  for (const auto& ch : plot.chapters)
    for (const auto& th : ch.threads)
      for (const auto& fr : th.frames) out.push_back(fr);
  return out;
}

void renumber(MoviePlot& plot) {
  int g = 0;
  for (std::size_t ci = 0; ci < plot.chapters.size(); ++ci) {
    auto& ch = plot.chapters[ci];
    ch.index = static_cast<int>(ci);
    for (std::size_t ti = 0; ti < ch.threads.size(); ++ti) {
      auto& th = ch.threads[ti];
      th.index = static_cast<int>(ti);
      for (auto& fr : th.frames) fr.global_index = g++;
    }
  }
}

void to_json(json& j, const MovieTheme& v) { j = json{{"phrase", v.phrase}, {"genre_tag", v.genre_tag}}; }
void from_json(const json& j, MovieTheme& v) {
  j.at("phrase").get_to(v.phrase);
  j.at("genre_tag").get_to(v.genre_tag);
}

void to_json(json& j, const Character& v) {
  j = json{{"name", v.name}, {"description", v.description}, {"celebrity_name", v.celebrity_name}};
}
void from_json(const json& j, Character& v) {
  j.at("name").get_to(v.name);
  j.at("description").get_to(v.description);
  j.at("celebrity_name").get_to(v.celebrity_name);
}

void to_json(json& j, const StyleToken& v) {
  j = json{{"trigger", v.trigger}, {"embedding_artifact", v.embedding_artifact}, {"source_style", v.source_style}};
}
void from_json(const json& j, StyleToken& v) {
  j.at("trigger").get_to(v.trigger);
  j.at("embedding_artifact").get_to(v.embedding_artifact);
  j.at("source_style").get_to(v.source_style);
}

void to_json(json& j, const StyleSpec& v) {
  j = json{{"style_name", v.style_name},
           {"description", v.description},
           {"token", v.token ? json(*v.token) : json(nullptr)},
           {"reference_image_ids", v.reference_image_ids}};
}
void from_json(const json& j, StyleSpec& v) {
  j.at("style_name").get_to(v.style_name);
  j.at("description").get_to(v.description);
  const auto& tok = j.at("token");
  if (tok.is_null()) {
    v.token.reset();
  } else {
    v.token = tok.get<StyleToken>();
  }
  j.at("reference_image_ids").get_to(v.reference_image_ids);
}

void to_json(json& j, const FrameDescription& v) {
  j = json{{"global_index", v.global_index}, {"text", v.text}, {"mentioned_characters", v.mentioned_characters}};
}
void from_json(const json& j, FrameDescription& v) {
  j.at("global_index").get_to(v.global_index);
  j.at("text").get_to(v.text);
  j.at("mentioned_characters").get_to(v.mentioned_characters);
}

void to_json(json& j, const NarrativeThread& v) {
  j = json{{"index", v.index}, {"summary", v.summary}, {"frames", v.frames}};
}
void from_json(const json& j, NarrativeThread& v) {
  j.at("index").get_to(v.index);
  j.at("summary").get_to(v.summary);
  j.at("frames").get_to(v.frames);
}

void to_json(json& j, const EpochChapter& v) {
  j = json{{"index", v.index}, {"title", v.title}, {"summary", v.summary}, {"threads", v.threads}};
}
void from_json(const json& j, EpochChapter& v) {
  j.at("index").get_to(v.index);
  j.at("title").get_to(v.title);
  j.at("summary").get_to(v.summary);
  j.at("threads").get_to(v.threads);
}

void to_json(json& j, const MoviePlot& v) {
  j = json{{"movie_id", v.movie_id}, {"theme", v.theme},           {"overview", v.overview},
           {"style", v.style},       {"characters", v.characters}, {"chapters", v.chapters}};
}
void from_json(const json& j, MoviePlot& v) {
  j.at("movie_id").get_to(v.movie_id);
  j.at("theme").get_to(v.theme);
  j.at("overview").get_to(v.overview);
  j.at("style").get_to(v.style);
  j.at("characters").get_to(v.characters);
  j.at("chapters").get_to(v.chapters);
}

void to_json(json& j, const QAPair& v) {
  j = json{{"question", v.question}, {"answer", v.answer}, {"category", std::string(to_string(v.category))}};
}
void from_json(const json& j, QAPair& v) {
  j.at("question").get_to(v.question);
  j.at("answer").get_to(v.answer);
  auto cat = parse_qa_category(j.at("category").get<std::string>());
  if (!cat) throw Error(Errc::ParseFailed, "unknown QA category " + j.at("category").dump());
  v.category = *cat;
}

void to_json(json& j, const KeyFrameRecord& v) {
  j = json{{"global_index", v.global_index}, {"source_text", v.source_text}, {"prompt", v.prompt},
           {"image_hash", v.image_hash},     {"image_path", v.image_path},   {"seed", v.seed}};
}
void from_json(const json& j, KeyFrameRecord& v) {
  j.at("global_index").get_to(v.global_index);
  j.at("source_text").get_to(v.source_text);
  j.at("prompt").get_to(v.prompt);
  j.at("image_hash").get_to(v.image_hash);
  j.at("image_path").get_to(v.image_path);
  j.at("seed").get_to(v.seed);
}

}  // namespace storyreel
