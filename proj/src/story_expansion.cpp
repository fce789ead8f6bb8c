#include "storyreel/story_expansion.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"

namespace storyreel {

namespace {

std::string lower_copy(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool nonempty_string(const json& obj, const char* key) {
  return obj.is_object() && obj.contains(key) && obj[key].is_string() && !obj[key].get<std::string>().empty();
}

std::optional<std::string> check_list(const json& v, const char* key, int expected, const char* noun) {
  if (!v.contains(key) || !v[key].is_array()) return std::string("'") + key + "' must be a list";
  int got = static_cast<int>(v[key].size());
  if (got != expected) {
    return "expected exactly " + std::to_string(expected) + " " + noun + ", got " + std::to_string(got) +
           ". Return exactly " + std::to_string(expected) + ".";
  }
  return std::nullopt;
}

}  // namespace

void ExpansionConfig::validate() const {
  if (n_chapters < 1 || n_threads_per_chapter < 1 || n_frames_per_thread < 1)
    throw Error(Errc::Config, "expansion counts must be positive");
  if (max_repair_attempts < 0) throw Error(Errc::Config, "max_repair_attempts must be >= 0");
  if (min_characters < 1 || max_characters < min_characters)
    throw Error(Errc::Config, "character bounds must satisfy 1 <= min <= max");
  if (static_cast<long long>(n_chapters) * n_threads_per_chapter * n_frames_per_thread > max_total_frames) {
    throw Error(Errc::Config, "expansion shape " + std::to_string(n_chapters) + "x" +
                                  std::to_string(n_threads_per_chapter) + "x" + std::to_string(n_frames_per_thread) +
                                  " exceeds max_total_frames " + std::to_string(max_total_frames));
  }
  if (genres.empty()) throw Error(Errc::Config, "genre list is empty");
}

StoryExpander::StoryExpander(ChatClient& chat, const TemplateSet& templates, ExpansionConfig cfg,
                             ChatSettings settings, std::filesystem::path movie_dir)
    : chat_(chat, templates, std::move(settings), movie_dir.empty() ? movie_dir : movie_dir / "transcripts"),
      templates_(templates),
      cfg_(std::move(cfg)),
      movie_dir_(std::move(movie_dir)) {
  cfg_.validate();
}

std::string StoryExpander::render(const std::string& id, const TemplateVars& vars, bool bounded) {
  std::string prompt = templates_.get(id).render(vars);
  if (bounded && prompt.size() > cfg_.prompt_char_cap) {
    throw Error(Errc::ContractViolation, id + " prompt is " + std::to_string(prompt.size()) +
                                             " chars, above the cap of " + std::to_string(cfg_.prompt_char_cap));
  }
  prompts_.push_back(prompt);
  return prompt;
}

std::string StoryExpander::generate_overview(const MovieTheme& theme) {
  if (theme.phrase.empty()) throw Error(Errc::Validation, "empty theme phrase");
  std::string prompt = render("overview", {{"theme", theme.phrase}, {"genre", theme.genre_tag}}, false);
  json v = chat_.ask(
      "overview", prompt, {ExpectedShape::Root::object, {"overview"}},
      [](const json& j) -> std::optional<std::string> {
        if (!nonempty_string(j, "overview")) return "'overview' must be a non-empty string";
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  return v["overview"].get<std::string>();
}

StyleSpec StoryExpander::generate_style(const MovieTheme& theme, const std::string& overview) {
  std::string prompt =
      render("style", {{"theme", theme.phrase}, {"overview", clip_text(overview, cfg_.overview_max_chars)}}, false);
  json v = chat_.ask(
      "style", prompt, {ExpectedShape::Root::object, {"style_name", "description"}},
      [](const json& j) -> std::optional<std::string> {
        if (!nonempty_string(j, "style_name")) return "'style_name' must be a non-empty string";
        if (!nonempty_string(j, "description")) return "'description' must be a non-empty string";
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  StyleSpec style;
  style.style_name = v["style_name"].get<std::string>();
  style.description = v["description"].get<std::string>();
  return style;
}

std::vector<Character> StoryExpander::generate_characters(const MovieTheme& theme, const std::string& overview) {
  std::string prompt = render("characters",
                              {{"theme", theme.phrase},
                               {"overview", clip_text(overview, cfg_.overview_max_chars)},
                               {"min_characters", std::to_string(cfg_.min_characters)},
                               {"max_characters", std::to_string(cfg_.max_characters)}},
                              false);
  const int lo = cfg_.min_characters;
  const int hi = cfg_.max_characters;
  json v = chat_.ask(
      "characters", prompt, {ExpectedShape::Root::object, {"characters"}},
      [lo, hi](const json& j) -> std::optional<std::string> {
        if (!j["characters"].is_array()) return "'characters' must be a list";
        const auto& list = j["characters"];
        if (list.empty()) return "no characters were given; list at least " + std::to_string(lo);
        if (static_cast<int>(list.size()) < lo || static_cast<int>(list.size()) > hi) {
          return "expected between " + std::to_string(lo) + " and " + std::to_string(hi) + " characters, got " +
                 std::to_string(list.size());
        }
        std::set<std::string> seen;
        for (const auto& c : list) {
          if (!nonempty_string(c, "name")) return "every character needs a non-empty 'name'";
          if (!nonempty_string(c, "celebrity_name")) return "every character needs a 'celebrity_name'";
          std::string name = c["name"].get<std::string>();
          if (!seen.insert(lower_copy(name)).second)
            return "duplicate character name '" + name + "'; every character needs a unique name";
          if (lower_copy(name) == lower_copy(c["celebrity_name"].get<std::string>()))
            return "character '" + name + "' has the same name as its celebrity";
        }
        // a celebrity containing a character name would survive name substitution
        for (const auto& c : list) {
          std::string celeb = c["celebrity_name"].get<std::string>();
          for (const auto& other : list) {
            std::string name = other["name"].get<std::string>();
            if (find_word_ci(celeb, name) != std::string::npos)
              return "celebrity '" + celeb + "' contains the character name '" + name + "'; choose distinct names";
          }
        }
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  std::vector<Character> out;
  for (const auto& c : v["characters"]) {
    Character ch;
    ch.name = c["name"].get<std::string>();
    ch.celebrity_name = c["celebrity_name"].get<std::string>();
    if (c.contains("description") && c["description"].is_string()) ch.description = c["description"].get<std::string>();
    out.push_back(std::move(ch));
  }
  return out;
}

std::vector<EpochChapter> StoryExpander::expand_chapters(const MoviePlot& plot) {
  if (plot.overview.empty()) throw Error(Errc::Validation, "expand_chapters needs an overview");
  const int n = cfg_.n_chapters;
  std::string prompt = render("chapters",
                              {{"theme", plot.theme.phrase},
                               {"overview", clip_text(plot.overview, cfg_.overview_max_chars)},
                               {"count", std::to_string(n)}},
                              true);
  json v = chat_.ask(
      "chapters", prompt, {ExpectedShape::Root::object, {"chapters"}},
      [n](const json& j) -> std::optional<std::string> {
        if (auto bad = check_list(j, "chapters", n, "chapters")) return bad;
        for (const auto& c : j["chapters"])
          if (!nonempty_string(c, "title") || !nonempty_string(c, "summary"))
            return "every chapter needs a non-empty 'title' and 'summary'";
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  std::vector<EpochChapter> out;
  for (const auto& c : v["chapters"]) {
    EpochChapter ch;
    ch.index = static_cast<int>(out.size());
    ch.title = c["title"].get<std::string>();
    ch.summary = c["summary"].get<std::string>();
    out.push_back(std::move(ch));
  }
  return out;
}

std::string StoryExpander::threads_recap(const MoviePlot& plot, int chapter) const {
  if (chapter == 0) return "This is the opening chapter.";
  const auto& prev = plot.chapters[static_cast<std::size_t>(chapter - 1)];
  if (prev.threads.empty()) return clip_text(prev.summary, cfg_.recap_max_chars);
  return clip_text(prev.threads.back().summary, cfg_.recap_max_chars);
}

std::string StoryExpander::frames_recap(const MoviePlot& plot, int chapter, int thread) const {
  const NarrativeThread* prev = nullptr;
  if (thread > 0) {
    prev = &plot.chapters[static_cast<std::size_t>(chapter)].threads[static_cast<std::size_t>(thread - 1)];
  } else if (chapter > 0 && !plot.chapters[static_cast<std::size_t>(chapter - 1)].threads.empty()) {
    prev = &plot.chapters[static_cast<std::size_t>(chapter - 1)].threads.back();
  }
  if (!prev) return "This is the opening scene of the movie.";
  std::string recap = prev->summary;
  if (!prev->frames.empty()) recap += " Last frame: " + prev->frames.back().text;
  return clip_text(recap, cfg_.recap_max_chars);
}

std::string StoryExpander::character_list(const MoviePlot& plot) const {
  std::string names;
  for (const auto& c : plot.characters) {
    if (!names.empty()) names += ", ";
    names += c.name;
  }
  return clip_text(names, cfg_.summary_max_chars);
}

std::vector<NarrativeThread> StoryExpander::expand_threads(const MoviePlot& plot, int chapter) {
  if (chapter < 0 || chapter >= static_cast<int>(plot.chapters.size()))
    throw Error(Errc::Validation, "chapter index out of range");
  const auto& ch = plot.chapters[static_cast<std::size_t>(chapter)];
  if (ch.summary.empty()) throw Error(Errc::Validation, "expand_threads needs a chapter summary");
  const int n = cfg_.n_threads_per_chapter;
  std::string prompt = render("threads",
                              {{"overview", clip_text(plot.overview, cfg_.overview_max_chars)},
                               {"chapter_index", std::to_string(chapter)},
                               {"chapter_title", clip_text(ch.title, cfg_.summary_max_chars)},
                               {"chapter_summary", clip_text(ch.summary, cfg_.summary_max_chars)},
                               {"previous_recap", threads_recap(plot, chapter)},
                               {"count", std::to_string(n)}},
                              true);
  json v = chat_.ask(
      "threads-c" + std::to_string(chapter), prompt, {ExpectedShape::Root::object, {"threads"}},
      [n](const json& j) -> std::optional<std::string> {
        if (auto bad = check_list(j, "threads", n, "threads")) return bad;
        for (const auto& t : j["threads"])
          if (!nonempty_string(t, "summary")) return "every thread needs a non-empty 'summary'";
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  std::vector<NarrativeThread> out;
  for (const auto& t : v["threads"]) {
    NarrativeThread th;
    th.index = static_cast<int>(out.size());
    th.summary = t["summary"].get<std::string>();
    out.push_back(std::move(th));
  }
  return out;
}

std::vector<FrameDescription> StoryExpander::expand_frames(const MoviePlot& plot, int chapter, int thread) {
  if (chapter < 0 || chapter >= static_cast<int>(plot.chapters.size()))
    throw Error(Errc::Validation, "chapter index out of range");
  const auto& ch = plot.chapters[static_cast<std::size_t>(chapter)];
  if (thread < 0 || thread >= static_cast<int>(ch.threads.size()))
    throw Error(Errc::Validation, "thread index out of range");
  const auto& th = ch.threads[static_cast<std::size_t>(thread)];
  if (th.summary.empty()) throw Error(Errc::Validation, "expand_frames needs a thread summary");

  const int n = cfg_.n_frames_per_thread;
  std::string names = character_list(plot);
  std::string prompt = render("frames",
                              {{"overview", clip_text(plot.overview, cfg_.overview_max_chars)},
                               {"chapter_index", std::to_string(chapter)},
                               {"chapter_summary", clip_text(ch.summary, cfg_.summary_max_chars)},
                               {"thread_index", std::to_string(thread)},
                               {"thread_summary", clip_text(th.summary, cfg_.summary_max_chars)},
                               {"previous_recap", frames_recap(plot, chapter, thread)},
                               {"count", std::to_string(n)},
                               {"character_names", names}},
                              true);
  std::set<std::string> known;
  for (const auto& c : plot.characters) known.insert(lower_copy(c.name));
  json v = chat_.ask(
      "frames-c" + std::to_string(chapter) + "-t" + std::to_string(thread), prompt,
      {ExpectedShape::Root::object, {"frames"}},
      [n, &known, &names](const json& j) -> std::optional<std::string> {
        if (auto bad = check_list(j, "frames", n, "frames")) return bad;
        for (const auto& f : j["frames"]) {
          if (!nonempty_string(f, "text")) return "every frame needs a non-empty 'text'";
          if (f.contains("characters")) {
            if (!f["characters"].is_array()) return "'characters' must be a list of names";
            for (const auto& name : f["characters"]) {
              if (!name.is_string()) return "'characters' must be a list of names";
              if (!known.contains(lower_copy(name.get<std::string>())))
                return "unknown character '" + name.get<std::string>() + "'; allowed names: " + names;
            }
          }
        }
        return std::nullopt;
      },
      cfg_.max_repair_attempts);
  int next_index = 0;
  for (int ci = 0; ci <= chapter; ++ci) {
    const auto& threads = plot.chapters[static_cast<std::size_t>(ci)].threads;
    int limit = ci < chapter ? static_cast<int>(threads.size()) : thread;
    for (int ti = 0; ti < limit; ++ti) next_index += static_cast<int>(threads[static_cast<std::size_t>(ti)].frames.size());
  }
  std::vector<FrameDescription> out;
  for (const auto& f : v["frames"]) {
    FrameDescription fd;
    fd.global_index = next_index++;
    fd.text = f["text"].get<std::string>();
    fd.mentioned_characters = extract_mentions(fd.text, plot.characters);
    out.push_back(std::move(fd));
  }
  return out;
}

MoviePlot StoryExpander::build_plot(const MovieTheme& theme, std::uint64_t run_seed) {
  MoviePlot plot;
  plot.movie_id = make_movie_id(theme.phrase, run_seed);
  plot.theme = theme;

  const std::filesystem::path partial = movie_dir_.empty() ? movie_dir_ : movie_dir_ / "partial";
  // Loads a persisted step result, or computes, persists and announces it.
  auto step = [&](const std::string& name, auto&& compute) -> json {
    if (!partial.empty()) {
      auto path = partial / (name + ".json");
      if (std::filesystem::exists(path)) return read_json(path);
    }
    json value = compute();
    if (!partial.empty()) write_json(partial / (name + ".json"), value);
    if (step_hook_) step_hook_(name);
    return value;
  };

  plot.overview = step("overview", [&] { return json(generate_overview(theme)); }).get<std::string>();
  plot.style = step("style", [&] { return json(generate_style(theme, plot.overview)); }).get<StyleSpec>();
  plot.characters =
      step("characters", [&] { return json(generate_characters(theme, plot.overview)); }).get<std::vector<Character>>();
  plot.chapters = step("chapters", [&] { return json(expand_chapters(plot)); }).get<std::vector<EpochChapter>>();

  for (int c = 0; c < static_cast<int>(plot.chapters.size()); ++c) {
    auto& ch = plot.chapters[static_cast<std::size_t>(c)];
    ch.threads = step("threads-c" + std::to_string(c), [&] { return json(expand_threads(plot, c)); })
                     .get<std::vector<NarrativeThread>>();
    for (int t = 0; t < static_cast<int>(ch.threads.size()); ++t) {
      auto& th = ch.threads[static_cast<std::size_t>(t)];
      th.frames =
          step("frames-c" + std::to_string(c) + "-t" + std::to_string(t), [&] { return json(expand_frames(plot, c, t)); })
              .get<std::vector<FrameDescription>>();
    }
  }
  renumber(plot);

  auto report = validate_plot(plot, cfg_.genres);
  if (!report.empty()) {
    throw Error(Errc::StageFailed, "plot: assembled plot is invalid: " + report.front().where + " " +
                                       report.front().what);
  }
  return plot;
}

}  // namespace storyreel
