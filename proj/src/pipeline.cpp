#include "storyreel/pipeline.hpp"

#include <set>
#include <sstream>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/keyframe_gen.hpp"
#include "storyreel/qa_dataset.hpp"
#include "storyreel/story_expansion.hpp"
#include "storyreel/structured_chat.hpp"
#include "storyreel/task_pool.hpp"

namespace storyreel {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

void require_genre(const MovieTheme& t, const std::vector<std::string>& genres, const std::string& where) {
  if (t.phrase.empty()) throw Error(Errc::Validation, where + ": empty theme phrase");
  if (std::find(genres.begin(), genres.end(), t.genre_tag) == genres.end())
    throw Error(Errc::Validation, where + ": genre '" + t.genre_tag + "' is not in the configured genre list");
}

}  // namespace

std::vector<MovieTheme> read_themes(const fs::path& file, const std::vector<std::string>& genres) {
  if (!fs::exists(file)) throw Error(Errc::Config, "themes file not found: " + file.string());
  std::vector<MovieTheme> out;
  std::istringstream in(read_file(file));
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto bar = t.find('|');
    if (bar == std::string::npos)
      throw Error(Errc::Config, file.string() + " line " + std::to_string(lineno) + ": expected 'genre | phrase'");
    MovieTheme theme{trim(t.substr(bar + 1)), trim(t.substr(0, bar))};
    try {
      require_genre(theme, genres, file.string() + " line " + std::to_string(lineno));
    } catch (const Error& e) {
      throw Error(Errc::Config, e.what());
    }
    out.push_back(theme);
  }
  return out;
}

std::string format_themes(const std::vector<MovieTheme>& themes) {
  std::string out;
  for (const auto& t : themes) out += t.genre_tag + " | " + t.phrase + "\n";
  return out;
}

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<StyleTrainer> trainer)
    : cfg_(std::move(cfg)), templates_(TemplateSet::load(cfg_.templates)), trainer_(std::move(trainer)) {
  cfg_.validate();
  if (cfg_.cache_dir) cache_ = std::make_shared<ResponseCache>(*cfg_.cache_dir);

  auto options = [&](const BackendConfig& b) {
    ClientOptions o;
    o.retry = b.retry;
    o.rate_limit = b.rate_limit;
    o.cache = cache_;
    return o;
  };
  chat_ = std::make_unique<ChatClient>(make_chat_backend(cfg_.chat, cfg_.base_dir), options(cfg_.chat));
  images_ = std::make_unique<ImageClient>(make_image_backend(cfg_.image, cfg_.base_dir), cfg_.image.max_side,
                                          options(cfg_.image));

  std::string run_id = cfg_.run_id.empty() ? "seed-" + std::to_string(*cfg_.seed) : cfg_.run_id;
  store_ = std::make_unique<RunStore>(cfg_.workspace, run_id);
  store_->open(*cfg_.seed, cfg_.hash());
  registry_ = std::make_unique<StyleRegistry>(store_->run_dir() / "style_registry.json");
  if (!trainer_) {
    if (cfg_.style.trainer == "command") {
      trainer_ = std::make_shared<CommandStyleTrainer>(cfg_.style.command);
    } else {
      trainer_ = std::make_shared<MockStyleTrainer>();
    }
  }
}

ChatSettings Pipeline::chat_settings() const {
  ChatSettings s;
  s.model = cfg_.chat.model;
  s.temperature = cfg_.chat.temperature;
  s.max_tokens = cfg_.chat.max_tokens;
  s.seed = static_cast<std::int64_t>(*cfg_.seed);
  return s;
}

std::vector<MovieTheme> Pipeline::propose_themes(int count) {
  if (count < 1) throw Error(Errc::Config, "theme count must be >= 1");
  std::string genres;
  for (const auto& g : cfg_.expansion.genres) genres += (genres.empty() ? "" : ", ") + g;
  StructuredChat chat(*chat_, templates_, chat_settings(), store_->run_dir() / "transcripts");
  std::string prompt = templates_.get("themes").render({{"count", std::to_string(count)}, {"genres", genres}});
  const auto& allowed = cfg_.expansion.genres;
  json v = chat.ask(
      "themes", prompt, {ExpectedShape::Root::object, {"themes"}},
      [count, &allowed](const json& j) -> std::optional<std::string> {
        if (!j["themes"].is_array()) return "'themes' must be a list";
        if (static_cast<int>(j["themes"].size()) != count)
          return "expected exactly " + std::to_string(count) + " themes, got " + std::to_string(j["themes"].size()) +
                 ". Return exactly " + std::to_string(count) + ".";
        std::set<std::string> seen;
        for (const auto& t : j["themes"]) {
          if (!t.is_object() || !t.contains("phrase") || !t["phrase"].is_string() || !t.contains("genre_tag") ||
              !t["genre_tag"].is_string())
            return "every theme needs 'phrase' and 'genre_tag' strings";
          std::string phrase = t["phrase"].get<std::string>();
          if (trim(phrase).empty()) return "theme phrases must be non-empty";
          if (!seen.insert(phrase).second) return "duplicate theme '" + phrase + "'";
          std::string g = t["genre_tag"].get<std::string>();
          if (std::find(allowed.begin(), allowed.end(), g) == allowed.end())
            return "genre '" + g + "' is not one of the listed genres";
        }
        return std::nullopt;
      },
      cfg_.expansion.max_repair_attempts);
  std::vector<MovieTheme> out;
  for (const auto& t : v["themes"]) out.push_back({trim(t["phrase"].get<std::string>()), t["genre_tag"].get<std::string>()});
  return out;
}

std::vector<std::string> Pipeline::add_themes(const std::vector<MovieTheme>& themes) {
  std::vector<std::string> ids;
  for (const auto& t : themes) {
    require_genre(t, cfg_.expansion.genres, "theme '" + t.phrase + "'");
    std::string id = make_movie_id(t.phrase, *cfg_.seed);
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) continue;
    fs::path theme_file = store_->movie_dir(id) / "theme.json";
    if (!fs::exists(theme_file)) write_json(theme_file, json(t));
    store_->add_movie(id);
    ids.push_back(id);
  }
  return ids;
}

MovieTheme Pipeline::load_theme(const std::string& movie_id) const {
  fs::path f = store_->movie_dir(movie_id) / "theme.json";
  if (!fs::exists(f)) throw Error(Errc::NotFound, "movie " + movie_id + " has no theme.json");
  return read_json(f).get<MovieTheme>();
}

MoviePlot Pipeline::load_plot(const std::string& movie_id) const {
  fs::path f = store_->movie_dir(movie_id) / "plot.json";
  if (!fs::exists(f)) throw Error(Errc::NotFound, "movie " + movie_id + " has no plot.json");
  return read_json(f).get<MoviePlot>();
}

std::string Pipeline::save_json_artifact(const fs::path& file, const json& value) {
  std::string text = value.dump(2) + "\n";
  atomic_write(file, text);
  return store_->put_blob(text);
}

void Pipeline::run_stage(const std::string& movie_id, Stage stage, RunSummary& summary) {
  const fs::path dir = store_->movie_dir(movie_id);
  const std::uint64_t seed = *cfg_.seed;
  std::map<std::string, std::string> artifacts;

  switch (stage) {
    case Stage::plot: {
      StoryExpander expander(*chat_, templates_, cfg_.expansion, chat_settings(), dir);
      if (plot_step_hook_) expander.set_step_hook([&](std::string_view step) { plot_step_hook_(movie_id, step); });
      MoviePlot plot = expander.build_plot(load_theme(movie_id), seed);
      artifacts["plot"] = save_json_artifact(dir / "plot.json", json(plot));
      break;
    }
    case Stage::style: {
      MoviePlot plot = load_plot(movie_id);
      SceneSettings scenes{cfg_.keyframes.width, cfg_.keyframes.height, cfg_.keyframes.negative_prompt};
      generate_reference_scenes(*images_, *store_, plot.style, cfg_.style.reference_scenes,
                                static_cast<std::int64_t>(seed) + 1000000, scenes);
      StyleToken token = immobilize_style(plot.style, movie_id, *trainer_, *registry_, *store_, dir / "style_job");
      artifacts["plot"] = save_json_artifact(dir / "plot.json", json(plot));
      artifacts["embedding"] = token.embedding_artifact;
      break;
    }
    case Stage::frames: {
      MoviePlot plot = load_plot(movie_id);
      KeyframeSettings ks;
      ks.run_seed = static_cast<std::int64_t>(seed);
      ks.width = cfg_.keyframes.width;
      ks.height = cfg_.keyframes.height;
      ks.negative_prompt = cfg_.keyframes.negative_prompt;
      ks.max_parallel = cfg_.max_parallel_requests;
      KeyframeResult result = generate_keyframes(plot, *images_, *store_, dir, ks);
      if (!result.complete()) {
        summary.frame_failures += result.failures.size();
        std::string detail = std::to_string(result.failures.size()) + " frame(s) failed; see frames_failed.json";
        if (!cfg_.allow_gaps) throw Error(Errc::StageFailed, "frames: " + detail);
      }
      artifacts["frames"] = store_->put_blob(read_file(dir / "frames.json"));
      break;
    }
    case Stage::qa: {
      MoviePlot plot = load_plot(movie_id);
      StructuredChat chat(*chat_, templates_, chat_settings(), dir / "transcripts");
      auto pairs = generate_qa(plot, chat, cfg_.qa);
      artifacts["qa"] = save_json_artifact(dir / "qa.json", json(pairs));
      break;
    }
    case Stage::package: {
      MoviePlot plot = load_plot(movie_id);
      auto frames = read_json(dir / "frames.json").get<std::vector<KeyFrameRecord>>();
      auto qa = read_json(dir / "qa.json").get<std::vector<QAPair>>();
      package_movie(plot, frames, qa, dir, movie_id + "/frames", cfg_.allow_gaps);
      artifacts["package"] = store_->put_blob(read_file(dir / "package.json"));
      artifacts["records"] = store_->put_blob(read_file(dir / "records.jsonl"));
      break;
    }
  }
  store_->checkpoint(movie_id, stage, artifacts);
  if (stage == Stage::package) rebuild_dataset();
  if (stage_hook_) stage_hook_(movie_id, stage);
}

RunSummary Pipeline::run(Stage last, const std::vector<std::string>& movie_ids) {
  RunSummary summary;
  summary.movies = movie_ids.empty() ? store_->manifest().movie_order : movie_ids;
  for (const auto& id : summary.movies) {
    for (Stage stage : kAllStages) {
      if (stop_requested()) throw Error(Errc::Interrupted, "run interrupted");
      if (store_->is_done(id, stage)) {
        if (stage == last) break;
        continue;
      }
      try {
        run_stage(id, stage, summary);
      } catch (const Error& e) {
        if (e.code() == Errc::Config || e.code() == Errc::Interrupted) throw;
        store_->mark_failed(id, stage, e.what());
        summary.failures.push_back({id, stage, e.what()});
        break;
      }
      if (stage == last) break;
    }
  }
  if (last == Stage::package) rebuild_dataset();
  return summary;
}

void Pipeline::rebuild_dataset() {
  RunManifest m = store_->manifest();
  std::string text;
  for (const auto& id : m.movie_order) {
    auto it = m.movies.find(id);
    if (it == m.movies.end() || !it->second.done(Stage::package)) continue;
    text += read_file(store_->movie_dir(id) / "records.jsonl");
  }
  fs::path dataset = dataset_dir() / "instructions.jsonl";
  atomic_write(dataset, text);
  write_json(dataset_dir() / "stats.json", to_json(compute_stats(dataset)));
}

}  // namespace storyreel
