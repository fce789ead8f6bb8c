#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "storyreel/config.hpp"
#include "storyreel/gateway.hpp"
#include "storyreel/plot_model.hpp"
#include "storyreel/prompt_template.hpp"
#include "storyreel/run_store.hpp"
#include "storyreel/style_pipeline.hpp"

namespace storyreel {

// "genre | phrase" per line; blank lines and '#' comments skipped.
std::vector<MovieTheme> read_themes(const std::filesystem::path& file, const std::vector<std::string>& genres);
std::string format_themes(const std::vector<MovieTheme>& themes);

struct StageFailure {
  std::string movie_id;
  Stage stage = Stage::plot;
  std::string error;
};

struct RunSummary {
  std::vector<std::string> movies;
  std::vector<StageFailure> failures;
  std::size_t frame_failures = 0;  // frames missing from packaged or pending movies
  bool complete() const { return failures.empty() && frame_failures == 0; }
};

// Wires config, backends, clients and the run store together and drives the
// per-movie stage chain plot -> style -> frames -> qa -> package. Movies run
// one after another in registration order; stages already checkpointed are
// skipped.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::shared_ptr<StyleTrainer> trainer = nullptr);

  const PipelineConfig& config() const { return cfg_; }
  RunStore& store() { return *store_; }
  std::string run_id() const { return store_->run_id(); }
  std::filesystem::path dataset_dir() const { return store_->run_dir() / "dataset"; }

  ChatClient& chat() { return *chat_; }
  ImageClient& images() { return *images_; }
  const TemplateSet& templates() const { return templates_; }

  // Asks the chat backend for `count` themes tagged with configured genres.
  std::vector<MovieTheme> propose_themes(int count);

  // Registers movies (idempotent); returns their ids in the given order.
  std::vector<std::string> add_themes(const std::vector<MovieTheme>& themes);

  // Runs every registered movie (or `movie_ids` when given) up to and
  // including `last`. Stage errors are recorded per movie; Config and
  // Interrupted errors propagate.
  RunSummary run(Stage last, const std::vector<std::string>& movie_ids = {});

  // Rewrites dataset/instructions.jsonl from the packaged movies in run order
  // and dataset/stats.json from it.
  void rebuild_dataset();

  // Test hooks: called after each stage checkpoint and after each plot step.
  void set_stage_hook(std::function<void(std::string_view movie_id, Stage)> hook) { stage_hook_ = std::move(hook); }
  void set_plot_step_hook(std::function<void(std::string_view movie_id, std::string_view step)> hook) {
    plot_step_hook_ = std::move(hook);
  }

 private:
  void run_stage(const std::string& movie_id, Stage stage, RunSummary& summary);
  MovieTheme load_theme(const std::string& movie_id) const;
  MoviePlot load_plot(const std::string& movie_id) const;
  std::string save_json_artifact(const std::filesystem::path& file, const json& value);
  ChatSettings chat_settings() const;

  PipelineConfig cfg_;
  TemplateSet templates_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<ChatClient> chat_;
  std::unique_ptr<ImageClient> images_;
  std::unique_ptr<RunStore> store_;
  std::unique_ptr<StyleRegistry> registry_;
  std::shared_ptr<StyleTrainer> trainer_;
  std::function<void(std::string_view, Stage)> stage_hook_;
  std::function<void(std::string_view, std::string_view)> plot_step_hook_;
};

}  // namespace storyreel
