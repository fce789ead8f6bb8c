#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "storyreel/plot_model.hpp"
#include "storyreel/structured_chat.hpp"

namespace storyreel {

struct ExpansionConfig {
  int n_chapters = 5;
  int n_threads_per_chapter = 3;
  int n_frames_per_thread = 8;
  int max_repair_attempts = 2;
  int max_total_frames = 2000;
  int min_characters = 1;
  int max_characters = 8;
  // Anti-forgetting window: each expansion prompt sees the overview, its
  // parent summaries and one recap of the preceding sibling, each clipped.
  std::size_t overview_max_chars = 1500;
  std::size_t summary_max_chars = 600;
  std::size_t recap_max_chars = 400;
  std::size_t prompt_char_cap = 6000;
  std::vector<std::string> genres = default_genres();

  void validate() const;
  int total_frames() const { return n_chapters * n_threads_per_chapter * n_frames_per_thread; }
};

// Builds a MoviePlot from a theme by staged prompting: overview, style,
// characters, then chapters -> threads -> frames.
class StoryExpander {
 public:
  StoryExpander(ChatClient& chat, const TemplateSet& templates, ExpansionConfig cfg, ChatSettings settings,
                std::filesystem::path movie_dir = {});

  std::string generate_overview(const MovieTheme& theme);
  StyleSpec generate_style(const MovieTheme& theme, const std::string& overview);
  std::vector<Character> generate_characters(const MovieTheme& theme, const std::string& overview);

  // `plot` carries what has been generated so far (overview, characters,
  // earlier chapters/threads); the result is not attached to it.
  std::vector<EpochChapter> expand_chapters(const MoviePlot& plot);
  std::vector<NarrativeThread> expand_threads(const MoviePlot& plot, int chapter);
  std::vector<FrameDescription> expand_frames(const MoviePlot& plot, int chapter, int thread);

  // Runs every step in order. With a movie directory set, each step's result
  // is persisted under partial/ and reused on the next call, so an interrupted
  // build resumes at the first missing step.
  MoviePlot build_plot(const MovieTheme& theme, std::uint64_t run_seed);

  // Called after each step completes and is persisted ("overview", "style",
  // "characters", "chapters", "threads-c0", "frames-c0-t1", ...).
  void set_step_hook(std::function<void(std::string_view)> hook) { step_hook_ = std::move(hook); }

  // Prompts rendered by this expander, in order (for context-bound checks).
  const std::vector<std::string>& rendered_prompts() const { return prompts_; }

 private:
  std::string render(const std::string& id, const TemplateVars& vars, bool bounded);
  std::string threads_recap(const MoviePlot& plot, int chapter) const;
  std::string frames_recap(const MoviePlot& plot, int chapter, int thread) const;
  std::string character_list(const MoviePlot& plot) const;

  StructuredChat chat_;
  const TemplateSet& templates_;
  ExpansionConfig cfg_;
  std::filesystem::path movie_dir_;
  std::function<void(std::string_view)> step_hook_;
  std::vector<std::string> prompts_;
};

}  // namespace storyreel
