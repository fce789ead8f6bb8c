#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "storyreel/plot_model.hpp"
#include "storyreel/qa_dataset.hpp"

namespace storyreel::testing {

using json = nlohmann::json;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path source_dir();
std::filesystem::path templates_dir();
std::filesystem::path fixtures_dir();

void write_text(const std::filesystem::path& p, const std::string& text);

struct ScriptShape {
  int chapters = 5;
  int threads = 3;
  int frames = 8;
  QABudget budget;
  int image_side = 64;  // keyframe and reference scene size in written configs
};

// A ```json fenced block.
std::string fenced(const json& v);

// Deterministic mock chat entries answering every stage for one theme. Each
// movie gets its own place name (movie_no picks it) used to route prompts.
json movie_script(const MovieTheme& theme, int movie_no, const ScriptShape& shape);

// Entries for all themes concatenated, in order.
json chat_script(const std::vector<MovieTheme>& themes, const ScriptShape& shape);

// Character names used for a movie (the first one is "Elena", a later one
// "Ann" next to "Anna" so longest-first substitution is exercised).
std::vector<Character> movie_cast(int movie_no);
std::string movie_place(int movie_no);

// A valid plot with the given shape and the cast above; frame texts mention
// characters.
MoviePlot make_plot(int chapters, int threads, int frames, const std::string& phrase = "a tragic film");

std::vector<MovieTheme> demo_themes();

// Writes a pipeline config plus mock scripts into `dir` and returns the
// config path. Extra YAML lines are appended verbatim.
std::filesystem::path write_pipeline_config(const std::filesystem::path& dir, const std::vector<MovieTheme>& themes,
                                            const ScriptShape& shape, std::uint64_t seed,
                                            const std::string& extra_yaml = "",
                                            const std::vector<std::int64_t>& fail_seeds = {});

// Every file under `dir` (relative path -> sha256 of the bytes), skipping
// paths for which `skip` returns true.
std::map<std::string, std::string> tree_digest(const std::filesystem::path& dir,
                                               bool (*skip)(const std::string& rel) = nullptr);

// Manifest JSON without created/updated timestamps.
json manifest_without_timestamps(const std::filesystem::path& manifest);

}  // namespace storyreel::testing
