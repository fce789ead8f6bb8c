#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace storyreel {

using json = nlohmann::json;

struct MovieTheme {
  std::string phrase;
  std::string genre_tag;
};

struct Character {
  std::string name;
  std::string description;
  std::string celebrity_name;
};

struct StyleToken {
  std::string trigger;             // "<slug>"
  std::string embedding_artifact;  // blob hash of the trained embedding file
  std::string source_style;
};

struct StyleSpec {
  std::string style_name;
  std::string description;
  std::optional<StyleToken> token;
  std::vector<std::string> reference_image_ids;
};

struct FrameDescription {
  int global_index = 0;
  std::string text;
  std::vector<std::string> mentioned_characters;
};

struct NarrativeThread {
  int index = 0;
  std::string summary;
  std::vector<FrameDescription> frames;
};

struct EpochChapter {
  int index = 0;
  std::string title;
  std::string summary;
  std::vector<NarrativeThread> threads;
};

struct MoviePlot {
  std::string movie_id;
  MovieTheme theme;
  std::string overview;
  StyleSpec style;
  std::vector<Character> characters;
  std::vector<EpochChapter> chapters;

  std::size_t frame_count() const;
};

enum class QACategory { overview, plot_what, plot_where, plot_why, temporal };

inline constexpr QACategory kAllQACategories[] = {QACategory::overview, QACategory::plot_what,
                                                  QACategory::plot_where, QACategory::plot_why,
                                                  QACategory::temporal};

std::string_view to_string(QACategory c);
std::optional<QACategory> parse_qa_category(std::string_view s);

struct QAPair {
  std::string question;
  std::string answer;
  QACategory category = QACategory::overview;

  bool operator==(const QAPair&) const = default;
};

struct KeyFrameRecord {
  int global_index = 0;
  std::string source_text;
  std::string prompt;
  std::string image_hash;
  std::string image_path;  // relative to the movie directory
  std::int64_t seed = 0;

  bool operator==(const KeyFrameRecord&) const = default;
};

struct MoviePackage {
  MoviePlot plot;
  std::vector<KeyFrameRecord> keyframes;
  std::vector<QAPair> qa_pairs;
  std::string manifest_hash;
};

struct Violation {
  std::string what;
  std::string where;
};
using ValidationReport = std::vector<Violation>;

// The 15 genre labels used when a config does not override them.
const std::vector<std::string>& default_genres();

// First 16 hex chars of sha256(phrase "\n" seed).
std::string make_movie_id(std::string_view theme_phrase, std::uint64_t run_seed);

bool is_valid_trigger(std::string_view trigger);

// Pure check of every plot invariant; an empty report means the plot is valid.
ValidationReport validate_plot(const MoviePlot& plot,
                               const std::vector<std::string>& genres = default_genres());

// Depth-first (chapter, thread, frame) order. Throws Errc::Validation on an invalid plot.
std::vector<FrameDescription> flatten_frames(const MoviePlot& plot,
                                             const std::vector<std::string>& genres = default_genres());

// Renumbers frame global indices in depth-first order and chapter/thread
// indices from 0.
void renumber(MoviePlot& plot);

// Whole-word, ASCII case-insensitive search. Returns npos when absent.
std::size_t find_word_ci(std::string_view text, std::string_view word, std::size_t from = 0);

// Names from `characters` that occur in `text` as whole words, in character-list order.
std::vector<std::string> extract_mentions(std::string_view text, const std::vector<Character>& characters);

void to_json(json& j, const MovieTheme& v);
void from_json(const json& j, MovieTheme& v);
void to_json(json& j, const Character& v);
void from_json(const json& j, Character& v);
void to_json(json& j, const StyleToken& v);
void from_json(const json& j, StyleToken& v);
void to_json(json& j, const StyleSpec& v);
void from_json(const json& j, StyleSpec& v);
void to_json(json& j, const FrameDescription& v);
void from_json(const json& j, FrameDescription& v);
void to_json(json& j, const NarrativeThread& v);
void from_json(const json& j, NarrativeThread& v);
void to_json(json& j, const EpochChapter& v);
void from_json(const json& j, EpochChapter& v);
void to_json(json& j, const MoviePlot& v);
void from_json(const json& j, MoviePlot& v);
void to_json(json& j, const QAPair& v);
void from_json(const json& j, QAPair& v);
void to_json(json& j, const KeyFrameRecord& v);
void from_json(const json& j, KeyFrameRecord& v);

}  // namespace storyreel
