#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "storyreel/plot_model.hpp"
#include "storyreel/run_store.hpp"
#include "storyreel/structured_chat.hpp"

namespace storyreel {

// Minimum pairs per category for one movie. The default sums to 125.
struct QABudget {
  int overview = 5;
  int plot_what = 40;
  int plot_where = 40;
  int plot_why = 35;
  int temporal = 5;

  int at(QACategory c) const;
  int total() const { return overview + plot_what + plot_where + plot_why + temporal; }
  void validate() const;
};

struct QAConfig {
  QABudget budget;
  int max_repair_attempts = 2;
  std::size_t overview_max_chars = 1500;
  std::size_t outline_max_chars = 5000;
  int events_per_question = 3;
};

// Temporal items: which events are asked about and their true order. The
// generator picks the sets; the model only phrases the questions.
struct EventSet {
  std::vector<std::string> shown;    // scrambled, as presented to the model
  std::vector<std::string> ordered;  // plot order
};

std::vector<std::string> temporal_events(const MoviePlot& plot);
std::vector<EventSet> pick_event_sets(const MoviePlot& plot, int count, int per_set);

// One request per category. A category that comes back short is re-prompted
// for the remainder; pairs accumulate across the attempts.
std::vector<QAPair> generate_qa(const MoviePlot& plot, StructuredChat& chat, const QAConfig& cfg);

struct DatasetRecord {
  std::string movie_id;
  std::string video_dir;  // relative to the run directory
  QACategory category = QACategory::overview;
  std::string question;
  std::string answer;
  int frame_count = 0;

  bool operator==(const DatasetRecord&) const = default;
};

void to_json(json& j, const DatasetRecord& v);
void from_json(const json& j, DatasetRecord& v);

struct PackageResult {
  MoviePackage package;
  std::vector<DatasetRecord> records;
};

// Writes <movie_dir>/package.json and <movie_dir>/records.jsonl. Refuses
// (PackagingRefused) when a frame is missing unless allow_gaps is set, when
// there are no QA pairs, or when a plot with >= 2 frames lacks a category.
PackageResult package_movie(const MoviePlot& plot, const std::vector<KeyFrameRecord>& keyframes,
                            const std::vector<QAPair>& qa, const std::filesystem::path& movie_dir,
                            const std::string& video_dir, bool allow_gaps);

// Canonical package serialization and its sha256.
json package_json(const MoviePackage& pkg);
std::string package_hash(const MoviePackage& pkg);

std::string records_jsonl(const std::vector<DatasetRecord>& records);
std::vector<DatasetRecord> parse_records(const std::string& text);

struct DatasetStats {
  long long n_videos = 0;
  long long n_qa = 0;
  long long n_frames = 0;
  std::optional<double> qa_per_video;
  std::optional<double> qa_per_image;
  long long n_genres = 0;
  std::map<std::string, long long> genre_counts;
};

json to_json(const DatasetStats& s);

// Stats from already-counted totals.
DatasetStats stats_from_counts(long long n_qa, long long n_videos, long long n_frames);

// Reads an instructions.jsonl file. A video counts once per distinct movie_id
// with its frame_count. Genres come from <run_dir>/<movie_id>/plot.json when
// present, with run_dir the file's grandparent. Throws ParseFailed naming the
// line for a malformed record.
DatasetStats compute_stats(const std::filesystem::path& dataset_file);

// Table-shaped text summary.
std::string format_stats(const DatasetStats& s);

}  // namespace storyreel
