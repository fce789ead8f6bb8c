#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "storyreel/fs_util.hpp"

namespace storyreel {

// Per-movie stage DAG; each stage requires all earlier ones.
enum class Stage { plot, style, frames, qa, package };

inline constexpr Stage kAllStages[] = {Stage::plot, Stage::style, Stage::frames, Stage::qa, Stage::package};

std::string_view to_string(Stage s);
std::optional<Stage> parse_stage(std::string_view s);

enum class StageStatus { pending, done, failed };

std::string_view to_string(StageStatus s);

struct StageRecord {
  StageStatus status = StageStatus::pending;
  std::map<std::string, std::string> artifacts;  // artifact name -> blob hash
  std::string detail;
};

struct MovieEntry {
  std::map<Stage, StageRecord> stages;

  const StageRecord& at(Stage s) const;
  bool done(Stage s) const { return at(s).status == StageStatus::done; }
};

struct RunManifest {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<std::string> movie_order;
  std::map<std::string, MovieEntry> movies;
  std::string created_at;
  std::string updated_at;

  json to_json() const;
  static RunManifest from_json(const json& j);
};

// Workspace layout:
//   <root>/blobs/<first2>/<hash>
//   <root>/runs/<run_id>/manifest.json
//   <root>/runs/<run_id>/<movie_id>/...
class RunStore {
 public:
  RunStore(fs::path root, std::string run_id);

  const fs::path& root() const { return root_; }
  const std::string& run_id() const { return run_id_; }
  fs::path run_dir() const { return root_ / "runs" / run_id_; }
  fs::path movie_dir(std::string_view movie_id) const { return run_dir() / std::string(movie_id); }
  fs::path manifest_path() const { return run_dir() / "manifest.json"; }

  std::string put_blob(std::string_view bytes);
  std::string get_blob(std::string_view hash) const;
  bool has_blob(std::string_view hash) const;
  fs::path blob_path(std::string_view hash) const;

  // Loads the manifest, or creates it. An existing manifest with a different
  // seed or config hash is a Config error (a different run under the same id).
  RunManifest open(std::uint64_t seed, std::string_view config_hash);

  RunManifest manifest() const;

  // Registers the movie in run order if not present yet.
  RunManifest add_movie(std::string_view movie_id);

  // Marks `stage` done with its artifacts. Throws StageOrderViolation when a
  // predecessor is not done, ContractViolation when an artifact hash is not in
  // the blob store.
  RunManifest checkpoint(std::string_view movie_id, Stage stage,
                         const std::map<std::string, std::string>& artifacts);

  RunManifest mark_failed(std::string_view movie_id, Stage stage, std::string_view detail);

  bool is_done(std::string_view movie_id, Stage stage) const;

 private:
  RunManifest load_locked() const;
  void save_locked(RunManifest& m);

  fs::path root_;
  std::string run_id_;
  mutable std::mutex mutex_;
};

std::string utc_timestamp();

}  // namespace storyreel
