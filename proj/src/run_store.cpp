#include "storyreel/run_store.hpp"

#include <chrono>
#include <ctime>

#include "storyreel/errors.hpp"
#include "storyreel/hashing.hpp"

namespace storyreel {

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::plot: return "plot";
    case Stage::style: return "style";
    case Stage::frames: return "frames";
    case Stage::qa: return "qa";
    case Stage::package: return "package";
  }
  return "plot";
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : kAllStages)
    if (to_string(st) == s) return st;
  return std::nullopt;
}

std::string_view to_string(StageStatus s) {
  switch (s) {
    case StageStatus::pending: return "pending";
    case StageStatus::done: return "done";
    case StageStatus::failed: return "failed";
  }
  return "pending";
}

namespace {

StageStatus parse_status(const std::string& s) {
  if (s == "done") return StageStatus::done;
  if (s == "failed") return StageStatus::failed;
  if (s == "pending") return StageStatus::pending;
  throw Error(Errc::ParseFailed, "unknown stage status '" + s + "'");
}

}  // namespace

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const StageRecord& MovieEntry::at(Stage s) const {
  static const StageRecord kPending;
  auto it = stages.find(s);
  return it == stages.end() ? kPending : it->second;
}

json RunManifest::to_json() const {
  json movies_j = json::object();
  for (const auto& [id, entry] : movies) {
    json stages_j = json::object();
    for (Stage s : kAllStages) {
      const auto& rec = entry.at(s);
      json r{{"status", std::string(storyreel::to_string(rec.status))}, {"artifacts", rec.artifacts}};
      if (!rec.detail.empty()) r["detail"] = rec.detail;
      stages_j[std::string(storyreel::to_string(s))] = std::move(r);
    }
    movies_j[id] = json{{"stages", std::move(stages_j)}};
  }
  return json{{"run_id", run_id},         {"seed", seed},
              {"config_hash", config_hash}, {"movie_order", movie_order},
              {"movies", std::move(movies_j)}, {"created_at", created_at},
              {"updated_at", updated_at}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    j.at("run_id").get_to(m.run_id);
    j.at("seed").get_to(m.seed);
    j.at("config_hash").get_to(m.config_hash);
    j.at("movie_order").get_to(m.movie_order);
    j.at("created_at").get_to(m.created_at);
    j.at("updated_at").get_to(m.updated_at);
    for (const auto& [id, mj] : j.at("movies").items()) {
      MovieEntry entry;
      for (const auto& [sname, sj] : mj.at("stages").items()) {
        auto stage = parse_stage(sname);
        if (!stage) throw Error(Errc::ParseFailed, "unknown stage '" + sname + "' in manifest");
        StageRecord rec;
        rec.status = parse_status(sj.at("status").get<std::string>());
        sj.at("artifacts").get_to(rec.artifacts);
        if (sj.contains("detail")) sj.at("detail").get_to(rec.detail);
        entry.stages[*stage] = std::move(rec);
      }
      m.movies[id] = std::move(entry);
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(Errc::ParseFailed, std::string("malformed run manifest: ") + e.what());
  }
}

RunStore::RunStore(fs::path root, std::string run_id) : root_(std::move(root)), run_id_(std::move(run_id)) {
  if (run_id_.empty() || run_id_.find('/') != std::string::npos)
    throw Error(Errc::Config, "invalid run id '" + run_id_ + "'");
}

fs::path RunStore::blob_path(std::string_view hash) const {
  std::string h(hash);
  return root_ / "blobs" / h.substr(0, 2) / h;
}

std::string RunStore::put_blob(std::string_view bytes) {
  std::string hash = sha256_hex(bytes);
  fs::path p = blob_path(hash);
  if (!fs::exists(p)) atomic_write(p, bytes);
  return hash;
}

bool RunStore::has_blob(std::string_view hash) const { return hash.size() >= 2 && fs::exists(blob_path(hash)); }

std::string RunStore::get_blob(std::string_view hash) const {
  if (!has_blob(hash)) throw Error(Errc::NotFound, "blob " + std::string(hash));
  return read_file(blob_path(hash));
}

RunManifest RunStore::load_locked() const {
  if (!fs::exists(manifest_path())) throw Error(Errc::NotFound, "no manifest at " + manifest_path().string());
  return RunManifest::from_json(read_json(manifest_path()));
}

void RunStore::save_locked(RunManifest& m) {
  m.updated_at = utc_timestamp();
  write_json(manifest_path(), m.to_json());
}

RunManifest RunStore::open(std::uint64_t seed, std::string_view config_hash) {
  std::lock_guard lock(mutex_);
  if (fs::exists(manifest_path())) {
    RunManifest m = load_locked();
    if (m.seed != seed || m.config_hash != config_hash) {
      throw Error(Errc::Config, "run '" + run_id_ +
                                    "' already exists with a different seed or config; use a new run id");
    }
    return m;
  }
  RunManifest m;
  m.run_id = run_id_;
  m.seed = seed;
  m.config_hash = std::string(config_hash);
  m.created_at = utc_timestamp();
  save_locked(m);
  return m;
}

RunManifest RunStore::manifest() const {
  std::lock_guard lock(mutex_);
  return load_locked();
}

RunManifest RunStore::add_movie(std::string_view movie_id) {
  std::lock_guard lock(mutex_);
  RunManifest m = load_locked();
  std::string id(movie_id);
  if (!m.movies.contains(id)) {
    m.movies[id] = MovieEntry{};
    m.movie_order.push_back(id);
    save_locked(m);
  }
  return m;
}

RunManifest RunStore::checkpoint(std::string_view movie_id, Stage stage,
                                 const std::map<std::string, std::string>& artifacts) {
  std::lock_guard lock(mutex_);
  RunManifest m = load_locked();
  std::string id(movie_id);
  auto it = m.movies.find(id);
  if (it == m.movies.end()) throw Error(Errc::NotFound, "movie " + id + " not in run manifest");
  for (Stage s : kAllStages) {
    if (s == stage) break;
    if (!it->second.done(s)) {
      throw Error(Errc::StageOrderViolation, "cannot complete stage '" + std::string(to_string(stage)) +
                                                 "' of " + id + " before '" + std::string(to_string(s)) + "'");
    }
  }
  for (const auto& [name, hash] : artifacts) {
    if (!has_blob(hash))
      throw Error(Errc::ContractViolation, "artifact '" + name + "' hash " + hash + " not in blob store");
  }
  StageRecord rec;
  rec.status = StageStatus::done;
  rec.artifacts = artifacts;
  it->second.stages[stage] = std::move(rec);
  save_locked(m);
  return m;
}

RunManifest RunStore::mark_failed(std::string_view movie_id, Stage stage, std::string_view detail) {
  std::lock_guard lock(mutex_);
  RunManifest m = load_locked();
  std::string id(movie_id);
  auto it = m.movies.find(id);
  if (it == m.movies.end()) throw Error(Errc::NotFound, "movie " + id + " not in run manifest");
  StageRecord rec;
  rec.status = StageStatus::failed;
  rec.detail = std::string(detail);
  it->second.stages[stage] = std::move(rec);
  save_locked(m);
  return m;
}

bool RunStore::is_done(std::string_view movie_id, Stage stage) const {
  std::lock_guard lock(mutex_);
  if (!fs::exists(manifest_path())) return false;
  RunManifest m = load_locked();
  auto it = m.movies.find(std::string(movie_id));
  return it != m.movies.end() && it->second.done(stage);
}

}  // namespace storyreel
