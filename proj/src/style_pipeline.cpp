#include "storyreel/style_pipeline.hpp"

#include <cstdlib>
#include <cstring>

#include <sys/wait.h>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/structured_chat.hpp"

namespace storyreel {

namespace fs = std::filesystem;

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::pending: return "pending";
    case JobStatus::running: return "running";
    case JobStatus::done: return "done";
    case JobStatus::failed: return "failed";
  }
  return "pending";
}

namespace {

std::string ref_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu.png", i);
  return buf;
}

void save_job(const StyleTrainingJob& job) {
  json j{{"job_id", job.job_id}, {"status", std::string(to_string(job.status))}, {"style_name", job.style.style_name}};
  if (job.output) {
    j["output"] = {{"embedding_artifact", job.output->embedding_artifact},
                   {"trigger", job.output->trigger},
                   {"steps", job.output->steps},
                   {"final_loss", job.output->final_loss}};
  }
  write_json(job.workdir / "job.json", j);
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

}  // namespace

int MockStyleTrainer::run(const fs::path& workdir) {
  fs::create_directories(workdir / "out");
  json style = read_json(workdir / "style.json");
  bool has_refs = fs::is_directory(workdir / "refs") && !fs::is_empty(workdir / "refs");
  if (!has_refs) {
    atomic_write(workdir / "out" / "error.log", "no reference images in refs/\n");
    return 1;
  }
  std::string description = style.at("description").get<std::string>();
  std::string bytes;
  bytes.reserve(768 * 4);
  std::vector<std::uint8_t> block = sha256_raw("mock-embedding:" + description);
  for (std::uint32_t i = 0; bytes.size() < 768 * 4; ++i) {
    std::string material(block.begin(), block.end());
    material.append(reinterpret_cast<const char*>(&i), sizeof i);
    auto d = sha256_raw(material);
    for (std::size_t k = 0; k + 4 <= d.size() && bytes.size() < 768 * 4; k += 4) {
      std::uint32_t u;
      std::memcpy(&u, d.data() + k, 4);
      float f = static_cast<float>(static_cast<double>(u) / 4294967296.0 - 0.5) * 0.02f;
      bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
  atomic_write(workdir / "out" / "embedding.bin", bytes);
  write_json(workdir / "out" / "meta.json",
             json{{"trigger", style.at("trigger")}, {"steps", 0}, {"final_loss", 0.0}});
  return 0;
}

int CommandStyleTrainer::run(const fs::path& workdir) {
  std::string cmd = command_;
  const std::string needle = "{workdir}";
  std::string quoted = shell_quote(fs::absolute(workdir).string());
  for (auto pos = cmd.find(needle); pos != std::string::npos; pos = cmd.find(needle, pos + quoted.size()))
    cmd.replace(pos, needle.size(), quoted);
  int status = std::system(cmd.c_str());
  if (status == -1) return 127;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return 128;
}

StyleRegistry::StyleRegistry(fs::path file) : file_(std::move(file)) {}

std::map<std::string, RegistryEntry> StyleRegistry::load_locked() const {
  std::map<std::string, RegistryEntry> out;
  if (!fs::exists(file_)) return out;
  json j = read_json(file_);
  for (const auto& [trigger, e] : j.items()) {
    out[trigger] = {e.at("embedding_artifact").get<std::string>(), e.at("source_movie_id").get<std::string>(),
                    e.at("created_at").get<std::string>()};
  }
  return out;
}

std::string StyleRegistry::next_trigger(const std::string& style_name, const std::string& movie_id) const {
  std::lock_guard lock(mutex_);
  auto entries = load_locked();
  std::string slug = slugify(style_name);
  for (int k = 1;; ++k) {
    std::string trigger = k == 1 ? "<" + slug + ">" : "<" + slug + "-" + std::to_string(k) + ">";
    auto it = entries.find(trigger);
    if (it == entries.end() || it->second.source_movie_id == movie_id) return trigger;
  }
}

void StyleRegistry::register_token(const std::string& trigger, const std::string& artifact,
                                   const std::string& movie_id) {
  if (!is_valid_trigger(trigger)) throw Error(Errc::ContractViolation, "malformed trigger " + trigger);
  std::lock_guard lock(mutex_);
  auto entries = load_locked();
  auto it = entries.find(trigger);
  if (it != entries.end() && it->second.source_movie_id != movie_id)
    throw Error(Errc::ContractViolation, "trigger " + trigger + " already belongs to " + it->second.source_movie_id);
  if (it != entries.end() && it->second.embedding_artifact == artifact) return;
  entries[trigger] = {artifact, movie_id, utc_timestamp()};
  json j = json::object();
  for (const auto& [t, e] : entries)
    j[t] = {{"embedding_artifact", e.embedding_artifact}, {"source_movie_id", e.source_movie_id},
            {"created_at", e.created_at}};
  write_json(file_, j);
}

std::optional<RegistryEntry> StyleRegistry::lookup(const std::string& trigger) const {
  std::lock_guard lock(mutex_);
  auto entries = load_locked();
  auto it = entries.find(trigger);
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> StyleRegistry::trigger_for_movie(const std::string& movie_id) const {
  std::lock_guard lock(mutex_);
  for (const auto& [t, e] : load_locked())
    if (e.source_movie_id == movie_id) return t;
  return std::nullopt;
}

std::map<std::string, RegistryEntry> StyleRegistry::entries() const {
  std::lock_guard lock(mutex_);
  return load_locked();
}

std::vector<std::string> generate_reference_scenes(ImageClient& images, RunStore& store, StyleSpec& style, int n,
                                                   std::int64_t seed, const SceneSettings& settings) {
  if (style.description.empty()) throw Error(Errc::Validation, "style description is empty");
  if (n < 1) throw Error(Errc::Validation, "reference scene count must be >= 1");
  std::vector<std::string> hashes;
  for (int i = 0; i < n; ++i) {
    ImageRequest req;
    req.prompt = style.description + ", scene " + std::to_string(i);
    req.seed = seed + i;
    req.width = settings.width;
    req.height = settings.height;
    req.negative_prompt = settings.negative_prompt;
    GeneratedImage img = images.generate(req);
    hashes.push_back(store.put_blob(img.png));
  }
  style.reference_image_ids = hashes;
  return hashes;
}

StyleToken immobilize_style(StyleSpec& style, const std::string& movie_id, StyleTrainer& trainer,
                            StyleRegistry& registry, RunStore& store, const fs::path& workdir) {
  if (style.reference_image_ids.empty())
    throw Error(Errc::Validation, "style '" + style.style_name + "' has no reference images");

  StyleTrainingJob job;
  job.job_id = movie_id + "-" + slugify(style.style_name);
  job.style = style;
  job.workdir = workdir;

  const std::string trigger = registry.next_trigger(style.style_name, movie_id);
  fs::remove_all(workdir / "out");
  fs::remove_all(workdir / "refs");
  fs::create_directories(workdir / "refs");
  write_json(workdir / "style.json",
             json{{"style_name", style.style_name}, {"description", style.description}, {"trigger", trigger}});
  for (std::size_t i = 0; i < style.reference_image_ids.size(); ++i)
    atomic_write(workdir / "refs" / ref_name(i), store.get_blob(style.reference_image_ids[i]));

  job.status = JobStatus::running;
  save_job(job);
  int code = trainer.run(workdir);
  if (code != 0) {
    job.status = JobStatus::failed;
    save_job(job);
    fs::path log = workdir / "out" / "error.log";
    std::string detail = fs::exists(log) ? clip_text(read_file(log), 500) : "no out/error.log written";
    throw Error(Errc::StyleTrainingFailed,
                "worker exited with " + std::to_string(code) + " (" + log.string() + "): " + detail);
  }

  fs::path emb = workdir / "out" / "embedding.bin";
  fs::path meta_path = workdir / "out" / "meta.json";
  if (!fs::exists(emb) || !fs::exists(meta_path))
    throw Error(Errc::ContractViolation, "worker succeeded but out/embedding.bin or out/meta.json is missing");
  json meta = read_json(meta_path);
  if (!meta.is_object() || !meta.contains("trigger") || !meta["trigger"].is_string() || !meta.contains("steps") ||
      !meta["steps"].is_number_integer() || !meta.contains("final_loss") || !meta["final_loss"].is_number()) {
    throw Error(Errc::ContractViolation, "out/meta.json must hold {trigger, steps, final_loss}");
  }
  if (meta["trigger"].get<std::string>() != trigger)
    throw Error(Errc::ContractViolation, "worker reported trigger " + meta["trigger"].get<std::string>() +
                                             ", expected " + trigger);

  TrainingOutput out;
  out.embedding_artifact = store.put_blob(read_file(emb));
  out.trigger = trigger;
  out.steps = meta["steps"].get<long long>();
  out.final_loss = meta["final_loss"].get<double>();
  registry.register_token(trigger, out.embedding_artifact, movie_id);

  job.status = JobStatus::done;
  job.output = out;
  save_job(job);

  StyleToken token{trigger, out.embedding_artifact, style.style_name};
  style.token = token;
  return token;
}

}  // namespace storyreel
