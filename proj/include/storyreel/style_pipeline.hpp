#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "storyreel/gateway.hpp"
#include "storyreel/plot_model.hpp"
#include "storyreel/run_store.hpp"

namespace storyreel {

enum class JobStatus { pending, running, done, failed };
std::string_view to_string(JobStatus s);

struct TrainingOutput {
  std::string embedding_artifact;
  std::string trigger;
  long long steps = 0;
  double final_loss = 0.0;
};

struct StyleTrainingJob {
  std::string job_id;
  StyleSpec style;
  std::filesystem::path workdir;
  JobStatus status = JobStatus::pending;
  std::optional<TrainingOutput> output;
};

// Runs a training worker over a prepared workdir:
//   in:  style.json {style_name, description, trigger}, refs/NNN.png
//   out: out/embedding.bin, out/meta.json {trigger, steps, final_loss};
//        exit 0 on success, nonzero plus out/error.log on failure.
class StyleTrainer {
 public:
  virtual ~StyleTrainer() = default;
  virtual int run(const std::filesystem::path& workdir) = 0;
};

// In-process stand-in: embedding.bin is 768 float32 values expanded from
// sha256(description); meta reports steps 0 and final_loss 0.
class MockStyleTrainer final : public StyleTrainer {
 public:
  int run(const std::filesystem::path& workdir) override;
};

// Launches an external worker. Every "{workdir}" in the command template is
// replaced by the quoted absolute workdir path.
class CommandStyleTrainer final : public StyleTrainer {
 public:
  explicit CommandStyleTrainer(std::string command_template) : command_(std::move(command_template)) {}
  int run(const std::filesystem::path& workdir) override;

 private:
  std::string command_;
};

struct RegistryEntry {
  std::string embedding_artifact;
  std::string source_movie_id;
  std::string created_at;
};

// trigger -> entry, persisted as JSON; every mutation goes through one lock.
class StyleRegistry {
 public:
  explicit StyleRegistry(std::filesystem::path file);

  // "<slug>", or "<slug-2>", "<slug-3>", ... when taken by another movie.
  // A trigger already owned by `movie_id` is returned as is.
  std::string next_trigger(const std::string& style_name, const std::string& movie_id) const;

  // Throws ContractViolation when the trigger belongs to a different movie.
  void register_token(const std::string& trigger, const std::string& artifact, const std::string& movie_id);

  std::optional<RegistryEntry> lookup(const std::string& trigger) const;
  std::optional<std::string> trigger_for_movie(const std::string& movie_id) const;
  std::map<std::string, RegistryEntry> entries() const;

 private:
  std::map<std::string, RegistryEntry> load_locked() const;

  std::filesystem::path file_;
  mutable std::mutex mutex_;
};

struct SceneSettings {
  int width = 512;
  int height = 512;
  std::optional<std::string> negative_prompt;
};

// Generates n reference scenes from "{description}, scene {i}" with seeds
// seed+i, stores them as blobs and records their hashes on `style`.
std::vector<std::string> generate_reference_scenes(ImageClient& images, RunStore& store, StyleSpec& style, int n,
                                                   std::int64_t seed, const SceneSettings& settings = {});

// Prepares the training workdir, runs the trainer, stores the embedding as a
// blob, registers the trigger and attaches the token to `style`.
StyleToken immobilize_style(StyleSpec& style, const std::string& movie_id, StyleTrainer& trainer,
                            StyleRegistry& registry, RunStore& store, const std::filesystem::path& workdir);

}  // namespace storyreel
