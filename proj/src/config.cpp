#include "storyreel/config.hpp"

#include <set>

#include <yaml-cpp/yaml.h>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/prompt_template.hpp"

namespace storyreel {

namespace fs = std::filesystem;

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw Error(Errc::Config, where + " must be a mapping");
  for (const auto& kv : node) {
    std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw Error(Errc::Config, "unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  if (!node[key]) return;
  try {
    out = node[key].as<T>();
  } catch (const YAML::Exception&) {
    throw Error(Errc::Config, where + "." + key + " has the wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

BackendConfig read_backend(const YAML::Node& node, const std::string& name, const fs::path& base,
                           double default_temperature) {
  BackendConfig cfg;
  cfg.temperature = default_temperature;
  if (!node) throw Error(Errc::Config, "missing backends." + name);
  const std::string where = "backends." + name;
  check_keys(node, where,
             {"kind", "endpoint", "auth_env", "model", "retry", "rate_limit", "script", "temperature", "max_tokens",
              "dim", "max_side"});
  std::string kind = "mock";
  read(node, "kind", kind, where);
  if (kind == "mock") {
    cfg.kind = BackendConfig::Kind::mock;
  } else if (kind == "http") {
    cfg.kind = BackendConfig::Kind::http;
  } else {
    throw Error(Errc::Config, where + ".kind must be 'mock' or 'http', got '" + kind + "'");
  }
  read(node, "endpoint", cfg.endpoint, where);
  read(node, "auth_env", cfg.auth_env, where);
  read(node, "model", cfg.model, where);
  read(node, "rate_limit", cfg.rate_limit, where);
  read(node, "temperature", cfg.temperature, where);
  read(node, "max_tokens", cfg.max_tokens, where);
  read(node, "dim", cfg.dim, where);
  read(node, "max_side", cfg.max_side, where);
  if (node["script"]) cfg.script = resolve(base, node["script"].as<std::string>());
  if (const auto r = node["retry"]) {
    check_keys(r, where + ".retry", {"max_attempts", "backoff_seconds"});
    read(r, "max_attempts", cfg.retry.max_attempts, where + ".retry");
    read(r, "backoff_seconds", cfg.retry.backoff_seconds, where + ".retry");
  }
  return cfg;
}

YAML::Node load_yaml(const std::string& text, const std::string& what) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::Config, what + ": " + e.what());
  }
}

std::string file_digest(const fs::path& p) { return fs::exists(p) ? sha256_hex(read_file(p)) : std::string("-"); }

json backend_identity(const BackendConfig& b) {
  return json{{"kind", b.kind == BackendConfig::Kind::mock ? "mock" : "http"},
              {"endpoint", b.endpoint},
              {"model", b.model},
              {"temperature", b.temperature},
              {"max_tokens", b.max_tokens},
              {"dim", b.dim},
              {"script", b.script.empty() ? std::string("-") : file_digest(b.script)}};
}

}  // namespace

PipelineConfig PipelineConfig::parse(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root = load_yaml(yaml_text, "config");
  if (!root.IsMap()) throw Error(Errc::Config, "config must be a mapping");
  check_keys(root, "config",
             {"seed", "run_id", "workspace", "templates", "cache", "max_parallel_requests", "allow_gaps", "genres",
              "backends", "expansion", "qa", "keyframes", "style"});
  PipelineConfig c;
  c.base_dir = base_dir;
  if (root["seed"]) {
    try {
      c.seed = root["seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw Error(Errc::Config, "seed must be a non-negative integer");
    }
  }
  read(root, "run_id", c.run_id, "config");
  std::string workspace = "workspace", templates = "templates";
  read(root, "workspace", workspace, "config");
  read(root, "templates", templates, "config");
  c.workspace = resolve(base_dir, workspace);
  c.templates = resolve(base_dir, templates);
  if (const auto cache = root["cache"]) {
    if (cache.IsScalar() && (cache.as<std::string>() == "false" || cache.as<std::string>() == "off")) {
      c.cache_dir.reset();
    } else {
      c.cache_dir = resolve(base_dir, cache.as<std::string>());
    }
  } else {
    c.cache_dir = c.workspace / "cache";
  }
  read(root, "max_parallel_requests", c.max_parallel_requests, "config");
  read(root, "allow_gaps", c.allow_gaps, "config");
  if (root["genres"]) {
    read(root, "genres", c.expansion.genres, "config");
  }

  const YAML::Node backends = root["backends"];
  if (!backends) throw Error(Errc::Config, "missing 'backends' section");
  check_keys(backends, "backends", {"chat", "image", "embedding", "judge"});
  c.chat = read_backend(backends["chat"], "chat", base_dir, 0.7);
  c.image = read_backend(backends["image"], "image", base_dir, 0.7);
  c.embedding = backends["embedding"] ? read_backend(backends["embedding"], "embedding", base_dir, 0.0) : BackendConfig{};
  c.judge = backends["judge"] ? read_backend(backends["judge"], "judge", base_dir, 0.0) : c.chat;
  if (!backends["judge"]) c.judge.temperature = 0.0;

  if (const auto e = root["expansion"]) {
    check_keys(e, "expansion",
               {"chapters", "threads_per_chapter", "frames_per_thread", "max_repair_attempts", "max_total_frames",
                "min_characters", "max_characters", "overview_max_chars", "summary_max_chars", "recap_max_chars",
                "prompt_char_cap"});
    auto& x = c.expansion;
    read(e, "chapters", x.n_chapters, "expansion");
    read(e, "threads_per_chapter", x.n_threads_per_chapter, "expansion");
    read(e, "frames_per_thread", x.n_frames_per_thread, "expansion");
    read(e, "max_repair_attempts", x.max_repair_attempts, "expansion");
    read(e, "max_total_frames", x.max_total_frames, "expansion");
    read(e, "min_characters", x.min_characters, "expansion");
    read(e, "max_characters", x.max_characters, "expansion");
    read(e, "overview_max_chars", x.overview_max_chars, "expansion");
    read(e, "summary_max_chars", x.summary_max_chars, "expansion");
    read(e, "recap_max_chars", x.recap_max_chars, "expansion");
    read(e, "prompt_char_cap", x.prompt_char_cap, "expansion");
  }
  c.qa.max_repair_attempts = c.expansion.max_repair_attempts;
  if (const auto q = root["qa"]) {
    check_keys(q, "qa", {"overview", "what", "where", "why", "temporal", "max_repair_attempts", "events_per_question"});
    read(q, "overview", c.qa.budget.overview, "qa");
    read(q, "what", c.qa.budget.plot_what, "qa");
    read(q, "where", c.qa.budget.plot_where, "qa");
    read(q, "why", c.qa.budget.plot_why, "qa");
    read(q, "temporal", c.qa.budget.temporal, "qa");
    read(q, "max_repair_attempts", c.qa.max_repair_attempts, "qa");
    read(q, "events_per_question", c.qa.events_per_question, "qa");
  }
  if (const auto k = root["keyframes"]) {
    check_keys(k, "keyframes", {"width", "height", "negative_prompt"});
    read(k, "width", c.keyframes.width, "keyframes");
    read(k, "height", c.keyframes.height, "keyframes");
    if (k["negative_prompt"]) c.keyframes.negative_prompt = k["negative_prompt"].as<std::string>();
  }
  if (const auto s = root["style"]) {
    check_keys(s, "style", {"reference_scenes", "trainer", "command"});
    read(s, "reference_scenes", c.style.reference_scenes, "style");
    read(s, "trainer", c.style.trainer, "style");
    read(s, "command", c.style.command, "style");
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  if (!fs::exists(file)) throw Error(Errc::Config, "config file not found: " + file.string());
  PipelineConfig c = parse(read_file(file), fs::absolute(file).parent_path());
  c.source = file;
  return c;
}

void PipelineConfig::validate() const {
  if (!seed) throw Error(Errc::Config, "no seed: set 'seed' in the config or pass --seed");
  if (!fs::is_directory(templates)) throw Error(Errc::Config, "template directory not found: " + templates.string());
  chat.validate("chat");
  image.validate("image");
  judge.validate("judge");
  if (embedding.kind == BackendConfig::Kind::http || !embedding.script.empty()) embedding.validate("embedding");
  for (const auto* b : {&chat, &image, &judge, &embedding})
    if (b->kind == BackendConfig::Kind::mock && !b->script.empty() && !fs::exists(b->script))
      throw Error(Errc::Config, "mock script not found: " + b->script.string());
  expansion.validate();
  qa.budget.validate();
  if (max_parallel_requests < 1) throw Error(Errc::Config, "max_parallel_requests must be >= 1");
  if (keyframes.width <= 0 || keyframes.height <= 0 || keyframes.width % 8 || keyframes.height % 8)
    throw Error(Errc::Config, "keyframe width and height must be positive multiples of 8");
  if (style.reference_scenes < 1) throw Error(Errc::Config, "style.reference_scenes must be >= 1");
  if (style.trainer != "mock" && style.trainer != "command")
    throw Error(Errc::Config, "style.trainer must be 'mock' or 'command'");
  if (style.trainer == "command" && style.command.find("{workdir}") == std::string::npos)
    throw Error(Errc::Config, "style.command must contain {workdir}");
}

std::string PipelineConfig::hash() const {
  json templates_digest = json::object();
  if (fs::is_directory(templates)) {
    for (const auto& [id, vars] : TemplateSet::catalog()) templates_digest[id] = file_digest(templates / (id + ".txt"));
  }
  json j{{"chat", backend_identity(chat)},
         {"image", backend_identity(image)},
         {"expansion",
          {{"shape", {expansion.n_chapters, expansion.n_threads_per_chapter, expansion.n_frames_per_thread}},
           {"repairs", expansion.max_repair_attempts},
           {"characters", {expansion.min_characters, expansion.max_characters}},
           {"clips",
            {expansion.overview_max_chars, expansion.summary_max_chars, expansion.recap_max_chars,
             expansion.prompt_char_cap}},
           {"genres", expansion.genres}}},
         {"qa",
          {{"budget",
            {qa.budget.overview, qa.budget.plot_what, qa.budget.plot_where, qa.budget.plot_why, qa.budget.temporal}},
           {"repairs", qa.max_repair_attempts},
           {"events", qa.events_per_question}}},
         {"keyframes",
          {{"size", {keyframes.width, keyframes.height}},
           {"negative", keyframes.negative_prompt ? json(*keyframes.negative_prompt) : json(nullptr)}}},
         {"style", {{"scenes", style.reference_scenes}, {"trainer", style.trainer}, {"command", style.command}}},
         {"templates", templates_digest}};
  return sha256_hex(j.dump());
}

BackendConfig load_backend_config(const fs::path& file, const std::string& name) {
  if (!fs::exists(file)) throw Error(Errc::Config, name + " backend config not found: " + file.string());
  YAML::Node root = load_yaml(read_file(file), file.string());
  // Either a bare backend block or a full pipeline config.
  if (root["backends"] && root["backends"][name])
    return read_backend(root["backends"][name], name, fs::absolute(file).parent_path(), 0.0);
  return read_backend(root, name, fs::absolute(file).parent_path(), 0.0);
}

}  // namespace storyreel
