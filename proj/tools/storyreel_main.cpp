#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "storyreel/config.hpp"
#include "storyreel/errors.hpp"
#include "storyreel/frame_metrics.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/judge_eval.hpp"
#include "storyreel/pipeline.hpp"
#include "storyreel/qa_dataset.hpp"
#include "storyreel/task_pool.hpp"

#ifndef STORYREEL_DEFAULT_TEMPLATES
#define STORYREEL_DEFAULT_TEMPLATES "templates"
#endif

using namespace storyreel;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kPartial = 2;

extern "C" void on_sigint(int) { request_stop(); }

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string run_id;
  bool no_cache = false;
  bool allow_gaps = false;
};

struct StageArgs {
  std::string themes;
  std::vector<std::string> movies;
};

PipelineConfig load_config(const Common& c) {
  if (c.config.empty()) throw Error(Errc::Config, "--config is required");
  PipelineConfig cfg = PipelineConfig::load(c.config);
  if (c.seed) cfg.seed = c.seed;
  if (!c.run_id.empty()) cfg.run_id = c.run_id;
  if (c.no_cache) cfg.cache_dir.reset();
  if (c.allow_gaps) cfg.allow_gaps = true;
  return cfg;
}

int report(const RunSummary& s, Stage last) {
  for (const auto& f : s.failures)
    std::cerr << "movie " << f.movie_id << ": stage " << to_string(f.stage) << " failed: " << f.error << "\n";
  std::cerr << s.movies.size() << " movie(s) through stage '" << to_string(last) << "', " << s.failures.size()
            << " failure(s)";
  if (s.frame_failures) std::cerr << ", " << s.frame_failures << " missing frame(s)";
  std::cerr << "\n";
  return s.complete() ? kOk : kPartial;
}

int run_stages(const Common& c, const StageArgs& a, Stage last) {
  PipelineConfig cfg = load_config(c);
  Pipeline pipeline(std::move(cfg));
  std::vector<std::string> ids = a.movies;
  if (!a.themes.empty()) {
    auto added = pipeline.add_themes(read_themes(a.themes, pipeline.config().expansion.genres));
    if (ids.empty()) ids = added;
  }
  if (ids.empty() && pipeline.store().manifest().movie_order.empty())
    throw Error(Errc::Config, "no movies registered in run " + pipeline.run_id() + "; pass --themes");
  RunSummary s = pipeline.run(last, ids);
  std::cerr << "run " << pipeline.run_id() << " at " << pipeline.store().run_dir().string() << "\n";
  return report(s, last);
}

bool usage_error(Errc code) {
  switch (code) {
    case Errc::Config:
    case Errc::NotFound:
    case Errc::ParseFailed:
    case Errc::Validation:
    case Errc::NoOverlap:
    case Errc::DuplicateId:
      return true;
    default:
      return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_sigint);

  CLI::App app{"storyreel: movie-level synthetic video instruction data pipeline"};
  app.require_subcommand(1);
  Common common;
  StageArgs stage_args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Pipeline config (YAML)")->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Run seed (overrides the config)");
    sub->add_option("--run-id", common.run_id, "Run id (default: seed-<seed>)");
    sub->add_flag("--no-cache", common.no_cache, "Bypass the response cache");
  };
  auto add_stage = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->add_option("--themes", stage_args.themes, "Themes file, one 'genre | phrase' per line")
        ->check(CLI::ExistingFile);
    sub->add_option("--movie", stage_args.movies, "Limit to these movie ids");
    sub->add_flag("--allow-gaps", common.allow_gaps, "Package movies with failed frames");
    return sub;
  };

  // themes
  CLI::App* themes = app.add_subcommand("themes", "Propose theme phrases with the chat backend, or check a themes file");
  add_common(themes);
  int theme_count = 3;
  std::string themes_from, themes_out;
  themes->add_option("--count", theme_count, "Number of themes to propose")->check(CLI::PositiveNumber);
  themes->add_option("--from", themes_from, "Validate and print an existing themes file")->check(CLI::ExistingFile);
  themes->add_option("--out", themes_out, "Write the themes file here instead of stdout");

  CLI::App* plot = add_stage("plot", "Expand themes into plots");
  CLI::App* style = add_stage("style", "Generate reference scenes and train style tokens");
  CLI::App* frames = add_stage("frames", "Render keyframes");
  CLI::App* qa = add_stage("qa", "Generate QA pairs");
  CLI::App* package = add_stage("package", "Package movies and rebuild the dataset");
  CLI::App* generate = add_stage("generate", "Run every stage");

  // stats
  CLI::App* stats = app.add_subcommand("stats", "Summarize an instructions.jsonl dataset");
  std::string dataset;
  bool stats_json = false;
  stats->add_option("--dataset", dataset, "Path to instructions.jsonl")->required();
  stats->add_flag("--json", stats_json, "Print JSON instead of a table");

  // metrics
  CLI::App* metrics = app.add_subcommand("metrics", "Keyframe consistency, alignment and BRISQUE");
  std::string m_frames, m_captions, m_embed, m_svr, m_ranges, m_out, m_movie;
  metrics->add_option("--frames", m_frames, "Directory of NNNNN.png keyframes")->required();
  metrics->add_option("--captions", m_captions, "frames.json or {file: caption} JSON")->check(CLI::ExistingFile);
  metrics->add_option("--embed-backend", m_embed, "Embedding backend config (YAML)")->required()->check(CLI::ExistingFile);
  metrics->add_option("--svr-model", m_svr, "BRISQUE SVR model file")->check(CLI::ExistingFile);
  metrics->add_option("--svr-ranges", m_ranges, "Feature ranges file (default: <svr-model>.ranges)");
  metrics->add_option("--out", m_out, "Report path")->required();
  metrics->add_option("--movie-id", m_movie, "Movie id for the report (default: parent directory name)");

  // eval
  CLI::App* eval = app.add_subcommand("eval", "Pairwise judge evaluation of two prediction files");
  std::string e_bench, e_a, e_b, e_judge, e_templates = STORYREEL_DEFAULT_TEMPLATES, e_out = ".";
  std::uint64_t e_seed = 0;
  int e_parallel = 4, e_retries = 2;
  eval->add_option("--benchmark", e_bench, "Benchmark JSONL {item_id, aspect, question, ground_truth}")->required();
  eval->add_option("--pred-a", e_a, "Model A predictions JSONL {item_id, answer}")->required();
  eval->add_option("--pred-b", e_b, "Model B predictions JSONL {item_id, answer}")->required();
  eval->add_option("--judge-backend", e_judge, "Judge backend config (YAML)")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", e_seed, "Seed for the answer slot order")->required();
  eval->add_option("--templates", e_templates, "Prompt template directory");
  eval->add_option("--out-dir", e_out, "Where eval_report.json and verdicts.jsonl go");
  eval->add_option("--max-parallel", e_parallel, "Concurrent judge requests")->check(CLI::PositiveNumber);
  eval->add_option("--max-retries", e_retries, "Re-prompts per item before it counts as invalid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*themes) {
      std::vector<MovieTheme> list;
      if (!themes_from.empty()) {
        PipelineConfig cfg = common.config.empty() ? PipelineConfig{} : load_config(common);
        list = read_themes(themes_from, cfg.expansion.genres);
      } else {
        Pipeline pipeline(load_config(common));
        list = pipeline.propose_themes(theme_count);
      }
      std::string text = format_themes(list);
      if (themes_out.empty()) {
        std::cout << text;
      } else {
        atomic_write(themes_out, text);
        std::cerr << list.size() << " theme(s) written to " << themes_out << "\n";
      }
      return kOk;
    }
    if (*plot) return run_stages(common, stage_args, Stage::plot);
    if (*style) return run_stages(common, stage_args, Stage::style);
    if (*frames) return run_stages(common, stage_args, Stage::frames);
    if (*qa) return run_stages(common, stage_args, Stage::qa);
    if (*package) return run_stages(common, stage_args, Stage::package);
    if (*generate) return run_stages(common, stage_args, Stage::package);

    if (*stats) {
      DatasetStats s = compute_stats(dataset);
      if (stats_json) {
        std::cout << to_json(s).dump(2) << "\n";
      } else {
        std::cout << format_stats(s);
      }
      return kOk;
    }

    if (*metrics) {
      BackendConfig bc = load_backend_config(m_embed, "embedding");
      if (bc.kind == BackendConfig::Kind::http || !bc.script.empty()) bc.validate("embedding");
      EmbeddingClient embedder(make_embedding_backend(bc, fs::path(m_embed).parent_path()), bc.dim,
                               ClientOptions{bc.retry, bc.rate_limit, nullptr, nullptr});
      std::optional<SvrModel> model;
      if (!m_svr.empty()) model = SvrModel::load(m_svr, m_ranges.empty() ? m_svr + ".ranges" : m_ranges);
      std::map<std::string, std::string> captions;
      if (!m_captions.empty()) captions = load_captions(m_captions);
      std::string movie = m_movie.empty() ? fs::absolute(m_frames).lexically_normal().parent_path().filename().string()
                                          : m_movie;
      auto files = list_frames(m_frames);
      if (files.empty()) throw Error(Errc::Config, "no .png frames in " + m_frames);
      MetricReport r = compute_metrics(movie, files, captions, embedder, model ? &*model : nullptr);
      write_json(m_out, r.to_json());
      std::cerr << "metrics for " << files.size() << " frame(s) written to " << m_out << "\n";
      return kOk;
    }

    if (*eval) {
      BackendConfig bc = load_backend_config(e_judge, "judge");
      bc.validate("judge");
      ChatClient client(make_chat_backend(bc, fs::path(e_judge).parent_path()),
                        ClientOptions{bc.retry, bc.rate_limit, nullptr, nullptr});
      TemplateSet templates = TemplateSet::load(e_templates);
      ChatSettings settings;
      settings.model = bc.model;
      settings.temperature = bc.temperature;
      settings.max_tokens = bc.max_tokens;
      settings.seed = static_cast<std::int64_t>(e_seed);
      StructuredChat chat(client, templates, settings);
      JoinResult join = build_eval_items(e_bench, e_a, e_b);
      for (const auto& w : join.warnings) std::cerr << "warning: " << w << "\n";
      EvalRun run = run_eval(join.items, chat, e_seed, e_parallel, e_retries);
      fs::create_directories(e_out);
      write_json(fs::path(e_out) / "eval_report.json", run.result.to_json());
      atomic_write(fs::path(e_out) / "verdicts.jsonl", verdict_log(join.items, run));
      std::cout << run.result.to_json().dump(2) << "\n";
      return run.invalid.empty() ? kOk : kPartial;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == Errc::Interrupted) return kPartial;
    return usage_error(e.code()) ? kUsage : kPartial;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kPartial;
  }
  return kUsage;
}
