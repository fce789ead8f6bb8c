#include <doctest.h>

#include "storyreel/config.hpp"
#include "storyreel/errors.hpp"
#include "storyreel/pipeline.hpp"
#include "test_support.hpp"

using namespace storyreel;
namespace st = storyreel::testing;

namespace {

std::string config_error(const std::string& yaml, const std::filesystem::path& base = "/tmp") {
  try {
    auto c = PipelineConfig::parse(yaml, base);
    c.validate();
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Config);
    return e.what();
  }
  return "";
}

const std::string kBackends =
    "backends:\n"
    "  chat: {kind: http, endpoint: 'http://localhost:9000/chat', auth_env: KEY}\n"
    "  image: {kind: http, endpoint: 'http://localhost:9000/image'}\n";

}  // namespace

TEST_CASE("defaults and relative paths") {
  auto c = PipelineConfig::parse("seed: 42\n" + kBackends, "/base");
  CHECK(c.seed == 42u);
  CHECK(c.workspace == "/base/workspace");
  CHECK(c.templates == "/base/templates");
  CHECK(c.cache_dir == std::filesystem::path("/base/workspace/cache"));
  CHECK(c.expansion.total_frames() == 120);
  CHECK(c.qa.budget.total() == 125);
  CHECK(c.judge.endpoint == c.chat.endpoint);
  CHECK(c.judge.temperature == 0.0);
  CHECK(c.chat.temperature == doctest::Approx(0.7));
  CHECK(c.keyframes.width == 512);
  CHECK(c.style.reference_scenes == 5);
}

TEST_CASE("overrides") {
  auto c = PipelineConfig::parse("seed: 1\ncache: off\nallow_gaps: true\n" + kBackends +
                                     "expansion: {chapters: 2, threads_per_chapter: 2, frames_per_thread: 2}\n"
                                     "qa: {what: 10, temporal: 1, max_repair_attempts: 4}\n"
                                     "keyframes: {width: 256, height: 128, negative_prompt: blurry}\n"
                                     "genres: [drama, noir]\n",
                                 "/b");
  CHECK_FALSE(c.cache_dir.has_value());
  CHECK(c.allow_gaps);
  CHECK(c.expansion.total_frames() == 8);
  CHECK(c.qa.budget.plot_what == 10);
  CHECK(c.qa.max_repair_attempts == 4);
  CHECK(c.keyframes.negative_prompt == "blurry");
  CHECK(c.expansion.genres == std::vector<std::string>{"drama", "noir"});
}

TEST_CASE("config errors name the problem") {
  CHECK(config_error("seed: 1\nbogus: 2\n" + kBackends).find("unknown key 'bogus'") != std::string::npos);
  CHECK(config_error("seed: -4\n" + kBackends).find("seed") != std::string::npos);
  CHECK(config_error("seed: 1\n").find("backends") != std::string::npos);
  CHECK(config_error("seed: 1\nbackends:\n  chat: {kind: grpc}\n  image: {kind: mock, script: x}\n")
            .find("kind") != std::string::npos);
  CHECK(config_error("seed: [1\n").size() > 0);
  CHECK(config_error("seed: 1\nexpansion: {chapters: zero}\n" + kBackends).find("expansion.chapters") !=
        std::string::npos);
}

TEST_CASE("validation needs the filesystem") {
  st::TempDir tmp;
  auto path = st::write_pipeline_config(tmp.path(), st::demo_themes(), {}, 7);
  auto c = PipelineConfig::load(path);
  c.validate();
  CHECK(c.base_dir == std::filesystem::absolute(tmp.path()));

  auto missing_templates = c;
  missing_templates.templates = tmp / "nope";
  try {
    missing_templates.validate();
    FAIL("expected Config");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("template directory not found: " + (tmp / "nope").string()) != std::string::npos);
  }
  auto no_seed = c;
  no_seed.seed.reset();
  CHECK_THROWS_AS(no_seed.validate(), Error);
  auto bad_size = c;
  bad_size.keyframes.width = 100;
  CHECK_THROWS_AS(bad_size.validate(), Error);
  auto bad_cmd = c;
  bad_cmd.style.trainer = "command";
  bad_cmd.style.command = "python3 train.py";
  CHECK_THROWS_AS(bad_cmd.validate(), Error);
  std::filesystem::remove(tmp / "mocks" / "image.json");
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(PipelineConfig::load(tmp / "absent.yaml"), Error);
}

TEST_CASE("config hash follows output-shaping settings only") {
  st::TempDir tmp;
  auto c = PipelineConfig::load(st::write_pipeline_config(tmp.path(), st::demo_themes(), {}, 7));
  auto h = c.hash();
  auto moved = c;
  moved.workspace = "/elsewhere";
  moved.cache_dir.reset();
  moved.max_parallel_requests = 1;
  CHECK(moved.hash() == h);
  auto reshaped = c;
  reshaped.expansion.n_frames_per_thread = 3;
  CHECK(reshaped.hash() != h);
  auto budget = c;
  budget.qa.budget.temporal = 9;
  CHECK(budget.hash() != h);
  st::write_text(tmp / "mocks" / "chat.json", "[]");
  CHECK(PipelineConfig::load(tmp / "config.yaml").hash() != h);
}

TEST_CASE("single backend blocks") {
  st::TempDir tmp;
  st::write_text(tmp / "embed.yaml", "kind: mock\nscript: e.json\ndim: 16\n");
  auto b = load_backend_config(tmp / "embed.yaml", "embedding");
  CHECK(b.dim == 16);
  CHECK(b.script == tmp / "e.json");
  auto path = st::write_pipeline_config(tmp.path(), st::demo_themes(), {}, 7);
  CHECK(load_backend_config(path, "embedding").dim == 64);
  CHECK_THROWS_AS(load_backend_config(tmp / "none.yaml", "embedding"), Error);
}

TEST_CASE("theme files") {
  st::TempDir tmp;
  st::write_text(tmp / "t.txt", "# themes\n\ndrama | a tragic film\n crime|a heist caper \n");
  auto themes = read_themes(tmp / "t.txt", default_genres());
  REQUIRE(themes.size() == 2);
  CHECK(themes[1].genre_tag == "crime");
  CHECK(themes[1].phrase == "a heist caper");
  CHECK(read_themes(tmp / "t.txt", default_genres()).size() == 2);
  CHECK(format_themes(themes) == "drama | a tragic film\ncrime | a heist caper\n");
  st::write_text(tmp / "bad.txt", "telenovela | x\n");
  CHECK_THROWS_AS(read_themes(tmp / "bad.txt", default_genres()), Error);
  st::write_text(tmp / "bad2.txt", "no separator\n");
  CHECK_THROWS_AS(read_themes(tmp / "bad2.txt", default_genres()), Error);
}
