#include <doctest.h>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/mock_backends.hpp"
#include "storyreel/story_expansion.hpp"
#include "test_support.hpp"

using namespace storyreel;
namespace st = storyreel::testing;

namespace {

std::vector<ScriptEntry> to_entries(const json& script) {
  std::vector<ScriptEntry> out;
  for (const auto& e : script) out.push_back({e["match"].get<std::vector<std::string>>(), e["response"]});
  return out;
}

struct Harness {
  explicit Harness(std::vector<ScriptEntry> script, ExpansionConfig c = {})
      : backend(std::make_shared<MockChatBackend>(std::move(script))),
        client(backend, {{1, 0}, 0, nullptr, nullptr}),
        templates(TemplateSet::load(st::templates_dir())),
        cfg(std::move(c)) {}

  StoryExpander expander(const std::filesystem::path& dir = {}) { return StoryExpander(client, templates, cfg, {}, dir); }

  std::shared_ptr<MockChatBackend> backend;
  ChatClient client;
  TemplateSet templates;
  ExpansionConfig cfg;
};

ExpansionConfig shape_cfg(int c, int t, int f) {
  ExpansionConfig cfg;
  cfg.n_chapters = c;
  cfg.n_threads_per_chapter = t;
  cfg.n_frames_per_thread = f;
  return cfg;
}

const MovieTheme kTheme{"a tragic film about a failing shipyard", "drama"};

struct Stop {};

}  // namespace

TEST_CASE("build_plot yields a valid plot of the configured shape") {
  st::ScriptShape shape{2, 2, 3, {}};
  Harness h(to_entries(st::movie_script(kTheme, 0, shape)), shape_cfg(2, 2, 3));
  auto plot = h.expander().build_plot(kTheme, 42);
  CHECK(validate_plot(plot).empty());
  CHECK(plot.movie_id == make_movie_id(kTheme.phrase, 42));
  CHECK(plot.frame_count() == 12);
  CHECK(plot.characters.size() == 4);
  CHECK(plot.style.style_name == "Gothic Noir");
  CHECK_FALSE(plot.style.token.has_value());
  // 1 overview + style + characters + chapters + 2 threads + 4 frames
  CHECK(h.backend->calls() == 10);
  auto frames = flatten_frames(plot);
  CHECK(frames[1].mentioned_characters == std::vector<std::string>{"Marcus", "Anna"});
  CHECK(frames[2].mentioned_characters == std::vector<std::string>{"Ann"});
  CHECK(frames[3].mentioned_characters.empty());
}

TEST_CASE("expansion prompts stay bounded as the movie grows") {
  auto longest = [](int chapters) {
    st::ScriptShape shape{chapters, 2, 2, {}};
    Harness h(to_entries(st::movie_script(kTheme, 0, shape)), shape_cfg(chapters, 2, 2));
    auto ex = h.expander();
    ex.build_plot(kTheme, 1);
    std::size_t m = 0;
    for (const auto& p : ex.rendered_prompts()) m = std::max(m, p.size());
    return std::pair{m, ex.rendered_prompts().size()};
  };
  auto [small, n_small] = longest(2);
  auto [large, n_large] = longest(12);
  CHECK(n_large > n_small);
  CHECK(large <= small + 16);
  CHECK(large <= ExpansionConfig{}.prompt_char_cap);
}

TEST_CASE("wrong counts are repaired") {
  json script = json::array();
  json two = {{"chapters", {{{"title", "A"}, {"summary", "first"}}, {{"title", "B"}, {"summary", "second"}}}}};
  json one = {{"chapters", {{{"title", "A"}, {"summary", "first"}}}}};
  script.push_back({{"match", {"[repair]", "expected exactly 2 chapters, got 1"}}, {"response", st::fenced(two)}});
  script.push_back({{"match", {"[stage:chapters]"}}, {"response", st::fenced(one)}});
  Harness h(to_entries(script), shape_cfg(2, 1, 1));
  MoviePlot plot;
  plot.theme = kTheme;
  plot.overview = "An overview.";
  auto chapters = h.expander().expand_chapters(plot);
  REQUIRE(chapters.size() == 2);
  CHECK(chapters[1].index == 1);
  CHECK(h.backend->calls() == 2);
  auto log = h.backend->call_log();
  CHECK(log[1].find("[stage:chapters]") != std::string::npos);
}

TEST_CASE("repair gives up after the configured attempts") {
  json script = json::array();
  script.push_back({{"match", {"[stage:chapters]"}}, {"response", "no json at all"}});
  auto cfg = shape_cfg(2, 1, 1);
  cfg.max_repair_attempts = 2;
  Harness h(to_entries(script), cfg);
  MoviePlot plot;
  plot.theme = kTheme;
  plot.overview = "An overview.";
  try {
    h.expander().expand_chapters(plot);
    FAIL("expected StageFailed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::StageFailed);
    CHECK(std::string(e.what()).find("chapters") != std::string::npos);
  }
  CHECK(h.backend->calls() == 3);
}

TEST_CASE("casting that reuses a character name is sent back") {
  json bad = {{"characters", {{{"name", "Grace"}, {"description", "x"}, {"celebrity_name", "Grace Kelly"}}}}};
  json good = {{"characters", {{{"name", "Grace"}, {"description", "x"}, {"celebrity_name", "Cary Grant"}}}}};
  json same = {{"characters", {{{"name", "Cary Grant"}, {"description", "x"}, {"celebrity_name", "Cary Grant"}}}}};
  json script = json::array();
  script.push_back({{"match", {"[repair]", "contains the character name 'Grace'"}}, {"response", st::fenced(good)}});
  script.push_back({{"match", {"[repair]", "same name as its celebrity"}}, {"response", st::fenced(good)}});
  script.push_back({{"match", {"[stage:characters]", "first"}}, {"response", st::fenced(bad)}});
  script.push_back({{"match", {"[stage:characters]", "second"}}, {"response", st::fenced(same)}});
  Harness h(to_entries(script));
  auto cast = h.expander().generate_characters(kTheme, "first overview");
  REQUIRE(cast.size() == 1);
  CHECK(cast[0].celebrity_name == "Cary Grant");
  CHECK(h.expander().generate_characters(kTheme, "second overview")[0].name == "Grace");
}

TEST_CASE("frames naming unknown characters are sent back") {
  st::ScriptShape shape{1, 1, 2, {}};
  json script = st::movie_script(kTheme, 0, shape);
  json bad = {{"frames", {{{"text", "Zed waves"}, {"characters", {"Zed"}}}, {{"text", "rain"}}}}};
  json fixed = {{"frames", {{{"text", "Elena waves"}, {"characters", {"Elena"}}}, {{"text", "rain"}}}}};
  for (auto& e : script)
    if (e["match"][0] == "[stage:frames]") e["response"] = st::fenced(bad);
  script.insert(script.begin(), json{{"match", {"[repair]", "unknown character 'Zed'"}}, {"response", st::fenced(fixed)}});
  Harness h(to_entries(script), shape_cfg(1, 1, 2));
  auto plot = h.expander().build_plot(kTheme, 3);
  CHECK(plot.chapters[0].threads[0].frames[0].mentioned_characters == std::vector<std::string>{"Elena"});
}

TEST_CASE("interrupted build resumes at the first missing step") {
  st::ScriptShape shape{2, 2, 2, {}};
  st::TempDir tmp;
  auto script = to_entries(st::movie_script(kTheme, 0, shape));

  Harness full(script, shape_cfg(2, 2, 2));
  auto reference = full.expander().build_plot(kTheme, 5);
  const std::size_t all_calls = full.backend->calls();

  const std::vector<std::string> steps = {"overview", "style", "characters", "chapters", "threads-c0", "frames-c0-t0",
                                          "frames-c0-t1", "threads-c1", "frames-c1-t0", "frames-c1-t1"};
  REQUIRE(steps.size() == all_calls);
  for (std::size_t k = 0; k < steps.size(); ++k) {
    CAPTURE(steps[k]);
    auto dir = tmp / ("movie-" + std::to_string(k));
    Harness first(script, shape_cfg(2, 2, 2));
    auto ex = first.expander(dir);
    ex.set_step_hook([&](std::string_view s) {
      if (s == steps[k]) throw Stop{};
    });
    CHECK_THROWS_AS(ex.build_plot(kTheme, 5), Stop);
    CHECK(first.backend->calls() == k + 1);

    Harness second(script, shape_cfg(2, 2, 2));
    auto resumed = second.expander(dir).build_plot(kTheme, 5);
    CHECK(second.backend->calls() == all_calls - (k + 1));
    CHECK(json(resumed) == json(reference));
  }
}

TEST_CASE("transcripts are written per exchange") {
  st::ScriptShape shape{1, 1, 1, {}};
  st::TempDir tmp;
  Harness h(to_entries(st::movie_script(kTheme, 0, shape)), shape_cfg(1, 1, 1));
  h.expander(tmp.path()).build_plot(kTheme, 1);
  CHECK(std::filesystem::exists(tmp / "transcripts" / "overview-0.txt"));
  CHECK(std::filesystem::exists(tmp / "transcripts" / "frames-c0-t0-0.txt"));
  CHECK(std::filesystem::exists(tmp / "partial" / "chapters.json"));
}

TEST_CASE("expansion config validation") {
  auto cfg = shape_cfg(0, 1, 1);
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = shape_cfg(50, 10, 10);
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = shape_cfg(5, 3, 8);
  cfg.min_characters = 3;
  cfg.max_characters = 2;
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(shape_cfg(5, 3, 8).total_frames() == 120);
}

TEST_CASE("a prompt above the cap is refused before any call") {
  st::ScriptShape shape{1, 1, 1, {}};
  auto cfg = shape_cfg(1, 1, 1);
  cfg.prompt_char_cap = 100;
  Harness h(to_entries(st::movie_script(kTheme, 0, shape)), cfg);
  MoviePlot plot;
  plot.theme = kTheme;
  plot.overview = std::string(500, 'x');
  plot.chapters.push_back({0, "T", "summary", {}});
  try {
    h.expander().expand_threads(plot, 0);
    FAIL("expected ContractViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ContractViolation);
  }
  CHECK(h.backend->calls() == 0);
}
