#include <doctest.h>

#include <regex>

#include "storyreel/errors.hpp"
#include "storyreel/keyframe_gen.hpp"
#include "storyreel/plot_model.hpp"
#include "test_support.hpp"

using namespace storyreel;
using storyreel::testing::make_plot;

namespace {

bool has_violation(const ValidationReport& r, const std::string& what) {
  for (const auto& v : r)
    if (v.what == what) return true;
  return false;
}

StyleToken token(const std::string& trigger = "<gothic-noir>") { return {trigger, "abc", "Gothic Noir"}; }

}  // namespace

TEST_CASE("valid plot passes and flattens depth first") {
  auto plot = make_plot(5, 3, 8);
  CHECK(validate_plot(plot).empty());
  auto frames = flatten_frames(plot);
  REQUIRE(frames.size() == 120);
  for (int i = 0; i < 120; ++i) CHECK(frames[i].global_index == i);
  CHECK(frames[8].text.find("scene 0-1-0") != std::string::npos);
  CHECK(frames[24].text.find("scene 1-0-0") != std::string::npos);
}

TEST_CASE("flatten is stable across serialization") {
  auto plot = make_plot(2, 2, 3);
  json j = plot;
  MoviePlot back = j.get<MoviePlot>();
  CHECK(json(back) == j);
  auto a = flatten_frames(plot);
  auto b = flatten_frames(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("validation catches each broken invariant") {
  SUBCASE("missing celebrity") {
    auto plot = make_plot(1, 1, 2);
    plot.characters[0].celebrity_name.clear();
    CHECK(has_violation(validate_plot(plot), "missing celebrity casting"));
  }
  SUBCASE("duplicate name differing in case") {
    auto plot = make_plot(1, 1, 2);
    plot.characters.push_back({"elena", "twin", "Vivien Leigh"});
    CHECK(has_violation(validate_plot(plot), "duplicate character name"));
  }
  SUBCASE("name equals celebrity") {
    auto plot = make_plot(1, 1, 2);
    plot.characters[1].celebrity_name = plot.characters[1].name;
    CHECK(has_violation(validate_plot(plot), "character name equals celebrity name"));
  }
  SUBCASE("unknown genre") {
    auto plot = make_plot(1, 1, 2);
    plot.theme.genre_tag = "telenovela";
    CHECK(has_violation(validate_plot(plot), "genre not in configured list"));
    CHECK(validate_plot(plot, {"telenovela", "drama"}).empty());
  }
  SUBCASE("gap in frame indices") {
    auto plot = make_plot(1, 2, 2);
    plot.chapters[0].threads[1].frames[0].global_index = 5;
    CHECK(has_violation(validate_plot(plot), "non-contiguous frame indices"));
  }
  SUBCASE("empty thread") {
    auto plot = make_plot(1, 2, 2);
    plot.chapters[0].threads[1].frames.clear();
    CHECK(has_violation(validate_plot(plot), "thread without frames"));
  }
  SUBCASE("unknown mention") {
    auto plot = make_plot(1, 1, 2);
    plot.chapters[0].threads[0].frames[0].mentioned_characters.push_back("Ghost");
    auto r = validate_plot(plot);
    REQUIRE(has_violation(r, "unknown character reference"));
  }
  SUBCASE("bad trigger") {
    auto plot = make_plot(1, 1, 2);
    plot.style.token = token("Gothic Noir");
    CHECK(has_violation(validate_plot(plot), "malformed style trigger"));
  }
  SUBCASE("no chapters") {
    auto plot = make_plot(1, 1, 1);
    plot.chapters.clear();
    CHECK(has_violation(validate_plot(plot), "no chapters"));
    CHECK_THROWS_AS(flatten_frames(plot), Error);
  }
}

TEST_CASE("renumber restores contiguous indices") {
  auto plot = make_plot(2, 2, 2);
  for (auto& ch : plot.chapters)
    for (auto& th : ch.threads)
      for (auto& f : th.frames) f.global_index = 99;
  plot.chapters[1].index = 7;
  CHECK_FALSE(validate_plot(plot).empty());
  renumber(plot);
  CHECK(validate_plot(plot).empty());
  CHECK(plot.chapters[1].threads[1].frames[1].global_index == 7);
}

TEST_CASE("movie id is a stable 16 hex prefix") {
  auto a = make_movie_id("a tragic film", 42);
  CHECK(a.size() == 16);
  CHECK(a == make_movie_id("a tragic film", 42));
  CHECK(a != make_movie_id("a tragic film", 43));
  CHECK(std::regex_match(a, std::regex("[0-9a-f]{16}")));
}

TEST_CASE("trigger syntax") {
  CHECK(is_valid_trigger("<gothic-noir>"));
  CHECK(is_valid_trigger("<gothic-noir-2>"));
  CHECK_FALSE(is_valid_trigger("gothic-noir"));
  CHECK_FALSE(is_valid_trigger("<Gothic>"));
  CHECK_FALSE(is_valid_trigger("<>"));
}

TEST_CASE("whole word matching") {
  CHECK(find_word_ci("Anna waves", "Ann") == std::string::npos);
  CHECK(find_word_ci("Elena's hands", "elena") == 0);
  CHECK(find_word_ci("with ANN.", "Ann") == 5);
  Character ann{"Ann", "", "Ingrid Bergman"}, anna{"Anna", "", "Grace Kelly"};
  auto m = extract_mentions("Anna and her friend", {ann, anna});
  REQUIRE(m.size() == 1);
  CHECK(m[0] == "Anna");
}

TEST_CASE("render prompt substitutes whole names longest first") {
  std::vector<Character> cast = {{"Ann", "", "Ingrid Bergman"}, {"Anna", "", "Grace Kelly"}, {"Elena", "", "Audrey Hepburn"}};
  FrameDescription f{0, "Anna greets Ann while anna laughs at Elena's joke about Annabel", {"Ann", "Anna", "Elena"}};
  auto p = render_prompt(f, cast, token());
  CHECK(p == "generate an image in <gothic-noir> style: Grace Kelly greets Ingrid Bergman while Grace Kelly laughs at "
             "Audrey Hepburn's joke about Annabel");
  CHECK(std::regex_search(p, std::regex(std::string(kStylePrefixPattern))));
}

TEST_CASE("render prompt requires casting and a valid trigger") {
  std::vector<Character> cast = {{"Elena", "", ""}};
  FrameDescription f{0, "Elena runs", {"Elena"}};
  try {
    render_prompt(f, cast, token());
    FAIL("expected MissingCasting");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingCasting);
  }
  cast[0].celebrity_name = "Audrey Hepburn";
  CHECK_THROWS_AS(render_prompt(f, cast, token("plain")), Error);
}

TEST_CASE("celebrity names are not substituted again") {
  // A single pass means a celebrity containing another character's name stays intact.
  std::vector<Character> cast = {{"Grace", "", "Cary Grant"}, {"Kelly", "", "Grace Kelly"}};
  FrameDescription f{0, "Kelly meets Grace", {"Kelly", "Grace"}};
  CHECK(render_prompt(f, cast, token()) == "generate an image in <gothic-noir> style: Grace Kelly meets Cary Grant");
}

TEST_CASE("QA category names round trip") {
  for (auto c : kAllQACategories) CHECK(parse_qa_category(to_string(c)) == c);
  CHECK_FALSE(parse_qa_category("plot").has_value());
}
