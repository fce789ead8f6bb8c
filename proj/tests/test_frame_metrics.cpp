#include <doctest.h>

#include <cmath>
#include <random>

#include "storyreel/brisque_kernels.hpp"
#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/frame_metrics.hpp"
#include "storyreel/image.hpp"
#include "storyreel/mock_backends.hpp"
#include "test_support.hpp"

using namespace storyreel;
namespace st = storyreel::testing;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

EmbeddingVector ev(std::vector<double> v) { return {std::move(v)}; }

GrayImage random_image(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data) v = d(rng);
  return img;
}

GrayImage camera() { return to_gray(decode_png(read_file(st::fixtures_dir() / "camera.png"))); }

SvrModel fixture_model() {
  return SvrModel::load(st::fixtures_dir() / "brisque_fixture.svr", st::fixtures_dir() / "brisque_fixture.svr.ranges");
}

}  // namespace

TEST_CASE("cosine") {
  CHECK(cosine({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
  CHECK(cosine({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK(code_of([] { cosine({1, 0}, {1, 0, 0}); }) == Errc::ContractViolation);
  CHECK(code_of([] { cosine({0, 0}, {1, 0}); }) == Errc::DegenerateEmbedding);
}

TEST_CASE("consistency") {
  std::vector<EmbeddingVector> same(5, ev({0.3, -0.2, 0.9}));
  CHECK(std::abs(consistency(same) - 1.0) <= 1e-9);
  const double r = 1 / std::sqrt(2.0);
  CHECK(std::abs(consistency({ev({1, 0}), ev({r, r}), ev({0, 1})}) - 0.70711) <= 1e-5);
  CHECK(consistency({ev({1, 0}), ev({-1, 0})}) == doctest::Approx(-1.0));
  CHECK(code_of([] { consistency({ev({1, 0})}); }) == Errc::InsufficientFrames);
  CHECK(code_of([] { consistency({}); }) == Errc::InsufficientFrames);
}

TEST_CASE("alignment") {
  CHECK(alignment({{ev({1, 0}), ev({1, 0})}, {ev({1, 0}), ev({0, 1})}}) == doctest::Approx(0.5));
  CHECK(code_of([] { alignment({}); }) == Errc::InsufficientFrames);
}

TEST_CASE("rho inversion round trips") {
  for (double a = 0.3; a < 9.9; a += 0.137) {
    CAPTURE(a);
    CHECK(invert_ggd_rho(ggd_rho(a)) == doctest::Approx(a).epsilon(1e-4));
  }
  CHECK(invert_ggd_rho(0.0) == doctest::Approx(0.2));
  CHECK(invert_ggd_rho(1.0) == doctest::Approx(10.0));
  CHECK(ggd_rho(2.0) == doctest::Approx(2.0 / M_PI));
}

TEST_CASE("GGD shape of Gaussian and Laplace samples") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0, 3);
  std::vector<double> g(100000);
  for (auto& v : g) v = normal(rng);
  auto fg = fit_ggd(g);
  CHECK(std::abs(fg.alpha - 2.0) <= 0.15);
  CHECK(fg.variance == doctest::Approx(9.0).epsilon(0.03));

  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> l(100000);
  for (auto& v : l) v = (coin(rng) ? 1 : -1) * expo(rng);
  CHECK(std::abs(fit_ggd(l).alpha - 1.0) <= 0.1);
}

TEST_CASE("AGGD recovers asymmetry") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0, 1);
  std::vector<double> x(100000);
  for (auto& v : x) {
    double z = normal(rng);
    v = z < 0 ? z * 1.0 : z * 2.0;
  }
  auto a = fit_aggd(x);
  CHECK(a.alpha == doctest::Approx(2.0).epsilon(0.08));
  CHECK(a.left_variance == doctest::Approx(1.0).epsilon(0.03));
  CHECK(a.right_variance == doctest::Approx(4.0).epsilon(0.03));
  CHECK(a.mean > 0);
  std::vector<double> sym(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sym[i] = normal(rng);
  CHECK(std::abs(fit_aggd(sym).mean) < 0.02);
}

TEST_CASE("degenerate distributions") {
  std::vector<double> zeros(200, 0.0), few(50, 1.0), positive(200, 1.0);
  CHECK(code_of([&] { fit_ggd(zeros); }) == Errc::DegenerateDistribution);
  CHECK(code_of([&] { fit_ggd(few); }) == Errc::DegenerateDistribution);
  CHECK(code_of([&] { fit_aggd(positive); }) == Errc::DegenerateDistribution);
  auto floored = fit_aggd(positive, 1e-6);
  CHECK(floored.left_variance == 1e-6);
  CHECK(fit_ggd(zeros, 1e-6).variance == 1e-6);
  std::vector<double> bad(200, 1.0);
  bad[5] = NAN;
  CHECK(code_of([&] { fit_ggd(bad); }) == Errc::DegenerateDistribution);
}

TEST_CASE("MSCN of a constant image is exactly zero") {
  for (double level : {0.0, 17.0, 255.0}) {
    auto m = mscn(GrayImage(40, 33, level));
    for (double v : m.data) CHECK(v == 0.0);
    auto s = mscn(GrayImage(40, 33, level), KernelImpl::serial);
    for (double v : s.data) CHECK(v == 0.0);
  }
  CHECK(code_of([] { mscn(GrayImage(15, 40)); }) == Errc::ImageTooSmall);
}

TEST_CASE("MSCN ignores a brightness offset") {
  auto img = random_image(48, 37, 3);
  auto shifted = img;
  for (auto& v : shifted.data) v += 40;
  auto a = mscn(img).data, b = mscn(shifted).data;
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= 1e-9);
}

TEST_CASE("MSCN coefficients are roughly centred") {
  auto m = mscn(camera());
  double sum = 0;
  for (double v : m.data) sum += v;
  CHECK(std::abs(sum / static_cast<double>(m.data.size())) < 0.1);
}

TEST_CASE("serial and OpenMP kernels agree bit for bit") {
  for (auto [w, h] : {std::pair{32, 32}, std::pair{77, 41}, std::pair{128, 96}}) {
    auto img = random_image(w, h, static_cast<std::uint32_t>(w * h));
    auto a = brisque::serial::mscn(img, kMscnC, kVarianceFloor);
    auto b = brisque::omp::mscn(img, kMscnC, kVarianceFloor);
    CHECK(a.data == b.data);
    for (const auto& [dy, dx] : brisque::kShifts)
      CHECK(brisque::serial::pair_product(a, dy, dx) == brisque::omp::pair_product(a, dy, dx));
    auto da = brisque::serial::downsample2(img), db = brisque::omp::downsample2(img);
    CHECK(da.data == db.data);
    CHECK(da.width == w / 2);
  }
  auto cam = camera();
  CHECK(brisque_features(cam, KernelImpl::serial) == brisque_features(cam, KernelImpl::omp));
}

TEST_CASE("gaussian window") {
  const auto& w = brisque::gaussian_weights();
  double sum = 0;
  for (double v : w) sum += v;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(w.size() == 49);
  CHECK(w[0] == w[48]);
  CHECK(w[3] == w[21]);
  CHECK(brisque::reflect(-1, 10) == 0);
  CHECK(brisque::reflect(10, 10) == 9);
  CHECK(brisque::reflect(-3, 10) == 2);
}

TEST_CASE("features match the independent oracle") {
  auto expected = read_json(st::fixtures_dir() / "brisque_camera_expected.json");
  auto f = brisque_features(camera());
  REQUIRE(f.size() == 36);
  for (std::size_t i = 0; i < 36; ++i) {
    CAPTURE(i);
    CHECK(std::isfinite(f[i]));
    double e = expected["features"][i].get<double>();
    CHECK(f[i] == doctest::Approx(e).epsilon(1e-4).scale(1e-9));
  }
  CHECK(code_of([] { brisque_features(GrayImage(31, 64)); }) == Errc::ImageTooSmall);
}

TEST_CASE("score against the fixture model") {
  auto expected = read_json(st::fixtures_dir() / "brisque_camera_expected.json");
  auto model = fixture_model();
  CHECK(model.dims() == 36);
  CHECK(model.support_vectors.size() == 30);
  auto f = brisque_features(camera());
  CHECK(std::abs(brisque_score(f, model) - expected["score"].get<double>()) <= 2.0);
  CHECK(brisque_score_raw(f, model) == doctest::Approx(expected["raw"].get<double>()).epsilon(1e-4));
  auto norm = normalize_features(f, model);
  for (double v : norm) CHECK(std::isfinite(v));
}

TEST_CASE("score is clamped and validated") {
  SvrModel m;
  m.gamma = 1;
  m.bias = 150;
  for (int i = 0; i < 36; ++i) m.ranges.push_back({0, 1});
  std::vector<double> f(36, 0.5);
  CHECK(brisque_score(f, m) == 100.0);
  m.bias = -5;
  CHECK(brisque_score(f, m) == 0.0);
  CHECK(brisque_score_raw(f, m) == -5.0);
  CHECK(code_of([&] { brisque_score(std::vector<double>(35, 0.5), m); }) == Errc::ContractViolation);
  f[3] = NAN;
  CHECK(code_of([&] { brisque_score(f, m); }) == Errc::ContractViolation);
}

TEST_CASE("model parsing errors") {
  std::string ranges;
  for (int i = 0; i < 36; ++i) ranges += "0 1\n";
  std::string sv;
  for (int i = 0; i < 37; ++i) sv += "0.1 ";
  CHECK(SvrModel::parse("# c\ngamma 0.5\nbias 1\n" + sv + "\n", ranges).support_vectors.size() == 1);
  CHECK_THROWS_AS(SvrModel::parse("gamma 0.5\nbias 1\n0.1 0.2\n", ranges), Error);
  CHECK_THROWS_AS(SvrModel::parse("gamma 0.5\nbias 1\n" + sv, "0 1\n"), Error);
  CHECK_THROWS_AS(SvrModel::parse("gamma 0.5\nbias 1\n" + sv, std::string(36 * 4, ' ') + "1 0\n"), Error);
  CHECK(code_of([] { SvrModel::load("/nonexistent.svr", "/nonexistent.ranges"); }) == Errc::Config);
}

TEST_CASE("per-movie metric report") {
  st::TempDir tmp;
  MockImageBackend images;
  json captions = json::object();
  for (int i = 0; i < 3; ++i) {
    auto name = "0000" + std::to_string(i) + ".png";
    st::write_text(tmp / "frames" / name, images.generate({"frame " + std::to_string(i), std::nullopt, i, 64, 64, std::nullopt}));
    captions[name] = "caption " + std::to_string(i);
  }
  write_json(tmp / "captions.json", captions);
  auto frames = list_frames(tmp / "frames");
  REQUIRE(frames.size() == 3);
  auto caps = load_captions(tmp / "captions.json");
  EmbeddingClient embed(std::make_shared<MockEmbeddingBackend>(32), 32, {{1, 0}, 0, nullptr, nullptr});
  auto model = fixture_model();
  auto report = compute_metrics("m", frames, caps, embed, &model);
  REQUIRE(report.consistency.has_value());
  REQUIRE(report.alignment.has_value());
  CHECK(report.brisque.size() == 3);
  REQUIRE(report.brisque_mean.has_value());
  auto j = report.to_json();
  CHECK(j["movie_id"] == "m");

  auto single = compute_metrics("m", {frames[0]}, {}, embed, nullptr);
  CHECK_FALSE(single.consistency.has_value());
  CHECK_FALSE(single.alignment.has_value());
  CHECK(single.brisque.empty());
  CHECK(single.to_json()["consistency"].is_null());
}

TEST_CASE("captions from a frames.json record list") {
  st::TempDir tmp;
  json recs = json::array();
  recs.push_back({{"global_index", 0}, {"source_text", "Elena waves"}, {"prompt", "p"}, {"image_hash", "h"},
                  {"image_path", "frames/00000.png"}, {"seed", 1}});
  write_json(tmp / "frames.json", recs);
  auto caps = load_captions(tmp / "frames.json");
  CHECK(caps.at("00000.png") == "Elena waves");
}
