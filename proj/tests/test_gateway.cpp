#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <thread>

#include "storyreel/backend.hpp"
#include "storyreel/errors.hpp"
#include "storyreel/gateway.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/image.hpp"
#include "storyreel/mock_backends.hpp"
#include "test_support.hpp"

using namespace storyreel;
using storyreel::testing::TempDir;

namespace {

ChatRequest user_request(const std::string& text) {
  ChatRequest r;
  r.messages = {{Role::system, "sys"}, {Role::user, text}};
  return r;
}

// Fails with BackendUnavailable for the first `failures` calls.
class FlakyChat final : public ChatBackend {
 public:
  explicit FlakyChat(int failures) : failures_(failures) {}
  std::string id() const override { return "flaky"; }
  std::string complete(const ChatRequest& req) override {
    ++calls;
    if (calls <= failures_) throw Error(Errc::BackendUnavailable, "down");
    return "echo:" + req.last_user_message();
  }
  int calls = 0;

 private:
  int failures_;
};

class FixedEmbedding final : public EmbeddingBackend {
 public:
  explicit FixedEmbedding(std::vector<double> v) : v_(std::move(v)) {}
  std::string id() const override { return "fixed"; }
  EmbeddingVector embed(const EmbeddingRequest&) override { return {v_}; }

 private:
  std::vector<double> v_;
};

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("chat request validation") {
  ChatRequest r;
  CHECK(code_of([&] { r.validate(); }) == Errc::InvalidRequest);
  r.messages = {{Role::user, "hi"}, {Role::assistant, "hello"}};
  CHECK(code_of([&] { r.validate(); }) == Errc::InvalidRequest);
  r = user_request("hi");
  r.temperature = -0.1;
  CHECK(code_of([&] { r.validate(); }) == Errc::InvalidRequest);
  r.temperature = 0;
  r.max_tokens = 0;
  CHECK(code_of([&] { r.validate(); }) == Errc::InvalidRequest);
}

TEST_CASE("transient failures are retried with doubling backoff") {
  auto clock = std::make_shared<ManualClock>();
  auto backend = std::make_shared<FlakyChat>(2);
  ChatClient client(backend, {{3, 0.5}, 0.0, nullptr, clock});
  CHECK(client.chat(user_request("x")) == "echo:x");
  CHECK(backend->calls == 3);
  CHECK(clock->now() == doctest::Approx(1.5));
  CHECK(client.stats().backend_calls == 3);

  auto dead = std::make_shared<FlakyChat>(100);
  ChatClient gives_up(dead, {{2, 0.0}, 0.0, nullptr, clock});
  CHECK(code_of([&] { gives_up.chat(user_request("x")); }) == Errc::BackendUnavailable);
  CHECK(dead->calls == 2);
}

TEST_CASE("non-transient errors are not retried") {
  auto backend = std::make_shared<MockChatBackend>(std::vector<ScriptEntry>{{{"known"}, "ok"}});
  ChatClient client(backend, {{5, 0.0}, 0.0, nullptr, std::make_shared<ManualClock>()});
  CHECK(client.chat(user_request("a known prompt")) == "ok");
  CHECK(code_of([&] { client.chat(user_request("other")); }) == Errc::MockScriptMiss);
  CHECK(backend->calls() == 2);
}

TEST_CASE("rate limiter spaces request starts") {
  auto clock = std::make_shared<ManualClock>();
  RateLimiter limiter(4.0, clock);
  limiter.acquire();
  CHECK(clock->now() == doctest::Approx(0.0));
  limiter.acquire();
  limiter.acquire();
  CHECK(clock->now() == doctest::Approx(0.5));
  clock->sleep_for(2.0);
  limiter.acquire();
  CHECK(clock->now() == doctest::Approx(2.5));
  RateLimiter off(0.0, clock);
  for (int i = 0; i < 10; ++i) off.acquire();
  CHECK(clock->now() == doctest::Approx(2.5));
}

TEST_CASE("response cache returns the stored bytes without a backend call") {
  TempDir tmp;
  auto cache = std::make_shared<ResponseCache>(tmp.path() / "cache");
  auto backend = std::make_shared<FlakyChat>(0);
  ChatClient a(backend, {{1, 0}, 0, cache, nullptr});
  CHECK(a.chat(user_request("q")) == "echo:q");
  ChatClient b(backend, {{1, 0}, 0, cache, nullptr});
  CHECK(b.chat(user_request("q")) == "echo:q");
  CHECK(backend->calls == 1);
  CHECK(b.stats().cache_hits == 1);
  auto other = user_request("q");
  other.temperature = 0.2;
  b.chat(other);
  CHECK(backend->calls == 2);
}

TEST_CASE("cache keys cover every request field") {
  auto base = user_request("q");
  auto k = cache_key("b", base);
  CHECK(k == cache_key("b", user_request("q")));
  CHECK(k != cache_key("c", base));
  auto seeded = base;
  seeded.seed = 1;
  CHECK(k != cache_key("b", seeded));
  auto model = base;
  model.model_name = "other";
  CHECK(k != cache_key("b", model));

  ImageRequest img{"p", std::nullopt, 1, 64, 64, std::nullopt};
  auto ik = cache_key("b", img);
  img.style_embedding_ref = "abc";
  CHECK(ik != cache_key("b", img));
  EmbeddingRequest t{Modality::text, "x"}, i{Modality::image, "x"};
  CHECK(cache_key("b", t) != cache_key("b", i));
}

TEST_CASE("embedding client enforces the dimension contract") {
  ClientOptions opts{{1, 0}, 0, nullptr, nullptr};
  EmbeddingClient ok(std::make_shared<FixedEmbedding>(std::vector<double>{1, 2, 3}), 3, opts);
  CHECK(ok.embed({Modality::text, "x"}).dim() == 3);
  CHECK(code_of([&] { ok.embed({Modality::text, ""}); }) == Errc::InvalidRequest);
  EmbeddingClient wrong(std::make_shared<FixedEmbedding>(std::vector<double>{1, 2}), 3, opts);
  CHECK(code_of([&] { wrong.embed({Modality::text, "x"}); }) == Errc::ContractViolation);
  EmbeddingClient nan(std::make_shared<FixedEmbedding>(std::vector<double>{1, NAN, 2}), 3, opts);
  CHECK(code_of([&] { nan.embed({Modality::text, "x"}); }) == Errc::ContractViolation);
}

TEST_CASE("image client validates sizes") {
  ImageClient client(std::make_shared<MockImageBackend>(), 256, {{1, 0}, 0, nullptr, nullptr});
  CHECK(code_of([&] { client.generate({"", std::nullopt, 1, 64, 64, std::nullopt}); }) == Errc::InvalidRequest);
  CHECK(code_of([&] { client.generate({"p", std::nullopt, 1, 60, 64, std::nullopt}); }) == Errc::InvalidRequest);
  CHECK(code_of([&] { client.generate({"p", std::nullopt, 1, 512, 64, std::nullopt}); }) == Errc::InvalidRequest);
  auto img = client.generate({"p", std::nullopt, 1, 64, 32, std::nullopt});
  CHECK(img.hash == sha256_hex(img.png));
  auto decoded = decode_png(img.png);
  CHECK(decoded.width == 64);
  CHECK(decoded.height == 32);
}

TEST_CASE("mock image backend is deterministic and injects failures") {
  MockImageBackend::Options opts;
  opts.fail_seeds = {7};
  opts.fail_prompts = {"forbidden"};
  MockImageBackend mock(opts);
  ImageRequest r{"a lighthouse", std::nullopt, 3, 64, 64, std::string("tok")};
  CHECK(mock.generate(r) == mock.generate(r));
  auto other = r;
  other.seed = 4;
  CHECK(mock.generate(r) != mock.generate(other));
  other = r;
  other.style_embedding_ref = "tok2";
  CHECK(mock.generate(r) != mock.generate(other));
  other = r;
  other.seed = 7;
  CHECK(code_of([&] { mock.generate(other); }) == Errc::BackendUnavailable);
  other = r;
  other.prompt = "a forbidden door";
  CHECK(code_of([&] { mock.generate(other); }) == Errc::BackendUnavailable);
}

TEST_CASE("mock embedding backend follows its documented derivation") {
  MockEmbeddingBackend mock(10, "k");
  auto v = mock.embed({Modality::text, "hello"});
  REQUIRE(v.dim() == 10);
  std::string seed_bytes = std::string("storyreel-mock-embed") + '\0' + "text" + '\0' + "k" + '\0' + "hello";
  auto d0 = sha256_raw(seed_bytes);
  std::string block_in(d0.begin(), d0.end());
  block_in += std::string("\0\0\0\0", 4);
  auto b0 = sha256_raw(block_in);
  std::uint32_t u = b0[0] | (b0[1] << 8) | (b0[2] << 16) | (static_cast<std::uint32_t>(b0[3]) << 24);
  CHECK(v.values[0] == doctest::Approx(u / 4294967296.0 * 2 - 1).epsilon(1e-12));
  for (double x : v.values) CHECK((x >= -1 && x < 1));
  CHECK(MockEmbeddingBackend(10, "k").embed({Modality::text, "hello"}).values == v.values);
  CHECK(MockEmbeddingBackend(10, "other").embed({Modality::text, "hello"}).values != v.values);
  auto many = MockEmbeddingBackend(300).embed({Modality::image, "bytes"});
  CHECK(many.dim() == 300);
}

TEST_CASE("mock chat script loading and matching") {
  TempDir tmp;
  storyreel::testing::write_text(tmp / "s.json", R"([{"match": ["alpha", "beta"], "response": "both"},
                                                     {"match": "alpha", "response": "one"}])");
  MockChatBackend mock(load_chat_script(tmp / "s.json"));
  CHECK(mock.complete(user_request("alpha and beta")) == "both");
  CHECK(mock.complete(user_request("alpha only")) == "one");
  CHECK(mock.call_log().size() == 2);
  storyreel::testing::write_text(tmp / "bad.json", R"({"match": "x"})");
  CHECK(code_of([&] { load_chat_script(tmp / "bad.json"); }) == Errc::Config);
}

TEST_CASE("backend factory") {
  BackendConfig cfg;
  cfg.kind = BackendConfig::Kind::http;
  CHECK(code_of([&] { cfg.validate("chat"); }) == Errc::Config);
  cfg.endpoint = "http://127.0.0.1:1/v1";
  cfg.validate("chat");
  auto chat = make_chat_backend(cfg, ".");
  CHECK(chat->id() == "http:http://127.0.0.1:1/v1");
  cfg.endpoint = "no-scheme";
  CHECK(code_of([&] { make_chat_backend(cfg, "."); }) == Errc::Config);
}

TEST_CASE("http backends speak the wire format") {
  httplib::Server server;
  json last_chat;
  std::string last_auth;
  int chat_status = 200;
  server.Post("/chat", [&](const httplib::Request& req, httplib::Response& res) {
    last_chat = json::parse(req.body);
    last_auth = req.get_header_value("Authorization");
    res.status = chat_status;
    res.set_content(json{{"text", "hi " + last_chat["messages"].back()["content"].get<std::string>()}}.dump(),
                    "application/json");
  });
  server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    auto j = json::parse(req.body);
    double n = static_cast<double>(j["payload"].get<std::string>().size());
    res.set_content(json{{"vector", {n, 1.0}}}.dump(), "application/json");
  });
  server.Post("/image", [&](const httplib::Request& req, httplib::Response& res) {
    auto j = json::parse(req.body);
    Image img{j["width"].get<int>(), j["height"].get<int>(), 1, {}};
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 128);
    res.set_content(encode_png(img), "image/png");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  ::setenv("STORYREEL_TEST_TOKEN", "s3cret", 1);
  BackendConfig cfg;
  cfg.kind = BackendConfig::Kind::http;
  cfg.endpoint = base + "/chat";
  cfg.auth_env = "STORYREEL_TEST_TOKEN";
  auto chat = make_chat_backend(cfg, ".");
  auto req = user_request("there");
  req.seed = 5;
  CHECK(chat->complete(req) == "hi there");
  CHECK(last_chat["seed"] == 5);
  CHECK(last_chat["messages"].size() == 2);
  CHECK(last_auth == "Bearer s3cret");
  chat_status = 503;
  CHECK(code_of([&] { chat->complete(req); }) == Errc::BackendUnavailable);
  chat_status = 400;
  CHECK(code_of([&] { chat->complete(req); }) == Errc::InvalidRequest);

  cfg.auth_env.clear();
  cfg.endpoint = base + "/embed";
  auto emb = make_embedding_backend(cfg, ".");
  CHECK(emb->embed({Modality::text, "abcd"}).values == std::vector<double>{4.0, 1.0});
  // image payloads travel base64-encoded
  CHECK(emb->embed({Modality::image, "abc"}).values == std::vector<double>{4.0, 1.0});

  cfg.endpoint = base + "/image";
  auto images = make_image_backend(cfg, ".");
  auto png = images->generate({"p", std::nullopt, 1, 16, 24, std::nullopt});
  CHECK(decode_png(png).height == 24);

  server.stop();
  t.join();
  cfg.endpoint = base + "/chat";
  CHECK(code_of([&] { make_chat_backend(cfg, ".")->complete(req); }) == Errc::BackendUnavailable);
}

TEST_CASE("png round trip and luma") {
  Image rgb{4, 2, 3, {}};
  for (int i = 0; i < 8; ++i) {
    rgb.pixels.push_back(static_cast<std::uint8_t>(i * 30));
    rgb.pixels.push_back(static_cast<std::uint8_t>(255 - i * 30));
    rgb.pixels.push_back(10);
  }
  auto png = encode_png(rgb);
  CHECK(png == encode_png(rgb));
  auto back = decode_png(png);
  CHECK(back.pixels == rgb.pixels);
  auto g = to_gray(back);
  CHECK(g.at(1, 0) == doctest::Approx(0.299 * 30 + 0.587 * 225 + 0.114 * 10));
  CHECK(code_of([] { decode_png("not a png"); }) == Errc::ParseFailed);
}

TEST_CASE("base64 and slugify") {
  std::string s = "any carnal pleas";
  std::vector<std::uint8_t> bytes(s.begin(), s.end());
  CHECK(base64_encode(bytes) == "YW55IGNhcm5hbCBwbGVhcw==");
  CHECK(base64_decode("YW55IGNhcm5hbCBwbGVhcw==") == bytes);
  CHECK(slugify("Gothic Noir!") == "gothic-noir");
  CHECK(slugify("  --  ") == "style");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
