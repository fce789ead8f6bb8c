#include "storyreel/mock_backends.hpp"

#include <algorithm>
#include <cmath>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/hashing.hpp"
#include "storyreel/image.hpp"

namespace storyreel {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::vector<ScriptEntry> load_chat_script(const std::filesystem::path& path) {
  json j = read_json(path);
  if (!j.is_array()) throw Error(Errc::Config, "mock script " + path.string() + " must be a JSON array");
  std::vector<ScriptEntry> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("match") || !e.contains("response") || !e["response"].is_string())
      throw Error(Errc::Config, "mock script " + path.string() + " entry " + std::to_string(i) +
                                    " needs string 'response' and 'match'");
    ScriptEntry entry;
    if (e["match"].is_string()) {
      entry.match.push_back(e["match"].get<std::string>());
    } else if (e["match"].is_array()) {
      for (const auto& m : e["match"]) entry.match.push_back(m.get<std::string>());
    } else {
      throw Error(Errc::Config, "mock script entry " + std::to_string(i) + ": 'match' must be string or list");
    }
    entry.response = e["response"].get<std::string>();
    out.push_back(std::move(entry));
  }
  return out;
}

MockChatBackend::MockChatBackend(std::vector<ScriptEntry> script, std::string name)
    : script_(std::move(script)), name_(std::move(name)) {}

std::string MockChatBackend::complete(const ChatRequest& req) {
  ++calls_;
  const std::string& last = req.last_user_message();
  {
    std::lock_guard lock(log_mutex_);
    log_.push_back(last);
  }
  for (const auto& entry : script_) {
    bool all = std::all_of(entry.match.begin(), entry.match.end(),
                           [&](const std::string& m) { return last.find(m) != std::string::npos; });
    if (all) return entry.response;
  }
  std::string head = last.substr(0, std::min<std::size_t>(last.size(), 200));
  throw Error(Errc::MockScriptMiss, name_ + " has no entry matching: " + head);
}

std::vector<std::string> MockChatBackend::call_log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

MockEmbeddingBackend::MockEmbeddingBackend(int dim, std::string key, std::string name)
    : dim_(dim), key_(std::move(key)), name_(std::move(name)) {
  if (dim_ <= 0) throw Error(Errc::Config, "embedding dim must be positive");
}

EmbeddingVector MockEmbeddingBackend::embed(const EmbeddingRequest& req) {
  ++calls_;
  std::string seed_material = "storyreel-mock-embed";
  seed_material.push_back('\0');
  seed_material += to_string(req.modality);
  seed_material.push_back('\0');
  seed_material += key_;
  seed_material.push_back('\0');
  seed_material += req.payload;
  std::vector<std::uint8_t> d0 = sha256_raw(seed_material);

  EmbeddingVector v;
  v.values.reserve(static_cast<std::size_t>(dim_));
  for (std::uint32_t block = 0; v.values.size() < static_cast<std::size_t>(dim_); ++block) {
    std::string material(d0.begin(), d0.end());
    for (int k = 0; k < 4; ++k) material.push_back(static_cast<char>((block >> (8 * k)) & 0xFF));
    std::vector<std::uint8_t> d = sha256_raw(material);
    for (std::size_t w = 0; w + 4 <= d.size() && v.values.size() < static_cast<std::size_t>(dim_); w += 4) {
      std::uint32_t u = static_cast<std::uint32_t>(d[w]) | (static_cast<std::uint32_t>(d[w + 1]) << 8) |
                        (static_cast<std::uint32_t>(d[w + 2]) << 16) | (static_cast<std::uint32_t>(d[w + 3]) << 24);
      v.values.push_back(static_cast<double>(u) / 4294967296.0 * 2.0 - 1.0);
    }
  }
  return v;
}

MockImageBackend::MockImageBackend(Options opts, std::string name) : opts_(std::move(opts)), name_(std::move(name)) {}

std::string MockImageBackend::generate(const ImageRequest& req) {
  ++calls_;
  if (opts_.fail_seeds.contains(req.seed))
    throw Error(Errc::BackendUnavailable, name_ + ": injected failure for seed " + std::to_string(req.seed));
  for (const auto& p : opts_.fail_prompts) {
    if (req.prompt.find(p) != std::string::npos)
      throw Error(Errc::BackendUnavailable, name_ + ": injected failure for prompt containing '" + p + "'");
  }

  std::uint64_t state = static_cast<std::uint64_t>(req.seed) ^ 0xA5A5A5A5DEADBEEFULL;
  const double gx = static_cast<double>(splitmix64(state) % 1000) / 1000.0;
  const double gy = static_cast<double>(splitmix64(state) % 1000) / 1000.0;
  std::uint8_t base[3];
  for (auto& b : base) b = static_cast<std::uint8_t>(splitmix64(state) % 160);

  std::string palette_src = req.prompt;
  palette_src.push_back('\0');
  palette_src += req.style_embedding_ref.value_or("");
  std::vector<std::uint8_t> palette = sha256_raw(palette_src);

  Image img;
  img.width = req.width;
  img.height = req.height;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  const int bw = std::max(1, img.width / 8);
  const int bh = std::max(1, img.height / 8);
  std::uint64_t noise = state;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double t = (gx * x / img.width + gy * y / img.height) * 0.5;
      int block = (std::min(y / bh, 7) * 8 + std::min(x / bw, 7)) % 32;
      bool painted = (palette[static_cast<std::size_t>(block)] & 1) != 0;
      std::uint64_t r = splitmix64(noise);
      for (int c = 0; c < 3; ++c) {
        double v = base[c] + 90.0 * t;
        if (painted) v = 0.5 * v + 0.5 * palette[static_cast<std::size_t>((block + 11 * c) % 32)];
        v += static_cast<double>((r >> (8 * c)) & 0x1F) - 16.0;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  return encode_png(img, opts_.compression_level);
}

}  // namespace storyreel
