#include "storyreel/keyframe_gen.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>

#include "storyreel/errors.hpp"
#include "storyreel/fs_util.hpp"
#include "storyreel/task_pool.hpp"

namespace storyreel {

namespace fs = std::filesystem;

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool ieq(char a, char b) {
  return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
}

bool matches_word_at(std::string_view text, std::size_t i, std::string_view word) {
  if (word.empty() || i + word.size() > text.size()) return false;
  if (i > 0 && word_char(text[i - 1])) return false;
  for (std::size_t k = 0; k < word.size(); ++k)
    if (!ieq(text[i + k], word[k])) return false;
  return i + word.size() == text.size() || !word_char(text[i + word.size()]);
}

}  // namespace

std::string frame_file_name(int global_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d.png", global_index);
  return buf;
}

std::string render_prompt(const FrameDescription& frame, const std::vector<Character>& characters,
                          const StyleToken& token) {
  if (!is_valid_trigger(token.trigger)) throw Error(Errc::Validation, "malformed style trigger " + token.trigger);
  for (const auto& name : frame.mentioned_characters) {
    auto it = std::find_if(characters.begin(), characters.end(), [&](const Character& c) {
      return c.name.size() == name.size() && std::equal(name.begin(), name.end(), c.name.begin(), ieq);
    });
    if (it == characters.end() || it->celebrity_name.empty()) throw Error(Errc::MissingCasting, name);
  }

  std::vector<const Character*> by_length;
  for (const auto& c : characters)
    if (!c.name.empty() && !c.celebrity_name.empty()) by_length.push_back(&c);
  std::stable_sort(by_length.begin(), by_length.end(),
                   [](const Character* a, const Character* b) { return a->name.size() > b->name.size(); });

  std::string out = "generate an image in " + token.trigger + " style: ";
  const std::string& text = frame.text;
  for (std::size_t i = 0; i < text.size();) {
    const Character* hit = nullptr;
    for (const Character* c : by_length) {
      if (matches_word_at(text, i, c->name)) {
        hit = c;
        break;
      }
    }
    if (hit) {
      out += hit->celebrity_name;
      i += hit->name.size();
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

KeyframeResult generate_keyframes(const MoviePlot& plot, ImageClient& images, RunStore& store,
                                  const fs::path& movie_dir, const KeyframeSettings& settings) {
  if (!plot.style.token) throw Error(Errc::Validation, "plot " + plot.movie_id + " has no style token");
  const StyleToken& token = *plot.style.token;
  const auto frames = flatten_frames(plot);

  std::map<int, KeyFrameRecord> previous;
  if (fs::exists(movie_dir / "frames.json")) {
    for (const auto& r : read_json(movie_dir / "frames.json").get<std::vector<KeyFrameRecord>>())
      previous[r.global_index] = r;
  }

  std::vector<std::optional<KeyFrameRecord>> slots(frames.size());
  std::vector<std::optional<std::string>> errors(frames.size());
  fs::create_directories(movie_dir / "frames");

  parallel_for(frames.size(), settings.max_parallel, [&](std::size_t i) {
    if (stop_requested()) throw Error(Errc::Interrupted, "keyframe generation interrupted");
    const auto& frame = frames[i];
    KeyFrameRecord rec;
    rec.global_index = frame.global_index;
    rec.source_text = frame.text;
    rec.prompt = render_prompt(frame, plot.characters, token);
    rec.seed = settings.run_seed + frame.global_index;
    rec.image_path = "frames/" + frame_file_name(frame.global_index);

    auto prev = previous.find(frame.global_index);
    if (prev != previous.end() && prev->second.prompt == rec.prompt && prev->second.seed == rec.seed &&
        store.has_blob(prev->second.image_hash) && fs::exists(movie_dir / rec.image_path)) {
      slots[i] = prev->second;
      return;
    }

    ImageRequest req;
    req.prompt = rec.prompt;
    req.negative_prompt = settings.negative_prompt;
    req.seed = rec.seed;
    req.width = settings.width;
    req.height = settings.height;
    req.style_embedding_ref = token.embedding_artifact;
    try {
      GeneratedImage img = images.generate(req);
      rec.image_hash = store.put_blob(img.png);
      atomic_write(movie_dir / rec.image_path, img.png);
      slots[i] = std::move(rec);
    } catch (const Error& e) {
      if (e.code() != Errc::BackendUnavailable && e.code() != Errc::ContractViolation) throw;
      errors[i] = e.what();
    }
  });

  KeyframeResult result;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (slots[i]) {
      result.records.push_back(std::move(*slots[i]));
    } else {
      result.failures.push_back({frames[i].global_index, errors[i].value_or("unknown failure")});
    }
  }
  write_json(movie_dir / "frames.json", json(result.records));
  if (result.failures.empty()) {
    fs::remove(movie_dir / "frames_failed.json");
  } else {
    json failed = json::array();
    for (const auto& f : result.failures) failed.push_back({{"global_index", f.global_index}, {"error", f.error}});
    write_json(movie_dir / "frames_failed.json", json{{"movie_id", plot.movie_id}, {"failed", failed}});
  }
  return result;
}

}  // namespace storyreel
